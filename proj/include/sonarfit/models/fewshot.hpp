#pragma once

#include <string>
#include <vector>

#include "sonarfit/models/backbone.hpp"

namespace sonarfit::models {

enum class FewShotMethod { Siamese, Proto, Local };

std::string to_string(FewShotMethod m);
FewShotMethod parse_fewshot_method(const std::string& name);

inline constexpr std::size_t kLocalNeighbors = 3;

// Score matrices below are [Q, C] over episode-local classes 0..C-1.

/// sigmoid(phi(|q - mean_c|)) per class; phi is a dense E->1 layer.
nn::Tensor siamese_scores(const nn::Tensor& query_emb, const nn::Tensor& class_means,
                          const nn::Dense& phi);

/// -||q - prototype_c||^2.
nn::Tensor proto_logits(const nn::Tensor& query_emb, const nn::Tensor& prototypes);

/// Image-to-class cosine measure. Descriptors are rows; each query owns
/// `locals` consecutive rows of query_desc and each support descriptor row is
/// tagged with its class. Logit(q, c) = sum over q's descriptors of the k
/// largest cosine similarities to class c's descriptors.
nn::Tensor local_logits(const nn::Tensor& query_desc, std::size_t locals,
                        const nn::Tensor& support_desc, const std::vector<int>& desc_labels,
                        std::size_t n_classes, std::size_t k);

/// Backbone outputs of a set of windows.
struct Embedded {
  nn::Tensor embedding;    // [N, E]
  nn::Tensor descriptors;  // [N*locals, channels]
  std::size_t locals = 0;

  std::size_t size() const { return embedding.shape().at(0); }
  Embedded gather(const std::vector<std::size_t>& rows) const;
  Embedded slice(std::size_t begin, std::size_t count) const;
};

/// The three metric-based classifiers on a shared ConvNet backbone. Only the
/// Siamese variant owns extra parameters ("similarity.phi").
class FewShotModel {
 public:
  FewShotModel() = default;
  FewShotModel(nn::ParameterSet& params, FewShotMethod method, std::size_t frames,
               std::size_t bins, nn::Rng& rng);

  FewShotMethod method() const { return method_; }
  ConvBackbone& backbone() { return backbone_; }

  Embedded embed(const nn::Tensor& images, bool training);

  /// Class scores [Q, n_way] of the queries given labeled supports. Argmax
  /// is the prediction; softmax_cross_entropy over them is the training loss.
  nn::Tensor scores(const Embedded& support, const std::vector<int>& support_labels,
                    std::size_t n_way, const Embedded& query) const;

 private:
  FewShotMethod method_ = FewShotMethod::Proto;
  ConvBackbone backbone_;
  nn::Dense phi_;
};

}  // namespace sonarfit::models
