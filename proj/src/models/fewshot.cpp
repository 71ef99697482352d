#include "sonarfit/models/fewshot.hpp"

#include "sonarfit/error.hpp"
#include "sonarfit/nn/conv.hpp"
#include "sonarfit/nn/ops.hpp"

namespace sonarfit::models {

std::string to_string(FewShotMethod m) {
  switch (m) {
    case FewShotMethod::Siamese: return "siamese";
    case FewShotMethod::Proto: return "proto";
    case FewShotMethod::Local: return "local";
  }
  return "?";
}

FewShotMethod parse_fewshot_method(const std::string& name) {
  if (name == "siamese") return FewShotMethod::Siamese;
  if (name == "proto") return FewShotMethod::Proto;
  if (name == "local") return FewShotMethod::Local;
  fail(ErrorKind::Config, "unknown few-shot method '" + name + "'");
}

nn::Tensor siamese_scores(const nn::Tensor& query_emb, const nn::Tensor& class_means,
                          const nn::Dense& phi) {
  const std::size_t q = query_emb.shape().at(0);
  const std::size_t c = class_means.shape().at(0);
  require(phi.out_features() == 1, "siamese_scores: phi must map to a single output");
  const nn::Tensor diff = nn::pairwise_absdiff(query_emb, class_means);
  return nn::reshape(nn::sigmoid(phi.forward(diff)), {q, c});
}

nn::Tensor proto_logits(const nn::Tensor& query_emb, const nn::Tensor& prototypes) {
  return nn::scale(nn::pairwise_sqdist(query_emb, prototypes), -1.0);
}

nn::Tensor local_logits(const nn::Tensor& query_desc, std::size_t locals,
                        const nn::Tensor& support_desc, const std::vector<int>& desc_labels,
                        std::size_t n_classes, std::size_t k) {
  require(locals >= 1 && query_desc.shape().at(0) % locals == 0,
          "local_logits: query descriptor rows must be a multiple of the per-query count");
  require(desc_labels.size() == support_desc.shape().at(0),
          "local_logits: one class tag per support descriptor required");
  require(query_desc.shape().at(1) == support_desc.shape().at(1),
          "local_logits: descriptor depths differ");
  const std::size_t q = query_desc.shape()[0] / locals;
  const nn::Tensor qn = nn::l2_normalize_rows(query_desc);
  const nn::Tensor sn = nn::l2_normalize_rows(support_desc);

  std::vector<std::vector<std::size_t>> rows(n_classes);
  for (std::size_t r = 0; r < desc_labels.size(); ++r) {
    require(desc_labels[r] >= 0 && static_cast<std::size_t>(desc_labels[r]) < n_classes,
            "local_logits: class tag out of range");
    rows[static_cast<std::size_t>(desc_labels[r])].push_back(r);
  }
  std::vector<nn::Tensor> cols;
  for (std::size_t c = 0; c < n_classes; ++c) {
    require(rows[c].size() >= k, "local_logits: class " + std::to_string(c) + " has " +
                                     std::to_string(rows[c].size()) +
                                     " descriptors, fewer than k=" + std::to_string(k));
    const nn::Tensor sim = nn::matmul(qn, nn::transpose(nn::gather_rows(sn, rows[c])));
    const nn::Tensor per_desc = nn::topk_row_sum(sim, k);
    cols.push_back(nn::row_sum(nn::reshape(per_desc, {q, locals})));
  }
  return nn::concat_cols(cols);
}

Embedded Embedded::gather(const std::vector<std::size_t>& rows) const {
  Embedded out;
  out.locals = locals;
  out.embedding = nn::gather_rows(embedding, rows);
  if (descriptors.defined()) {
    std::vector<std::size_t> drows;
    drows.reserve(rows.size() * locals);
    for (std::size_t r : rows) {
      for (std::size_t l = 0; l < locals; ++l) drows.push_back(r * locals + l);
    }
    out.descriptors = nn::gather_rows(descriptors, drows);
  }
  return out;
}

Embedded Embedded::slice(std::size_t begin, std::size_t count) const {
  Embedded out;
  out.locals = locals;
  out.embedding = nn::slice_rows(embedding, begin, count);
  if (descriptors.defined()) {
    out.descriptors = nn::slice_rows(descriptors, begin * locals, count * locals);
  }
  return out;
}

FewShotModel::FewShotModel(nn::ParameterSet& params, FewShotMethod method, std::size_t frames,
                           std::size_t bins, nn::Rng& rng)
    : method_(method), backbone_(params, frames, bins, rng) {
  if (method == FewShotMethod::Siamese) {
    phi_ = nn::Dense(params, "similarity.phi", backbone_.embedding_dim(), 1, rng);
  }
}

Embedded FewShotModel::embed(const nn::Tensor& images, bool training) {
  const BackboneOutput out = backbone_.forward(images, training);
  Embedded e;
  e.embedding = out.embedding;
  e.locals = backbone_.map_height() * backbone_.map_width();
  if (method_ == FewShotMethod::Local) e.descriptors = nn::to_descriptors(out.feature_map);
  return e;
}

nn::Tensor FewShotModel::scores(const Embedded& support, const std::vector<int>& support_labels,
                                std::size_t n_way, const Embedded& query) const {
  require(support_labels.size() == support.size(), "FewShotModel: one label per support");
  switch (method_) {
    case FewShotMethod::Siamese:
      return siamese_scores(query.embedding,
                            nn::class_means(support.embedding, support_labels, n_way), phi_);
    case FewShotMethod::Proto:
      return proto_logits(query.embedding,
                          nn::class_means(support.embedding, support_labels, n_way));
    case FewShotMethod::Local: {
      std::vector<int> tags;
      tags.reserve(support_labels.size() * support.locals);
      for (int l : support_labels) tags.insert(tags.end(), support.locals, l);
      return local_logits(query.descriptors, query.locals, support.descriptors, tags, n_way,
                          kLocalNeighbors);
    }
  }
  fail(ErrorKind::InvalidArgument, "FewShotModel: unknown method");
}

}  // namespace sonarfit::models
