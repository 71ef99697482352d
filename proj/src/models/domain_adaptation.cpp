#include "sonarfit/models/domain_adaptation.hpp"

#include <cmath>

#include "sonarfit/error.hpp"
#include "sonarfit/nn/ops.hpp"

namespace sonarfit::models {

DomainAdaptationModel::DomainAdaptationModel(nn::ParameterSet& params, std::size_t frames,
                                             std::size_t bins, std::size_t n_classes, nn::Rng& rng)
    : backbone_(params, frames, bins, rng),
      dense1_(params, "classifier.dense1", backbone_.embedding_dim(), kDaHeadWidth, rng),
      dense2_(params, "classifier.dense2", kDaHeadWidth, n_classes, rng) {}

nn::Tensor DomainAdaptationModel::head(const nn::Tensor& embedding) const {
  return dense2_.forward(nn::leaky_relu(dense1_.forward(embedding), kLeakySlope));
}

nn::Tensor DomainAdaptationModel::logits(const nn::Tensor& images, bool training) {
  return head(backbone_.forward(images, training).embedding);
}

bool is_standard_label_ratio(double ratio) {
  return ratio == 0.0 || ratio == 0.5 || ratio == 1.0;
}

void validate_label_ratio(double ratio, bool allow_free_ratio) {
  if (!std::isfinite(ratio) || ratio < 0.0 || ratio > 1.0) {
    fail(ErrorKind::Config, "label_ratio must lie in [0, 1], got " + std::to_string(ratio));
  }
  if (!allow_free_ratio && !is_standard_label_ratio(ratio)) {
    fail(ErrorKind::Config, "label_ratio " + std::to_string(ratio) +
                                " is not one of 0, 0.5, 1; set allow_free_ratio to use it");
  }
}

DaLossTerms da_loss(DomainAdaptationModel& model, const nn::Tensor& source_images,
                    std::span<const int> source_labels, const nn::Tensor& target_images,
                    std::span<const int> target_labels, const DaLossOptions& opts) {
  validate_label_ratio(opts.label_ratio, opts.allow_free_ratio);
  const std::size_t ns = source_images.shape().at(0);
  const std::size_t nt = target_images.shape().at(0);
  require(source_labels.size() == ns, "da_loss: one label per source window required");
  require(target_labels.size() == nt, "da_loss: one (possibly masked) label per target window");

  const BackboneOutput feats =
      model.backbone().forward(concat_batch({source_images, target_images}), true);
  const nn::Tensor src_emb = nn::slice_rows(feats.embedding, 0, ns);
  const nn::Tensor tgt_emb = nn::slice_rows(feats.embedding, ns, nt);

  DaLossTerms terms;
  terms.source_ce = nn::softmax_cross_entropy(model.head(src_emb), source_labels);

  std::vector<std::size_t> labeled;
  std::vector<int> labels;
  if (opts.label_ratio > 0.0) {
    for (std::size_t i = 0; i < nt; ++i) {
      if (target_labels[i] >= 0) {
        labeled.push_back(i);
        labels.push_back(target_labels[i]);
      }
    }
  }
  terms.labeled_targets = labeled.size();
  if (labeled.empty()) {
    terms.target_ce = nn::Tensor::constant(nn::Array({1}, 0.0));
  } else {
    terms.target_ce =
        nn::softmax_cross_entropy(model.head(nn::gather_rows(tgt_emb, labeled)), labels);
  }

  terms.mmd = mmd(src_emb, tgt_emb, opts.mmd);
  terms.total = nn::add(nn::add(terms.source_ce, terms.target_ce),
                        nn::scale(terms.mmd, opts.mmd_weight));
  return terms;
}

}  // namespace sonarfit::models
