#include "sonarfit/harness/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "sonarfit/data/sampler.hpp"
#include "sonarfit/error.hpp"
#include "sonarfit/harness/pipeline.hpp"
#include "sonarfit/nn/adam.hpp"
#include "sonarfit/nn/ops.hpp"

namespace sonarfit::harness {

namespace {

models::FewShotMethod fewshot_kind(Method m) {
  switch (m) {
    case Method::Siamese: return models::FewShotMethod::Siamese;
    case Method::Local: return models::FewShotMethod::Local;
    default: return models::FewShotMethod::Proto;
  }
}

void check_finite(double loss, const std::string& method, int epoch, int step) {
  if (!std::isfinite(loss)) {
    fail(ErrorKind::Numeric, "non-finite " + method + " loss at epoch " + std::to_string(epoch) +
                                 ", step " + std::to_string(step));
  }
}

// Checkpoints store float32, so weights beyond its range count as diverged.
void check_parameters(const nn::ParameterSet& params, const std::string& method, int epoch) {
  for (const auto& e : params.entries()) {
    const auto& v = e.tensor.value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!(std::abs(v.data()[i]) <= std::numeric_limits<float>::max())) {
        fail(ErrorKind::Numeric, method + " parameter " + e.name + " diverged at epoch " +
                                     std::to_string(epoch));
      }
    }
  }
}

struct DaProbe {
  std::vector<std::size_t> source, target;
};

DaProbe make_probe(const data::DatasetSplit& split, std::uint64_t seed) {
  data::Rng rng(seed ^ 0x5eed0fda9e0beULL);
  DaProbe p;
  for (int c = 0; c < sim::kNumClasses; ++c) {
    const auto& idx = split.basic_training.indices_of(c);
    const auto picked = data::draw_without_replacement(idx, std::min<std::size_t>(8, idx.size()), rng);
    p.source.insert(p.source.end(), picked.begin(), picked.end());
  }
  std::vector<std::size_t> all(split.subject_development.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  p.target = data::draw_without_replacement(all, std::min(p.source.size(), all.size()), rng);
  std::sort(p.target.begin(), p.target.end());
  return p;
}

double probe_mmd(Model& model, const data::DatasetSplit& split, const DaProbe& probe) {
  nn::NoGradGuard guard;
  const auto s = model.embed(split.basic_training, probe.source, false);
  const auto t = model.embed(split.subject_development, probe.target, false);
  return models::mmd(s.embedding, t.embedding).item();
}

}  // namespace

Model::Model(Method method, std::size_t frames, std::size_t bins, std::size_t hidden,
             std::uint64_t seed)
    : method_(method), frames_(frames), bins_(bins), hidden_(hidden) {
  nn::Rng rng(seed);
  switch (method) {
    case Method::Baseline:
      baseline_ = models::BaselineModel(params_, bins, hidden, sim::kNumClasses, rng);
      break;
    case Method::Da:
      da_ = models::DomainAdaptationModel(params_, frames, bins, sim::kNumClasses, rng);
      break;
    default:
      fewshot_ = models::FewShotModel(params_, fewshot_kind(method), frames, bins, rng);
  }
}

std::unique_ptr<Model> Model::from_checkpoint(const nn::Checkpoint& ckpt) {
  const auto& m = ckpt.meta;
  for (const char* key : {"method", "frames", "bins", "hidden"}) {
    if (!m.contains(key)) fail(ErrorKind::Io, std::string("checkpoint model card lacks '") + key + "'");
  }
  auto model = std::make_unique<Model>(parse_method(m.at("method").get<std::string>()),
                                       m.at("frames").get<std::size_t>(),
                                       m.at("bins").get<std::size_t>(),
                                       m.at("hidden").get<std::size_t>(), 0);
  nn::restore(ckpt, model->params_);
  return model;
}

nn::Tensor Model::logits(const data::WindowPool& pool, const std::vector<std::size_t>& indices,
                         bool training) {
  switch (method_) {
    case Method::Baseline:
      return baseline_.logits(sequence_batch(pool, indices), frames_, indices.size());
    case Method::Da:
      return da_.logits(image_batch(pool, indices), training);
    default:
      fail(ErrorKind::Config, "method " + to_string(method_) + " has no closed-set classifier");
  }
}

models::Embedded Model::embed(const data::WindowPool& pool, const std::vector<std::size_t>& indices,
                              bool training) {
  switch (method_) {
    case Method::Da: {
      models::Embedded e;
      e.embedding = da_.backbone().forward(image_batch(pool, indices), training).embedding;
      return e;
    }
    case Method::Baseline:
      fail(ErrorKind::Config, "the baseline has no embedding backbone");
    default:
      return fewshot_.embed(image_batch(pool, indices), training);
  }
}

std::vector<bool> labeled_target_mask(const data::WindowPool& target, double ratio,
                                      std::uint64_t seed) {
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < target.size(); ++i) {
    groups[{target[i].subject, target[i].label}].push_back(i);
  }
  std::vector<bool> mask(target.size(), false);
  data::Rng rng(seed ^ 0x1abe1edULL);
  for (const auto& [key, members] : groups) {
    const auto count = static_cast<std::size_t>(std::lround(ratio * members.size()));
    for (std::size_t i : data::draw_without_replacement(members, count, rng)) mask[i] = true;
  }
  return mask;
}

TrainResult train(const ExperimentConfig& cfg, const data::DatasetSplit& split,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  const auto& source = split.basic_training;
  if (source.empty()) fail(ErrorKind::InvalidArgument, "train: basic training pool is empty");
  const std::size_t frames = source[0].frames, bins = source[0].bins;
  const std::string name = to_string(cfg.method);
  const std::size_t hidden = cfg.method == Method::Baseline ? cfg.train.hidden : 0;
  Model model(cfg.method, frames, bins, hidden, cfg.seed);
  nn::AdamState adam = nn::make_adam(model.params(), cfg.train.lr);
  adam.clip_norm = cfg.train.grad_clip;
  data::Rng rng(cfg.seed ^ 0x7a11ULL);

  std::vector<bool> target_mask;
  std::vector<std::size_t> target_all;
  DaProbe probe;
  if (cfg.method == Method::Da) {
    const auto& target = split.subject_development;
    if (target.empty()) fail(ErrorKind::InvalidArgument, "train: DA needs a non-empty target pool");
    target_mask = labeled_target_mask(target, cfg.train.label_ratio, cfg.seed);
    target_all.resize(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) target_all[i] = i;
    probe = make_probe(split, cfg.seed);
  }

  TrainResult result;
  for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    double total = 0.0;
    for (int step = 0; step < cfg.train.steps_per_epoch; ++step) {
      nn::Tensor loss;
      switch (cfg.method) {
        case Method::Baseline: {
          const auto batch =
              data::sample_class_balanced_batch(source, cfg.train.per_class, sim::kNumClasses, rng);
          loss = nn::softmax_cross_entropy(model.logits(source, batch.indices, true), batch.labels);
          break;
        }
        case Method::Da: {
          const auto batch =
              data::sample_class_balanced_batch(source, cfg.train.per_class, sim::kNumClasses, rng);
          const auto& target = split.subject_development;
          const auto tgt = data::draw_without_replacement(
              target_all, std::min(batch.indices.size(), target_all.size()), rng);
          std::vector<int> tgt_labels;
          for (std::size_t i : tgt) tgt_labels.push_back(target_mask[i] ? target[i].label : -1);
          models::DaLossOptions opts;
          opts.label_ratio = cfg.train.label_ratio;
          opts.allow_free_ratio = cfg.train.allow_free_ratio;
          opts.mmd_weight = cfg.train.mmd_weight;
          loss = models::da_loss(model.da(), image_batch(source, batch.indices), batch.labels,
                                 image_batch(target, tgt), tgt_labels, opts)
                     .total;
          break;
        }
        default: {
          const auto ep = data::sample_episode(source, cfg.train.n_way, cfg.train.k_shot,
                                               cfg.train.q_query, rng);
          std::vector<std::size_t> idx;
          std::vector<int> s_labels, q_labels;
          for (const auto& it : ep.support) {
            idx.push_back(it.index);
            s_labels.push_back(it.label);
          }
          for (const auto& it : ep.query) {
            idx.push_back(it.index);
            q_labels.push_back(it.label);
          }
          const auto emb = model.embed(source, idx, true);
          const std::size_t ns = ep.support.size();
          const auto scores = model.fewshot().scores(emb.slice(0, ns), s_labels, cfg.train.n_way,
                                                     emb.slice(ns, ep.query.size()));
          loss = nn::softmax_cross_entropy(scores, q_labels);
        }
      }
      const double value = loss.item();
      check_finite(value, name, epoch, step);
      loss.backward();
      nn::adam_step(model.params(), adam);
      total += value;
    }
    check_parameters(model.params(), name, epoch);
    EpochLog log;
    log.epoch = epoch;
    log.loss = total / cfg.train.steps_per_epoch;
    log.probe_mmd = cfg.method == Method::Da ? probe_mmd(model, split, probe)
                                             : std::numeric_limits<double>::quiet_NaN();
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  nlohmann::json meta = {
      {"method", name},
      {"frames", frames},
      {"bins", bins},
      {"hidden", hidden},
      {"seed", cfg.seed},
      {"epochs", cfg.train.epochs},
      {"config_hash", cfg.hash()},
      {"config", cfg.json},
  };
  result.checkpoint = nn::snapshot(model.params(), meta);
  if (cfg.method != Method::Baseline) {
    result.checkpoint.meta["backbone"] = nn::topology_hash(result.checkpoint);
  }
  return result;
}

}  // namespace sonarfit::harness
