#include "sonarfit/harness/evaluate.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "sonarfit/data/sampler.hpp"
#include "sonarfit/error.hpp"
#include "sonarfit/harness/pipeline.hpp"
#include "sonarfit/nn/ops.hpp"

namespace sonarfit::harness {

namespace {

constexpr std::size_t kChunk = 64;

models::Embedded embed_pool(Model& model, const data::WindowPool& pool) {
  nn::NoGradGuard guard;
  std::vector<nn::Tensor> emb, desc;
  std::size_t locals = 0;
  for (std::size_t begin = 0; begin < pool.size(); begin += kChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = begin; i < std::min(pool.size(), begin + kChunk); ++i) idx.push_back(i);
    auto e = model.embed(pool, idx, false);
    emb.push_back(e.embedding);
    if (e.descriptors.defined()) desc.push_back(e.descriptors);
    locals = e.locals;
  }
  models::Embedded out;
  out.embedding = nn::concat_rows(emb);
  if (!desc.empty()) out.descriptors = nn::concat_rows(desc);
  out.locals = locals;
  return out;
}

std::uint64_t iteration_seed(std::uint64_t seed, int subject, int iteration) {
  std::uint64_t x = seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(subject) * 1000003u +
                    static_cast<std::uint64_t>(iteration);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double ResultTable::mean_accuracy() const {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += r.accuracy_pct;
  return s / static_cast<double>(rows.size());
}

double ResultTable::pooled_accuracy() const {
  std::size_t hit = 0, total = 0;
  for (std::size_t t = 0; t < confusion.size(); ++t) {
    for (std::size_t p = 0; p < confusion[t].size(); ++p) {
      total += confusion[t][p];
      if (t == p) hit += confusion[t][p];
    }
  }
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(hit) / static_cast<double>(total);
}

void tag_table(ResultTable& table, const ExperimentConfig& cfg) {
  table.method = to_string(cfg.method);
  table.seed = cfg.seed;
  table.label_ratio = cfg.method == Method::Da ? cfg.train.label_ratio : -1.0;
  table.config_hash = cfg.hash();
}

std::vector<int> predict_closed(Model& model, const data::WindowPool& pool) {
  nn::NoGradGuard guard;
  std::vector<int> out;
  out.reserve(pool.size());
  for (std::size_t begin = 0; begin < pool.size(); begin += kChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = begin; i < std::min(pool.size(), begin + kChunk); ++i) idx.push_back(i);
    const auto pred = nn::argmax_rows(model.logits(pool, idx, false).value());
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

ResultTable evaluate_closed(Model& model, const data::WindowPool& pool) {
  if (model.method() != Method::Baseline && model.method() != Method::Da) {
    fail(ErrorKind::Config, "evaluate_closed needs a baseline or da checkpoint, got " +
                                to_string(model.method()));
  }
  require(!pool.empty(), "evaluate_closed: empty pool");
  ResultTable table = score_closed(pool, predict_closed(model, pool));
  table.method = to_string(model.method());
  return table;
}

ResultTable score_closed(const data::WindowPool& pool, const std::vector<int>& pred) {
  require(!pool.empty(), "score_closed: empty pool");
  require(pred.size() == pool.size(), "score_closed: one prediction per window required");
  ResultTable table;
  std::map<int, std::pair<std::size_t, std::size_t>> per_subject;  // hits, total
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const int label = pool[i].label;
    require(label >= 0 && label < sim::kNumClasses,
            "score_closed: label " + std::to_string(label) + " outside the model's 9 classes");
    require(pred[i] >= 0 && pred[i] < sim::kNumClasses, "score_closed: prediction out of range");
    ++table.confusion[label][pred[i]];
    auto& [hit, total] = per_subject[pool[i].subject];
    hit += pred[i] == label;
    ++total;
  }
  for (const auto& [subject, counts] : per_subject) {
    table.rows.push_back({subject, 100.0 * counts.first / counts.second, counts.second});
  }
  return table;
}

ResultTable evaluate_fewshot(Model& model, const data::WindowPool& support_pool,
                             const data::WindowPool& query_pool, const FewShotEvalOptions& opts) {
  if (!is_fewshot(model.method())) {
    fail(ErrorKind::Config, "evaluate_fewshot needs a few-shot checkpoint, got " +
                                to_string(model.method()));
  }
  require(opts.iterations >= 1, "evaluate_fewshot: iterations must be >= 1");
  require(opts.k_shot >= 1, "evaluate_fewshot: k_shot must be >= 1");
  require(!query_pool.empty(), "evaluate_fewshot: empty query pool");

  const auto support_emb = embed_pool(model, support_pool);
  const auto query_emb = embed_pool(model, query_pool);
  const std::size_t n_way = sim::kNumClasses;

  ResultTable table;
  table.method = to_string(model.method());
  table.k_shot = opts.k_shot;
  table.seed = opts.seed;

  for (int subject : query_pool.subjects()) {
    std::vector<std::size_t> queries;
    std::set<int> query_sessions;
    for (std::size_t i = 0; i < query_pool.size(); ++i) {
      if (query_pool[i].subject == subject) {
        queries.push_back(i);
        query_sessions.insert(query_pool[i].session);
      }
    }
    // Candidate supports per class, in pool order.
    std::array<std::vector<std::size_t>, sim::kNumClasses> candidates;
    for (std::size_t i = 0; i < support_pool.size(); ++i) {
      const auto& w = support_pool[i];
      if (!opts.pooled_supports && w.subject != subject) continue;
      if (w.subject == subject) {
        require(!query_sessions.contains(w.session),
                "evaluate_fewshot: session " + std::to_string(w.session) + " of subject " +
                    std::to_string(subject) + " feeds both supports and queries");
      }
      candidates[w.label].push_back(i);
    }
    for (int c = 0; c < sim::kNumClasses; ++c) {
      if (candidates[c].size() < opts.k_shot) {
        fail(ErrorKind::InvalidArgument,
             "evaluate_fewshot: subject " + std::to_string(subject) + " has " +
                 std::to_string(candidates[c].size()) + " support windows of class " +
                 std::to_string(c) + ", need " + std::to_string(opts.k_shot));
      }
    }
    const auto query = query_emb.gather(queries);
    std::vector<int> truth;
    for (std::size_t i : queries) truth.push_back(query_pool[i].label);

    std::vector<double> acc(opts.iterations);
    std::vector<std::vector<int>> preds(opts.iterations);
    parallel_for(static_cast<std::size_t>(opts.iterations), [&](std::size_t it) {
      nn::NoGradGuard guard;
      data::Rng rng(iteration_seed(opts.seed, subject, static_cast<int>(it)));
      std::vector<std::size_t> rows;
      std::vector<int> labels;
      for (int c = 0; c < sim::kNumClasses; ++c) {
        for (std::size_t i : data::draw_without_replacement(candidates[c], opts.k_shot, rng)) {
          rows.push_back(i);
          labels.push_back(c);
        }
      }
      const auto scores =
          model.fewshot().scores(support_emb.gather(rows), labels, n_way, query);
      preds[it] = nn::argmax_rows(scores.value());
      std::size_t hit = 0;
      for (std::size_t q = 0; q < truth.size(); ++q) hit += preds[it][q] == truth[q];
      acc[it] = 100.0 * static_cast<double>(hit) / static_cast<double>(truth.size());
    });
    double mean = 0.0;
    for (int it = 0; it < opts.iterations; ++it) {
      mean += acc[it];
      for (std::size_t q = 0; q < truth.size(); ++q) ++table.confusion[truth[q]][preds[it][q]];
    }
    table.rows.push_back({subject, mean / opts.iterations, queries.size()});
  }
  return table;
}

}  // namespace sonarfit::harness
