#include "godecf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>

namespace godecf {

const char* to_string(EvalMode mode) { return mode == EvalMode::Validation ? "validation" : "test"; }

double MetricsReport::recall_at(int n) const {
  auto it = std::find(n_values.begin(), n_values.end(), n);
  if (it == n_values.end()) throw std::out_of_range("recall@" + std::to_string(n) + " not evaluated");
  return recall[it - n_values.begin()];
}

double MetricsReport::ndcg_at(int n) const {
  auto it = std::find(n_values.begin(), n_values.end(), n);
  if (it == n_values.end()) throw std::out_of_range("ndcg@" + std::to_string(n) + " not evaluated");
  return ndcg[it - n_values.begin()];
}

Index rank_among(std::span<const double> scores, Index target, std::span<const Index> exclusions) {
  const auto n_items = static_cast<Index>(scores.size());
  if (target < 0 || target >= n_items) throw DimensionError("target item out of range");
  if (std::binary_search(exclusions.begin(), exclusions.end(), target)) {
    throw std::invalid_argument("target item " + std::to_string(target) + " is excluded from the candidates");
  }
  const double target_score = scores[target];
  Index ahead = 0;
  auto next_excluded = exclusions.begin();
  for (Index j = 0; j < n_items; ++j) {
    while (next_excluded != exclusions.end() && *next_excluded < j) ++next_excluded;
    if (next_excluded != exclusions.end() && *next_excluded == j) continue;
    const double s = scores[j];
    if (s > target_score || (s == target_score && j < target)) ++ahead;
  }
  return ahead + 1;
}

RankResult rank_heldout(const FinalEmbeddings& fe, Index user, Index target, std::span<const Index> exclusions) {
  if (user < 0 || user >= fe.n_users) throw DimensionError("user id out of range");
  Eigen::VectorXd scores = fe.e_final.bottomRows(fe.n_items()) * fe.user(user).transpose();
  return {user, rank_among({scores.data(), static_cast<std::size_t>(scores.size())}, target, exclusions)};
}

namespace {

void check_results(std::span<const RankResult> results, int n) {
  if (results.empty()) throw std::invalid_argument("no rank results to aggregate");
  if (n < 1) throw std::invalid_argument("cutoff N must be >= 1");
}

}  // namespace

double recall_at_n(std::span<const RankResult> results, int n) {
  check_results(results, n);
  std::size_t hits = 0;
  for (const auto& r : results) hits += r.rank <= n ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double ndcg_at_n(std::span<const RankResult> results, int n) {
  check_results(results, n);
  double total = 0.0;
  for (const auto& r : results) {
    if (r.rank <= n) total += 1.0 / std::log2(static_cast<double>(r.rank) + 1.0);
  }
  return total / static_cast<double>(results.size());
}

std::vector<RankResult> rank_all_users(const FinalEmbeddings& fe, const SplitDataset& ds, EvalMode mode,
                                       const EvalOptions& options) {
  if (fe.n_users != ds.n_users || fe.n_items() != ds.n_items) {
    throw DimensionError("evaluate: embeddings have " + std::to_string(fe.n_users) + "+" +
                         std::to_string(fe.n_items()) + " rows, dataset has " + std::to_string(ds.n_users) +
                         "+" + std::to_string(ds.n_items));
  }
  const auto& heldout = mode == EvalMode::Validation ? ds.validation : ds.test;
  const bool drop_validation = mode == EvalMode::Test && options.exclude_validation_in_test;
  const auto items = fe.e_final.bottomRows(ds.n_items);

  std::vector<RankResult> results(ds.n_users);
  constexpr Index kBlock = 256;
  auto run_blocks = [&](Index first_block, Index stride) {
    Eigen::MatrixXd scores;
    std::vector<Index> exclusions;
    for (Index begin = first_block * kBlock; begin < ds.n_users; begin += stride * kBlock) {
      const Index count = std::min(kBlock, ds.n_users - begin);
      // Column u - begin holds the scores of user u against every item.
      scores.noalias() = items * fe.e_final.middleRows(begin, count).transpose();
      for (Index u = begin; u < begin + count; ++u) {
        exclusions.assign(ds.train[u].begin(), ds.train[u].end());
        if (drop_validation) exclusions.push_back(ds.validation[u]);
        std::sort(exclusions.begin(), exclusions.end());
        exclusions.erase(std::unique(exclusions.begin(), exclusions.end()), exclusions.end());
        const double* column = scores.col(u - begin).data();
        results[u] = {u, rank_among({column, static_cast<std::size_t>(ds.n_items)}, heldout[u], exclusions)};
      }
    }
  };
  const int threads = std::max(1, options.threads);
  if (threads == 1) {
    run_blocks(0, 1);
  } else {
    std::vector<std::jthread> workers;
    for (int t = 0; t < threads; ++t) workers.emplace_back(run_blocks, t, threads);
  }
  return results;
}

MetricsReport evaluate(const FinalEmbeddings& fe, const SplitDataset& ds, EvalMode mode,
                       std::span<const int> n_values, const EvalOptions& options) {
  auto results = rank_all_users(fe, ds, mode, options);
  MetricsReport report;
  report.users_evaluated = static_cast<Index>(results.size());
  for (int n : n_values) {
    report.n_values.push_back(n);
    report.recall.push_back(recall_at_n(results, n));
    report.ndcg.push_back(ndcg_at_n(results, n));
  }
  return report;
}

void write_metrics_csv(std::ostream& out, EvalMode mode, const MetricsReport& report, bool header) {
  if (header) out << "mode,N,recall,ndcg,users\n";
  auto old_precision = out.precision(10);
  for (std::size_t k = 0; k < report.n_values.size(); ++k) {
    out << to_string(mode) << ',' << report.n_values[k] << ',' << report.recall[k] << ',' << report.ndcg[k]
        << ',' << report.users_evaluated << '\n';
  }
  out.precision(old_precision);
}

}  // namespace godecf
