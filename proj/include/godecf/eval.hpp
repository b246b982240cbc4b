#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "godecf/data.hpp"
#include "godecf/model.hpp"

namespace godecf {

struct RankResult {
  Index user = 0;
  Index rank = 1;  ///< 1-based position of the held-out item among candidates
};

struct MetricsReport {
  std::vector<int> n_values;
  std::vector<double> recall;
  std::vector<double> ndcg;
  Index users_evaluated = 0;

  /// Metrics at a given cutoff; throws std::out_of_range if n was not evaluated.
  double recall_at(int n) const;
  double ndcg_at(int n) const;
};

enum class EvalMode { Validation, Test };

struct EvalOptions {
  /// In test mode, also drop the validation item from the candidates.
  bool exclude_validation_in_test = true;
  int threads = 1;
};

/// Rank of `target` among all items except `exclusions` (sorted ascending).
/// Order is score descending, then item id ascending.
Index rank_among(std::span<const double> scores, Index target, std::span<const Index> exclusions);

RankResult rank_heldout(const FinalEmbeddings& fe, Index user, Index target,
                        std::span<const Index> exclusions);

double recall_at_n(std::span<const RankResult> results, int n);
double ndcg_at_n(std::span<const RankResult> results, int n);

MetricsReport evaluate(const FinalEmbeddings& fe, const SplitDataset& ds, EvalMode mode,
                       std::span<const int> n_values, const EvalOptions& options = {});

/// Per-user ranks behind evaluate().
std::vector<RankResult> rank_all_users(const FinalEmbeddings& fe, const SplitDataset& ds, EvalMode mode,
                                       const EvalOptions& options = {});

/// CSV rows "mode,N,recall,ndcg,users" (header written when requested).
void write_metrics_csv(std::ostream& out, EvalMode mode, const MetricsReport& report, bool header = true);

const char* to_string(EvalMode mode);

}  // namespace godecf
