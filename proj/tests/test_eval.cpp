#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "godecf/eval.hpp"
#include "godecf/synthetic.hpp"

using namespace godecf;

namespace {

std::vector<RankResult> ranks_of(std::initializer_list<Index> ranks) {
  std::vector<RankResult> out;
  Index u = 0;
  for (Index r : ranks) out.push_back({u++, r});
  return out;
}

// Reference: sort every candidate and find the target's position.
Index sorted_rank(const std::vector<double>& scores, Index target, const std::vector<Index>& excluded) {
  std::vector<Index> candidates;
  for (Index i = 0; i < static_cast<Index>(scores.size()); ++i) {
    if (std::find(excluded.begin(), excluded.end(), i) == excluded.end()) candidates.push_back(i);
  }
  std::sort(candidates.begin(), candidates.end(), [&](Index a, Index b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  });
  return std::find(candidates.begin(), candidates.end(), target) - candidates.begin() + 1;
}

}  // namespace

TEST_CASE("rank of a unique maximum is one") {
  std::vector<double> scores{0.1, 0.9, 0.3};
  CHECK(rank_among(scores, 1, {}) == 1);
  CHECK(rank_among(scores, 0, {}) == 3);
  std::vector<Index> excl{1};
  CHECK(rank_among(scores, 0, excl) == 2);
}

TEST_CASE("ties are broken by item id") {
  std::vector<double> scores(10, 0.5);
  for (Index i = 0; i < 10; ++i) CHECK(rank_among(scores, i, {}) == i + 1);
  std::vector<Index> excl{2, 5};
  CHECK(rank_among(scores, 7, excl) == 6);
}

TEST_CASE("an excluded or out-of-range target is an error") {
  std::vector<double> scores{0.1, 0.2};
  std::vector<Index> excl{1};
  CHECK_THROWS(rank_among(scores, 1, excl));
  CHECK_THROWS(rank_among(scores, 2, {}));
}

TEST_CASE("rank matches a full sort on random cases") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index m = std::uniform_int_distribution<Index>(2, 60)(rng);
    std::vector<double> scores(m);
    // Coarse values produce plenty of ties.
    std::uniform_int_distribution<int> coarse(0, 6);
    for (auto& s : scores) s = coarse(rng) * 0.25;
    std::vector<Index> all(m);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    const Index target = all[0];
    std::vector<Index> excl(all.begin() + 1, all.begin() + 1 + std::uniform_int_distribution<Index>(0, m - 1)(rng));
    std::sort(excl.begin(), excl.end());
    CHECK(rank_among(scores, target, excl) == sorted_rank(scores, target, excl));
  }
}

TEST_CASE("recall and ndcg by hand") {
  auto r = ranks_of({3, 25});
  CHECK(recall_at_n(r, 20) == 0.5);
  CHECK(ndcg_at_n(r, 20) == doctest::Approx(0.5 / std::log2(4.0)).epsilon(1e-15));
  CHECK(recall_at_n(ranks_of({1, 1, 1}), 20) == 1.0);
  CHECK(ndcg_at_n(ranks_of({1}), 20) == 1.0);
  CHECK(ndcg_at_n(ranks_of({3}), 20) == 0.5);
  CHECK(ndcg_at_n(ranks_of({1, 3}), 20) == 0.75);
  CHECK(ndcg_at_n(ranks_of({20}), 20) == doctest::Approx(1.0 / std::log2(21.0)).epsilon(1e-15));
  CHECK(ndcg_at_n(ranks_of({21}), 20) == 0.0);
  CHECK_THROWS(recall_at_n({}, 20));
  CHECK_THROWS(ndcg_at_n({}, 20));
  CHECK_THROWS(recall_at_n(r, 0));
}

TEST_CASE("uniformly random ranks give recall near N/M") {
  std::mt19937_64 rng(3);
  const Index m = 200, users = 20000;
  std::uniform_int_distribution<Index> pick(1, m);
  std::vector<RankResult> r;
  for (Index u = 0; u < users; ++u) r.push_back({u, pick(rng)});
  const double p = 20.0 / m;
  CHECK(std::abs(recall_at_n(r, 20) - p) < 5 * std::sqrt(p * (1 - p) / users));
}

TEST_CASE("one-hot embeddings that point at the held-out item score perfectly") {
  auto ds = random_split(6, 10, 0.3, 5);
  FinalEmbeddings fe{EmbeddingMatrix::Zero(ds.n_users + ds.n_items, ds.n_items), ds.n_users};
  for (Index i = 0; i < ds.n_items; ++i) fe.e_final(ds.n_users + i, i) = 1.0;
  for (Index u = 0; u < ds.n_users; ++u) fe.e_final(u, ds.test[u]) = 1.0;
  std::vector<int> ns{1, 20};
  auto report = evaluate(fe, ds, EvalMode::Test, ns);
  CHECK(report.recall_at(1) == 1.0);
  CHECK(report.ndcg_at(20) == 1.0);
  CHECK(report.users_evaluated == ds.n_users);
}

TEST_CASE("evaluation agrees with a scripted per-user oracle") {
  auto ds = random_split(20, 30, 0.2, 9);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  FinalEmbeddings fe{EmbeddingMatrix(ds.n_users + ds.n_items, 6), ds.n_users};
  for (Index k = 0; k < fe.e_final.size(); ++k) fe.e_final.data()[k] = n(rng);

  for (auto mode : {EvalMode::Validation, EvalMode::Test}) {
    std::vector<RankResult> expected;
    double recall = 0.0, ndcg = 0.0;
    for (Index u = 0; u < ds.n_users; ++u) {
      std::vector<double> scores(ds.n_items);
      for (Index i = 0; i < ds.n_items; ++i) scores[i] = fe.user(u).dot(fe.item(i));
      std::vector<Index> excl = ds.train[u];
      Index target = ds.validation[u];
      if (mode == EvalMode::Test) {
        excl.push_back(ds.validation[u]);
        target = ds.test[u];
      }
      const Index rank = sorted_rank(scores, target, excl);
      expected.push_back({u, rank});
      if (rank <= 20) {
        recall += 1.0;
        ndcg += 1.0 / std::log2(rank + 1.0);
      }
    }
    auto got = rank_all_users(fe, ds, mode);
    REQUIRE(got.size() == expected.size());
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k].rank == expected[k].rank);
    std::vector<int> ns{20};
    auto report = evaluate(fe, ds, mode, ns);
    CHECK(std::abs(report.recall_at(20) - recall / ds.n_users) < 1e-12);
    CHECK(std::abs(report.ndcg_at(20) - ndcg / ds.n_users) < 1e-12);

    auto threaded = rank_all_users(fe, ds, mode, {.threads = 4});
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(threaded[k].rank == got[k].rank);
  }
}

TEST_CASE("metric invariants") {
  auto ds = random_split(15, 40, 0.15, 2);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  FinalEmbeddings fe{EmbeddingMatrix(ds.n_users + ds.n_items, 5), ds.n_users};
  for (Index k = 0; k < fe.e_final.size(); ++k) fe.e_final.data()[k] = n(rng);
  std::vector<int> ns{5, 20, 40};
  auto base = evaluate(fe, ds, EvalMode::Test, ns);

  for (std::size_t k = 0; k < ns.size(); ++k) CHECK(base.ndcg[k] <= base.recall[k]);
  CHECK(base.recall_at(40) == 1.0);

  FinalEmbeddings scaled{fe.e_final * 3.0, fe.n_users};
  auto s = evaluate(scaled, ds, EvalMode::Test, ns);
  CHECK(s.recall == base.recall);
  CHECK(s.ndcg == base.ndcg);

  // Relabelling users leaves the averages unchanged.
  std::vector<Index> perm(ds.n_users);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  SplitDataset shuffled = ds;
  FinalEmbeddings moved = fe;
  for (Index u = 0; u < ds.n_users; ++u) {
    shuffled.train[perm[u]] = ds.train[u];
    shuffled.validation[perm[u]] = ds.validation[u];
    shuffled.test[perm[u]] = ds.test[u];
    moved.e_final.row(perm[u]) = fe.e_final.row(u);
  }
  auto p = evaluate(moved, shuffled, EvalMode::Test, ns);
  for (std::size_t k = 0; k < ns.size(); ++k) {
    CHECK(std::abs(p.recall[k] - base.recall[k]) < 1e-12);
    CHECK(std::abs(p.ndcg[k] - base.ndcg[k]) < 1e-12);
  }
}

TEST_CASE("keeping the validation item as a test candidate can only lower the rank") {
  auto ds = random_split(15, 25, 0.2, 6);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  FinalEmbeddings fe{EmbeddingMatrix(ds.n_users + ds.n_items, 4), ds.n_users};
  for (Index k = 0; k < fe.e_final.size(); ++k) fe.e_final.data()[k] = n(rng);
  auto strict = rank_all_users(fe, ds, EvalMode::Test);
  auto loose = rank_all_users(fe, ds, EvalMode::Test, {.exclude_validation_in_test = false});
  for (std::size_t k = 0; k < strict.size(); ++k) {
    CHECK(loose[k].rank >= strict[k].rank);
    CHECK(loose[k].rank <= strict[k].rank + 1);
  }
}

TEST_CASE("metrics csv layout") {
  MetricsReport report{{10, 20}, {0.25, 0.5}, {0.125, 0.25}, 4};
  std::ostringstream out;
  write_metrics_csv(out, EvalMode::Test, report);
  CHECK(out.str() == "mode,N,recall,ndcg,users\ntest,10,0.25,0.125,4\ntest,20,0.5,0.25,4\n");
  CHECK_THROWS_AS(report.recall_at(50), std::out_of_range);
}
