#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "godecf/model.hpp"
#include "godecf/synthetic.hpp"

using namespace godecf;

namespace {

EmbeddingMatrix random_embedding(Index rows, Index cols, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  EmbeddingMatrix e(rows, cols);
  for (Index k = 0; k < e.size(); ++k) e.data()[k] = n(rng);
  return e;
}

ModelState<double> state_on(const SplitDataset& ds, Index dims, unsigned seed, SolverConfig solver = {}) {
  ModelState<double> s;
  s.adjacency = std::make_shared<const Adjacency>(build_adjacency<double>(ds));
  s.e0 = random_embedding(s.adjacency->rows(), dims, seed);
  s.solver = solver;
  s.hop_weights.assign(solver.n_hops, 1.0);
  return s;
}

double max_abs(const EmbeddingMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("derivative on an empty graph is -E") {
  ModelState<double> s;
  s.adjacency = std::make_shared<const Adjacency>(4, 4);
  s.e0 = random_embedding(4, 3, 1);
  EmbeddingMatrix g = derivative(s.e0, s);
  CHECK((g + s.e0).isZero(0.0));
}

TEST_CASE("derivative on a graph eigenvector scales by lambda^n - 1") {
  // Single edge: A = [[0,1],[1,0]], eigenvectors (1,1) with 1 and (1,-1) with -1.
  SplitDataset ds;
  ds.n_users = 1;
  ds.n_items = 1;
  ds.train = {{0}};
  ds.validation = {0};
  ds.test = {0};
  for (int hops : {1, 2, 3}) {
    auto s = state_on(ds, 1, 0, {.n_hops = hops});
    EmbeddingMatrix plus(2, 1), minus(2, 1);
    plus << 1, 1;
    minus << 1, -1;
    CHECK(max_abs(derivative(plus, s)) == 0.0);
    const double expected = std::pow(-1.0, hops) - 1.0;
    CHECK(max_abs(derivative(minus, s) - expected * minus) == 0.0);
  }
}

TEST_CASE("weighted multi-hop derivative matches the dense composition") {
  auto ds = random_split(5, 7, 0.4, 3);
  auto s = state_on(ds, 4, 2, {.n_hops = 3, .use_weights = true});
  s.hop_weights = {0.7, 1.3, -0.4};
  Eigen::MatrixXd a(s.graph());
  Eigen::MatrixXd p = 0.7 * 1.3 * -0.4 * a * a * a - Eigen::MatrixXd::Identity(a.rows(), a.cols());
  EmbeddingMatrix expected = p * s.e0;
  CHECK(max_abs(derivative(s.e0, s) - expected) < 1e-12);

  std::vector<EmbeddingMatrix> record;
  derivative(s.e0, s, &record);
  REQUIRE(record.size() == 3);
  CHECK(max_abs(record[0] - s.e0) == 0.0);
  CHECK(max_abs(record[1] - EmbeddingMatrix(0.7 * a * s.e0)) < 1e-12);
}

TEST_CASE("integrating over a vanishing horizon returns e0") {
  auto ds = random_split(4, 6, 0.5, 1);
  for (auto method : {SolverMethod::Euler, SolverMethod::RK4}) {
    auto s = state_on(ds, 3, 4, {.method = method, .t1 = 1e-30});
    CHECK(max_abs(integrate(s) - s.e0) < 1e-25);
  }
}

TEST_CASE("one unit Euler step with one hop is a residual propagation") {
  auto ds = random_split(6, 8, 0.35, 2);
  auto s = state_on(ds, 5, 3, {.method = SolverMethod::Euler, .t1 = 1.0, .steps = 1, .n_hops = 1});
  Eigen::MatrixXd a(s.graph());
  EmbeddingMatrix residual = s.e0 + (a - Eigen::MatrixXd::Identity(a.rows(), a.cols())) * s.e0;
  CHECK(max_abs(integrate(s) - residual) <= 1e-15);
  CHECK(max_abs(integrate(s) - EmbeddingMatrix(a * s.e0)) <= 1e-15);
}

TEST_CASE("integration is linear in e0") {
  auto ds = random_split(6, 9, 0.3, 5);
  for (auto method : {SolverMethod::Euler, SolverMethod::RK4}) {
    auto s = state_on(ds, 4, 6, {.method = method, .t1 = 0.8, .steps = 3});
    EmbeddingMatrix base = integrate(s);
    s.e0 *= 2.5;
    CHECK(max_abs(integrate(s) - 2.5 * base) < 1e-10);
  }
}

TEST_CASE("unit hop weights reproduce the unweighted model bitwise") {
  auto ds = random_split(6, 9, 0.3, 7);
  for (auto method : {SolverMethod::Euler, SolverMethod::RK4}) {
    auto off = state_on(ds, 4, 8, {.method = method, .steps = 2, .n_hops = 2});
    auto on = off;
    on.solver.use_weights = true;
    CHECK((integrate(off).array() == integrate(on).array()).all());
  }
}

TEST_CASE("non-finite states raise a divergence error") {
  auto ds = random_split(3, 5, 0.5, 1);
  auto s = state_on(ds, 2, 1);
  s.e0(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(integrate(s), DivergenceError);

  auto big = state_on(ds, 2, 1, {.t1 = 1e300, .steps = 1});
  big.e0 *= 1e300;
  CHECK_THROWS_AS(integrate(big), DivergenceError);
}

TEST_CASE("invalid solver settings are rejected") {
  auto ds = random_split(3, 5, 0.5, 1);
  auto s = state_on(ds, 2, 1);
  s.solver.steps = 0;
  CHECK_THROWS_AS(integrate(s), DimensionError);
  s.solver.steps = 1;
  s.solver.t1 = -1.0;
  CHECK_THROWS_AS(integrate(s), DimensionError);
  s.solver.t1 = 1.0;
  s.solver.use_weights = true;
  s.hop_weights = {1.0};
  CHECK_THROWS_AS(integrate(s), DimensionError);

  SolverTape<double> tape;
  auto ok = state_on(ds, 2, 1);
  CHECK_THROWS_AS(integrate_backward(ok, tape, ok.e0), std::logic_error);
}

TEST_CASE("scores are dot products of final user and item rows") {
  FinalEmbeddings fe{EmbeddingMatrix::Zero(4, 2), 2};
  fe.e_final << 1, 0,
                0, 1,
                1, 0,
                0, 1;
  std::vector<Index> items{0, 1};
  CHECK(predict_scores(fe, 0, items) == std::vector<double>{1.0, 0.0});
  CHECK(predict_scores(fe, 1, items) == std::vector<double>{0.0, 1.0});

  FinalEmbeddings r{random_embedding(9, 5, 3), 4};
  std::vector<Index> all{0, 1, 2, 3, 4};
  auto scores = predict_scores(r, 2, all);
  for (Index i = 0; i < 5; ++i) {
    double dot = 0.0;
    for (Index d = 0; d < 5; ++d) dot += r.e_final(2, d) * r.e_final(4 + i, d);
    CHECK(scores[i] == doctest::Approx(dot).epsilon(1e-14));
  }
  CHECK_THROWS_AS(predict_scores(r, 4, all), DimensionError);
  std::vector<Index> bad{5};
  CHECK_THROWS_AS(predict_scores(r, 0, bad), DimensionError);
}

TEST_CASE("lightgcn readout matches a dense oracle") {
  auto ds = random_split(5, 6, 0.4, 2);
  auto a = build_adjacency<double>(ds);
  Eigen::MatrixXd dense(a);
  EmbeddingMatrix e0 = random_embedding(a.rows(), 3, 1);

  std::vector<double> w0{1.0};
  CHECK(max_abs(lightgcn_forward<double>(e0, a, 0, w0) - e0) == 0.0);

  auto w = uniform_layer_weights<double>(2);
  EmbeddingMatrix expected = (e0 + dense * e0 + dense * dense * e0) / 3.0;
  CHECK(max_abs(lightgcn_forward<double>(e0, a, 2, w) - expected) < 1e-12);
  CHECK(max_abs(lightgcn_backward<double>(e0, a, 2, w) - expected) < 1e-12);

  Adjacency zero(a.rows(), a.cols());
  auto w3 = uniform_layer_weights<double>(3);
  CHECK(max_abs(lightgcn_forward<double>(e0, zero, 3, w3) - 0.25 * e0) < 1e-15);

  CHECK_THROWS_AS(lightgcn_forward<double>(e0, a, 2, w0), DimensionError);
  CHECK_THROWS_AS(lightgcn_forward<double>(EmbeddingMatrix(2, 3), a, 2, w), DimensionError);
}

TEST_CASE("embedding initialization is seeded and has the requested spread") {
  auto a = init_embeddings(20, 8, 0.1, 42);
  auto b = init_embeddings(20, 8, 0.1, 42);
  auto c = init_embeddings(20, 8, 0.1, 43);
  CHECK((a.array() == b.array()).all());
  CHECK(!(a.array() == c.array()).all());

  auto big = init_embeddings(7813, 128, 0.1, 1);  // ~1e6 samples
  const double mean = big.mean();
  const double sd = std::sqrt((big.array() - mean).square().sum() / double(big.size() - 1));
  CHECK(sd >= 0.099);
  CHECK(sd <= 0.101);
  CHECK(std::abs(mean) < 5 * 0.1 / std::sqrt(double(big.size())));

  CHECK_THROWS_AS(init_embeddings(3, 0, 0.1, 1), DimensionError);
  CHECK_THROWS_AS(init_embeddings(3, 2, 0.0, 1), DimensionError);
}

TEST_CASE("embeddings round-trip exactly through text and binary snapshots") {
  EmbeddingMatrix e = random_embedding(6, 4, 9);
  e(0, 0) = 1e-300;
  e(1, 1) = -0.0;
  {
    std::stringstream io;
    write_embedding_text(io, e);
    CHECK((read_embedding_text(io).array() == e.array()).all());
  }
  {
    std::stringstream io(std::ios::in | std::ios::out | std::ios::binary);
    write_embedding_binary(io, e);
    CHECK(io.str().size() == 16 + 8 * 24);
    CHECK((read_embedding_binary(io).array() == e.array()).all());
  }
  std::istringstream truncated("2 2\n1 2 3\n");
  CHECK_THROWS_AS(read_embedding_text(truncated), DataError);
}
