#include "godecf/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <istream>
#include <ostream>
#include <random>

namespace godecf {

std::string to_string(SolverMethod method) {
  return method == SolverMethod::Euler ? "euler" : "rk4";
}

SolverMethod parse_solver_method(const std::string& name) {
  if (name == "euler" || name == "Euler") return SolverMethod::Euler;
  if (name == "rk4" || name == "RK4") return SolverMethod::RK4;
  throw std::invalid_argument("unknown solver '" + name + "' (expected euler or rk4)");
}

std::vector<double> predict_scores(const FinalEmbeddings& fe, Index user, std::span<const Index> items) {
  if (user < 0 || user >= fe.n_users) {
    throw DimensionError("user id " + std::to_string(user) + " out of range");
  }
  std::vector<double> scores;
  scores.reserve(items.size());
  const auto u = fe.user(user);
  for (Index i : items) {
    if (i < 0 || i >= fe.n_items()) throw DimensionError("item id " + std::to_string(i) + " out of range");
    scores.push_back(u.dot(fe.item(i)));
  }
  return scores;
}

EmbeddingMatrix init_embeddings(Index rows, Index dims, double stddev, std::uint64_t seed) {
  if (rows < 0 || dims < 1) throw DimensionError("init_embeddings: need rows >= 0 and dims >= 1");
  if (!(stddev > 0.0)) throw DimensionError("init_embeddings: stddev must be > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  EmbeddingMatrix e(rows, dims);
  for (Index k = 0; k < e.size(); ++k) e.data()[k] = normal(rng);
  return e;
}

void write_embedding_text(std::ostream& out, const EmbeddingMatrix& e) {
  out << e.rows() << ' ' << e.cols() << '\n';
  std::string line;
  char buf[64];
  for (Index r = 0; r < e.rows(); ++r) {
    line.clear();
    for (Index c = 0; c < e.cols(); ++c) {
      if (c) line.push_back(' ');
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), e(r, c));
      line.append(buf, ptr);
    }
    line.push_back('\n');
    out << line;
  }
}

EmbeddingMatrix read_embedding_text(std::istream& in) {
  Index rows = -1, dims = -1;
  if (!(in >> rows >> dims) || rows < 0 || dims < 1) throw DataError("bad embedding header");
  EmbeddingMatrix e(rows, dims);
  std::string token;
  for (Index k = 0; k < e.size(); ++k) {
    if (!(in >> token)) throw DataError("embedding file truncated");
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw DataError("bad embedding value '" + token + "'");
    }
    e.data()[k] = value;
  }
  return e;
}

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void write_le(std::ostream& out, T value) {
  auto bits = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.write(bits.data(), bits.size());
}

template <typename T>
T read_le(std::istream& in) {
  std::array<char, sizeof(T)> bits;
  if (!in.read(bits.data(), bits.size())) throw DataError("binary embedding truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_embedding_binary(std::ostream& out, const EmbeddingMatrix& e) {
  write_le<std::int64_t>(out, e.rows());
  write_le<std::int64_t>(out, e.cols());
  for (Index k = 0; k < e.size(); ++k) write_le<double>(out, e.data()[k]);
}

EmbeddingMatrix read_embedding_binary(std::istream& in) {
  auto rows = read_le<std::int64_t>(in);
  auto dims = read_le<std::int64_t>(in);
  if (rows < 0 || dims < 1) throw DataError("bad binary embedding header");
  EmbeddingMatrix e(rows, dims);
  for (Index k = 0; k < e.size(); ++k) e.data()[k] = read_le<double>(in);
  return e;
}

}  // namespace godecf
