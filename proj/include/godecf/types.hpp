#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace godecf {

using Index = Eigen::Index;

/// Node embeddings, one row per node. Users occupy rows [0, N), items [N, N+M).
template <typename Scalar>
using Embedding = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Row-compressed adjacency over the concatenated user+item node set.
template <typename Scalar>
using SparseAdjacency = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>;

using EmbeddingMatrix = Embedding<double>;
using Adjacency = SparseAdjacency<double>;

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or range violations in numeric routines.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Integration produced non-finite values.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad experiment configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace godecf
