#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "godecf/data.hpp"
#include "godecf/types.hpp"

namespace godecf {

/// Symmetric-normalized bipartite adjacency built from train interactions.
/// Entry (u, N+i) = 1/sqrt(deg(u) deg(i)); no self-loops. Validation and test
/// items never enter the graph.
template <typename Scalar = double>
SparseAdjacency<Scalar> build_adjacency(const SplitDataset& ds) {
  const Index n_nodes = ds.n_users + ds.n_items;
  std::vector<Index> item_degree(ds.n_items, 0);
  for (Index u = 0; u < ds.n_users; ++u) {
    if (ds.train[u].empty()) {
      throw DataError("user " + std::to_string(u) + " has no train interactions (isolated node)");
    }
    for (Index i : ds.train[u]) ++item_degree[i];
  }
  for (Index i = 0; i < ds.n_items; ++i) {
    if (item_degree[i] == 0) {
      throw DataError("item " + std::to_string(i) + " has no train interactions (isolated node)");
    }
  }

  std::vector<Eigen::Triplet<Scalar, int>> entries;
  entries.reserve(2 * ds.train_size());
  for (Index u = 0; u < ds.n_users; ++u) {
    const auto user_degree = static_cast<Scalar>(ds.train[u].size());
    for (Index i : ds.train[u]) {
      Scalar value = Scalar(1) / std::sqrt(user_degree * static_cast<Scalar>(item_degree[i]));
      int row = static_cast<int>(u);
      int col = static_cast<int>(ds.n_users + i);
      entries.emplace_back(row, col, value);
      entries.emplace_back(col, row, value);
    }
  }
  SparseAdjacency<Scalar> adjacency(n_nodes, n_nodes);
  adjacency.setFromTriplets(entries.begin(), entries.end());
  adjacency.makeCompressed();
  return adjacency;
}

namespace detail {

template <typename Scalar>
void spmm_rows(const SparseAdjacency<Scalar>& adjacency, const Embedding<Scalar>& input,
               Embedding<Scalar>& output, Index begin, Index end) {
  for (Index row = begin; row < end; ++row) {
    auto out = output.row(row);
    out.setZero();
    // Compressed row-major storage keeps columns ascending within a row.
    for (typename SparseAdjacency<Scalar>::InnerIterator it(adjacency, row); it; ++it) {
      out += it.value() * input.row(it.col());
    }
  }
}

}  // namespace detail

/// output = adjacency * input. Each output row sums its nonzeros in ascending
/// column order, so results do not depend on the thread count.
template <typename Scalar>
void spmm_into(const SparseAdjacency<Scalar>& adjacency, const Embedding<Scalar>& input,
               Embedding<Scalar>& output, int threads = 1) {
  if (adjacency.cols() != input.rows()) {
    throw DimensionError("spmm: adjacency has " + std::to_string(adjacency.cols()) +
                         " columns but embedding has " + std::to_string(input.rows()) + " rows");
  }
  output.resize(adjacency.rows(), input.cols());
  const Index rows = adjacency.rows();
  if (threads <= 1 || rows < 2 * threads) {
    detail::spmm_rows(adjacency, input, output, 0, rows);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  const Index chunk = (rows + threads - 1) / threads;
  for (Index begin = 0; begin < rows; begin += chunk) {
    Index end = std::min(rows, begin + chunk);
    workers.emplace_back([&, begin, end] { detail::spmm_rows(adjacency, input, output, begin, end); });
  }
}

template <typename Scalar>
Embedding<Scalar> spmm(const SparseAdjacency<Scalar>& adjacency, const Embedding<Scalar>& input,
                       int threads = 1) {
  Embedding<Scalar> output;
  spmm_into(adjacency, input, output, threads);
  return output;
}

/// Coordinate dump, one "row col value" per nonzero.
template <typename Scalar>
void write_adjacency_coo(std::ostream& out, const SparseAdjacency<Scalar>& adjacency) {
  auto old_precision = out.precision(17);
  for (Index row = 0; row < adjacency.outerSize(); ++row) {
    for (typename SparseAdjacency<Scalar>::InnerIterator it(adjacency, row); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace godecf
