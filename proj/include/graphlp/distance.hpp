// Copyright 2026 The graphlp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Utterance-to-utterance acoustic distances over frame-embedding sequences.
//
// All DTW kernels use the unconstrained step set {(1,0), (0,1), (1,1)} with
// both endpoints anchored and accumulate in double precision.

#ifndef GRAPHLP_DISTANCE_HPP_
#define GRAPHLP_DISTANCE_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphlp/common.hpp"
#include "graphlp/corpus.hpp"

namespace graphlp {

enum class MetricKind { kLastFrameEuclidean, kTraditionalDtw, kDependentDtw };

enum class TraditionalVariant { kIndependent, kLinearDependent };

struct DistanceMetric {
  MetricKind kind = MetricKind::kDependentDtw;
  bool normalized = true;
  TraditionalVariant traditional = TraditionalVariant::kIndependent;

  friend bool operator==(const DistanceMetric&, const DistanceMetric&) = default;
};

inline std::string metric_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::kLastFrameEuclidean: return "lfe";
    case MetricKind::kTraditionalDtw: return "dtw";
    case MetricKind::kDependentDtw: return "ddtw";
  }
  return "?";
}

inline MetricKind parse_metric_kind(std::string_view s) {
  if (s == "lfe") return MetricKind::kLastFrameEuclidean;
  if (s == "dtw") return MetricKind::kTraditionalDtw;
  if (s == "ddtw") return MetricKind::kDependentDtw;
  throw InputError("unknown metric '" + std::string(s) + "' (lfe|dtw|ddtw)");
}

/// 0-based (row of x, row of y) pairs from (0,0) to (T1-1, T2-1).
using WarpingPath = std::vector<std::pair<std::size_t, std::size_t>>;

struct DtwResult {
  double cost = 0.0;
  WarpingPath path;
};

namespace detail {

inline void check_pair(const FrameMatrix& x, const FrameMatrix& y) {
  if (x.rows() == 0 || y.rows() == 0) throw InputError("empty frame sequence");
  if (x.cols() != y.cols())
    throw InputError("dimension mismatch: " + std::to_string(x.cols()) + " vs " +
                     std::to_string(y.cols()));
}

inline double squared_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    s += d * d;
  }
  return s;
}

/// Fills the accumulated-cost table for a local cost function and returns
/// it (T1 x T2). acc(i,j) = local(i,j) + min(acc(i-1,j), acc(i,j-1), acc(i-1,j-1)).
template <typename Local>
RealMatrix accumulate(std::size_t t1, std::size_t t2, Local&& local) {
  RealMatrix acc(t1, t2);
  for (std::size_t i = 0; i < t1; ++i) {
    for (std::size_t j = 0; j < t2; ++j) {
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = std::numeric_limits<double>::infinity();
        if (i > 0 && j > 0) best = acc(i - 1, j - 1);
        if (i > 0) best = std::min(best, acc(i - 1, j));
        if (j > 0) best = std::min(best, acc(i, j - 1));
      }
      acc(i, j) = best + local(i, j);
    }
  }
  return acc;
}

/// Backtracks an optimal path; diagonal steps win ties.
inline WarpingPath backtrack(const RealMatrix& acc) {
  std::size_t i = acc.rows() - 1, j = acc.cols() - 1;
  WarpingPath path{{i, j}};
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = acc(i - 1, j - 1);
      const double up = acc(i - 1, j);
      const double left = acc(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    path.emplace_back(i, j);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

inline double length_norm(const FrameMatrix& x, const FrameMatrix& y) {
  return static_cast<double>(std::max(x.rows(), y.rows()));
}

}  // namespace detail

/// Euclidean distance between two frames.
inline double frame_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw InputError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  return std::sqrt(detail::squared_distance(a, b));
}

/// Dependent DTW: one warping path over whole frames, minimizing the sum of
/// squared frame distances; the cost is the square root of that minimum.
inline DtwResult ddtw(const FrameMatrix& x, const FrameMatrix& y) {
  detail::check_pair(x, y);
  const RealMatrix acc = detail::accumulate(x.rows(), y.rows(), [&](std::size_t i, std::size_t j) {
    return detail::squared_distance(x.row(i), y.row(j));
  });
  return {std::sqrt(acc(x.rows() - 1, y.rows() - 1)), detail::backtrack(acc)};
}

/// ddtw cost without materializing the path; same value as ddtw().cost.
inline double ddtw_cost(const FrameMatrix& x, const FrameMatrix& y) {
  detail::check_pair(x, y);
  const std::size_t t2 = y.rows();
  std::vector<double> prev(t2), cur(t2);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < t2; ++j) {
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = std::numeric_limits<double>::infinity();
        if (i > 0 && j > 0) best = prev[j - 1];
        if (i > 0) best = std::min(best, prev[j]);
        if (j > 0) best = std::min(best, cur[j - 1]);
      }
      cur[j] = best + detail::squared_distance(x.row(i), y.row(j));
    }
    std::swap(prev, cur);
  }
  return std::sqrt(prev[t2 - 1]);
}

/// ddtw cost divided by the longer sequence's frame count.
inline double ddtw_norm(const FrameMatrix& x, const FrameMatrix& y) {
  return ddtw_cost(x, y) / detail::length_norm(x, y);
}

/// "Traditional" DTW. kIndependent sums one univariate DTW per dimension
/// with |a-b| local cost; kLinearDependent runs one path accumulating
/// Euclidean frame distances linearly.
inline double traditional_dtw(const FrameMatrix& x, const FrameMatrix& y,
                              TraditionalVariant variant = TraditionalVariant::kIndependent) {
  detail::check_pair(x, y);
  if (variant == TraditionalVariant::kLinearDependent) {
    const RealMatrix acc = detail::accumulate(x.rows(), y.rows(), [&](std::size_t i, std::size_t j) {
      return std::sqrt(detail::squared_distance(x.row(i), y.row(j)));
    });
    return acc(x.rows() - 1, y.rows() - 1);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < x.cols(); ++k) {
    const RealMatrix acc = detail::accumulate(x.rows(), y.rows(), [&](std::size_t i, std::size_t j) {
      return std::abs(static_cast<double>(x(i, k)) - static_cast<double>(y(j, k)));
    });
    total += acc(x.rows() - 1, y.rows() - 1);
  }
  return total;
}

/// Euclidean distance between the final frames.
inline double last_frame_distance(const FrameMatrix& x, const FrameMatrix& y,
                                  bool normalized = false) {
  detail::check_pair(x, y);
  const double d = frame_distance(x.row(x.rows() - 1), y.row(y.rows() - 1));
  return normalized ? d / detail::length_norm(x, y) : d;
}

inline double distance(const FrameMatrix& x, const FrameMatrix& y, const DistanceMetric& m) {
  switch (m.kind) {
    case MetricKind::kLastFrameEuclidean:
      return last_frame_distance(x, y, m.normalized);
    case MetricKind::kTraditionalDtw: {
      const double d = traditional_dtw(x, y, m.traditional);
      return m.normalized ? d / detail::length_norm(x, y) : d;
    }
    case MetricKind::kDependentDtw:
      return m.normalized ? ddtw_norm(x, y) : ddtw_cost(x, y);
  }
  throw InvariantError("unhandled metric kind");
}

/// Symmetric M x M matrix of metric values with zero diagonal. Only the
/// upper triangle is evaluated; rows are distributed over `workers` threads.
inline RealMatrix pairwise_distances(std::span<const Utterance* const> utts,
                                     const DistanceMetric& metric, unsigned workers = 1) {
  const std::size_t m = utts.size();
  RealMatrix out(m, m, 0.0);
  parallel_for(m, workers, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < m; ++j)
      out(i, j) = distance(utts[i]->frames, utts[j]->frames, metric);
  });
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) out(j, i) = out(i, j);
  return out;
}

inline RealMatrix pairwise_distances(const std::vector<Utterance>& utts,
                                     const DistanceMetric& metric, unsigned workers = 1) {
  std::vector<const Utterance*> ptrs;
  ptrs.reserve(utts.size());
  for (const auto& u : utts) ptrs.push_back(&u);
  return pairwise_distances(ptrs, metric, workers);
}

/// Dense CSV with utterance ids as the header row and first column.
inline void write_distance_csv(std::ostream& os, std::span<const std::string> ids,
                               const RealMatrix& d) {
  os << "id";
  for (const auto& id : ids) os << ',' << csv_field(id);
  os << '\n';
  for (std::size_t i = 0; i < d.rows(); ++i) {
    os << csv_field(ids[i]);
    for (std::size_t j = 0; j < d.cols(); ++j) os << ',' << format_real(d(i, j));
    os << '\n';
  }
}

}  // namespace graphlp

#endif  // GRAPHLP_DISTANCE_HPP_
