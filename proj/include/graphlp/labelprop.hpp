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

// Label propagation over an utterance graph (Zhou et al. style):
//
//   S = D^-1/2 W D^-1/2
//   Y(t+1) = alpha S Y(t) + (1 - alpha) Y(0)
//
// whose fixed point (1 - alpha)(I - alpha S)^-1 Y(0) minimizes
// ||F - Y||^2 + lambda tr(F' L_sym F) up to scale, lambda = (1 - alpha)/alpha.

#ifndef GRAPHLP_LABELPROP_HPP_
#define GRAPHLP_LABELPROP_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "graphlp/common.hpp"
#include "graphlp/corpus.hpp"
#include "graphlp/distance.hpp"
#include "graphlp/graph.hpp"

namespace graphlp {

struct LpConfig {
  double alpha = 0.9;
  double tol = 1e-8;
  std::size_t max_iter = 1000;
  bool sharing = true;

  /// Regularization weight of the equivalent quadratic objective.
  double lambda() const { return (1.0 - alpha) / alpha; }

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    if (!(tol > 0.0)) throw InputError("tol must be > 0");
    if (max_iter < 1) throw InputError("max_iter must be >= 1");
  }
};

/// S_ij = W_ij / sqrt(deg_i deg_j); isolated nodes get all-zero rows and
/// columns.
inline RealMatrix normalize_symmetric(const Matrix<std::uint8_t>& w) {
  const std::size_t m = w.rows();
  std::vector<double> inv_sqrt(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < m; ++j) deg += w(i, j);
    inv_sqrt[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  RealMatrix s(m, m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (w(i, j)) s(i, j) = inv_sqrt[i] * inv_sqrt[j];
  return s;
}

inline RealMatrix normalize_symmetric(const AffinityGraph& g) { return normalize_symmetric(g.w); }

struct PropagateResult {
  RealMatrix y;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> deltas;  // max-abs change per iteration
};

/// Fixed-point iteration from Y(0) = y0 until the max-abs elementwise change
/// drops below cfg.tol or cfg.max_iter updates have run.
inline PropagateResult propagate(const RealMatrix& s, const RealMatrix& y0, const LpConfig& cfg) {
  cfg.validate();
  const std::size_t m = y0.rows(), c = y0.cols();
  if (s.rows() != m || s.cols() != m)
    throw InputError("S is " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                     " but Y has " + std::to_string(m) + " rows");
  for (double v : s.data())
    if (!std::isfinite(v)) throw InputError("non-finite entry in S");
  for (double v : y0.data())
    if (!std::isfinite(v)) throw InputError("non-finite entry in Y0");

  // Row-compressed nonzeros of S; the sum order per row is fixed.
  std::vector<std::size_t> row_start(m + 1, 0);
  std::vector<std::size_t> col;
  std::vector<double> val;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j)
      if (s(i, j) != 0.0) {
        col.push_back(j);
        val.push_back(s(i, j));
      }
    row_start[i + 1] = col.size();
  }

  PropagateResult res;
  res.y = y0;
  RealMatrix next(m, c);
  const double keep = 1.0 - cfg.alpha;
  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    double delta = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      auto out = next.row(i);
      const auto base = y0.row(i);
      for (std::size_t k = 0; k < c; ++k) out[k] = 0.0;
      for (std::size_t e = row_start[i]; e < row_start[i + 1]; ++e) {
        const auto src = res.y.row(col[e]);
        for (std::size_t k = 0; k < c; ++k) out[k] += val[e] * src[k];
      }
      const auto prev = res.y.row(i);
      for (std::size_t k = 0; k < c; ++k) {
        out[k] = cfg.alpha * out[k] + keep * base[k];
        delta = std::max(delta, std::abs(out[k] - prev[k]));
      }
    }
    std::swap(res.y, next);
    res.iterations = it + 1;
    res.deltas.push_back(delta);
    if (delta < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

/// Direct solve of (I - alpha S) Y = (1 - alpha) Y0. Test-scale only.
inline RealMatrix closed_form(const RealMatrix& s, const RealMatrix& y0, double alpha) {
  const auto m = static_cast<Eigen::Index>(y0.rows());
  const auto c = static_cast<Eigen::Index>(y0.cols());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd b(m, c);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) a(i, j) -= alpha * s(i, j);
    for (Eigen::Index k = 0; k < c; ++k) b(i, k) = (1.0 - alpha) * y0(i, k);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw InvariantError("I - alpha S is singular");
  const Eigen::MatrixXd x = lu.solve(b);
  RealMatrix out(y0.rows(), y0.cols());
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index k = 0; k < c; ++k) out(i, k) = x(i, k);
  return out;
}

enum class LabelSource { kOwnNbest, kShared };

inline const char* source_name(LabelSource s) { return s == LabelSource::kShared ? "shared" : "own_nbest"; }

struct Decision {
  std::size_t label = 0;
  std::string text;
  LabelSource source = LabelSource::kOwnNbest;
};

/// Row argmax, smallest index on ties. Without sharing only the utterance's
/// own labels compete. A row with no positive candidate falls back to the
/// utterance's 1-best.
inline std::vector<Decision> decode(const RealMatrix& y, const LabelSpace& ls,
                                    std::span<const Utterance* const> utts, bool sharing) {
  std::vector<Decision> out(y.rows());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    const auto row = y.row(i);
    std::size_t best = ls.size();
    double best_v = 0.0;
    auto offer = [&](std::size_t c) {
      if (row[c] > best_v) {
        best_v = row[c];
        best = c;
      }
    };
    if (sharing) {
      for (std::size_t c = 0; c < row.size(); ++c) offer(c);
    } else {
      for (std::size_t c : ls.own[i]) offer(c);
    }
    if (best == ls.size()) best = ls.index_of(utts[i]->best().normalized());
    out[i] = {best, ls.display[best], ls.owns(i, best) ? LabelSource::kOwnNbest : LabelSource::kShared};
  }
  return out;
}

struct PropagationResult {
  RealMatrix y_final;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<Decision> chosen;  // aligned with the input utterances
  std::size_t edges = 0;
  std::size_t labels = 0;
  std::size_t flipped = 0;  // chosen label differs from the 1-best's label
  std::size_t shared = 0;   // chosen label came from another utterance
};

struct GraphConfig {
  DistanceMetric metric{};
  double theta = 1.5;
  std::size_t n_top = 3;
  std::int64_t prune_limit = 4;
};

/// Full pipeline for one cluster: distances, affinity, label space, soft
/// labels, propagation, decoding. `utts` should be sorted by id.
inline PropagationResult rescore_cluster(std::span<const Utterance* const> utts, const GraphConfig& gcfg,
                                         const LpConfig& cfg, unsigned workers = 1) {
  if (utts.empty()) throw InputError("empty cluster");
  const RealMatrix dist = pairwise_distances(utts, gcfg.metric, workers);
  const AffinityGraph g = build_affinity(utts, dist, gcfg.theta, gcfg.prune_limit, gcfg.n_top);
  const LabelSpace ls = build_label_space(utts, gcfg.n_top);
  const RealMatrix y0 = init_soft_labels(utts, ls);
  PropagateResult p = propagate(normalize_symmetric(g), y0, cfg);

  PropagationResult res;
  res.chosen = decode(p.y, ls, utts, cfg.sharing);
  res.y_final = std::move(p.y);
  res.iterations = p.iterations;
  res.converged = p.converged;
  res.edges = g.edge_count();
  res.labels = ls.size();
  for (std::size_t i = 0; i < utts.size(); ++i) {
    if (res.chosen[i].label != ls.index_of(utts[i]->best().normalized())) ++res.flipped;
    if (res.chosen[i].source == LabelSource::kShared) ++res.shared;
  }
  return res;
}

}  // namespace graphlp

#endif  // GRAPHLP_LABELPROP_HPP_
