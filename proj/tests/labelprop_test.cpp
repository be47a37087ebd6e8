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

#include "graphlp/labelprop.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace graphlp {
namespace {

Matrix<std::uint8_t> adjacency(std::size_t m, std::initializer_list<std::pair<std::size_t, std::size_t>> edges) {
  Matrix<std::uint8_t> w(m, m, 0);
  for (auto [i, j] : edges) w(i, j) = w(j, i) = 1;
  return w;
}

Matrix<std::uint8_t> random_adjacency(Rng& rng, std::size_t m, double p) {
  Matrix<std::uint8_t> w(m, m, 0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (rng.bernoulli(p)) w(i, j) = w(j, i) = 1;
  return w;
}

RealMatrix random_labels(Rng& rng, std::size_t m, std::size_t c) {
  RealMatrix y(m, c, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < c; ++k)
      if (rng.bernoulli(0.4)) y(i, k) = rng.uniform();
  return y;
}

double max_abs_diff(const RealMatrix& a, const RealMatrix& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

double frobenius_diff(const RealMatrix& a, const RealMatrix& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) s += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
  return std::sqrt(s);
}

Utterance make(const std::string& id, std::vector<std::pair<std::string, double>> beam, float frame = 0.0f) {
  Utterance u;
  u.id = id;
  u.frames.append_row(std::vector<float>{frame, frame});
  for (auto& [text, score] : beam) u.nbest.push_back({normalize_tokens(text, false, false), score});
  sort_nbest(u.nbest);
  u.meta.reference = u.nbest[0].tokens;
  return u;
}

std::vector<const Utterance*> ptrs(const std::vector<Utterance>& v) {
  std::vector<const Utterance*> out;
  for (const auto& u : v) out.push_back(&u);
  return out;
}

TEST(NormalizeSymmetric, TwoNodes) {
  const RealMatrix s = normalize_symmetric(adjacency(2, {{0, 1}}));
  EXPECT_EQ(s(0, 1), 1.0);
  EXPECT_EQ(s(1, 0), 1.0);
  EXPECT_EQ(s(0, 0), 0.0);
}

TEST(NormalizeSymmetric, IsolatedNodeHasZeroRowAndColumn) {
  const RealMatrix s = normalize_symmetric(adjacency(3, {{0, 1}}));
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(s(2, k), 0.0);
    EXPECT_EQ(s(k, 2), 0.0);
  }
  EXPECT_FALSE(std::isnan(s(2, 2)));
}

TEST(NormalizeSymmetric, TriangleIsOneHalf) {
  const RealMatrix s = normalize_symmetric(adjacency(3, {{0, 1}, {1, 2}, {0, 2}}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(s(i, j), i == j ? 0.0 : 0.5);
}

TEST(Propagate, NoEdgesKeepsEachArgmax) {
  const RealMatrix y0 = [] {
    RealMatrix y(3, 2, 0.0);
    y(0, 0) = 0.7; y(0, 1) = 0.3;
    y(1, 1) = 0.9;
    y(2, 0) = 0.2; y(2, 1) = 0.1;
    return y;
  }();
  const LpConfig cfg{};
  const PropagateResult r = propagate(normalize_symmetric(adjacency(3, {})), y0, cfg);
  EXPECT_TRUE(r.converged);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(r.y(i, k), (1 - cfg.alpha) * y0(i, k), 1e-15);
}

TEST(Propagate, EmptyAndSingleNode) {
  const PropagateResult empty = propagate(RealMatrix(0, 0), RealMatrix(0, 3), LpConfig{});
  EXPECT_EQ(empty.y.rows(), 0u);
  RealMatrix y0(1, 1, 1.0);
  const PropagateResult one = propagate(RealMatrix(1, 1, 0.0), y0, LpConfig{});
  EXPECT_NEAR(one.y(0, 0), 0.1, 1e-15);
}

TEST(Propagate, RejectsBadInput) {
  RealMatrix y0(2, 1, 1.0);
  const RealMatrix s = normalize_symmetric(adjacency(2, {{0, 1}}));
  EXPECT_THROW(propagate(RealMatrix(3, 3, 0.0), y0, LpConfig{}), InputError);
  RealMatrix bad = y0;
  bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(propagate(s, bad, LpConfig{}), InputError);
  EXPECT_THROW(propagate(s, y0, LpConfig{1.0}), InputError);
  EXPECT_THROW(propagate(s, y0, LpConfig{0.0}), InputError);
  EXPECT_THROW(propagate(s, y0, LpConfig{0.5, 0.0}), InputError);
}

TEST(Propagate, TwoNodeAnalyticSolution) {
  // S = [[0,1],[1,0]] gives Y*_1 = (y1 + alpha y2) / (1 + alpha).
  RealMatrix y0(2, 2, 0.0);
  y0(0, 0) = 1.0;
  y0(1, 1) = 1.0;
  for (double alpha : {0.5, 0.9}) {
    LpConfig cfg;
    cfg.alpha = alpha;
    cfg.tol = 1e-13;
    cfg.max_iter = 100000;
    const PropagateResult r = propagate(normalize_symmetric(adjacency(2, {{0, 1}})), y0, cfg);
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.y(0, 0), 1.0 / (1.0 + alpha), 1e-10);
    EXPECT_NEAR(r.y(0, 1), alpha / (1.0 + alpha), 1e-10);
    EXPECT_NEAR(r.y(1, 1), 1.0 / (1.0 + alpha), 1e-10);
  }
}

TEST(PropagateProperty, AgreesWithClosedFormAndResidual) {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = 1 + rng.uniform_int(0, 19), c = 1 + rng.uniform_int(0, 7);
    const RealMatrix s = normalize_symmetric(random_adjacency(rng, m, rng.uniform(0.0, 0.6)));
    const RealMatrix y0 = random_labels(rng, m, c);
    for (double alpha : {0.5, 0.9}) {
      LpConfig cfg;
      cfg.alpha = alpha;
      cfg.tol = 1e-12;
      cfg.max_iter = 20000;
      const PropagateResult r = propagate(s, y0, cfg);
      ASSERT_TRUE(r.converged);
      const RealMatrix exact = closed_form(s, y0, alpha);
      EXPECT_LT(max_abs_diff(r.y, exact), 1e-9);

      // ||(I - alpha S) Y - (1 - alpha) Y0||_inf
      double residual = 0;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < c; ++k) {
          double v = r.y(i, k) - (1 - alpha) * y0(i, k);
          for (std::size_t j = 0; j < m; ++j) v -= alpha * s(i, j) * r.y(j, k);
          residual = std::max(residual, std::abs(v));
        }
      EXPECT_LT(residual, 1e-10);

      for (double v : r.y.data()) EXPECT_GE(v, 0.0);
    }
  }
}

TEST(PropagateProperty, ErrorContractsByAlphaInFrobeniusNorm) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 2 + rng.uniform_int(0, 10);
    const RealMatrix s = normalize_symmetric(random_adjacency(rng, m, 0.5));
    const RealMatrix y0 = random_labels(rng, m, 3);
    const double alpha = 0.9;
    const RealMatrix exact = closed_form(s, y0, alpha);
    double prev = frobenius_diff(y0, exact);
    for (std::size_t t = 1; t <= 15; ++t) {
      LpConfig cfg;
      cfg.alpha = alpha;
      cfg.tol = 1e-300;
      cfg.max_iter = t;
      const double err = frobenius_diff(propagate(s, y0, cfg).y, exact);
      EXPECT_LE(err, alpha * prev + 1e-12) << "iteration " << t;
      prev = err;
    }
  }
}

TEST(PropagateProperty, ScaleInvariantArgmax) {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 2 + rng.uniform_int(0, 8);
    const RealMatrix s = normalize_symmetric(random_adjacency(rng, m, 0.5));
    const RealMatrix y0 = random_labels(rng, m, 4);
    RealMatrix scaled = y0;
    for (double& v : scaled.data()) v *= 7.5;
    LpConfig cfg;
    cfg.tol = 1e-12;
    const RealMatrix a = propagate(s, y0, cfg).y, b = propagate(s, scaled, cfg).y;
    for (std::size_t i = 0; i < a.data().size(); ++i) EXPECT_NEAR(b.data()[i], 7.5 * a.data()[i], 1e-9);
  }
}

TEST(PropagateProperty, MaxIterCapReportsNotConverged) {
  RealMatrix y0(2, 2, 0.0);
  y0(0, 0) = 1.0;
  LpConfig cfg;
  cfg.max_iter = 3;
  const PropagateResult r = propagate(normalize_symmetric(adjacency(2, {{0, 1}})), y0, cfg);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3u);
  EXPECT_EQ(r.deltas.size(), 3u);
}

TEST(ClosedForm, MatchesTwoNodeFormula) {
  RealMatrix y0(2, 1, 0.0);
  y0(0, 0) = 1.0;
  const RealMatrix y = closed_form(normalize_symmetric(adjacency(2, {{0, 1}})), y0, 0.99);
  EXPECT_NEAR(y(0, 0), 1.0 / 1.99, 1e-12);
  EXPECT_NEAR(y(1, 0), 0.99 / 1.99, 1e-12);
}

TEST(Decode, TiesPickSmallestIndexAndFallback) {
  const std::vector<Utterance> u{make("a", {{"x", -1}, {"y", -1}}), make("b", {{"y", 0}})};
  const auto p = ptrs(u);
  const LabelSpace ls = build_label_space(p);
  RealMatrix y(2, 2, 0.0);
  y(0, 0) = y(0, 1) = 0.4;
  // Row 1 is all zero: fall back to the 1-best.
  const auto d = decode(y, ls, p, true);
  EXPECT_EQ(d[0].label, 0u);
  EXPECT_EQ(d[1].label, 1u);
  EXPECT_EQ(d[1].source, LabelSource::kOwnNbest);
}

TEST(Decode, SharingControlsCandidateSet) {
  const std::vector<Utterance> u{make("a", {{"x", 0}}), make("b", {{"y", 0}})};
  const auto p = ptrs(u);
  const LabelSpace ls = build_label_space(p);
  RealMatrix y(2, 2, 0.0);
  y(0, 0) = 0.1;
  y(0, 1) = 0.5;
  const auto on = decode(y, ls, p, true);
  EXPECT_EQ(on[0].text, "y");
  EXPECT_EQ(on[0].source, LabelSource::kShared);
  const auto off = decode(y, ls, p, false);
  EXPECT_EQ(off[0].text, "x");
  EXPECT_EQ(off[0].source, LabelSource::kOwnNbest);
  EXPECT_STREQ(source_name(LabelSource::kShared), "shared");
}

TEST(RescoreCluster, SingletonKeepsOneBest) {
  const std::vector<Utterance> u{make("a", {{"the cat", -1}, {"the bat", -1.5}})};
  const PropagationResult r = rescore_cluster(ptrs(u), GraphConfig{}, LpConfig{});
  EXPECT_EQ(r.chosen[0].text, "the cat");
  EXPECT_EQ(r.edges, 0u);
  EXPECT_EQ(r.flipped, 0u);
  EXPECT_THROW(rescore_cluster(std::vector<const Utterance*>{}, GraphConfig{}, LpConfig{}), InputError);
}

TEST(RescoreCluster, NeighboursFlipOutlierToAgreedHypothesis) {
  std::vector<Utterance> u;
  for (int k = 0; k < 4; ++k)
    u.push_back(make("u" + std::to_string(k), {{"the cat sat", -1.0}, {"the hat sat", -2.5}}, 0.01f * k));
  u.push_back(make("u4", {{"the bat sat", -1.0}, {"the cat sat", -1.2}, {"a bat sat", -3.0}}, 0.02f));
  const PropagationResult r = rescore_cluster(ptrs(u), GraphConfig{}, LpConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.edges, 10u);
  for (const auto& d : r.chosen) EXPECT_EQ(d.text, "the cat sat");
  EXPECT_EQ(r.flipped, 1u);
  EXPECT_EQ(r.shared, 0u);
}

TEST(RescoreCluster, SharingLetsUtteranceAdoptForeignLabel) {
  std::vector<Utterance> u;
  for (int k = 0; k < 4; ++k) u.push_back(make("u" + std::to_string(k), {{"the cat sat", -1.0}}));
  u.push_back(make("u4", {{"the bat sat", -1.0}, {"a bat sat", -1.1}}));
  LpConfig on;
  const PropagationResult shared = rescore_cluster(ptrs(u), GraphConfig{}, on);
  EXPECT_EQ(shared.chosen[4].text, "the cat sat");
  EXPECT_EQ(shared.chosen[4].source, LabelSource::kShared);
  EXPECT_EQ(shared.shared, 1u);

  LpConfig off;
  off.sharing = false;
  const PropagationResult own = rescore_cluster(ptrs(u), GraphConfig{}, off);
  EXPECT_EQ(own.chosen[4].text, "the bat sat");
  EXPECT_EQ(own.shared, 0u);
}

TEST(RescoreCluster, FarApartNodesStayIndependent) {
  const std::vector<Utterance> u{make("a", {{"x y", -1.0}, {"x z", -1.1}}, 0.0f),
                                 make("b", {{"x z", -1.0}, {"x y", -5.0}}, 50.0f)};
  const PropagationResult r = rescore_cluster(ptrs(u), GraphConfig{}, LpConfig{});
  EXPECT_EQ(r.edges, 0u);
  EXPECT_EQ(r.chosen[0].text, "x y");
  EXPECT_EQ(r.chosen[1].text, "x z");
}

}  // namespace
}  // namespace graphlp
