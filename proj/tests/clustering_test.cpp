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

#include "graphlp/clustering.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "graphlp/synth.hpp"
#include "oracles.hpp"

namespace graphlp {
namespace {

Corpus docs(const std::vector<std::string>& one_bests) {
  Corpus c;
  c.dim = 1;
  for (std::size_t i = 0; i < one_bests.size(); ++i) {
    Utterance u;
    u.id = "d" + std::to_string(i);
    u.frames.append_row(std::vector<float>{0.0f});
    u.nbest.push_back({normalize_tokens(one_bests[i], false, false), 0.0});
    c.utterances.push_back(std::move(u));
  }
  return c;
}

RealMatrix random_points_distance(Rng& rng, std::size_t n) {
  std::vector<std::pair<double, double>> pts(n);
  // A few blobs plus scatter, so cores, borders and noise all occur.
  for (auto& p : pts) {
    const double cx = static_cast<double>(rng.uniform_int(0, 3)) * 3.0;
    const double spread = rng.bernoulli(0.2) ? 4.0 : 0.6;
    p = {cx + rng.uniform(-spread, spread), rng.uniform(-spread, spread)};
  }
  RealMatrix d(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d(i, j) = std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second);
  return d;
}

TEST(TfIdf, IdenticalDocumentsHaveZeroDistance) {
  const auto v = tfidf_vectors(docs({"the cat sat", "The cat sat."}));
  EXPECT_NEAR(cosine_distance(v[0], v[1]), 0.0, 1e-12);
}

TEST(TfIdf, DisjointVocabularyHasDistanceOne) {
  const auto v = tfidf_vectors(docs({"a b", "c d"}));
  EXPECT_EQ(cosine_distance(v[0], v[1]), 1.0);
}

TEST(TfIdf, ToyCorpusMatchesHandComputedSmoothIdf) {
  const auto v = tfidf_vectors(docs({"a b", "a c", "a a d"}));
  // M = 3; df(a) = 3, df(b) = df(c) = df(d) = 1.
  const double idf_a = std::log(4.0 / 4.0) + 1.0;
  const double idf_rare = std::log(4.0 / 2.0) + 1.0;
  const double n0 = std::sqrt(idf_a * idf_a + idf_rare * idf_rare);
  EXPECT_NEAR(v[0].weight("a"), idf_a / n0, 1e-12);
  EXPECT_NEAR(v[0].weight("b"), idf_rare / n0, 1e-12);
  const double n2 = std::sqrt(4 * idf_a * idf_a + idf_rare * idf_rare);
  EXPECT_NEAR(v[2].weight("a"), 2 * idf_a / n2, 1e-12);
  EXPECT_NEAR(v[2].weight("d"), idf_rare / n2, 1e-12);
  EXPECT_EQ(v[2].weight("b"), 0.0);
}

TEST(TfIdf, UnitNormAndEmptyDocument) {
  const auto v = tfidf_vectors(docs({"x y y z", "", "z"}));
  EXPECT_NEAR(dot(v[0], v[0]), 1.0, 1e-12);
  EXPECT_NEAR(dot(v[2], v[2]), 1.0, 1e-12);
  EXPECT_TRUE(v[1].empty());
  EXPECT_EQ(cosine_distance(v[1], v[1]), 1.0);
  for (const auto& [_, w] : v[0].entries) EXPECT_GT(w, 0.0);
}

TEST(Dbscan, IdenticalPointsFormOneCluster) {
  const auto v = tfidf_vectors(docs({"a b", "a b", "a b", "a b"}));
  const Clustering c = dbscan(v, {0.1, 2});
  ASSERT_EQ(c.clusters.size(), 1u);
  EXPECT_EQ(c.clusters[0].size(), 4u);
  EXPECT_TRUE(c.noise.empty());
}

TEST(Dbscan, OrthogonalGroupsFormTwoClusters) {
  const auto v = tfidf_vectors(docs({"a b", "x y", "a b", "x y", "a b"}));
  const Clustering c = dbscan(v, {0.5, 2});
  ASSERT_EQ(c.clusters.size(), 2u);
  EXPECT_EQ(c.clusters[0], (std::vector<std::size_t>{0, 2, 4}));
  EXPECT_EQ(c.clusters[1], (std::vector<std::size_t>{1, 3}));
}

TEST(Dbscan, RejectsBadParams) {
  RealMatrix d(1, 1, 0.0);
  EXPECT_THROW(dbscan(d, {0.0, 2}), InputError);
  EXPECT_THROW(dbscan(d, {0.1, 0}), InputError);
}

TEST(Dbscan, ThirtyPointToyMatchesNaiveDefinition) {
  Rng rng(30);
  const RealMatrix d = random_points_distance(rng, 30);
  const Clustering c = dbscan(d, {1.0, 4});
  EXPECT_EQ(c.label, oracle::dbscan(d, 1.0, 4));
}

TEST(DbscanProperty, OracleEquivalenceAndPartition) {
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(0, 49);
    const RealMatrix d = random_points_distance(rng, n);
    const double eps = rng.uniform(0.3, 2.0);
    const std::size_t min_pts = 1 + rng.uniform_int(0, 5);
    const Clustering c = dbscan(d, {eps, min_pts});
    ASSERT_EQ(c.label, oracle::dbscan(d, eps, min_pts)) << "trial " << trial;
    std::vector<int> seen(n, 0);
    for (const auto& cl : c.clusters)
      for (std::size_t i : cl) ++seen[i];
    for (std::size_t i : c.noise) ++seen[i];
    for (int s : seen) EXPECT_EQ(s, 1);
  }
}

TEST(TuneDbscan, SingleCellAndArgmax) {
  const auto v = tfidf_vectors(docs({"a b", "a b", "a b", "a b", "x y", "x y", "x y", "x y", "q"}));
  const RealMatrix d = cosine_distance_matrix(v);
  const TuneResult one = tune_dbscan(d, {0.2}, {2});
  EXPECT_EQ(one.params, (DbscanParams{0.2, 2}));
  EXPECT_EQ(one.objective, 2u);
  EXPECT_EQ(one.noise, 1u);

  // eps 0.999 merges nothing further here (the groups are orthogonal), but
  // min_pts 5 kills both clusters: the 2-cluster settings win, smallest eps first.
  const TuneResult best = tune_dbscan(d, {0.999, 0.2}, {5, 2});
  EXPECT_EQ(best.objective, 2u);
  EXPECT_EQ(best.params, (DbscanParams{0.2, 2}));
  EXPECT_THROW(tune_dbscan(d, {}, {2}), InputError);
}

TEST(TuneDbscan, PrefersMoreInBandClusters) {
  // Five in-band groups of 4 at small eps; a large eps merges them into 2.
  std::vector<std::string> texts;
  for (int g = 0; g < 5; ++g)
    for (int k = 0; k < 4; ++k) texts.push_back("w" + std::to_string(g) + " shared" + std::to_string(g / 3));
  const RealMatrix d = cosine_distance_matrix(tfidf_vectors(docs(texts)));
  const TuneResult r = tune_dbscan(d, {0.95, 0.1}, {2});
  EXPECT_EQ(r.objective, 5u);
  EXPECT_EQ(r.params.eps, 0.1);
}

TEST(TuneDbscan, RecoversPlantedGroups) {
  SynthConfig sc;
  sc.n_groups = 10;
  sc.group_size_min = sc.group_size_max = 8;
  sc.corruption_rate = 0.0;
  sc.seed = 17;
  const Corpus c = generate(sc);
  const RealMatrix d = cosine_distance_matrix(tfidf_vectors(c));
  std::vector<double> eps_grid;
  for (int k = 1; k <= 14; ++k) eps_grid.push_back(0.05 * k);
  const TuneResult r = tune_dbscan(d, eps_grid, {2, 3, 4, 5});
  const Clustering cl = dbscan(d, r.params);
  std::size_t recovered = 0;
  for (const auto& members : cl.clusters) {
    std::set<Tokens> refs;
    for (std::size_t i : members) refs.insert(*c.utterances[i].meta.reference);
    if (refs.size() == 1 && members.size() == 8) ++recovered;
  }
  EXPECT_GE(recovered, 9u);
  EXPECT_GE(r.objective, 9u);
}

TEST(Passthrough, NoiseIds) {
  const Corpus c = docs({"a", "a", "b", "c"});
  const RealMatrix d = cosine_distance_matrix(tfidf_vectors(c));
  EXPECT_EQ(passthrough_ids(dbscan(d, {0.1, 1}), c), std::vector<std::string>{});
  EXPECT_EQ(passthrough_ids(dbscan(d, {0.1, 10}), c), (std::vector<std::string>{"d0", "d1", "d2", "d3"}));
  const Clustering mixed = dbscan(d, {0.1, 2});
  EXPECT_EQ(passthrough_ids(mixed, c), (std::vector<std::string>{"d2", "d3"}));

  std::ostringstream os;
  write_clustering_csv(os, mixed, c);
  EXPECT_EQ(os.str(), "id,cluster_index\nd0,0\nd1,0\nd2,-1\nd3,-1\n");
}

}  // namespace
}  // namespace graphlp
