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

// Pools utterances whose 1-best hypotheses look alike: tf-idf vectors over
// normalized 1-best tokens, cosine distance, DBSCAN.

#ifndef GRAPHLP_CLUSTERING_HPP_
#define GRAPHLP_CLUSTERING_HPP_

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "graphlp/common.hpp"
#include "graphlp/corpus.hpp"

namespace graphlp {

/// Sparse l2-normalized tf-idf vector, entries sorted by term.
struct TfIdfVector {
  std::vector<std::pair<std::string, double>> entries;

  bool empty() const { return entries.empty(); }

  double weight(std::string_view term) const {
    for (const auto& [t, w] : entries)
      if (t == term) return w;
    return 0.0;
  }
};

inline double dot(const TfIdfVector& a, const TfIdfVector& b) {
  double s = 0.0;
  auto i = a.entries.begin(), j = b.entries.begin();
  while (i != a.entries.end() && j != b.entries.end()) {
    if (i->first < j->first) {
      ++i;
    } else if (j->first < i->first) {
      ++j;
    } else {
      s += i->second * j->second;
      ++i;
      ++j;
    }
  }
  return s;
}

/// 1 - cosine similarity, clamped to [0, 1]. An empty vector has
/// similarity 0 with everything, itself included.
inline double cosine_distance(const TfIdfVector& a, const TfIdfVector& b) {
  return std::clamp(1.0 - dot(a, b), 0.0, 1.0);
}

/// tf = raw count in the normalized 1-best, idf = ln((1+M)/(1+df)) + 1,
/// then l2 normalization. Output is aligned with corpus order.
inline std::vector<TfIdfVector> tfidf_vectors(const Corpus& corpus) {
  const std::size_t m = corpus.size();
  std::vector<std::map<std::string, double>> tf(m);
  std::map<std::string, std::size_t> df;
  for (std::size_t i = 0; i < m; ++i) {
    for (auto& tok : corpus.utterances[i].best().normalized()) tf[i][tok] += 1.0;
    for (const auto& [tok, _] : tf[i]) ++df[tok];
  }
  std::vector<TfIdfVector> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double norm2 = 0.0;
    for (const auto& [tok, count] : tf[i]) {
      const double idf =
          std::log((1.0 + static_cast<double>(m)) / (1.0 + static_cast<double>(df[tok]))) + 1.0;
      out[i].entries.emplace_back(tok, count * idf);
      norm2 += count * idf * count * idf;
    }
    const double norm = std::sqrt(norm2);
    for (auto& [_, w] : out[i].entries) w /= norm;
  }
  return out;
}

inline RealMatrix cosine_distance_matrix(const std::vector<TfIdfVector>& vecs, unsigned workers = 1) {
  const std::size_t n = vecs.size();
  RealMatrix d(n, n, 0.0);
  parallel_for(n, workers, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) d(i, j) = cosine_distance(vecs[i], vecs[j]);
  });
  return d;
}

struct DbscanParams {
  double eps = 0.3;
  std::size_t min_pts = 3;

  friend bool operator==(const DbscanParams&, const DbscanParams&) = default;
};

inline constexpr int kNoise = -1;

/// Cluster membership by point index; clusters are numbered in discovery
/// order and members listed in ascending index order.
struct Clustering {
  std::vector<int> label;  // per point, kNoise or cluster index
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::size_t> noise;
  DbscanParams params;

  friend bool operator==(const Clustering&, const Clustering&) = default;
};

inline Clustering clustering_from_labels(std::vector<int> label, DbscanParams params) {
  Clustering c;
  c.params = params;
  int n_clusters = 0;
  for (int l : label) n_clusters = std::max(n_clusters, l + 1);
  c.clusters.resize(static_cast<std::size_t>(n_clusters));
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] == kNoise)
      c.noise.push_back(i);
    else
      c.clusters[static_cast<std::size_t>(label[i])].push_back(i);
  }
  c.label = std::move(label);
  return c;
}

/// DBSCAN over a precomputed distance matrix. A point is core when at least
/// min_pts points (itself included) lie within eps. Points are visited in
/// index order; a border point joins the first cluster that reaches it.
inline Clustering dbscan(const RealMatrix& dist, const DbscanParams& params) {
  if (!(params.eps > 0.0)) throw InputError("dbscan eps must be > 0");
  if (params.min_pts < 1) throw InputError("dbscan min_pts must be >= 1");
  const std::size_t n = dist.rows();
  constexpr int kUnvisited = -2;
  std::vector<int> label(n, kUnvisited);
  auto neighbors = [&](std::size_t p) {
    std::vector<std::size_t> out;
    for (std::size_t q = 0; q < n; ++q)
      if (q == p || dist(p, q) <= params.eps) out.push_back(q);
    return out;
  };
  int next_cluster = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (label[p] != kUnvisited) continue;
    auto seeds = neighbors(p);
    if (seeds.size() < params.min_pts) {
      label[p] = kNoise;
      continue;
    }
    const int c = next_cluster++;
    label[p] = c;
    std::deque<std::size_t> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
      const std::size_t q = queue.front();
      queue.pop_front();
      if (label[q] == kNoise) label[q] = c;  // border point
      if (label[q] != kUnvisited) continue;
      label[q] = c;
      auto nq = neighbors(q);
      if (nq.size() >= params.min_pts) queue.insert(queue.end(), nq.begin(), nq.end());
    }
  }
  return clustering_from_labels(std::move(label), params);
}

inline Clustering dbscan(const std::vector<TfIdfVector>& vecs, const DbscanParams& params) {
  return dbscan(cosine_distance_matrix(vecs), params);
}

struct TuneResult {
  DbscanParams params;
  std::size_t objective = 0;  // clusters with size in [size_lo, size_hi]
  std::size_t noise = 0;
};

/// Grid search maximizing the number of clusters whose size lies in
/// [size_lo, size_hi]. Ties: fewer noise points, then smaller eps, then
/// smaller min_pts.
inline TuneResult tune_dbscan(const RealMatrix& dist, const std::vector<double>& eps_grid,
                              const std::vector<std::size_t>& min_pts_grid, std::size_t size_lo = 4,
                              std::size_t size_hi = 800) {
  if (eps_grid.empty() || min_pts_grid.empty()) throw InputError("empty DBSCAN tuning grid");
  std::optional<TuneResult> best;
  for (double eps : eps_grid) {
    for (std::size_t mp : min_pts_grid) {
      const Clustering c = dbscan(dist, {eps, mp});
      TuneResult r{{eps, mp}, 0, c.noise.size()};
      for (const auto& cl : c.clusters)
        if (cl.size() >= size_lo && cl.size() <= size_hi) ++r.objective;
      const bool better =
          !best || r.objective > best->objective ||
          (r.objective == best->objective &&
           (r.noise < best->noise ||
            (r.noise == best->noise &&
             (eps < best->params.eps ||
              (eps == best->params.eps && mp < best->params.min_pts)))));
      if (better) best = r;
    }
  }
  return *best;
}

/// Utterances left out of every cluster; they keep their baseline 1-best.
inline std::vector<std::string> passthrough_ids(const Clustering& clustering, const Corpus& corpus) {
  std::vector<std::string> out;
  out.reserve(clustering.noise.size());
  for (std::size_t i : clustering.noise) out.push_back(corpus.utterances[i].id);
  return out;
}

inline void write_clustering_csv(std::ostream& os, const Clustering& c, const Corpus& corpus) {
  os << "id,cluster_index\n";
  for (std::size_t i = 0; i < corpus.size(); ++i)
    os << csv_field(corpus.utterances[i].id) << ',' << c.label[i] << '\n';
}

}  // namespace graphlp

#endif  // GRAPHLP_CLUSTERING_HPP_
