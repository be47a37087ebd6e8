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

// Per-cluster graph assembly: the pooled hypothesis label space, initial
// soft labels from beam scores, and the binary affinity matrix.

#ifndef GRAPHLP_GRAPH_HPP_
#define GRAPHLP_GRAPH_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "graphlp/common.hpp"
#include "graphlp/corpus.hpp"
#include "graphlp/eval.hpp"

namespace graphlp {

/// Unique normalized hypotheses pooled from a cluster's top-N lists.
struct LabelSpace {
  std::vector<Tokens> hyps;                     // normalized identity
  std::vector<std::string> display;             // text as first seen
  std::vector<std::vector<std::size_t>> own;    // per utterance, sorted indices
  std::map<Tokens, std::size_t> lookup;
  std::size_t n_top = 3;

  std::size_t size() const { return hyps.size(); }

  bool owns(std::size_t utt, std::size_t label) const {
    return std::binary_search(own[utt].begin(), own[utt].end(), label);
  }

  std::size_t index_of(const Tokens& normalized) const {
    auto it = lookup.find(normalized);
    if (it == lookup.end()) throw InvariantError("hypothesis not in label space");
    return it->second;
  }
};

/// Labels are numbered by first appearance, walking utterances in the given
/// order and each top-min(n_top, B) list in rank order. Callers pass
/// utterances sorted by id.
inline LabelSpace build_label_space(std::span<const Utterance* const> utts, std::size_t n_top = 3) {
  if (n_top < 1) throw InputError("n_top must be >= 1");
  LabelSpace ls;
  ls.n_top = n_top;
  ls.own.resize(utts.size());
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const auto& nbest = utts[i]->nbest;
    if (nbest.empty()) throw InputError("utterance '" + utts[i]->id + "' has no hypotheses");
    for (std::size_t k = 0; k < std::min(n_top, nbest.size()); ++k) {
      Tokens key = nbest[k].normalized();
      auto [it, inserted] = ls.lookup.try_emplace(key, ls.hyps.size());
      if (inserted) {
        ls.hyps.push_back(std::move(key));
        ls.display.push_back(nbest[k].text());
      }
      ls.own[i].push_back(it->second);
    }
    std::sort(ls.own[i].begin(), ls.own[i].end());
    ls.own[i].erase(std::unique(ls.own[i].begin(), ls.own[i].end()), ls.own[i].end());
  }
  return ls;
}

/// Row i holds softmax(beam scores of utterance i) restricted to its top-N
/// entries, written at their label indices. Entries that normalize to the
/// same label add up.
inline RealMatrix init_soft_labels(std::span<const Utterance* const> utts, const LabelSpace& ls) {
  RealMatrix y(utts.size(), ls.size(), 0.0);
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const auto& nbest = utts[i]->nbest;
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& h : nbest) {
      if (!std::isfinite(h.log_likelihood))
        throw InputError("non-finite score in utterance '" + utts[i]->id + "'");
      top = std::max(top, h.log_likelihood);
    }
    double z = 0.0;
    for (const auto& h : nbest) z += std::exp(h.log_likelihood - top);
    for (std::size_t k = 0; k < std::min(ls.n_top, nbest.size()); ++k)
      y(i, ls.index_of(nbest[k].normalized())) += std::exp(nbest[k].log_likelihood - top) / z;
  }
  return y;
}

/// Minimum word edit distance between any pair from the two top-N lists.
inline std::int64_t min_hyp_edit_distance(const Utterance& a, const Utterance& b, std::size_t n_top = 3) {
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (std::size_t i = 0; i < std::min(n_top, a.nbest.size()); ++i) {
    const Tokens ha = a.nbest[i].normalized();
    for (std::size_t j = 0; j < std::min(n_top, b.nbest.size()); ++j)
      best = std::min(best, word_edit_distance(ha, b.nbest[j].normalized()));
  }
  return best;
}

struct AffinityGraph {
  Matrix<std::uint8_t> w;  // symmetric, zero diagonal
  std::vector<std::string> node_ids;
  double theta = 1.5;
  std::int64_t prune_limit = 4;

  std::size_t size() const { return node_ids.size(); }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < w.rows(); ++i)
      for (std::size_t j = i + 1; j < w.cols(); ++j) n += w(i, j);
    return n;
  }
};

/// W_ij = 1 iff i != j, distance < theta and the top-N lists come within
/// prune_limit word edits of each other.
inline AffinityGraph build_affinity(std::span<const Utterance* const> utts, const RealMatrix& distances,
                                    double theta = 1.5, std::int64_t prune_limit = 4,
                                    std::size_t n_top = 3) {
  const std::size_t m = utts.size();
  if (distances.rows() != m || distances.cols() != m)
    throw InputError("distance matrix is " + std::to_string(distances.rows()) + "x" +
                     std::to_string(distances.cols()) + ", expected " + std::to_string(m) +
                     "x" + std::to_string(m));
  AffinityGraph g;
  g.w = Matrix<std::uint8_t>(m, m, 0);
  g.theta = theta;
  g.prune_limit = prune_limit;
  for (const auto* u : utts) g.node_ids.push_back(u->id);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (!(distances(i, j) < theta)) continue;
      if (min_hyp_edit_distance(*utts[i], *utts[j], n_top) > prune_limit) continue;
      g.w(i, j) = g.w(j, i) = 1;
    }
  }
  return g;
}

inline void write_edge_list_csv(std::ostream& os, const AffinityGraph& g) {
  os << "id_a,id_b\n";
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = i + 1; j < g.size(); ++j)
      if (g.w(i, j)) os << csv_field(g.node_ids[i]) << ',' << csv_field(g.node_ids[j]) << '\n';
}

inline void write_label_space_csv(std::ostream& os, const LabelSpace& ls) {
  os << "index,hypothesis\n";
  for (std::size_t c = 0; c < ls.size(); ++c) os << c << ',' << csv_field(join_tokens(ls.hyps[c])) << '\n';
}

}  // namespace graphlp

#endif  // GRAPHLP_GRAPH_HPP_
