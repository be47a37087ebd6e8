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

// Equal-error-rate harness for choosing an utterance distance metric.
// Positive trials pair utterances with the same reference transcript,
// negative trials pair different ones; a good metric puts positives below
// negatives.

#ifndef GRAPHLP_SIMEVAL_HPP_
#define GRAPHLP_SIMEVAL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "graphlp/common.hpp"
#include "graphlp/corpus.hpp"
#include "graphlp/distance.hpp"

namespace graphlp {

struct Trial {
  std::size_t a = 0;  // corpus indices, a < b
  std::size_t b = 0;
  bool target = false;

  friend bool operator==(const Trial&, const Trial&) = default;
};

struct TrialSet {
  std::vector<Trial> trials;
  std::uint64_t seed = 0;
  std::size_t requested_pos = 0;
  std::size_t requested_neg = 0;
  /// How many requested pairs could not be drawn for lack of eligible pairs.
  std::size_t pos_shortfall = 0;
  std::size_t neg_shortfall = 0;

  std::size_t count(bool target) const {
    return static_cast<std::size_t>(std::count_if(
        trials.begin(), trials.end(), [&](const Trial& t) { return t.target == target; }));
  }

  friend bool operator==(const TrialSet&, const TrialSet&) = default;
};

/// Samples positive and negative pairs uniformly without replacement from
/// all eligible unordered pairs. When fewer eligible pairs exist than
/// requested, all of them are taken and the shortfall is recorded.
inline TrialSet generate_trials(const Corpus& corpus, std::size_t n_pos, std::size_t n_neg,
                                std::uint64_t seed) {
  std::vector<std::string> keys;
  keys.reserve(corpus.size());
  for (const auto& u : corpus.utterances) {
    if (!u.meta.reference) throw InputError("utterance '" + u.id + "' has no reference");
    keys.push_back(join_tokens(normalize_tokens(join_tokens(*u.meta.reference))));
  }
  std::vector<Trial> pos, neg;
  for (std::size_t i = 0; i < keys.size(); ++i)
    for (std::size_t j = i + 1; j < keys.size(); ++j)
      (keys[i] == keys[j] ? pos : neg).push_back({i, j, keys[i] == keys[j]});

  TrialSet out;
  out.seed = seed;
  out.requested_pos = n_pos;
  out.requested_neg = n_neg;
  out.pos_shortfall = n_pos > pos.size() ? n_pos - pos.size() : 0;
  out.neg_shortfall = n_neg > neg.size() ? n_neg - neg.size() : 0;
  Rng rng(seed);
  for (std::size_t k : rng.sample_indices(pos.size(), n_pos)) out.trials.push_back(pos[k]);
  for (std::size_t k : rng.sample_indices(neg.size(), n_neg)) out.trials.push_back(neg[k]);
  return out;
}

struct ScoredTrial {
  double distance = 0.0;
  bool target = false;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

/// EER by threshold sweep. Candidate thresholds are the midpoints between
/// consecutive distinct scores plus one below the minimum and one above the
/// maximum. At threshold t, FAR is the fraction of negatives with
/// distance < t and FRR the fraction of positives with distance >= t. The
/// first (smallest) threshold minimizing |FAR - FRR| wins and the EER is
/// (FAR + FRR) / 2 there.
inline EerResult compute_eer(std::vector<ScoredTrial> scores) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& s : scores) {
    if (!std::isfinite(s.distance)) throw InputError("non-finite trial score");
    (s.target ? n_pos : n_neg)++;
  }
  if (n_pos == 0 || n_neg == 0) throw InputError("EER needs at least one positive and one negative trial");
  std::sort(scores.begin(), scores.end(),
            [](const ScoredTrial& a, const ScoredTrial& b) { return a.distance < b.distance; });

  // Walk the sorted scores; after consuming every score <= v, the counts
  // below any threshold in (v, next) are fixed.
  auto rates = [&](std::size_t neg_below, std::size_t pos_below) {
    return std::pair{static_cast<double>(neg_below) / static_cast<double>(n_neg),
                     static_cast<double>(n_pos - pos_below) / static_cast<double>(n_pos)};
  };
  // |FAR - FRR| compared as |neg_below * n_pos - pos_above * n_neg| so that
  // equal gaps tie exactly instead of by rounding.
  EerResult best;
  std::uint64_t best_gap = std::numeric_limits<std::uint64_t>::max();
  auto consider = [&](double threshold, std::size_t neg_below, std::size_t pos_below) {
    const std::uint64_t a = static_cast<std::uint64_t>(neg_below) * n_pos;
    const std::uint64_t b = static_cast<std::uint64_t>(n_pos - pos_below) * n_neg;
    const std::uint64_t gap = a > b ? a - b : b - a;
    if (gap < best_gap) {
      best_gap = gap;
      const auto [far, frr] = rates(neg_below, pos_below);
      best = {(far + frr) / 2.0, threshold, far, frr};
    }
  };
  consider(scores.front().distance - 1.0, 0, 0);
  std::size_t neg_below = 0, pos_below = 0;
  for (std::size_t i = 0; i < scores.size();) {
    const double v = scores[i].distance;
    while (i < scores.size() && scores[i].distance == v) {
      (scores[i].target ? pos_below : neg_below)++;
      ++i;
    }
    const double t = i < scores.size() ? v + (scores[i].distance - v) / 2.0 : v + 1.0;
    consider(t, neg_below, pos_below);
  }
  return best;
}

struct MetricEer {
  DistanceMetric metric;
  EerResult result;
};

/// Scores every trial under each metric (trials distributed across
/// `workers` threads) and computes one EER per metric.
inline std::vector<MetricEer> metric_selection_report(const Corpus& corpus, const TrialSet& trials,
                                                      const std::vector<DistanceMetric>& metrics,
                                                      unsigned workers = 1) {
  std::vector<MetricEer> rows;
  for (const auto& m : metrics) {
    std::vector<ScoredTrial> scored(trials.trials.size());
    parallel_for(scored.size(), workers, [&](std::size_t k) {
      const Trial& t = trials.trials[k];
      scored[k] = {distance(corpus.utterances[t.a].frames, corpus.utterances[t.b].frames, m),
                   t.target};
    });
    rows.push_back({m, compute_eer(std::move(scored))});
  }
  return rows;
}

/// The six metric variants: {LFE, DTW, d-DTW} x {unnormalized, normalized}.
inline std::vector<DistanceMetric> all_metric_variants(
    TraditionalVariant traditional = TraditionalVariant::kIndependent) {
  std::vector<DistanceMetric> out;
  for (MetricKind k : {MetricKind::kLastFrameEuclidean, MetricKind::kTraditionalDtw,
                       MetricKind::kDependentDtw})
    for (bool norm : {false, true}) out.push_back({k, norm, traditional});
  return out;
}

inline void write_eer_csv(std::ostream& os, const std::vector<MetricEer>& rows) {
  os << "metric,length_normalized,eer_percent,threshold\n";
  for (const auto& r : rows)
    os << metric_name(r.metric.kind) << ',' << (r.metric.normalized ? "true" : "false") << ','
       << format_real(100.0 * r.result.eer) << ',' << format_real(r.result.threshold) << '\n';
}

}  // namespace graphlp

#endif  // GRAPHLP_SIMEVAL_HPP_
