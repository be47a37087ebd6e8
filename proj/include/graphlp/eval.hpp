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

#ifndef GRAPHLP_EVAL_HPP_
#define GRAPHLP_EVAL_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "graphlp/common.hpp"
#include "graphlp/corpus.hpp"

namespace graphlp {

struct EditStats {
  std::int64_t substitutions = 0;
  std::int64_t deletions = 0;
  std::int64_t insertions = 0;
  std::int64_t ref_len = 0;

  std::int64_t errors() const { return substitutions + deletions + insertions; }

  EditStats& operator+=(const EditStats& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    ref_len += o.ref_len;
    return *this;
  }

  friend bool operator==(const EditStats&, const EditStats&) = default;
};

/// Word-level Levenshtein alignment of hyp against ref with unit costs.
/// The backtrace prefers a diagonal (match/substitution) step whenever it is
/// on an optimal path, then deletion, then insertion.
inline EditStats word_edit(const Tokens& ref, const Tokens& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  Matrix<std::int64_t> dp(n + 1, m + 1);
  for (std::size_t i = 0; i <= n; ++i) dp(i, 0) = static_cast<std::int64_t>(i);
  for (std::size_t j = 0; j <= m; ++j) dp(0, j) = static_cast<std::int64_t>(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      dp(i, j) = std::min({dp(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1),
                           dp(i - 1, j) + 1, dp(i, j - 1) + 1});

  EditStats st;
  st.ref_len = static_cast<std::int64_t>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (dp(i, j) == dp(i - 1, j - 1) + (same ? 0 : 1)) {
        if (!same) ++st.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && dp(i, j) == dp(i - 1, j) + 1) {
      ++st.deletions;
      --i;
    } else {
      ++st.insertions;
      --j;
    }
  }
  return st;
}

/// Plain Levenshtein distance, two-row DP.
inline std::int64_t word_edit_distance(const Tokens& a, const Tokens& b) {
  std::vector<std::int64_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<std::int64_t>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<std::int64_t>(i);
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1), prev[j] + 1,
                         cur[j - 1] + 1});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

struct ErrorRates {
  double wer = 0.0;  // fraction, NaN when no reference words
  double ser = 0.0;  // fraction
  std::int64_t n_utts = 0;
  std::int64_t n_sentence_errors = 0;
  EditStats stats;

  void add(const EditStats& st) {
    stats += st;
    ++n_utts;
    if (st.errors() > 0) ++n_sentence_errors;
  }

  void finalize() {
    wer = stats.ref_len > 0 ? static_cast<double>(stats.errors()) / static_cast<double>(stats.ref_len)
                            : std::numeric_limits<double>::quiet_NaN();
    ser = n_utts > 0 ? static_cast<double>(n_sentence_errors) / static_cast<double>(n_utts) : 0.0;
  }
};

inline constexpr const char* kDefaultGroup = "Others";

struct EvalReport {
  ErrorRates overall;
  std::map<std::string, ErrorRates> per_group;
  std::optional<double> oracle_nbest_wer;
};

/// One scored utterance: the id and the chosen hypothesis text.
struct Choice {
  std::string id;
  std::string text;
};

/// Scores `choices` against the corpus references. Utterances whose id is
/// missing from `groups` land in the "Others" group.
inline EvalReport score_corpus(const std::vector<Choice>& choices, const Corpus& refs,
                               const std::unordered_map<std::string, std::string>& groups = {},
                               const NormalizeOptions& norm = {}) {
  std::unordered_map<std::string, const Utterance*> by_id;
  for (const auto& u : refs.utterances) by_id.emplace(u.id, &u);
  EvalReport rep;
  for (const auto& c : choices) {
    auto it = by_id.find(c.id);
    if (it == by_id.end() || !it->second->meta.reference)
      throw InputError("no reference for utterance '" + c.id + "'");
    const Tokens ref = normalize_tokens(join_tokens(*it->second->meta.reference), norm);
    const EditStats st = word_edit(ref, normalize_tokens(c.text, norm));
    rep.overall.add(st);
    auto g = groups.find(c.id);
    rep.per_group[g == groups.end() ? kDefaultGroup : g->second].add(st);
  }
  rep.overall.finalize();
  for (auto& [_, r] : rep.per_group) r.finalize();
  return rep;
}

/// Baseline choices: each utterance's 1-best.
inline std::vector<Choice> baseline_choices(const Corpus& corpus) {
  std::vector<Choice> out;
  out.reserve(corpus.size());
  for (const auto& u : corpus.utterances) out.push_back({u.id, u.best().text()});
  return out;
}

/// WER when each utterance picks whichever of its top-n hypotheses is
/// closest to the reference (ties go to the higher-ranked entry).
inline double oracle_nbest_wer(const Corpus& corpus, std::size_t n, const NormalizeOptions& norm = {}) {
  if (n == 0) throw InputError("oracle n must be >= 1");
  EditStats total;
  for (const auto& u : corpus.utterances) {
    if (!u.meta.reference) throw InputError("no reference for utterance '" + u.id + "'");
    const Tokens ref = normalize_tokens(join_tokens(*u.meta.reference), norm);
    std::optional<EditStats> best;
    for (std::size_t k = 0; k < std::min(n, u.nbest.size()); ++k) {
      const EditStats st = word_edit(ref, normalize_tokens(u.nbest[k].text(), norm));
      if (!best || st.errors() < best->errors()) best = st;
    }
    total += *best;
  }
  if (total.ref_len == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(total.errors()) / static_cast<double>(total.ref_len);
}

// ---------------------------------------------------------------------------
// Side-by-side baseline vs rescored reporting

struct ComparisonRow {
  std::string group;
  ErrorRates baseline;
  ErrorRates rescored;
};

/// Cluster-size bands used when breaking results down by graph size.
inline std::string size_band(std::size_t n) {
  if (n <= 5) return "n<=5";
  if (n <= 10) return "5<n<=10";
  if (n <= 50) return "10<n<=50";
  return "n>50";
}

/// Builds comparison rows for an arbitrary grouping. `keys` lists group
/// names in the order rows should appear; ids absent from `group_of` are
/// skipped.
inline std::vector<ComparisonRow> compare_by(
    const std::vector<Choice>& baseline, const std::vector<Choice>& rescored, const Corpus& refs,
    const std::unordered_map<std::string, std::string>& group_of,
    const std::vector<std::string>& keys, const NormalizeOptions& norm = {}) {
  if (baseline.size() != rescored.size())
    throw InputError("baseline and rescored choices cover different utterance sets");
  std::unordered_map<std::string, std::size_t> rescored_idx;
  for (std::size_t i = 0; i < rescored.size(); ++i) rescored_idx.emplace(rescored[i].id, i);
  std::map<std::string, std::pair<std::vector<Choice>, std::vector<Choice>>> split;
  for (const auto& b : baseline) {
    auto r = rescored_idx.find(b.id);
    if (r == rescored_idx.end())
      throw InputError("utterance '" + b.id + "' missing from rescored choices");
    auto g = group_of.find(b.id);
    if (g == group_of.end()) continue;
    split[g->second].first.push_back(b);
    split[g->second].second.push_back(rescored[r->second]);
  }
  std::vector<ComparisonRow> rows;
  for (const auto& key : keys) {
    auto it = split.find(key);
    if (it == split.end()) continue;
    rows.push_back({key, score_corpus(it->second.first, refs, {}, norm).overall,
                    score_corpus(it->second.second, refs, {}, norm).overall});
  }
  return rows;
}

inline std::string percent(double frac) {
  if (std::isnan(frac)) return "nan";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * frac;
  return os.str();
}

inline void write_comparison_csv(std::ostream& os, const std::string& section,
                                 const std::vector<ComparisonRow>& rows) {
  for (const auto& r : rows)
    os << csv_field(section) << ',' << csv_field(r.group) << ',' << r.baseline.n_utts << ','
       << percent(r.baseline.wer) << ',' << percent(r.baseline.ser) << ','
       << percent(r.rescored.wer) << ',' << percent(r.rescored.ser) << '\n';
}

inline void write_comparison_table(std::ostream& os, const std::string& title,
                                   const std::vector<ComparisonRow>& rows) {
  os << title << '\n';
  os << std::left << std::setw(20) << "group" << std::right << std::setw(8) << "#utts"
     << std::setw(10) << "base WER" << std::setw(10) << "base SER" << std::setw(10) << "LP WER"
     << std::setw(10) << "LP SER" << '\n';
  for (const auto& r : rows)
    os << std::left << std::setw(20) << r.group << std::right << std::setw(8) << r.baseline.n_utts
       << std::setw(10) << percent(r.baseline.wer) << std::setw(10) << percent(r.baseline.ser)
       << std::setw(10) << percent(r.rescored.wer) << std::setw(10) << percent(r.rescored.ser)
       << '\n';
  os << '\n';
}

}  // namespace graphlp

#endif  // GRAPHLP_EVAL_HPP_
