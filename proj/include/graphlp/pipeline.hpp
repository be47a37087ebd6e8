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

// End-to-end commands shared by the graphlp tool and the test suites.

#ifndef GRAPHLP_PIPELINE_HPP_
#define GRAPHLP_PIPELINE_HPP_

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "graphlp/clustering.hpp"
#include "graphlp/common.hpp"
#include "graphlp/corpus.hpp"
#include "graphlp/distance.hpp"
#include "graphlp/eval.hpp"
#include "graphlp/graph.hpp"
#include "graphlp/labelprop.hpp"
#include "graphlp/simeval.hpp"
#include "json.hpp"

namespace graphlp {

struct PipelineConfig {
  // distance
  std::string metric = "ddtw";
  bool length_normalized = true;
  std::string traditional_variant = "independent";
  // graph
  double theta = 1.5;
  std::size_t n_top = 3;
  std::int64_t prune_limit = 4;
  // propagation
  double alpha = 0.9;
  double tol = 1e-8;
  std::size_t max_iter = 1000;
  bool sharing = true;
  // clustering: fixed parameters when eps > 0, otherwise grid search
  double dbscan_eps = 0.0;
  std::size_t dbscan_min_pts = 3;
  std::vector<double> eps_grid = {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7};
  std::vector<std::size_t> min_pts_grid = {2, 3, 4, 5};
  std::size_t cluster_size_lo = 4;
  std::size_t cluster_size_hi = 800;
  // scoring normalization
  bool casefold = true;
  bool strip_punct = true;
  // trials
  std::size_t n_pos = 10000;
  std::size_t n_neg = 50000;
  std::uint64_t seed = 0;

  DistanceMetric distance_metric() const {
    DistanceMetric m;
    m.kind = parse_metric_kind(metric);
    m.normalized = length_normalized;
    if (traditional_variant == "independent")
      m.traditional = TraditionalVariant::kIndependent;
    else if (traditional_variant == "linear_dependent")
      m.traditional = TraditionalVariant::kLinearDependent;
    else
      throw InputError("traditional_variant must be independent|linear_dependent");
    return m;
  }

  LpConfig lp() const { return {alpha, tol, max_iter, sharing}; }

  GraphConfig graph() const { return {distance_metric(), theta, n_top, prune_limit}; }

  NormalizeOptions normalization() const { return {casefold, strip_punct}; }

  void validate() const {
    distance_metric();
    lp().validate();
    if (n_top < 1) throw InputError("n_top must be >= 1");
    if (prune_limit < 0) throw InputError("prune_limit must be >= 0");
    if (dbscan_eps < 0.0) throw InputError("dbscan_eps must be >= 0");
    if (dbscan_min_pts < 1) throw InputError("dbscan_min_pts must be >= 1");
    if (dbscan_eps == 0.0 && (eps_grid.empty() || min_pts_grid.empty()))
      throw InputError("eps_grid and min_pts_grid must be non-empty when dbscan_eps is 0");
    for (double e : eps_grid)
      if (!(e > 0.0)) throw InputError("eps_grid entries must be > 0");
    for (std::size_t m : min_pts_grid)
      if (m < 1) throw InputError("min_pts_grid entries must be >= 1");
    if (cluster_size_lo > cluster_size_hi) throw InputError("cluster_size_lo exceeds cluster_size_hi");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PipelineConfig, metric, length_normalized,
                                                traditional_variant, theta, n_top, prune_limit, alpha,
                                                tol, max_iter, sharing, dbscan_eps, dbscan_min_pts,
                                                eps_grid, min_pts_grid, cluster_size_lo,
                                                cluster_size_hi, casefold, strip_punct, n_pos, n_neg,
                                                seed)

/// Reads a JSON config object into `T`, rejecting keys `T` does not have.
template <typename T>
T config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  const nlohmann::json known = T{};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw InputError("unknown config field '" + key + "'");
  T cfg;
  try {
    cfg = j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad config value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

template <typename T>
T load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open config " + path.string());
  try {
    return config_from_json<T>(nlohmann::json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("config " + path.string() + ": " + e.what());
  }
}

template <typename T>
void write_config(const std::filesystem::path& path, const T& cfg) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  os << nlohmann::json(cfg).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Clustering

struct ClusterRun {
  Clustering clustering;
  std::optional<TuneResult> tuned;
};

inline ClusterRun run_clustering(const Corpus& corpus, const PipelineConfig& cfg, unsigned workers = 1) {
  const RealMatrix dist = cosine_distance_matrix(tfidf_vectors(corpus), workers);
  ClusterRun run;
  DbscanParams params{cfg.dbscan_eps, cfg.dbscan_min_pts};
  if (cfg.dbscan_eps == 0.0) {
    run.tuned = tune_dbscan(dist, cfg.eps_grid, cfg.min_pts_grid, cfg.cluster_size_lo, cfg.cluster_size_hi);
    params = run.tuned->params;
  }
  run.clustering = dbscan(dist, params);
  return run;
}

// ---------------------------------------------------------------------------
// Rescoring

struct ChoiceRecord {
  std::string id;
  int cluster = kNoise;
  std::string source;  // own_nbest | shared | passthrough
  std::string text;

  friend bool operator==(const ChoiceRecord&, const ChoiceRecord&) = default;
};

struct ClusterDiagnostics {
  int cluster = 0;
  std::size_t size = 0;
  std::size_t edges = 0;
  std::size_t labels = 0;
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t flipped = 0;
  std::size_t shared = 0;
};

struct RescoreOutput {
  std::vector<ChoiceRecord> choices;  // corpus order
  std::vector<ClusterDiagnostics> diagnostics;
  DbscanParams dbscan;
};

inline constexpr const char* kPassthrough = "passthrough";

/// Clusters the corpus, runs label propagation per cluster (clusters spread
/// over `workers` threads) and copies the baseline 1-best for noise
/// utterances. Output does not depend on `workers`.
inline RescoreOutput run_rescore(const Corpus& corpus, const PipelineConfig& cfg, unsigned workers = 1) {
  cfg.validate();
  const ClusterRun cr = run_clustering(corpus, cfg, workers);
  const Clustering& cl = cr.clustering;

  RescoreOutput out;
  out.dbscan = cl.params;
  out.choices.resize(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Utterance& u = corpus.utterances[i];
    out.choices[i] = {u.id, kNoise, kPassthrough, u.best().text()};
  }

  std::vector<PropagationResult> results(cl.clusters.size());
  std::vector<std::vector<std::size_t>> members(cl.clusters.size());
  parallel_for(cl.clusters.size(), workers, [&](std::size_t c) {
    members[c] = cl.clusters[c];
    std::sort(members[c].begin(), members[c].end(), [&](std::size_t a, std::size_t b) {
      return corpus.utterances[a].id < corpus.utterances[b].id;
    });
    std::vector<const Utterance*> utts;
    for (std::size_t i : members[c]) utts.push_back(&corpus.utterances[i]);
    try {
      results[c] = rescore_cluster(utts, cfg.graph(), cfg.lp());
    } catch (const InputError& e) {
      throw InputError("cluster " + std::to_string(c) + ": " + e.what());
    }
  });

  for (std::size_t c = 0; c < results.size(); ++c) {
    const PropagationResult& r = results[c];
    for (std::size_t k = 0; k < members[c].size(); ++k) {
      ChoiceRecord& rec = out.choices[members[c][k]];
      rec.cluster = static_cast<int>(c);
      rec.source = source_name(r.chosen[k].source);
      rec.text = r.chosen[k].text;
    }
    out.diagnostics.push_back({static_cast<int>(c), members[c].size(), r.edges, r.labels, r.iterations,
                               r.converged, r.flipped, r.shared});
  }
  return out;
}

inline std::vector<ChoiceRecord> baseline_records(const Corpus& corpus) {
  std::vector<ChoiceRecord> out;
  for (const auto& u : corpus.utterances) out.push_back({u.id, kNoise, "baseline", u.best().text()});
  return out;
}

inline void write_choices_csv(std::ostream& os, const std::vector<ChoiceRecord>& recs) {
  os << "id,cluster,source,text\n";
  for (const auto& r : recs)
    os << csv_field(r.id) << ',' << r.cluster << ',' << r.source << ',' << csv_field(r.text) << '\n';
}

inline std::vector<ChoiceRecord> read_choices_csv(std::istream& is) {
  std::vector<ChoiceRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != 4) throw InputError("choices line " + std::to_string(lineno) + ": expected 4 fields");
    ChoiceRecord r;
    r.id = f[0];
    try {
      r.cluster = std::stoi(f[1]);
    } catch (const std::exception&) {
      throw InputError("choices line " + std::to_string(lineno) + ": bad cluster index");
    }
    r.source = f[2];
    r.text = f[3];
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<ChoiceRecord> read_choices_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path.string());
  return read_choices_csv(is);
}

inline void write_diagnostics_csv(std::ostream& os, const std::vector<ClusterDiagnostics>& diags) {
  os << "cluster,size,edges,labels,iterations,converged,flipped,shared\n";
  for (const auto& d : diags)
    os << d.cluster << ',' << d.size << ',' << d.edges << ',' << d.labels << ',' << d.iterations << ','
       << (d.converged ? "true" : "false") << ',' << d.flipped << ',' << d.shared << '\n';
}

inline std::vector<Choice> to_choices(const std::vector<ChoiceRecord>& recs) {
  std::vector<Choice> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back({r.id, r.text});
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation report

struct EvalSections {
  std::vector<ComparisonRow> by_cluster_size;  // bands, then "All clustered", "All utterances"
  std::vector<ComparisonRow> by_accent;        // clustered utterances, then "Overall"
  double oracle_wer_n = 0.0;
  std::size_t oracle_n = 0;
};

/// Side-by-side baseline vs rescored scoring. Cluster membership comes from
/// the rescored records; accents from corpus metadata.
inline EvalSections evaluate_choices(const Corpus& refs, const std::vector<ChoiceRecord>& baseline,
                                     const std::vector<ChoiceRecord>& rescored, const NormalizeOptions& norm,
                                     std::size_t oracle_n = 3) {
  if (baseline.size() != rescored.size())
    throw InputError("baseline has " + std::to_string(baseline.size()) + " records, rescored has " +
                     std::to_string(rescored.size()));
  {
    std::unordered_map<std::string, int> seen;
    for (const auto& r : rescored) seen.emplace(r.id, 0);
    for (const auto& b : baseline)
      if (!seen.count(b.id)) throw InputError("id '" + b.id + "' is missing from the rescored choices");
  }
  std::unordered_map<int, std::size_t> cluster_size;
  for (const auto& r : rescored)
    if (r.cluster != kNoise) ++cluster_size[r.cluster];

  std::unordered_map<std::string, std::string> band, clustered, all, accent;
  for (const auto& r : rescored) {
    all[r.id] = "All utterances";
    if (r.cluster == kNoise) continue;
    band[r.id] = size_band(cluster_size[r.cluster]);
    clustered[r.id] = "All clustered";
    auto idx = refs.find(r.id);
    if (!idx) throw InputError("id '" + r.id + "' is missing from the reference corpus");
    const auto& acc = refs.utterances[*idx].meta.accent;
    accent[r.id] = acc ? *acc : kDefaultGroup;
  }
  const auto b = to_choices(baseline), s = to_choices(rescored);
  EvalSections out;
  out.by_cluster_size = compare_by(b, s, refs, band, {"n<=5", "5<n<=10", "10<n<=50", "n>50"}, norm);
  for (auto& row : compare_by(b, s, refs, clustered, {"All clustered"}, norm)) out.by_cluster_size.push_back(row);
  for (auto& row : compare_by(b, s, refs, all, {"All utterances"}, norm)) out.by_cluster_size.push_back(row);

  std::vector<std::string> accents;
  for (const auto& [_, a] : accent) accents.push_back(a);
  std::sort(accents.begin(), accents.end());
  accents.erase(std::unique(accents.begin(), accents.end()), accents.end());
  out.by_accent = compare_by(b, s, refs, accent, accents, norm);
  for (auto& row : compare_by(b, s, refs, clustered, {"All clustered"}, norm)) {
    row.group = "Overall";
    out.by_accent.push_back(row);
  }
  out.oracle_n = oracle_n;
  out.oracle_wer_n = oracle_nbest_wer(refs, oracle_n, norm);
  return out;
}

inline void write_eval_csv(std::ostream& os, const EvalSections& ev) {
  os << "section,group,n_utts,baseline_wer,baseline_ser,graphlp_wer,graphlp_ser\n";
  write_comparison_csv(os, "cluster_size", ev.by_cluster_size);
  write_comparison_csv(os, "accent", ev.by_accent);
}

inline void write_eval_table(std::ostream& os, const EvalSections& ev) {
  write_comparison_table(os, "Baseline vs graph-LP by cluster size (WER/SER %)", ev.by_cluster_size);
  write_comparison_table(os, "Baseline vs graph-LP by accent, clustered utterances (WER/SER %)", ev.by_accent);
  os << "Oracle " << ev.oracle_n << "-best WER (all utterances): " << percent(ev.oracle_wer_n) << "%\n";
}

}  // namespace graphlp

#endif  // GRAPHLP_PIPELINE_HPP_
