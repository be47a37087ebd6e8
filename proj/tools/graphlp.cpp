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

// graphlp: cross-utterance n-best rescoring by label propagation.
//
//   graphlp synth    --out corpus.jsonl [--seed 7 --n_groups 60 ...]
//   graphlp rescore  --corpus corpus.jsonl --out choices.csv
//   graphlp eval     --corpus corpus.jsonl --rescored choices.csv --out report.csv
//   graphlp eer      --corpus corpus.jsonl --out eer.csv
//   graphlp distance --corpus corpus.jsonl --out dist.csv
//   graphlp cluster  --corpus corpus.jsonl --out clusters.csv
//
// Every config field is also a flag of the same name; precedence is
// flags > --config file > defaults. Each run writes the resolved config to
// <out>.config.json. Exit status: 0 ok, 1 input error, 2 internal error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "graphlp/clustering.hpp"
#include "graphlp/corpus.hpp"
#include "graphlp/distance.hpp"
#include "graphlp/pipeline.hpp"
#include "graphlp/simeval.hpp"
#include "graphlp/synth.hpp"

namespace fs = std::filesystem;
using namespace graphlp;

namespace {

/// One string-valued flag per config field; applied over the file config.
template <typename T>
class ConfigFlags {
 public:
  void attach(CLI::App* app) {
    app->add_option("--config", config_path_, "JSON config file");
    const nlohmann::json defaults = T{};
    for (const auto& [key, value] : defaults.items()) {
      values_[key];
      app->add_option("--" + key, values_[key], "override (default " + value.dump() + ")");
    }
  }

  T resolve() const {
    nlohmann::json j = config_path_.empty() ? nlohmann::json(T{}) : nlohmann::json(load_config<T>(config_path_));
    for (const auto& [key, raw] : values_) {
      if (!raw) continue;
      if (j[key].is_string()) {
        j[key] = *raw;
        continue;
      }
      try {
        j[key] = nlohmann::json::parse(*raw);
      } catch (const nlohmann::json::parse_error&) {
        throw InputError("bad value '" + *raw + "' for --" + key);
      }
    }
    return config_from_json<T>(j);
  }

 private:
  std::string config_path_;
  std::map<std::string, std::optional<std::string>> values_;
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  return os;
}

fs::path config_echo_path(const fs::path& out) { return fs::path(out.string() + ".config.json"); }

struct CorpusArgs {
  std::string corpus;
  std::string embedding_dir;

  void attach(CLI::App* app) {
    app->add_option("--corpus", corpus, "corpus file (JSON lines)")->required();
    app->add_option("--embedding-dir", embedding_dir, "directory holding frames_file embeddings");
  }

  Corpus load() const {
    return load_corpus(corpus, embedding_dir.empty() ? std::nullopt : std::optional<fs::path>(embedding_dir));
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-utterance n-best rescoring with graph label propagation"};
  app.require_subcommand(1);
  unsigned workers = default_workers();
  app.add_option("--workers", workers, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with references");
  ConfigFlags<SynthConfig> synth_flags;
  synth_flags.attach(synth);
  std::string synth_out, synth_emb;
  synth->add_option("--out", synth_out, "output corpus file")->required();
  synth->add_option("--embedding-dir", synth_emb, "write frames as binary files here instead of inline");

  // rescore
  auto* rescore = app.add_subcommand("rescore", "cluster, propagate and write chosen hypotheses");
  CorpusArgs rescore_corpus;
  rescore_corpus.attach(rescore);
  ConfigFlags<PipelineConfig> rescore_flags;
  rescore_flags.attach(rescore);
  std::string rescore_out, rescore_diag, rescore_baseline;
  rescore->add_option("--out", rescore_out, "choices CSV")->required();
  rescore->add_option("--diagnostics", rescore_diag, "per-cluster diagnostics CSV");
  rescore->add_option("--baseline-out", rescore_baseline, "also write baseline 1-best choices");

  // eval
  auto* eval = app.add_subcommand("eval", "baseline vs rescored WER/SER report");
  CorpusArgs eval_corpus;
  eval_corpus.attach(eval);
  ConfigFlags<PipelineConfig> eval_flags;
  eval_flags.attach(eval);
  std::string eval_rescored, eval_baseline, eval_out, eval_table;
  std::size_t eval_oracle_n = 3;
  eval->add_option("--rescored", eval_rescored, "rescored choices CSV")->required();
  eval->add_option("--baseline", eval_baseline, "baseline choices CSV (default: corpus 1-best)");
  eval->add_option("--out", eval_out, "report CSV")->required();
  eval->add_option("--table", eval_table, "human-readable report (default: stdout)");
  eval->add_option("--oracle-n", eval_oracle_n, "n for the oracle n-best WER")->check(CLI::PositiveNumber);

  // eer
  auto* eer = app.add_subcommand("eer", "EER of each distance metric on same/different-transcript trials");
  CorpusArgs eer_corpus;
  eer_corpus.attach(eer);
  ConfigFlags<PipelineConfig> eer_flags;
  eer_flags.attach(eer);
  std::string eer_out;
  eer->add_option("--out", eer_out, "metric selection CSV")->required();

  // distance
  auto* dist = app.add_subcommand("distance", "pairwise distance matrix CSV");
  CorpusArgs dist_corpus;
  dist_corpus.attach(dist);
  ConfigFlags<PipelineConfig> dist_flags;
  dist_flags.attach(dist);
  std::string dist_out;
  std::vector<std::string> dist_ids;
  dist->add_option("--out", dist_out, "distance CSV")->required();
  dist->add_option("--ids", dist_ids, "restrict to these utterance ids")->delimiter(',');

  // cluster
  auto* cluster = app.add_subcommand("cluster", "dump the tf-idf/DBSCAN clustering");
  CorpusArgs cluster_corpus;
  cluster_corpus.attach(cluster);
  ConfigFlags<PipelineConfig> cluster_flags;
  cluster_flags.attach(cluster);
  std::string cluster_out;
  cluster->add_option("--out", cluster_out, "clustering CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      const SynthConfig cfg = synth_flags.resolve();
      const Corpus corpus = generate(cfg);
      WriteOptions opt;
      if (!synth_emb.empty()) opt.embedding_dir = synth_emb;
      if (fs::path(synth_out).has_parent_path()) fs::create_directories(fs::path(synth_out).parent_path());
      write_corpus(synth_out, corpus, opt);
      write_config(config_echo_path(synth_out), cfg);
      std::cerr << "synth: wrote " << corpus.size() << " utterances to " << synth_out << '\n';
    } else if (*rescore) {
      const PipelineConfig cfg = rescore_flags.resolve();
      cfg.validate();
      const Corpus corpus = rescore_corpus.load();
      const RescoreOutput out = run_rescore(corpus, cfg, workers);
      {
        auto os = open_out(rescore_out);
        write_choices_csv(os, out.choices);
      }
      if (!rescore_diag.empty()) {
        auto os = open_out(rescore_diag);
        write_diagnostics_csv(os, out.diagnostics);
      }
      if (!rescore_baseline.empty()) {
        auto os = open_out(rescore_baseline);
        write_choices_csv(os, baseline_records(corpus));
      }
      PipelineConfig resolved = cfg;
      resolved.dbscan_eps = out.dbscan.eps;
      resolved.dbscan_min_pts = out.dbscan.min_pts;
      write_config(config_echo_path(rescore_out), resolved);
      std::size_t flipped = 0;
      for (const auto& d : out.diagnostics) flipped += d.flipped;
      std::cerr << "rescore: " << out.diagnostics.size() << " clusters (eps " << out.dbscan.eps << ", min_pts "
                << out.dbscan.min_pts << "), " << flipped << " utterances changed\n";
    } else if (*eval) {
      const PipelineConfig cfg = eval_flags.resolve();
      const Corpus corpus = eval_corpus.load();
      const auto rescored = read_choices_csv(eval_rescored);
      const auto baseline = eval_baseline.empty() ? baseline_records(corpus) : read_choices_csv(eval_baseline);
      const EvalSections ev = evaluate_choices(corpus, baseline, rescored, cfg.normalization(), eval_oracle_n);
      {
        auto os = open_out(eval_out);
        write_eval_csv(os, ev);
      }
      if (eval_table.empty()) {
        write_eval_table(std::cout, ev);
      } else {
        auto os = open_out(eval_table);
        write_eval_table(os, ev);
      }
      write_config(config_echo_path(eval_out), cfg);
    } else if (*eer) {
      const PipelineConfig cfg = eer_flags.resolve();
      cfg.validate();
      const Corpus corpus = eer_corpus.load();
      const TrialSet trials = generate_trials(corpus, cfg.n_pos, cfg.n_neg, cfg.seed);
      if (trials.pos_shortfall || trials.neg_shortfall)
        std::cerr << "eer: only " << trials.count(true) << " positive / " << trials.count(false)
                  << " negative pairs available\n";
      const auto rows =
          metric_selection_report(corpus, trials, all_metric_variants(cfg.distance_metric().traditional), workers);
      auto os = open_out(eer_out);
      write_eer_csv(os, rows);
      write_config(config_echo_path(eer_out), cfg);
    } else if (*dist) {
      const PipelineConfig cfg = dist_flags.resolve();
      cfg.validate();
      const Corpus corpus = dist_corpus.load();
      std::vector<const Utterance*> utts;
      if (dist_ids.empty()) {
        for (const auto& u : corpus.utterances) utts.push_back(&u);
      } else {
        for (const auto& id : dist_ids) {
          auto idx = corpus.find(id);
          if (!idx) throw InputError("unknown utterance id '" + id + "'");
          utts.push_back(&corpus.utterances[*idx]);
        }
      }
      std::vector<std::string> ids;
      for (const auto* u : utts) ids.push_back(u->id);
      const RealMatrix d = pairwise_distances(utts, cfg.distance_metric(), workers);
      auto os = open_out(dist_out);
      write_distance_csv(os, ids, d);
      write_config(config_echo_path(dist_out), cfg);
    } else if (*cluster) {
      PipelineConfig cfg = cluster_flags.resolve();
      cfg.validate();
      const Corpus corpus = cluster_corpus.load();
      const ClusterRun run = run_clustering(corpus, cfg, workers);
      auto os = open_out(cluster_out);
      write_clustering_csv(os, run.clustering, corpus);
      cfg.dbscan_eps = run.clustering.params.eps;
      cfg.dbscan_min_pts = run.clustering.params.min_pts;
      write_config(config_echo_path(cluster_out), cfg);
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
