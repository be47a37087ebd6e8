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

// Synthetic corpus with known ground truth. Groups of utterances share a
// reference sentence; frames are word prototypes plus an accent offset,
// Gaussian noise and random frame duplication; n-best lists are the
// reference and near-miss substitutions, with the reference demoted to
// rank 2 or 3 for a corrupted fraction of utterances.

#ifndef GRAPHLP_SYNTH_HPP_
#define GRAPHLP_SYNTH_HPP_

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "graphlp/common.hpp"
#include "graphlp/corpus.hpp"
#include "json.hpp"

namespace graphlp {

struct SynthConfig {
  std::size_t n_groups = 50;
  std::size_t group_size_min = 8;
  std::size_t group_size_max = 12;
  std::size_t vocab_size = 40;
  std::size_t sentence_len_min = 4;
  std::size_t sentence_len_max = 8;
  std::size_t dim = 16;
  std::size_t frames_per_word_min = 2;
  std::size_t frames_per_word_max = 4;
  double prototype_scale = 3.0;
  double warp_prob = 0.3;
  double noise_sigma = 0.1;
  std::size_t n_accents = 4;
  double accent_offset_sigma = 0.3;
  double corruption_rate = 0.35;
  /// Fraction of corrupted utterances whose beam omits the reference.
  double absent_rate = 0.0;
  std::size_t beam = 5;
  std::uint64_t seed = 1;

  /// Throws InputError naming the first offending field.
  void validate() const {
    auto need = [](bool ok, const char* field, const char* rule) {
      if (!ok) throw InputError(std::string("synth config: ") + field + " " + rule);
    };
    need(n_groups >= 1, "n_groups", "must be >= 1");
    need(group_size_min >= 1, "group_size_min", "must be >= 1");
    need(group_size_max >= group_size_min, "group_size_max", "must be >= group_size_min");
    need(vocab_size >= 2, "vocab_size", "must be >= 2");
    need(sentence_len_min >= 1, "sentence_len_min", "must be >= 1");
    need(sentence_len_max >= sentence_len_min, "sentence_len_max", "must be >= sentence_len_min");
    need(dim >= 1, "dim", "must be >= 1");
    need(frames_per_word_min >= 1, "frames_per_word_min", "must be >= 1");
    need(frames_per_word_max >= frames_per_word_min, "frames_per_word_max",
         "must be >= frames_per_word_min");
    need(prototype_scale > 0.0, "prototype_scale", "must be > 0");
    need(warp_prob >= 0.0 && warp_prob <= 1.0, "warp_prob", "must lie in [0, 1]");
    need(noise_sigma >= 0.0, "noise_sigma", "must be >= 0");
    need(n_accents >= 1, "n_accents", "must be >= 1");
    need(accent_offset_sigma >= 0.0, "accent_offset_sigma", "must be >= 0");
    need(corruption_rate >= 0.0 && corruption_rate <= 1.0, "corruption_rate", "must lie in [0, 1]");
    need(absent_rate >= 0.0 && absent_rate <= 1.0, "absent_rate", "must lie in [0, 1]");
    need(beam >= 1, "beam", "must be >= 1");
    need(corruption_rate == 0.0 || beam >= 3, "beam", "must be >= 3 when corruption_rate > 0");
    // Distinct references need enough sentences; a loose count check.
    double space = 0.0;
    for (std::size_t len = sentence_len_min; len <= sentence_len_max && space < 1e18; ++len) {
      double s = 1.0;
      for (std::size_t k = 0; k < len && s < 1e18; ++k) s *= static_cast<double>(vocab_size);
      space += s;
    }
    need(space >= 4.0 * static_cast<double>(n_groups), "n_groups",
         "is too large for the sentence space of vocab_size/sentence_len");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SynthConfig, n_groups, group_size_min, group_size_max,
                                                vocab_size, sentence_len_min, sentence_len_max, dim,
                                                frames_per_word_min, frames_per_word_max,
                                                prototype_scale, warp_prob, noise_sigma, n_accents,
                                                accent_offset_sigma, corruption_rate, absent_rate,
                                                beam, seed)

namespace detail {

/// Pronounceable word for a vocabulary index.
inline std::string synth_word(std::size_t index) {
  static constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n",
                                            "p", "r", "s", "t", "v", "z"};
  static constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};
  constexpr std::size_t kSyl = 14 * 5;
  std::string w;
  std::size_t v = index;
  do {
    const std::size_t s = v % kSyl;
    w += kOnsets[s / 5];
    w += kVowels[s % 5];
    v /= kSyl;
  } while (v > 0);
  return w;
}

/// The reference with one or two word substitutions.
inline Tokens perturb(const Tokens& ref, const std::vector<std::string>& vocab, Rng& rng) {
  Tokens out = ref;
  const std::size_t n_sub = std::min<std::size_t>(ref.size(), 1 + (rng.bernoulli(0.5) ? 1 : 0));
  for (std::size_t pos : rng.sample_indices(ref.size(), n_sub)) {
    std::string w;
    do {
      w = vocab[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(vocab.size()) - 1))];
    } while (w == ref[pos]);
    out[pos] = std::move(w);
  }
  return out;
}

}  // namespace detail

/// Generates the corpus. Same config (including seed) gives a bit-identical
/// result.
inline Corpus generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto pick = [&](std::size_t lo, std::size_t hi) {
    return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
  };

  std::vector<std::string> vocab;
  std::vector<FrameMatrix> prototypes;
  for (std::size_t w = 0; w < cfg.vocab_size; ++w) {
    vocab.push_back(detail::synth_word(w));
    FrameMatrix p(pick(cfg.frames_per_word_min, cfg.frames_per_word_max), cfg.dim);
    for (float& v : p.data()) v = static_cast<float>(rng.normal(0.0, cfg.prototype_scale));
    prototypes.push_back(std::move(p));
  }
  std::vector<std::vector<double>> accent_offsets(cfg.n_accents, std::vector<double>(cfg.dim));
  for (auto& off : accent_offsets)
    for (double& v : off) v = rng.normal(0.0, cfg.accent_offset_sigma);

  // Distinct reference sentences, as word-index sequences.
  std::set<std::vector<std::size_t>> used;
  std::vector<std::vector<std::size_t>> refs;
  while (refs.size() < cfg.n_groups) {
    std::vector<std::size_t> s(pick(cfg.sentence_len_min, cfg.sentence_len_max));
    for (auto& w : s) w = pick(0, cfg.vocab_size - 1);
    if (used.insert(s).second) refs.push_back(std::move(s));
  }

  Corpus corpus;
  corpus.dim = cfg.dim;
  for (std::size_t g = 0; g < cfg.n_groups; ++g) {
    Tokens ref_tokens;
    for (std::size_t w : refs[g]) ref_tokens.push_back(vocab[w]);
    const std::size_t size = pick(cfg.group_size_min, cfg.group_size_max);
    for (std::size_t k = 0; k < size; ++k) {
      Utterance u;
      char id[64];
      std::snprintf(id, sizeof(id), "g%03zu_u%02zu", g, k);
      u.id = id;
      const std::size_t accent = pick(0, cfg.n_accents - 1);
      u.meta.accent = "accent" + std::to_string(accent);
      u.meta.speaker = "spk" + std::to_string(accent) + "_" + std::to_string(pick(0, 2));
      u.meta.reference = ref_tokens;

      for (std::size_t w : refs[g]) {
        const FrameMatrix& p = prototypes[w];
        for (std::size_t t = 0; t < p.rows(); ++t) {
          const std::size_t copies = rng.bernoulli(cfg.warp_prob) ? 2 : 1;
          for (std::size_t c = 0; c < copies; ++c) {
            std::vector<float> frame(cfg.dim);
            for (std::size_t d = 0; d < cfg.dim; ++d)
              frame[d] = static_cast<float>(p(t, d) + accent_offsets[accent][d] +
                                            rng.normal(0.0, cfg.noise_sigma));
            u.frames.append_row(frame);
          }
        }
      }

      const bool corrupted = rng.bernoulli(cfg.corruption_rate);
      const bool absent = corrupted && rng.bernoulli(cfg.absent_rate);
      const std::size_t ref_rank = corrupted ? pick(1, 2) : 0;  // 0-based
      std::set<Tokens> seen{ref_tokens};
      std::vector<Tokens> beam;
      std::size_t attempts = 0;
      while (beam.size() < cfg.beam) {
        if (!absent && beam.size() == ref_rank) {
          beam.push_back(ref_tokens);
          continue;
        }
        Tokens alt = detail::perturb(ref_tokens, vocab, rng);
        if (seen.insert(alt).second) {
          beam.push_back(std::move(alt));
        } else if (++attempts > 1000) {
          break;  // tiny vocab/sentence: fewer distinct near-misses than beam
        }
      }
      if (!absent && ref_rank >= beam.size()) beam.push_back(ref_tokens);
      double score = -rng.uniform(0.5, 0.5 + 0.5 * static_cast<double>(ref_tokens.size()));
      for (auto& h : beam) {
        u.nbest.push_back({std::move(h), score});
        score -= rng.uniform(0.05, 1.0);
      }
      corpus.utterances.push_back(std::move(u));
    }
  }
  validate_corpus(corpus);
  return corpus;
}

}  // namespace graphlp

#endif  // GRAPHLP_SYNTH_HPP_
