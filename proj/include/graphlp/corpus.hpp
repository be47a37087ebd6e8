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

// Utterance data model and the two on-disk formats:
//
//   corpus file   JSON lines, one utterance per line:
//                 {"id": "...", "frames": [[...], ...] | "frames_file": "x.fem",
//                  "nbest": [{"text": "...", "log_likelihood": -1.2}, ...],
//                  "meta": {"speaker": "...", "accent": "...",
//                           "reference": "..."}}
//   embeddings    "FEM1", uint32 T, uint32 D, then T*D float32, all
//                 little-endian, row-major.

#ifndef GRAPHLP_CORPUS_HPP_
#define GRAPHLP_CORPUS_HPP_

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "graphlp/common.hpp"
#include "json.hpp"

namespace graphlp {

using Tokens = std::vector<std::string>;

struct NormalizeOptions {
  bool casefold = true;
  bool strip_punct = true;
};

/// Whitespace tokenization with optional ASCII case folding and stripping
/// of leading/trailing punctuation from each token. Tokens left empty by
/// stripping are dropped.
inline Tokens normalize_tokens(std::string_view text, bool casefold,
                               bool strip_punct) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    std::size_t j = i;
    while (j < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[j])))
      ++j;
    if (j == i) break;
    std::string_view tok = text.substr(i, j - i);
    if (strip_punct) {
      while (!tok.empty() && std::ispunct(static_cast<unsigned char>(tok.front())))
        tok.remove_prefix(1);
      while (!tok.empty() && std::ispunct(static_cast<unsigned char>(tok.back())))
        tok.remove_suffix(1);
    }
    if (!tok.empty()) {
      std::string t(tok);
      if (casefold)
        for (char& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(std::move(t));
    }
    i = j;
  }
  return out;
}

inline Tokens normalize_tokens(std::string_view text,
                               const NormalizeOptions& opt = {}) {
  return normalize_tokens(text, opt.casefold, opt.strip_punct);
}

inline std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

struct Hypothesis {
  Tokens tokens;
  double log_likelihood = 0.0;

  std::string text() const { return join_tokens(tokens); }

  /// Identity used for label-space deduplication and scoring: casefolded,
  /// punctuation-stripped tokens.
  Tokens normalized() const { return normalize_tokens(text()); }

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

struct UtteranceMeta {
  std::optional<std::string> speaker;
  std::optional<std::string> accent;
  std::optional<Tokens> reference;

  friend bool operator==(const UtteranceMeta&, const UtteranceMeta&) = default;
};

struct Utterance {
  std::string id;
  FrameMatrix frames;  // T x D
  std::vector<Hypothesis> nbest;  // descending log_likelihood
  UtteranceMeta meta;

  std::size_t num_frames() const { return frames.rows(); }
  std::size_t dim() const { return frames.cols(); }
  const Hypothesis& best() const { return nbest.front(); }

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Corpus {
  std::vector<Utterance> utterances;
  std::size_t dim = 0;

  std::size_t size() const { return utterances.size(); }

  /// Position of `id`, or nullopt.
  std::optional<std::size_t> find(std::string_view id) const {
    for (std::size_t i = 0; i < utterances.size(); ++i)
      if (utterances[i].id == id) return i;
    return std::nullopt;
  }

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Stable sort by descending log-likelihood; ties keep input order.
inline void sort_nbest(std::vector<Hypothesis>& nbest) {
  std::stable_sort(nbest.begin(), nbest.end(),
                   [](const Hypothesis& a, const Hypothesis& b) {
                     return a.log_likelihood > b.log_likelihood;
                   });
}

/// Checks the per-utterance and corpus invariants; throws InputError.
inline void validate_corpus(const Corpus& corpus) {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    const Utterance& u = corpus.utterances[i];
    const std::string where = "utterance '" + u.id + "' (#" +
                              std::to_string(i + 1) + ")";
    if (u.id.empty()) throw InputError(where + ": empty id");
    if (!seen.insert(u.id).second)
      throw InputError("duplicate id '" + u.id + "'");
    if (u.frames.rows() == 0 || u.frames.cols() == 0)
      throw InputError(where + ": frames must be non-empty");
    if (u.frames.cols() != corpus.dim)
      throw InputError(where + ": dimension mismatch, frames have " +
                       std::to_string(u.frames.cols()) + " dims, corpus has " +
                       std::to_string(corpus.dim));
    for (float v : u.frames.data())
      if (!std::isfinite(v)) throw InputError(where + ": non-finite frame value");
    if (u.nbest.empty()) throw InputError(where + ": empty n-best list");
    for (std::size_t k = 0; k < u.nbest.size(); ++k) {
      if (!std::isfinite(u.nbest[k].log_likelihood))
        throw InputError(where + ": non-finite log_likelihood");
      if (k > 0 && u.nbest[k].log_likelihood > u.nbest[k - 1].log_likelihood)
        throw InputError(where + ": n-best not sorted");
    }
  }
}

// ---------------------------------------------------------------------------
// Binary embedding files

inline constexpr std::array<char, 4> kFemMagic = {'F', 'E', 'M', '1'};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

inline void write_fem(const std::filesystem::path& path, const FrameMatrix& frames) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write embedding file " + path.string());
  os.write(kFemMagic.data(), 4);
  detail::put_u32(os, static_cast<std::uint32_t>(frames.rows()));
  detail::put_u32(os, static_cast<std::uint32_t>(frames.cols()));
  for (float v : frames.data()) detail::put_u32(os, std::bit_cast<std::uint32_t>(v));
  if (!os) throw InputError("write failed for " + path.string());
}

inline FrameMatrix read_fem(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("missing embedding file " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 12 || !std::equal(kFemMagic.begin(), kFemMagic.end(), buf.begin()))
    throw InputError("bad magic in embedding file " + path.string());
  const std::uint32_t t = detail::get_u32(buf.data() + 4);
  const std::uint32_t d = detail::get_u32(buf.data() + 8);
  const std::size_t want = 12 + 4ull * t * d;
  if (buf.size() != want)
    throw InputError("embedding file " + path.string() + " has " +
                     std::to_string(buf.size()) + " bytes, header implies " +
                     std::to_string(want));
  FrameMatrix m(t, d);
  for (std::size_t i = 0; i < std::size_t{t} * d; ++i)
    m.data()[i] = std::bit_cast<float>(detail::get_u32(buf.data() + 12 + 4 * i));
  return m;
}

// ---------------------------------------------------------------------------
// Corpus file

namespace detail {

inline Utterance parse_record(const nlohmann::json& rec,
                              const std::filesystem::path& embedding_dir) {
  Utterance u;
  if (!rec.is_object()) throw InputError("record is not an object");
  if (!rec.contains("id") || !rec["id"].is_string())
    throw InputError("missing string field 'id'");
  u.id = rec["id"].get<std::string>();

  if (rec.contains("frames")) {
    const auto& fr = rec["frames"];
    if (!fr.is_array()) throw InputError("'frames' must be an array of arrays");
    for (std::size_t t = 0; t < fr.size(); ++t) {
      if (!fr[t].is_array()) throw InputError("'frames' must be an array of arrays");
      std::vector<float> row;
      row.reserve(fr[t].size());
      for (const auto& v : fr[t]) {
        if (!v.is_number()) throw InputError("non-numeric frame value");
        row.push_back(v.get<float>());
      }
      if (t > 0 && row.size() != u.frames.cols())
        throw InputError("dimension mismatch: frame " + std::to_string(t + 1) +
                         " has " + std::to_string(row.size()) + " dims, expected " +
                         std::to_string(u.frames.cols()));
      u.frames.append_row(row);
    }
  } else if (rec.contains("frames_file")) {
    if (!rec["frames_file"].is_string())
      throw InputError("'frames_file' must be a string");
    u.frames = read_fem(embedding_dir / rec["frames_file"].get<std::string>());
  } else {
    throw InputError("record needs 'frames' or 'frames_file'");
  }

  if (!rec.contains("nbest") || !rec["nbest"].is_array())
    throw InputError("missing array field 'nbest'");
  for (const auto& h : rec["nbest"]) {
    if (!h.is_object() || !h.contains("text") || !h["text"].is_string() ||
        !h.contains("log_likelihood") || !h["log_likelihood"].is_number())
      throw InputError("n-best entry needs 'text' and numeric 'log_likelihood'");
    Hypothesis hyp;
    hyp.tokens = normalize_tokens(h["text"].get<std::string>(), false, false);
    hyp.log_likelihood = h["log_likelihood"].get<double>();
    u.nbest.push_back(std::move(hyp));
  }
  sort_nbest(u.nbest);

  if (rec.contains("meta")) {
    const auto& m = rec["meta"];
    if (!m.is_object()) throw InputError("'meta' must be an object");
    auto str = [&](const char* key) -> std::optional<std::string> {
      if (!m.contains(key) || m[key].is_null()) return std::nullopt;
      if (!m[key].is_string()) throw InputError(std::string("meta.") + key + " must be a string");
      return m[key].get<std::string>();
    };
    u.meta.speaker = str("speaker");
    u.meta.accent = str("accent");
    if (auto ref = str("reference")) u.meta.reference = normalize_tokens(*ref, false, false);
  }
  return u;
}

}  // namespace detail

/// Parses a corpus from a JSON-lines stream. Blank lines are skipped; errors
/// carry the 1-based line number.
inline Corpus read_corpus(std::istream& is, const std::filesystem::path& embedding_dir) {
  Corpus corpus;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(lineno);
    Utterance u;
    try {
      u = detail::parse_record(nlohmann::json::parse(line), embedding_dir);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + ": malformed record: " + e.what());
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
    if (u.frames.rows() == 0 || u.frames.cols() == 0)
      throw InputError(where + ": record '" + u.id + "' has no frames");
    if (corpus.utterances.empty()) corpus.dim = u.frames.cols();
    if (u.frames.cols() != corpus.dim)
      throw InputError(where + ": dimension mismatch in record '" + u.id + "': " +
                       std::to_string(u.frames.cols()) + " vs corpus " +
                       std::to_string(corpus.dim));
    if (!ids.insert(u.id).second)
      throw InputError(where + ": duplicate id '" + u.id + "'");
    corpus.utterances.push_back(std::move(u));
  }
  try {
    validate_corpus(corpus);
  } catch (const InputError& e) {
    throw InputError(std::string("invalid corpus: ") + e.what());
  }
  return corpus;
}

/// Loads a corpus file. `frames_file` entries resolve against
/// `embedding_dir`, or the corpus file's directory when none is given.
inline Corpus load_corpus(const std::filesystem::path& path,
                          std::optional<std::filesystem::path> embedding_dir = std::nullopt) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open corpus " + path.string());
  return read_corpus(is, embedding_dir ? *embedding_dir : path.parent_path());
}

struct WriteOptions {
  /// When set, frames go to <embedding_dir>/<id>.fem and the record names
  /// the file; otherwise frames are written inline.
  std::optional<std::filesystem::path> embedding_dir;
};

inline nlohmann::json to_json(const Utterance& u, const WriteOptions& opt) {
  nlohmann::json rec;
  rec["id"] = u.id;
  if (opt.embedding_dir) {
    const std::string name = u.id + ".fem";
    write_fem(*opt.embedding_dir / name, u.frames);
    rec["frames_file"] = name;
  } else {
    auto frames = nlohmann::json::array();
    for (std::size_t t = 0; t < u.frames.rows(); ++t) {
      auto row = nlohmann::json::array();
      for (float v : u.frames.row(t)) row.push_back(v);
      frames.push_back(std::move(row));
    }
    rec["frames"] = std::move(frames);
  }
  auto nbest = nlohmann::json::array();
  for (const auto& h : u.nbest)
    nbest.push_back({{"text", h.text()}, {"log_likelihood", h.log_likelihood}});
  rec["nbest"] = std::move(nbest);
  nlohmann::json meta = nlohmann::json::object();
  if (u.meta.speaker) meta["speaker"] = *u.meta.speaker;
  if (u.meta.accent) meta["accent"] = *u.meta.accent;
  if (u.meta.reference) meta["reference"] = join_tokens(*u.meta.reference);
  if (!meta.empty()) rec["meta"] = std::move(meta);
  return rec;
}

inline void write_corpus(std::ostream& os, const Corpus& corpus,
                         const WriteOptions& opt = {}) {
  for (const auto& u : corpus.utterances) os << to_json(u, opt).dump() << '\n';
}

inline void write_corpus(const std::filesystem::path& path, const Corpus& corpus,
                         const WriteOptions& opt = {}) {
  if (opt.embedding_dir) std::filesystem::create_directories(*opt.embedding_dir);
  std::ofstream os(path);
  if (!os) throw InputError("cannot write corpus " + path.string());
  write_corpus(os, corpus, opt);
}

}  // namespace graphlp

#endif  // GRAPHLP_CORPUS_HPP_
