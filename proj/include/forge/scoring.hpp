// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "forge/genclient.hpp"
#include "forge/ingest.hpp"
#include "forge/io.hpp"

namespace forge {

enum class ScoreSource { kVlmAnnotation, kClassifier, kMock };

std::string_view to_string(ScoreSource source);
std::optional<ScoreSource> parse_score_source(std::string_view name);

struct Labels {
  int clarity = 0;     // 0 blurred / poor, 1 clear
  int complexity = 0;  // 0 (easy) .. 3 (hard)

  bool operator==(const Labels&) const = default;
};

bool labels_valid(const Labels& labels);

struct ImageScores {
  std::string image_ref;
  std::string sha256;
  int clarity = 0;
  int complexity = 0;
  ScoreSource source = ScoreSource::kMock;
  // Set when scoring this image failed; such rows read as clarity 0.
  std::optional<std::string> error;

  bool ok() const { return !error.has_value(); }
  bool operator==(const ImageScores&) const = default;
};

Json to_json(const ImageScores& row);
ImageScores image_scores_from_json(const Json& row);

// One row per distinct image, in corpus first-appearance order.
class ScoreTable {
 public:
  ScoreTable() = default;
  explicit ScoreTable(std::vector<ImageScores> rows);

  const std::vector<ImageScores>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  const ImageScores* find(std::string_view image_ref) const;
  const ImageScores* find_by_hash(std::string_view sha256) const;

  bool operator==(const ScoreTable& other) const { return rows_ == other.rows_; }

 private:
  std::vector<ImageScores> rows_;
  std::unordered_map<std::string, std::size_t> by_ref_;
  std::unordered_map<std::string, std::size_t> by_hash_;
};

void write_score_table(const ScoreTable& table, const std::filesystem::path& path);
ScoreTable read_score_table(const std::filesystem::path& path);

struct ImageInput {
  std::string image_ref;
  std::filesystem::path path;
  std::string bytes;
  std::string sha256;
};

// Scores one image. Implementations return hard labels (probabilistic models
// threshold internally) and throw on a per-image failure.
class ScorerBackend {
 public:
  virtual ~ScorerBackend() = default;
  virtual ScoreSource source() const = 0;
  // Throws Error{kBackendUnavailable} when the backend cannot be reached.
  virtual void check() {}
  virtual Labels score(const ImageInput& image) = 0;
};

// Deterministic scorers keyed on image content:
//   const:C,X     every image gets (C, X)
//   hash          labels derived from the SHA-256 of the bytes
//   table:<path>  JSONL rows {sha256|image_ref, clarity, complexity}; absent images fail
class MockScorer : public ScorerBackend {
 public:
  static std::unique_ptr<MockScorer> from_spec(std::string_view spec);

  explicit MockScorer(Labels constant);
  MockScorer(std::unordered_map<std::string, Labels> by_hash,
             std::unordered_map<std::string, Labels> by_ref);
  static std::unique_ptr<MockScorer> hashed();

  ScoreSource source() const override { return ScoreSource::kMock; }
  Labels score(const ImageInput& image) override;

 private:
  enum class Mode { kConstant, kHash, kTable } mode_ = Mode::kConstant;
  Labels constant_;
  std::unordered_map<std::string, Labels> by_hash_;
  std::unordered_map<std::string, Labels> by_ref_;
};

// Client for the classifier service:
//   POST /score  {"image_b64": "..."} or {"image_path": "..."}
//     -> {"clarity": int, "complexity": int, "clarity_prob": float, "complexity_probs": [4 floats]}
//   GET /healthz -> 200 when models are loaded
class HttpScorer : public ScorerBackend {
 public:
  explicit HttpScorer(std::string base_url, bool send_paths = false);
  ScoreSource source() const override { return ScoreSource::kClassifier; }
  void check() override;
  Labels score(const ImageInput& image) override;

 private:
  std::string base_url_;
  bool send_paths_;
};

// "mock:<spec>" or an http(s) base URL.
std::unique_ptr<ScorerBackend> make_scorer_backend(const std::string& spec);

struct ScoreOptions {
  std::size_t parallelism = 4;
  // Earlier table reused by content hash; failed rows are never reused.
  const ScoreTable* cache = nullptr;
};

ScoreTable score_corpus(const Corpus& corpus, ScorerBackend& backend, const ScoreOptions& options = {});

// --- VLM annotation of the classifier training set ---------------------------

std::vector<std::string> sample_annotation_set(const Corpus& corpus, std::size_t n, std::uint64_t seed);

std::string build_annotation_prompt(std::string_view image_ref);

// Extracts the first `clarity:` and `complexity:` lines.
// Throws ParseFailure when either is missing, OutOfRange for invalid values.
Labels parse_annotation_response(std::string_view text);
std::string render_annotation_response(const Labels& labels);

struct AnnotatedImage {
  std::string image_ref;
  std::string image_path;
  std::string sha256;
  Labels labels;
};

struct DroppedImage {
  std::string image_ref;
  std::string reason;
};

struct AnnotationResult {
  std::vector<AnnotatedImage> labeled;
  std::vector<DroppedImage> dropped;
};

struct AnnotateOptions {
  std::string model_id = "gpt-4-vision-preview";
  int max_tokens = 64;
  int parse_retries = 2;
  std::size_t parallelism = 4;
};

// Images whose response stays unparseable after the retries are dropped, not guessed.
AnnotationResult annotate_images(const Corpus& corpus, const std::vector<std::string>& image_refs,
                                 VlmClient& client, const AnnotateOptions& options = {});

Json to_json(const AnnotatedImage& image);

}  // namespace forge
