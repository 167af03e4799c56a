// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/scoring.hpp"

#include <httplib.h>

#include <cctype>
#include <unordered_set>

#include "forge/error.hpp"
#include "forge/hash.hpp"
#include "forge/parallel.hpp"
#include "forge/random.hpp"
#include "forge/text.hpp"

namespace forge {

std::string_view to_string(ScoreSource source) {
  switch (source) {
    case ScoreSource::kVlmAnnotation: return "vlm_annotation";
    case ScoreSource::kClassifier: return "classifier";
    case ScoreSource::kMock: return "mock";
  }
  return "?";
}

std::optional<ScoreSource> parse_score_source(std::string_view name) {
  for (auto s : {ScoreSource::kVlmAnnotation, ScoreSource::kClassifier, ScoreSource::kMock}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

bool labels_valid(const Labels& l) {
  return (l.clarity == 0 || l.clarity == 1) && l.complexity >= 0 && l.complexity <= 3;
}

Json to_json(const ImageScores& row) {
  Json j;
  j["image_ref"] = row.image_ref;
  j["sha256"] = row.sha256;
  j["clarity"] = row.clarity;
  j["complexity"] = row.complexity;
  j["source"] = std::string(to_string(row.source));
  if (row.error) j["error"] = *row.error;
  return j;
}

ImageScores image_scores_from_json(const Json& j) {
  try {
    ImageScores row;
    row.image_ref = j.at("image_ref").get<std::string>();
    row.sha256 = j.at("sha256").get<std::string>();
    row.clarity = j.at("clarity").get<int>();
    row.complexity = j.at("complexity").get<int>();
    auto source = parse_score_source(j.at("source").get<std::string>());
    if (!source) throw Error(ErrorCode::kParseFailure, "unknown score source");
    row.source = *source;
    if (j.contains("error")) row.error = j.at("error").get<std::string>();
    if (!labels_valid({row.clarity, row.complexity})) {
      throw Error(ErrorCode::kOutOfRange, "score row out of range for " + row.image_ref);
    }
    return row;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseFailure, std::string("malformed score row: ") + e.what());
  }
}

ScoreTable::ScoreTable(std::vector<ImageScores> rows) : rows_(std::move(rows)) {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (!by_ref_.emplace(rows_[i].image_ref, i).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate score row for " + rows_[i].image_ref);
    }
    if (rows_[i].ok()) by_hash_.emplace(rows_[i].sha256, i);
  }
}

const ImageScores* ScoreTable::find(std::string_view image_ref) const {
  auto it = by_ref_.find(std::string(image_ref));
  return it == by_ref_.end() ? nullptr : &rows_[it->second];
}

const ImageScores* ScoreTable::find_by_hash(std::string_view sha256) const {
  auto it = by_hash_.find(std::string(sha256));
  return it == by_hash_.end() ? nullptr : &rows_[it->second];
}

void write_score_table(const ScoreTable& table, const std::filesystem::path& path) {
  std::vector<Json> rows;
  rows.reserve(table.size());
  for (const auto& r : table.rows()) rows.push_back(to_json(r));
  write_jsonl(path, rows);
}

ScoreTable read_score_table(const std::filesystem::path& path) {
  std::vector<ImageScores> rows;
  for (const auto& j : read_jsonl(path)) rows.push_back(image_scores_from_json(j));
  return ScoreTable(std::move(rows));
}

// --- mock scorer ----------------------------------------------------------------

MockScorer::MockScorer(Labels constant) : mode_(Mode::kConstant), constant_(constant) {
  if (!labels_valid(constant)) throw Error(ErrorCode::kOutOfRange, "constant mock labels out of range");
}

MockScorer::MockScorer(std::unordered_map<std::string, Labels> by_hash,
                       std::unordered_map<std::string, Labels> by_ref)
    : mode_(Mode::kTable), by_hash_(std::move(by_hash)), by_ref_(std::move(by_ref)) {}

std::unique_ptr<MockScorer> MockScorer::hashed() {
  auto m = std::make_unique<MockScorer>(Labels{1, 0});
  m->mode_ = Mode::kHash;
  return m;
}

Labels MockScorer::score(const ImageInput& image) {
  switch (mode_) {
    case Mode::kConstant:
      return constant_;
    case Mode::kHash: {
      Digest d = sha256(image.bytes);
      int bucket = d[1] % 10;
      int complexity = bucket < 2 ? 0 : bucket < 5 ? 1 : bucket < 9 ? 2 : 3;
      return {d[0] < 230 ? 1 : 0, complexity};
    }
    case Mode::kTable: {
      if (auto it = by_hash_.find(image.sha256); it != by_hash_.end()) return it->second;
      if (auto it = by_ref_.find(image.image_ref); it != by_ref_.end()) return it->second;
      throw Error(ErrorCode::kUpstreamError, "no mock score for " + image.image_ref);
    }
  }
  return constant_;
}

std::unique_ptr<MockScorer> MockScorer::from_spec(std::string_view spec) {
  if (spec == "hash") return hashed();
  if (spec.rfind("const:", 0) == 0) {
    auto parts = split(spec.substr(6), ',');
    if (parts.size() == 2) {
      auto c = parse_integer(parts[0]);
      auto x = parse_integer(parts[1]);
      if (c && x) return std::make_unique<MockScorer>(Labels{int(*c), int(*x)});
    }
    throw Error(ErrorCode::kConfigInvalid, "mock const spec must be const:C,X");
  }
  if (spec.rfind("table:", 0) == 0) {
    std::unordered_map<std::string, Labels> by_hash, by_ref;
    for (const auto& j : read_jsonl(std::filesystem::path(std::string(spec.substr(6))))) {
      Labels l{j.at("clarity").get<int>(), j.at("complexity").get<int>()};
      if (!labels_valid(l)) throw Error(ErrorCode::kOutOfRange, "mock table labels out of range");
      if (j.contains("sha256")) by_hash[j.at("sha256").get<std::string>()] = l;
      if (j.contains("image_ref")) by_ref[j.at("image_ref").get<std::string>()] = l;
    }
    return std::make_unique<MockScorer>(std::move(by_hash), std::move(by_ref));
  }
  throw Error(ErrorCode::kConfigInvalid, "unknown mock scorer spec '" + std::string(spec) + "'");
}

// --- HTTP scorer ----------------------------------------------------------------

HttpScorer::HttpScorer(std::string base_url, bool send_paths)
    : base_url_(std::move(base_url)), send_paths_(send_paths) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

namespace {

std::pair<std::string, std::string> host_and_prefix(const std::string& url) {
  auto scheme = url.find("://");
  auto slash = scheme == std::string::npos ? std::string::npos : url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

void HttpScorer::check() {
  auto [host, prefix] = host_and_prefix(base_url_);
  httplib::Client client(host);
  client.set_connection_timeout(std::chrono::seconds(10));
  auto res = client.Get(prefix + "/healthz");
  if (!res || res->status != 200) {
    throw Error(ErrorCode::kBackendUnavailable, "classifier service not healthy at " + base_url_);
  }
}

Labels HttpScorer::score(const ImageInput& image) {
  auto [host, prefix] = host_and_prefix(base_url_);
  httplib::Client client(host);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(std::chrono::seconds(60));
  Json body;
  if (send_paths_) body["image_path"] = image.path.string();
  else body["image_b64"] = base64_encode(image.bytes);
  auto res = client.Post(prefix + "/score", dump_json(body), "application/json");
  if (!res) {
    throw Error(ErrorCode::kBackendUnavailable, "POST /score failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::kUpstreamError,
                "POST /score returned " + std::to_string(res->status) + ": " + res->body);
  }
  try {
    auto doc = Json::parse(res->body);
    Labels l{doc.at("clarity").get<int>(), doc.at("complexity").get<int>()};
    if (!labels_valid(l)) throw Error(ErrorCode::kOutOfRange, "classifier labels out of range");
    return l;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseFailure, std::string("bad /score response: ") + e.what());
  }
}

std::unique_ptr<ScorerBackend> make_scorer_backend(const std::string& spec) {
  if (spec.rfind("mock:", 0) == 0) return MockScorer::from_spec(std::string_view(spec).substr(5));
  if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
    return std::make_unique<HttpScorer>(spec);
  }
  throw Error(ErrorCode::kConfigInvalid, "unknown scorer backend '" + spec + "'");
}

// --- score_corpus ---------------------------------------------------------------

ScoreTable score_corpus(const Corpus& corpus, ScorerBackend& backend, const ScoreOptions& options) {
  backend.check();
  const auto refs = corpus.distinct_images();

  std::vector<ImageScores> rows(refs.size());
  parallel_for(refs.size(), options.parallelism, [&](std::size_t i) {
    auto& row = rows[i];
    row.image_ref = refs[i];
    row.source = backend.source();
    try {
      row.sha256 = sha256_hex(read_file(corpus.image_path(refs[i])));
    } catch (const Error& e) {
      row.error = std::string("image unreadable: ") + e.what();
    }
  });

  // One backend call per distinct content hash not already known.
  std::vector<std::size_t> representatives;
  std::unordered_map<std::string, std::size_t> rep_of_hash;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].ok()) continue;
    if (options.cache != nullptr && options.cache->find_by_hash(rows[i].sha256) != nullptr) continue;
    if (rep_of_hash.emplace(rows[i].sha256, i).second) representatives.push_back(i);
  }

  std::vector<std::optional<Labels>> results(representatives.size());
  std::vector<std::string> failures(representatives.size());
  parallel_for(representatives.size(), options.parallelism, [&](std::size_t k) {
    const auto& row = rows[representatives[k]];
    ImageInput input{row.image_ref, corpus.image_path(row.image_ref), {}, row.sha256};
    try {
      input.bytes = read_file(input.path);
      Labels l = backend.score(input);
      if (!labels_valid(l)) throw Error(ErrorCode::kOutOfRange, "backend labels out of range");
      results[k] = l;
    } catch (const Error& e) {
      failures[k] = e.what();
    } catch (const std::exception& e) {
      failures[k] = e.what();
    }
  });

  std::size_t failed = 0;
  std::unordered_map<std::string, std::size_t> result_of_hash;
  for (std::size_t k = 0; k < representatives.size(); ++k) {
    if (!results[k]) ++failed;
    result_of_hash.emplace(rows[representatives[k]].sha256, k);
  }
  if (!representatives.empty() && failed == representatives.size()) {
    throw Error(ErrorCode::kBackendUnavailable,
                "scorer failed on every image; first error: " + failures.front());
  }

  for (auto& row : rows) {
    if (!row.ok()) continue;
    if (options.cache != nullptr) {
      if (const auto* hit = options.cache->find_by_hash(row.sha256)) {
        row.clarity = hit->clarity;
        row.complexity = hit->complexity;
        row.source = hit->source;
        continue;
      }
    }
    std::size_t k = result_of_hash.at(row.sha256);
    if (results[k]) {
      row.clarity = results[k]->clarity;
      row.complexity = results[k]->complexity;
    } else {
      row.error = failures[k];
    }
  }
  return ScoreTable(std::move(rows));
}

// --- annotation -----------------------------------------------------------------

std::vector<std::string> sample_annotation_set(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
  auto refs = corpus.distinct_images();
  if (n > refs.size()) {
    throw Error(ErrorCode::kInsufficientImages, "requested " + std::to_string(n) + " images but corpus has " +
                                                    std::to_string(refs.size()) + " distinct images");
  }
  std::sort(refs.begin(), refs.end());
  Rng rng(seed, "annotate");
  return rng.sample(std::move(refs), n);
}

std::string build_annotation_prompt(std::string_view /*image_ref*/) {
  return "You are labelling images for a training-data quality filter. Look at the image and "
         "assign two labels.\n"
         "\n"
         "1. Image clarity, a binary label:\n"
         "   0 = the image is blurred, noisy or otherwise of poor quality\n"
         "   1 = the image is clear and of good quality\n"
         "\n"
         "2. Image comprehension complexity, a score from 0 to 3. Judge it by:\n"
         "   - the number of objects in the image\n"
         "   - the positional relationships between those objects\n"
         "   - whether mathematical calculations are needed to understand it\n"
         "   - the level of detail, texture and material properties\n"
         "   0 = very easy to understand, 1 = moderate, 2 = hard, 3 = very hard\n"
         "\n"
         "Reply with exactly these two lines and nothing else:\n"
         "clarity: <0 or 1>\n"
         "complexity: <0, 1, 2 or 3>\n";
}

namespace {

// Numbered so every retry is a distinct request and bypasses the response cache.
std::string annotation_reminder(int attempt) {
  return "\nReminder (attempt " + std::to_string(attempt + 1) +
         "): answer with exactly two lines, `clarity: <0|1>` and `complexity: <0-3>`.\n";
}

// Value of the first line labelled `name:` (or `name =`), if any.
std::optional<std::string> labelled_value(std::string_view text, std::string_view name) {
  for (const auto& raw : split(text, '\n')) {
    std::string_view line = trim(raw);
    while (!line.empty() && (line.front() == '*' || line.front() == '-' || line.front() == '#' ||
                             line.front() == '>' || line.front() == '`')) {
      line.remove_prefix(1);
    }
    line = trim(line);
    if (!starts_with_ci(line, name)) continue;
    line.remove_prefix(name.size());
    while (!line.empty() && (line.front() == '*' || line.front() == ' ')) line.remove_prefix(1);
    if (line.empty() || (line.front() != ':' && line.front() != '=')) continue;
    line.remove_prefix(1);
    line = trim(line);
    while (!line.empty() && (line.front() == '*' || line.front() == '`')) line.remove_prefix(1);
    return std::string(trim(line));
  }
  return std::nullopt;
}

int label_integer(const std::string& value, std::string_view name) {
  std::size_t i = 0;
  if (i < value.size() && value[i] == '-') ++i;
  std::size_t digits = i;
  while (digits < value.size() && std::isdigit(static_cast<unsigned char>(value[digits]))) ++digits;
  if (digits == i || (digits < value.size() && value[digits] == '.')) {
    throw Error(ErrorCode::kParseFailure, std::string(name) + " value is not an integer: '" + value + "'");
  }
  auto v = parse_integer(std::string_view(value).substr(0, digits));
  if (!v || *v < -1000 || *v > 1000) {
    throw Error(ErrorCode::kOutOfRange, std::string(name) + " value out of range: " + value);
  }
  return static_cast<int>(*v);
}

}  // namespace

Labels parse_annotation_response(std::string_view text) {
  auto clarity = labelled_value(text, "clarity");
  auto complexity = labelled_value(text, "complexity");
  if (!clarity || !complexity) {
    throw Error(ErrorCode::kParseFailure, "response lacks clarity/complexity lines");
  }
  Labels l{label_integer(*clarity, "clarity"), label_integer(*complexity, "complexity")};
  if (!labels_valid(l)) {
    throw Error(ErrorCode::kOutOfRange, "labels out of range: clarity " + std::to_string(l.clarity) +
                                            ", complexity " + std::to_string(l.complexity));
  }
  return l;
}

std::string render_annotation_response(const Labels& l) {
  return "clarity: " + std::to_string(l.clarity) + "\ncomplexity: " + std::to_string(l.complexity) + "\n";
}

AnnotationResult annotate_images(const Corpus& corpus, const std::vector<std::string>& image_refs,
                                 VlmClient& client, const AnnotateOptions& options) {
  struct Outcome {
    std::optional<AnnotatedImage> labeled;
    std::string reason;
  };
  std::vector<Outcome> outcomes(image_refs.size());
  const std::string prompt = build_annotation_prompt("");

  parallel_for(image_refs.size(), options.parallelism, [&](std::size_t i) {
    const auto& ref = image_refs[i];
    auto path = corpus.image_path(ref);
    VlmRequest req;
    req.model_id = options.model_id;
    req.max_tokens = options.max_tokens;
    req.temperature = kAnnotationTemperature;
    req.media_type = media_type_for(path);
    try {
      req.image = read_file(path);
    } catch (const Error& e) {
      outcomes[i].reason = e.what();
      return;
    }
    for (int attempt = 0; attempt <= options.parse_retries; ++attempt) {
      req.prompt = attempt == 0 ? prompt : prompt + annotation_reminder(attempt);
      try {
        auto resp = client.complete(req);
        Labels l = parse_annotation_response(resp.text);
        outcomes[i].labeled = AnnotatedImage{ref, path.string(), sha256_hex(req.image), l};
        return;
      } catch (const Error& e) {
        outcomes[i].reason = e.what();
        if (e.code() != ErrorCode::kParseFailure && e.code() != ErrorCode::kOutOfRange) return;
      }
    }
  });

  AnnotationResult result;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].labeled) result.labeled.push_back(std::move(*outcomes[i].labeled));
    else result.dropped.push_back({image_refs[i], outcomes[i].reason});
  }
  return result;
}

Json to_json(const AnnotatedImage& image) {
  Json j;
  j["image_ref"] = image.image_ref;
  j["image_path"] = image.image_path;
  j["sha256"] = image.sha256;
  j["clarity"] = image.labels.clarity;
  j["complexity"] = image.labels.complexity;
  return j;
}

}  // namespace forge
