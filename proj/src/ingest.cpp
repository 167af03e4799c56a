// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/ingest.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "forge/error.hpp"
#include "forge/text.hpp"

namespace forge {

std::string_view to_string(TaskType task) {
  switch (task) {
    case TaskType::kFQA: return "FQA";
    case TaskType::kGPS: return "GPS";
    case TaskType::kMWP: return "MWP";
    case TaskType::kTQA: return "TQA";
    case TaskType::kVQA: return "VQA";
  }
  return "?";
}

std::optional<TaskType> parse_task(std::string_view name) {
  for (auto t : kAllTasks) {
    if (to_string(t) == name) return t;
  }
  return std::nullopt;
}

std::string_view to_string(AnswerKind kind) {
  switch (kind) {
    case AnswerKind::kChoice: return "choice";
    case AnswerKind::kInteger: return "integer";
    case AnswerKind::kFloat: return "float";
    case AnswerKind::kList: return "list";
    case AnswerKind::kFreeText: return "free_text";
  }
  return "?";
}

std::optional<AnswerKind> parse_answer_kind(std::string_view name) {
  for (auto k : {AnswerKind::kChoice, AnswerKind::kInteger, AnswerKind::kFloat,
                 AnswerKind::kList, AnswerKind::kFreeText}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

AnswerKind infer_answer_kind(std::string_view answer, bool has_choices) {
  if (has_choices) return AnswerKind::kChoice;
  auto t = trim(answer);
  if (t.find('.') != std::string_view::npos && parse_number(t)) return AnswerKind::kFloat;
  if (parse_integer(t)) return AnswerKind::kInteger;
  return AnswerKind::kFreeText;
}

Json to_json(const SourceRecord& r) {
  Json j;
  j["record_id"] = r.record_id;
  j["dataset_id"] = r.dataset_id;
  j["task"] = std::string(to_string(r.task));
  j["image_ref"] = r.image_ref;
  j["question"] = r.question;
  j["answer"] = r.answer;
  j["answer_kind"] = std::string(to_string(r.answer_kind));
  if (r.answer_kind == AnswerKind::kChoice) j["choices"] = r.choices;
  return j;
}

SourceRecord source_record_from_json(const Json& row) {
  try {
    SourceRecord r;
    r.record_id = row.at("record_id").get<std::string>();
    r.dataset_id = row.at("dataset_id").get<std::string>();
    auto task = parse_task(row.at("task").get<std::string>());
    auto kind = parse_answer_kind(row.at("answer_kind").get<std::string>());
    if (!task || !kind) throw Error(ErrorCode::kParseFailure, "bad task or answer_kind");
    r.task = *task;
    r.answer_kind = *kind;
    r.image_ref = row.at("image_ref").get<std::string>();
    r.question = row.at("question").get<std::string>();
    r.answer = row.at("answer").get<std::string>();
    if (row.contains("choices")) r.choices = row.at("choices").get<std::vector<std::string>>();
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseFailure, std::string("malformed source record: ") + e.what());
  }
}

namespace {

// image_ref must stay inside the image root.
bool is_contained_relative(std::string_view ref) {
  if (ref.empty()) return false;
  std::filesystem::path p(ref);
  if (p.is_absolute() || p.has_root_name()) return false;
  for (const auto& part : p.lexically_normal()) {
    if (part == "..") return false;
  }
  return true;
}

std::string required_string(const Json& row, const char* field, const std::string& dataset_id,
                            std::size_t line) {
  auto it = row.find(field);
  if (it == row.end()) throw RecordInvalid(dataset_id, line, std::string("missing field '") + field + "'");
  if (!it->is_string()) throw RecordInvalid(dataset_id, line, std::string("field '") + field + "' is not a string");
  return it->get<std::string>();
}

// Multi-answer sources (DocVQA-style span lists) keep the first listed
// answer; list-typed answers given as arrays are rendered "[a, b, c]".
std::string answer_text(const Json& row, const std::optional<AnswerKind>& kind,
                        const std::string& dataset_id, std::size_t line) {
  auto it = row.find("answer");
  if (it == row.end()) throw RecordInvalid(dataset_id, line, "missing field 'answer'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number()) return it->dump();
  if (it->is_array()) {
    std::vector<std::string> parts;
    for (const auto& v : *it) {
      if (v.is_string()) parts.push_back(v.get<std::string>());
      else if (v.is_number()) parts.push_back(v.dump());
      else throw RecordInvalid(dataset_id, line, "answer list holds a non-scalar value");
    }
    if (kind == AnswerKind::kList) return "[" + join(parts, ", ") + "]";
    for (auto& p : parts) {
      if (!is_blank(p)) return p;
    }
    return {};
  }
  throw RecordInvalid(dataset_id, line, "field 'answer' has unsupported type");
}

SourceRecord parse_record_line(std::string_view line_text, const DatasetEntry& entry,
                               std::size_t line) {
  Json row;
  try {
    row = Json::parse(line_text);
  } catch (const Json::parse_error& e) {
    throw RecordInvalid(entry.dataset_id, line, std::string("invalid JSON: ") + e.what());
  }
  if (!row.is_object()) throw RecordInvalid(entry.dataset_id, line, "record is not a JSON object");

  SourceRecord r;
  r.record_id = required_string(row, "record_id", entry.dataset_id, line);
  if (is_blank(r.record_id)) throw RecordInvalid(entry.dataset_id, line, "empty record_id");

  r.dataset_id = entry.dataset_id;
  if (row.contains("dataset_id") &&
      required_string(row, "dataset_id", entry.dataset_id, line) != entry.dataset_id) {
    throw RecordInvalid(entry.dataset_id, line, "dataset_id does not match manifest entry");
  }
  r.task = entry.task;
  if (row.contains("task")) {
    auto t = parse_task(required_string(row, "task", entry.dataset_id, line));
    if (!t) throw RecordInvalid(entry.dataset_id, line, "unknown task type");
    if (*t != entry.task) {
      throw RecordInvalid(entry.dataset_id, line, "task differs from the dataset's declared task");
    }
  }

  r.image_ref = required_string(row, "image_ref", entry.dataset_id, line);
  if (!is_contained_relative(r.image_ref)) {
    throw RecordInvalid(entry.dataset_id, line, "image_ref must be a relative path under the image root");
  }

  r.question = required_string(row, "question", entry.dataset_id, line);
  if (is_blank(r.question)) throw RecordInvalid(entry.dataset_id, line, "empty question");

  std::optional<AnswerKind> kind;
  if (row.contains("answer_kind")) {
    kind = parse_answer_kind(required_string(row, "answer_kind", entry.dataset_id, line));
    if (!kind) throw RecordInvalid(entry.dataset_id, line, "unknown answer_kind");
  }
  r.answer = answer_text(row, kind, entry.dataset_id, line);
  if (is_blank(r.answer)) throw RecordInvalid(entry.dataset_id, line, "empty answer");

  if (auto it = row.find("choices"); it != row.end() && !it->is_null()) {
    if (!it->is_array()) throw RecordInvalid(entry.dataset_id, line, "choices is not a list");
    for (const auto& c : *it) {
      if (!c.is_string()) throw RecordInvalid(entry.dataset_id, line, "choice is not a string");
      r.choices.push_back(c.get<std::string>());
    }
  }

  r.answer_kind = kind ? *kind : infer_answer_kind(r.answer, !r.choices.empty());
  if (r.answer_kind == AnswerKind::kChoice) {
    if (r.choices.empty()) throw RecordInvalid(entry.dataset_id, line, "choice answer without choices");
    if (std::find(r.choices.begin(), r.choices.end(), r.answer) == r.choices.end()) {
      throw RecordInvalid(entry.dataset_id, line, "answer is not one of the choices");
    }
  } else if (!r.choices.empty()) {
    throw RecordInvalid(entry.dataset_id, line, "choices present on a non-choice answer");
  }
  return r;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

}  // namespace

DatasetManifest read_manifest(const std::filesystem::path& manifest_path) {
  Json doc;
  try {
    doc = Json::parse(read_file(manifest_path));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kManifestInvalid, manifest_path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kManifestInvalid, e.what());
  }
  auto base = manifest_path.parent_path();
  DatasetManifest m;
  try {
    m.schema_version = doc.at("schema_version").get<int>();
    if (m.schema_version != kManifestSchemaVersion) {
      throw Error(ErrorCode::kManifestInvalid,
                  "unsupported schema_version " + std::to_string(m.schema_version));
    }
    m.image_root = resolve(base, doc.at("image_root").get<std::string>());
    std::set<std::string> seen;
    for (const auto& d : doc.at("datasets")) {
      DatasetEntry e;
      e.dataset_id = d.at("dataset_id").get<std::string>();
      auto task = parse_task(d.at("task").get<std::string>());
      if (!task) throw Error(ErrorCode::kManifestInvalid, "unknown task for " + e.dataset_id);
      e.task = *task;
      e.records_file = resolve(base, d.at("records_file").get<std::string>());
      if (e.dataset_id.empty() || !seen.insert(e.dataset_id).second) {
        throw Error(ErrorCode::kManifestInvalid, "duplicate or empty dataset_id '" + e.dataset_id + "'");
      }
      if (!std::filesystem::is_regular_file(e.records_file)) {
        throw Error(ErrorCode::kManifestInvalid, "records_file missing: " + e.records_file.string());
      }
      m.datasets.push_back(std::move(e));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kManifestInvalid, manifest_path.string() + ": " + e.what());
  }
  return m;
}

Corpus::Corpus(std::filesystem::path image_root, std::vector<DatasetEntry> datasets,
               std::vector<SourceRecord> records)
    : image_root_(std::move(image_root)), datasets_(std::move(datasets)), records_(std::move(records)) {
  index_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!index_.emplace(records_[i].record_id, i).second) {
      throw RecordInvalid(records_[i].dataset_id, 0, "duplicate record_id '" + records_[i].record_id + "'");
    }
  }
}

const SourceRecord* Corpus::find(std::string_view record_id) const {
  auto it = index_.find(std::string(record_id));
  return it == index_.end() ? nullptr : &records_[it->second];
}

std::optional<TaskType> Corpus::task_of(std::string_view dataset_id) const {
  for (const auto& d : datasets_) {
    if (d.dataset_id == dataset_id) return d.task;
  }
  return std::nullopt;
}

std::vector<std::string> Corpus::distinct_images() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& r : records_) {
    if (seen.insert(r.image_ref).second) out.push_back(r.image_ref);
  }
  return out;
}

std::filesystem::path Corpus::image_path(std::string_view image_ref) const {
  return image_root_ / std::filesystem::path(image_ref);
}

Corpus load_corpus(const std::filesystem::path& manifest_path, const LoadOptions& options) {
  DatasetManifest manifest = read_manifest(manifest_path);
  std::vector<SourceRecord> records;
  std::unordered_map<std::string, std::string> owner;  // record_id -> dataset_id
  for (const auto& entry : manifest.datasets) {
    for_each_line(entry.records_file, [&](std::size_t line, std::string_view text) {
      SourceRecord r = parse_record_line(text, entry, line);
      if (auto [it, fresh] = owner.emplace(r.record_id, entry.dataset_id); !fresh) {
        throw RecordInvalid(entry.dataset_id, line,
                            "duplicate record_id '" + r.record_id + "' (first seen in " + it->second + ")");
      }
      if (options.strict_images &&
          !std::filesystem::is_regular_file(manifest.image_root / r.image_ref)) {
        throw Error(ErrorCode::kMissingImage,
                    entry.dataset_id + ":" + std::to_string(line) + ": image not found: " + r.image_ref);
      }
      records.push_back(std::move(r));
    });
  }
  return Corpus(manifest.image_root, manifest.datasets, std::move(records));
}

std::string serialize_records(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus) {
    out += dump_json(to_json(r));
    out.push_back('\n');
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  Json meta;
  meta["image_root"] = corpus.image_root().string();
  Json datasets = Json::array();
  for (const auto& d : corpus.datasets()) {
    datasets.push_back({{"dataset_id", d.dataset_id},
                        {"task", std::string(to_string(d.task))},
                        {"records_file", d.records_file.string()}});
  }
  meta["datasets"] = std::move(datasets);
  write_file_atomic(dir / "corpus.jsonl", serialize_records(corpus));
  write_file_atomic(dir / "corpus_meta.json", dump_json_pretty(meta));
}

Corpus read_corpus(const std::filesystem::path& dir) {
  Json meta = parse_json(read_file(dir / "corpus_meta.json"), "corpus_meta.json");
  std::vector<DatasetEntry> datasets;
  for (const auto& d : meta.at("datasets")) {
    datasets.push_back({d.at("dataset_id").get<std::string>(),
                        *parse_task(d.at("task").get<std::string>()),
                        d.at("records_file").get<std::string>()});
  }
  std::vector<SourceRecord> records;
  for (const auto& row : read_jsonl(dir / "corpus.jsonl")) {
    records.push_back(source_record_from_json(row));
  }
  return Corpus(meta.at("image_root").get<std::string>(), std::move(datasets), std::move(records));
}

StatsReport corpus_stats(const Corpus& corpus) {
  StatsReport s;
  for (const auto& d : corpus.datasets()) s.per_dataset[d.dataset_id] = 0;
  for (auto t : kAllTasks) s.per_task[t] = 0;
  for (const auto& r : corpus) {
    ++s.per_dataset[r.dataset_id];
    ++s.per_task[r.task];
  }
  s.total = corpus.size();
  s.distinct_images = corpus.distinct_images().size();
  return s;
}

Json to_json(const StatsReport& s) {
  Json j;
  j["total"] = s.total;
  j["distinct_images"] = s.distinct_images;
  Json per_dataset = Json::object();
  for (const auto& [k, v] : s.per_dataset) per_dataset[k] = v;
  Json per_task = Json::object();
  for (const auto& [k, v] : s.per_task) per_task[std::string(to_string(k))] = v;
  j["per_dataset"] = std::move(per_dataset);
  j["per_task"] = std::move(per_task);
  return j;
}

}  // namespace forge
