// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/emit.hpp"

#include <sstream>

#include "forge/error.hpp"
#include "forge/hash.hpp"
#include "forge/text.hpp"

namespace forge {

Json to_json(const InstructionRecord& r) {
  Json turns = Json::array();
  for (const auto& t : r.conversations) turns.push_back({{"from", t.from}, {"value", t.value}});
  Json meta = {{"dataset_id", r.meta.dataset_id},
               {"task", std::string(to_string(r.meta.task))},
               {"kind", std::string(to_string(r.meta.kind))}};
  meta["complexity"] = r.meta.complexity ? Json(*r.meta.complexity) : Json(nullptr);
  return {{"id", r.id}, {"image", r.image}, {"conversations", turns}, {"meta", meta}};
}

InstructionRecord instruction_record_from_json(const Json& row) {
  try {
    InstructionRecord r;
    r.id = row.at("id").get<std::string>();
    r.image = row.at("image").get<std::string>();
    for (const auto& t : row.at("conversations")) {
      r.conversations.push_back({t.at("from").get<std::string>(), t.at("value").get<std::string>()});
    }
    const auto& meta = row.at("meta");
    r.meta.dataset_id = meta.at("dataset_id").get<std::string>();
    auto task = parse_task(meta.at("task").get<std::string>());
    auto kind = parse_augmentation_kind(meta.at("kind").get<std::string>());
    if (!task || !kind) throw Error(ErrorCode::kParseFailure, "instruction record has an unknown task or kind");
    r.meta.task = *task;
    r.meta.kind = *kind;
    if (meta.contains("complexity") && !meta.at("complexity").is_null()) {
      r.meta.complexity = meta.at("complexity").get<int>();
    }
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseFailure, std::string("instruction record: ") + e.what());
  }
}

namespace {

std::size_t count_occurrences(std::string_view s, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string_view::npos; pos = s.find(needle, pos + needle.size())) ++n;
  return n;
}

}  // namespace

void check_conversation(const InstructionRecord& r) {
  auto bad = [&](const std::string& why) { throw RecordInvalid("emit", 0, r.id + ": " + why); };
  if (r.conversations.size() < 2 || r.conversations.size() % 2 != 0) bad("conversation length must be even and >= 2");
  for (std::size_t i = 0; i < r.conversations.size(); ++i) {
    const char* expected = i % 2 == 0 ? "human" : "gpt";
    if (r.conversations[i].from != expected) bad("turn " + std::to_string(i) + " must be from " + expected);
  }
  if (count_occurrences(r.conversations[0].value, kImageToken) != 1) bad("first turn needs exactly one <image>");
  for (std::size_t i = 1; i < r.conversations.size(); ++i) {
    if (count_occurrences(r.conversations[i].value, kImageToken) != 0) bad("<image> outside the first turn");
  }
}

std::string render_choices(const std::vector<std::string>& choices) {
  std::string out;
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (i) out += '\n';
    out += '(';
    out += static_cast<char>('A' + i);
    out += ") " + choices[i];
  }
  return out;
}

InstructionRecord to_instruction_record(const GeneratedQA& pair, const std::string& id, const EmitContext& ctx) {
  if (!ctx.selected) throw Error(ErrorCode::kInvalidArgument, "emit needs the selected corpus");
  const SourceRecord* parent = ctx.selected->find(pair.parent_record_id);
  if (!parent) {
    throw Error(ErrorCode::kDanglingParent, "pair " + id + " refers to unknown record '" + pair.parent_record_id + "'");
  }
  if (ctx.require_images && !std::filesystem::exists(ctx.selected->image_path(parent->image_ref))) {
    throw Error(ErrorCode::kMissingImage, "image not found: " + ctx.selected->image_path(parent->image_ref).string());
  }
  std::string human = std::string(kImageToken) + "\n" + pair.question;
  bool inherits_choices = pair.kind == AugmentationKind::kSeed || pair.kind == AugmentationKind::kRephQ ||
                          pair.kind == AugmentationKind::kSimpQ;
  if (inherits_choices && parent->answer_kind == AnswerKind::kChoice && !parent->choices.empty()) {
    human += "\nChoices:\n" + render_choices(parent->choices);
  }
  InstructionRecord r;
  r.id = id;
  r.image = parent->image_ref;
  r.conversations = {{"human", human}, {"gpt", pair.answer}};
  r.meta.dataset_id = parent->dataset_id;
  r.meta.task = parent->task;
  r.meta.kind = pair.kind;
  if (ctx.scores) {
    if (const auto* s = ctx.scores->find(parent->image_ref); s && s->ok()) r.meta.complexity = s->complexity;
  }
  return r;
}

std::vector<InstructionRecord> build_instruction_records(const std::vector<GeneratedQA>& pairs,
                                                         const EmitContext& ctx) {
  std::map<std::pair<std::string, AugmentationKind>, std::size_t> ordinal;
  std::vector<InstructionRecord> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    std::string id = p.parent_record_id;
    if (p.kind != AugmentationKind::kSeed) {
      std::size_t i = ++ordinal[{p.parent_record_id, p.kind}];
      id += "#" + casefold(to_string(p.kind)) + "-" + std::to_string(i);
    }
    out.push_back(to_instruction_record(p, id, ctx));
  }
  return out;
}

Json to_json(const EmittedManifest& m) {
  return {{"file", m.file}, {"count", m.count}, {"per_kind", m.per_kind}, {"sha256", m.sha256}};
}

EmittedManifest emitted_manifest_from_json(const Json& j) {
  try {
    EmittedManifest m;
    m.file = j.at("file").get<std::string>();
    m.count = j.at("count").get<std::size_t>();
    for (const auto& [k, v] : j.at("per_kind").items()) m.per_kind[k] = v.get<std::size_t>();
    m.sha256 = j.at("sha256").get<std::string>();
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseFailure, std::string("dataset manifest: ") + e.what());
  }
}

EmittedManifest write_dataset(const std::vector<InstructionRecord>& records, const std::filesystem::path& out_dir) {
  std::vector<Json> rows;
  rows.reserve(records.size());
  EmittedManifest m;
  m.file = std::string(kDatasetFile);
  for (auto kind : kAllKinds) m.per_kind[std::string(to_string(kind))] = 0;
  for (const auto& r : records) {
    check_conversation(r);
    rows.push_back(to_json(r));
    ++m.per_kind[std::string(to_string(r.meta.kind))];
  }
  std::string bytes = to_jsonl(rows);
  m.count = records.size();
  m.sha256 = sha256_hex(bytes);
  write_file_atomic(out_dir / kDatasetFile, bytes);
  write_file_atomic(out_dir / kDatasetManifestFile, dump_json_pretty(to_json(m)));
  return m;
}

std::vector<InstructionRecord> read_dataset(const std::filesystem::path& jsonl_path) {
  std::vector<InstructionRecord> out;
  for (const auto& row : read_jsonl(jsonl_path)) out.push_back(instruction_record_from_json(row));
  return out;
}

EmittedManifest read_dataset_manifest(const std::filesystem::path& out_dir) {
  return emitted_manifest_from_json(parse_json(read_file(out_dir / kDatasetManifestFile), "dataset manifest"));
}

std::map<std::string, std::size_t> target_composition(const CompositionTarget& t) {
  std::map<std::string, std::size_t> out;
  for (auto kind : kAllKinds) {
    std::size_t per_seed = 0;
    if (t.ops.enabled(kind)) per_seed = kind == AugmentationKind::kAskImg ? t.n_per_image : 1;
    out[std::string(to_string(kind))] = t.seeds * per_seed;
  }
  return out;
}

DatasetReport dataset_report(const std::vector<InstructionRecord>& records,
                             const std::optional<CompositionTarget>& target) {
  DatasetReport rep;
  rep.total = records.size();
  for (auto kind : kAllKinds) rep.by_kind[std::string(to_string(kind))] = 0;
  for (const auto& r : records) {
    ++rep.by_kind[std::string(to_string(r.meta.kind))];
    ++rep.by_task[std::string(to_string(r.meta.task))];
    ++rep.by_dataset[r.meta.dataset_id];
    ++rep.by_complexity[r.meta.complexity ? std::to_string(*r.meta.complexity) : "unscored"];
  }
  if (target) rep.target_by_kind = target_composition(*target);
  return rep;
}

Json to_json(const DatasetReport& r) {
  Json j = {{"total", r.total},
            {"by_kind", r.by_kind},
            {"by_task", r.by_task},
            {"by_dataset", r.by_dataset},
            {"by_complexity", r.by_complexity}};
  if (!r.target_by_kind.empty()) j["target_by_kind"] = r.target_by_kind;
  return j;
}

std::string render_report(const DatasetReport& r) {
  std::ostringstream out;
  out << "total " << r.total << "\n\nkind      realized  target\n";
  for (const auto& [kind, n] : r.by_kind) {
    out << kind << std::string(10 - std::min<std::size_t>(kind.size(), 9), ' ');
    std::string realized = std::to_string(n);
    out << std::string(8 - std::min<std::size_t>(realized.size(), 7), ' ') << realized;
    if (auto it = r.target_by_kind.find(kind); it != r.target_by_kind.end()) {
      std::string t = std::to_string(it->second);
      out << std::string(8 - std::min<std::size_t>(t.size(), 7), ' ') << t;
    }
    out << '\n';
  }
  auto section = [&](const char* title, const std::map<std::string, std::size_t>& m) {
    out << '\n' << title << '\n';
    for (const auto& [k, n] : m) out << "  " << k << ' ' << n << '\n';
  };
  section("by task", r.by_task);
  section("by dataset", r.by_dataset);
  section("by complexity", r.by_complexity);
  return out.str();
}

}  // namespace forge
