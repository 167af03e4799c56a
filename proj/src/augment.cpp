// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/augment.hpp"

#include <algorithm>
#include <set>

#include "forge/error.hpp"
#include "forge/hash.hpp"
#include "forge/parallel.hpp"
#include "forge/text.hpp"

namespace forge {

std::string_view to_string(AugmentationKind kind) {
  switch (kind) {
    case AugmentationKind::kSeed: return "Seed";
    case AugmentationKind::kAskImg: return "AskImg";
    case AugmentationKind::kCompQ: return "CompQ";
    case AugmentationKind::kRephQ: return "RephQ";
    case AugmentationKind::kSimpQ: return "SimpQ";
  }
  return "?";
}

std::optional<AugmentationKind> parse_augmentation_kind(std::string_view name) {
  std::string folded = casefold(trim(name));
  for (auto kind : kAllKinds) {
    if (casefold(to_string(kind)) == folded) return kind;
  }
  return std::nullopt;
}

Json to_json(const GeneratedQA& qa) {
  return {{"parent_record_id", qa.parent_record_id},
          {"kind", std::string(to_string(qa.kind))},
          {"question", qa.question},
          {"answer", qa.answer},
          {"request_id", qa.request_id}};
}

GeneratedQA generated_qa_from_json(const Json& row) {
  try {
    GeneratedQA qa;
    qa.parent_record_id = row.at("parent_record_id").get<std::string>();
    auto kind = parse_augmentation_kind(row.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::kInvalidKind, "unknown kind " + row.at("kind").dump());
    qa.kind = *kind;
    qa.question = row.at("question").get<std::string>();
    qa.answer = row.at("answer").get<std::string>();
    qa.request_id = row.value("request_id", "");
    return qa;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseFailure, std::string("generated pair: ") + e.what());
  }
}

namespace {

std::string_view task_description(TaskType task) {
  switch (task) {
    case TaskType::kFQA: return "figure question answering";
    case TaskType::kGPS: return "geometry problem solving";
    case TaskType::kMWP: return "math word problem";
    case TaskType::kTQA: return "textbook question answering";
    case TaskType::kVQA: return "visual question answering";
  }
  return "question answering";
}

void append_original(std::string& out, const SourceRecord& record, bool with_answer) {
  out += "Original question: " + collapse_whitespace(record.question) + "\n";
  if (!record.choices.empty()) {
    out += "Options: " + join(record.choices, " | ") + "\n";
  }
  if (with_answer) out += "Original answer: " + collapse_whitespace(record.answer) + "\n";
}

void append_format(std::string& out, std::size_t n) {
  out += "Reply with exactly these lines and nothing else:\n";
  for (std::size_t i = 1; i <= n; ++i) {
    out += "Q" + std::to_string(i) + ": <question>\n";
    out += "A" + std::to_string(i) + ": <answer>\n";
  }
}

}  // namespace

std::string build_qa_generation_prompt(const SourceRecord& record, const DemoPool& demos, std::size_t n) {
  std::vector<const Demo*> same_task;
  if (demos.task == record.task) {
    for (const auto& d : demos.demos) same_task.push_back(&d);
  }
  if (same_task.empty()) {
    throw Error(ErrorCode::kEmptyDemoPool,
                "no demonstrations for task " + std::string(to_string(record.task)));
  }
  std::string out = "Task: generate new question-answer pairs for this image.\n";
  out += "The image comes from a " + std::string(task_description(record.task)) + " dataset.\n";
  append_original(out, record, false);
  out += "Example questions of this task type:\n";
  for (std::size_t i = 0; i < same_task.size(); ++i) {
    out += "- " + collapse_whitespace(same_task[i]->question) + "\n";
  }
  out += "Write " + std::to_string(n) +
         " new questions about the image in the style of the examples. Each question must be answerable "
         "from the image and must differ from the original question. Give a short final answer for each.\n";
  if (record.task == TaskType::kMWP) out += "Every answer must be a single number.\n";
  append_format(out, n);
  return out;
}

std::string build_question_augment_prompt(AugmentationKind kind, const SourceRecord& record) {
  std::string out;
  switch (kind) {
    case AugmentationKind::kCompQ:
      out = "Task: write a more complex version of the question.\n";
      append_original(out, record, true);
      out +=
          "Raise the reasoning complexity: the new question must need more reasoning steps or extra "
          "calculation on top of the original, using the same image. Solve it and give its final answer.\n";
      break;
    case AugmentationKind::kRephQ:
      out = "Task: rephrase the question.\n";
      append_original(out, record, true);
      out +=
          "Ask the same thing in different words. Do not change the answer: it must stay exactly the "
          "original answer.\n";
      break;
    case AugmentationKind::kSimpQ:
      out = "Task: simplify the question.\n";
      append_original(out, record, true);
      out +=
          "Make the question shorter by leaving out information that can be read from the image. With the "
          "image, the original answer must still hold; give it unchanged.\n";
      break;
    default:
      throw Error(ErrorCode::kInvalidKind,
                  "no question-augment prompt for kind " + std::string(to_string(kind)));
  }
  append_format(out, 1);
  return out;
}

namespace {

// Matches "Q3: text", "**A3.** text", "- q3) text". Returns (letter, index, rest).
struct Marker {
  char letter;
  std::size_t index;
  std::string rest;
};

std::optional<Marker> parse_marker(std::string_view line) {
  std::string_view s = trim(line);
  while (!s.empty() && (s.front() == '*' || s.front() == '-' || s.front() == '#')) s.remove_prefix(1);
  s = trim(s);
  if (s.size() < 3) return std::nullopt;
  char letter = static_cast<char>(s[0] == 'q' ? 'Q' : s[0] == 'a' ? 'A' : s[0]);
  if (letter != 'Q' && letter != 'A') return std::nullopt;
  std::size_t i = 1;
  std::size_t index = 0;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9' && i < 8) index = index * 10 + (s[i++] - '0');
  if (i == 1) return std::nullopt;
  while (i < s.size() && s[i] == '*') ++i;
  if (i >= s.size() || (s[i] != ':' && s[i] != '.' && s[i] != ')')) return std::nullopt;
  ++i;
  while (i < s.size() && s[i] == '*') ++i;
  return Marker{letter, index, std::string(trim(s.substr(i)))};
}

}  // namespace

ParsedQA parse_qa_block(std::string_view text, std::size_t expected_n) {
  std::map<std::size_t, std::string> questions, answers;
  std::string* open = nullptr;
  for (const auto& raw : split(text, '\n')) {
    if (auto m = parse_marker(raw)) {
      open = nullptr;
      if (m->index < 1 || m->index > expected_n) continue;
      auto& slot = m->letter == 'Q' ? questions : answers;
      if (slot.count(m->index)) continue;  // first occurrence wins
      open = &slot[m->index];
      *open = m->rest;
    } else if (open && !is_blank(raw)) {
      // Continuation of a wrapped question or answer.
      if (!open->empty()) *open += ' ';
      *open += std::string(trim(raw));
    }
  }
  ParsedQA out;
  for (std::size_t i = 1; i <= expected_n; ++i) {
    auto q = questions.find(i);
    auto a = answers.find(i);
    if (q == questions.end() || a == answers.end()) continue;
    std::string question(trim(q->second)), answer(trim(a->second));
    if (question.empty() || answer.empty()) continue;
    out.pairs.emplace_back(std::move(question), std::move(answer));
  }
  if (out.pairs.empty()) throw Error(ErrorCode::kParseFailure, "no Q/A pairs in response");
  out.shortfall = expected_n - out.pairs.size();
  return out;
}

bool OperatorSet::enabled(AugmentationKind kind) const {
  switch (kind) {
    case AugmentationKind::kSeed: return true;
    case AugmentationKind::kAskImg: return askimg;
    case AugmentationKind::kCompQ: return compq;
    case AugmentationKind::kRephQ: return rephq;
    case AugmentationKind::kSimpQ: return simpq;
  }
  return false;
}

OperatorSet parse_ops(std::string_view text) {
  OperatorSet ops{false, false, false, false};
  std::string folded = casefold(trim(text));
  if (folded.empty() || folded == "none") return ops;
  if (folded == "all") return OperatorSet{};
  for (const auto& part : split(folded, ',')) {
    std::string name(trim(part));
    if (name == "askimg") ops.askimg = true;
    else if (name == "compq") ops.compq = true;
    else if (name == "rephq") ops.rephq = true;
    else if (name == "simpq") ops.simpq = true;
    else throw Error(ErrorCode::kInvalidKind, "unknown augmentation operator '" + name + "'");
  }
  return ops;
}

std::string format_ops(const OperatorSet& ops) {
  std::vector<std::string> names;
  if (ops.askimg) names.push_back("askimg");
  if (ops.compq) names.push_back("compq");
  if (ops.rephq) names.push_back("rephq");
  if (ops.simpq) names.push_back("simpq");
  return names.empty() ? "none" : join(names, ",");
}

namespace {

bool is_transport_error(const Error& e) {
  return e.code() == ErrorCode::kRateLimited || e.code() == ErrorCode::kUpstreamError ||
         e.code() == ErrorCode::kTimeout;
}

bool numeric_answer(std::string_view answer) {
  std::string s(trim(answer));
  s.erase(std::remove(s.begin(), s.end(), ','), s.end());
  return parse_number(s).has_value();
}

struct SeedOutcome {
  std::vector<GeneratedQA> pairs;
  std::vector<AugmentLogEntry> log;
  std::size_t calls = 0;
  std::size_t failed = 0;
};

class SeedJob {
 public:
  SeedJob(const SourceRecord& record, const Corpus& corpus, VlmClient& client, const AugmentConfig& config)
      : record_(record), corpus_(corpus), client_(client), config_(config) {}

  SeedOutcome run(const DemoPool* pool) {
    out_.pairs.push_back({record_.record_id, AugmentationKind::kSeed, record_.question, record_.answer, ""});
    std::vector<AugmentationKind> kinds;
    for (auto kind : {AugmentationKind::kAskImg, AugmentationKind::kCompQ, AugmentationKind::kRephQ,
                      AugmentationKind::kSimpQ}) {
      if (config_.ops.enabled(kind)) kinds.push_back(kind);
    }
    if (kinds.empty()) return std::move(out_);

    auto path = corpus_.image_path(record_.image_ref);
    try {
      image_ = read_file(path);
    } catch (const Error& e) {
      for (auto kind : kinds) fail(kind, target(kind), e.what());
      return std::move(out_);
    }
    media_type_ = media_type_for(path);

    for (auto kind : kinds) {
      ++out_.calls;
      if (kind == AugmentationKind::kAskImg) {
        ask_image(*pool);
      } else {
        transform(kind);
      }
    }
    return std::move(out_);
  }

 private:
  std::size_t target(AugmentationKind kind) const {
    return kind == AugmentationKind::kAskImg ? config_.n_per_image : 1;
  }

  void fail(AugmentationKind kind, std::size_t missing, const std::string& reason) {
    ++out_.failed;
    out_.log.push_back({record_.record_id, kind, missing, reason});
  }

  VlmResponse call(const std::string& prompt, double temperature) {
    VlmRequest req;
    req.model_id = config_.model_id;
    req.prompt = prompt;
    req.image = image_;
    req.media_type = media_type_;
    req.max_tokens = config_.max_tokens;
    req.temperature = temperature;
    return client_.complete(req);
  }

  static std::string reminder(int attempt, std::size_t n, const std::string& extra) {
    std::string s = "\nReminder (attempt " + std::to_string(attempt + 1) + "): use exactly the lines Q1: / A1:";
    if (n > 1) s += " through Q" + std::to_string(n) + ": / A" + std::to_string(n) + ":";
    s += " with no other text.";
    if (!extra.empty()) s += " " + extra;
    return s + "\n";
  }

  void ask_image(const DemoPool& pool) {
    const std::size_t n = config_.n_per_image;
    const std::string base = build_qa_generation_prompt(record_, pool, n);
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_parse_retries; ++attempt) {
      std::string prompt = attempt == 0 ? base : base + reminder(attempt, n, "");
      VlmResponse resp;
      try {
        resp = call(prompt, kMiningTemperature);
      } catch (const Error& e) {
        if (!is_transport_error(e)) throw;
        fail(AugmentationKind::kAskImg, n, e.what());
        return;
      }
      ParsedQA parsed;
      try {
        parsed = parse_qa_block(resp.text, n);
      } catch (const Error& e) {
        last_error = e.what();
        continue;
      }
      std::size_t kept = 0;
      for (auto& [q, a] : parsed.pairs) {
        if (record_.task == TaskType::kMWP && !numeric_answer(a)) continue;
        out_.pairs.push_back({record_.record_id, AugmentationKind::kAskImg, q, a, resp.request_id});
        ++kept;
      }
      if (kept == 0) {
        fail(AugmentationKind::kAskImg, n, "no pair passed validation");
      } else if (kept < n) {
        out_.log.push_back({record_.record_id, AugmentationKind::kAskImg, n - kept,
                            "partial response accepted"});
      }
      return;
    }
    fail(AugmentationKind::kAskImg, n, "unparseable after retries: " + last_error);
  }

  void transform(AugmentationKind kind) {
    const std::string base = build_question_augment_prompt(kind, record_);
    const bool keeps_answer = kind != AugmentationKind::kCompQ;
    const std::string parent_answer = normalize_text(record_.answer);
    std::string last_error;
    std::string extra;
    for (int attempt = 0; attempt <= config_.max_parse_retries; ++attempt) {
      std::string prompt = attempt == 0 ? base : base + reminder(attempt, 1, extra);
      VlmResponse resp;
      try {
        resp = call(prompt, kAugmentTemperature);
      } catch (const Error& e) {
        if (!is_transport_error(e)) throw;
        fail(kind, 1, e.what());
        return;
      }
      ParsedQA parsed;
      try {
        parsed = parse_qa_block(resp.text, 1);
      } catch (const Error& e) {
        last_error = e.what();
        continue;
      }
      auto& [q, a] = parsed.pairs.front();
      if (keeps_answer && normalize_text(a) != parent_answer) {
        last_error = "answer changed from '" + record_.answer + "' to '" + a + "'";
        extra = "The answer must stay exactly: " + collapse_whitespace(record_.answer);
        continue;
      }
      // RephQ and SimpQ carry the parent answer verbatim.
      out_.pairs.push_back({record_.record_id, kind, q, keeps_answer ? record_.answer : a, resp.request_id});
      return;
    }
    fail(kind, 1, "rejected after retries: " + last_error);
  }

  const SourceRecord& record_;
  const Corpus& corpus_;
  VlmClient& client_;
  const AugmentConfig& config_;
  std::string image_;
  std::string media_type_;
  SeedOutcome out_;
};

}  // namespace

AugmentedCorpus synthesize(const Corpus& selected, VlmClient& client, const std::map<TaskType, DemoPool>& pools,
                           const AugmentConfig& config) {
  if (config.n_per_image == 0 && config.ops.askimg) {
    throw Error(ErrorCode::kInvalidArgument, "n_per_image must be >= 1 when AskImg is enabled");
  }
  std::vector<const SourceRecord*> seeds;
  for (const auto& r : selected) seeds.push_back(&r);
  std::sort(seeds.begin(), seeds.end(),
            [](const SourceRecord* a, const SourceRecord* b) { return a->record_id < b->record_id; });

  std::vector<const DemoPool*> seed_pools(seeds.size(), nullptr);
  if (config.ops.askimg) {
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      auto it = pools.find(seeds[i]->task);
      if (it == pools.end() || it->second.demos.empty()) {
        throw Error(ErrorCode::kEmptyDemoPool,
                    "no demonstration pool for task " + std::string(to_string(seeds[i]->task)));
      }
      seed_pools[i] = &it->second;
    }
  }

  std::vector<SeedOutcome> outcomes(seeds.size());
  parallel_for(seeds.size(), config.parallelism, [&](std::size_t i) {
    outcomes[i] = SeedJob(*seeds[i], selected, client, config).run(seed_pools[i]);
  });

  AugmentedCorpus result;
  for (auto& o : outcomes) {
    result.pairs.insert(result.pairs.end(), std::make_move_iterator(o.pairs.begin()),
                        std::make_move_iterator(o.pairs.end()));
    result.log.insert(result.log.end(), o.log.begin(), o.log.end());
    result.operator_calls += o.calls;
    result.failed_calls += o.failed;
  }
  if (result.operator_calls > 0) {
    double rate = static_cast<double>(result.failed_calls) / static_cast<double>(result.operator_calls);
    if (rate > config.max_failure_rate) {
      throw Error(ErrorCode::kAbortThresholdExceeded,
                  std::to_string(result.failed_calls) + " of " + std::to_string(result.operator_calls) +
                      " operator calls failed (threshold " + format_number(config.max_failure_rate) + ")");
    }
  }
  return result;
}

std::map<std::string, std::string> image_hashes(const Corpus& corpus) {
  std::map<std::string, std::string> by_ref;
  for (const auto& ref : corpus.distinct_images()) {
    try {
      by_ref[ref] = sha256_hex(read_file(corpus.image_path(ref)));
    } catch (const Error&) {
      by_ref[ref] = "ref:" + ref;
    }
  }
  std::map<std::string, std::string> out;
  for (const auto& r : corpus) out[r.record_id] = by_ref.at(r.image_ref);
  return out;
}

AugmentedCorpus dedup(const AugmentedCorpus& corpus, const std::map<std::string, std::string>& image_hash_of) {
  auto key_of = [&](const GeneratedQA& qa) {
    auto it = image_hash_of.find(qa.parent_record_id);
    std::string image = it == image_hash_of.end() ? "record:" + qa.parent_record_id : it->second;
    return image + '\n' + normalize_text(qa.question);
  };
  std::set<std::string> seen;
  std::vector<bool> keep(corpus.pairs.size(), false);
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    if (corpus.pairs[i].kind == AugmentationKind::kSeed) keep[i] = seen.insert(key_of(corpus.pairs[i])).second;
  }
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    if (corpus.pairs[i].kind != AugmentationKind::kSeed) keep[i] = seen.insert(key_of(corpus.pairs[i])).second;
  }
  AugmentedCorpus out;
  out.log = corpus.log;
  out.operator_calls = corpus.operator_calls;
  out.failed_calls = corpus.failed_calls;
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    if (keep[i]) out.pairs.push_back(corpus.pairs[i]);
  }
  return out;
}

void write_augmented(const std::filesystem::path& path, const std::vector<GeneratedQA>& pairs) {
  std::vector<Json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) rows.push_back(to_json(p));
  write_jsonl(path, rows);
}

std::vector<GeneratedQA> read_augmented(const std::filesystem::path& path) {
  std::vector<GeneratedQA> out;
  for (const auto& row : read_jsonl(path)) out.push_back(generated_qa_from_json(row));
  return out;
}

Json to_json(const AugmentLogEntry& e) {
  return {{"parent_record_id", e.parent_record_id},
          {"kind", std::string(to_string(e.kind))},
          {"missing", e.missing},
          {"reason", e.reason}};
}

}  // namespace forge
