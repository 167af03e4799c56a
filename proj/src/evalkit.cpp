// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>

#include "forge/error.hpp"
#include "forge/text.hpp"

namespace forge {

std::string_view to_string(Skill skill) {
  switch (skill) {
    case Skill::kALG: return "ALG";
    case Skill::kARI: return "ARI";
    case Skill::kGEO: return "GEO";
    case Skill::kLOG: return "LOG";
    case Skill::kNUM: return "NUM";
    case Skill::kSCI: return "SCI";
    case Skill::kSTA: return "STA";
  }
  return "?";
}

std::optional<Skill> parse_skill(std::string_view name) {
  std::string folded = casefold(trim(name));
  for (auto s : kAllSkills) {
    if (casefold(to_string(s)) == folded) return s;
  }
  return std::nullopt;
}

namespace {

bool is_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

std::string strip_commas(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c != ',') out += c;
  }
  return out;
}

// Last number in the text, thousands separators removed.
std::optional<double> last_number(std::string_view text) {
  static const std::regex re(R"([-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|[-+]?\.\d+)");
  std::string s(text);
  std::optional<double> out;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
    std::string m = it->str();
    auto pos = static_cast<std::size_t>(it->position());
    // "x-3" is a subtraction, not a negative number.
    if ((m[0] == '-' || m[0] == '+') && pos > 0 && is_alnum(s[pos - 1])) m.erase(0, 1);
    // Digits glued to letters ("3rd", "x2") are still numbers; only the sign is suspect.
    if (auto v = parse_number(strip_commas(m))) out = *v;
  }
  return out;
}

bool is_refusal(std::string_view response) {
  static const std::regex re(
      R"(\b(cannot|can't|can not|unable to|not able to|sorry|i don't know|not possible to (determine|answer)|insufficient information)\b)",
      std::regex::icase);
  return std::regex_search(std::string(response), re);
}

bool mentions_answer(std::string_view response) {
  static const std::regex re(R"(\banswer\s*(is|:))", std::regex::icase);
  return std::regex_search(std::string(response), re);
}

// Text after the last "answer is" / "answer:" marker, or the whole response.
std::string answer_tail(std::string_view response) {
  static const std::regex re(R"(\banswer\s*(?:is|:)\s*:?)", std::regex::icase);
  std::string s(response);
  std::size_t start = 0;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
    start = static_cast<std::size_t>(it->position() + it->length());
  }
  return s.substr(start);
}

std::string normalize_element(std::string_view raw) {
  std::string s = normalize_text(raw);
  while (!s.empty() && (s.front() == '"' || s.front() == '\'')) s.erase(0, 1);
  while (!s.empty() && (s.back() == '"' || s.back() == '\'')) s.pop_back();
  if (auto v = parse_number(s)) return format_number(*v);
  return s;
}

std::string render_list(const std::vector<std::string>& elems) { return "[" + join(elems, ", ") + "]"; }

std::optional<std::string> parse_list(std::string_view text) {
  std::string s(text);
  std::string body;
  auto close = s.rfind(']');
  auto open = close == std::string::npos ? std::string::npos : s.rfind('[', close);
  if (open != std::string::npos) {
    body = s.substr(open + 1, close - open - 1);
  } else {
    body = answer_tail(s);
    // Only the last line carries a comma-separated tail.
    auto lines = split(body, '\n');
    while (!lines.empty() && is_blank(lines.back())) lines.pop_back();
    if (lines.empty()) return std::nullopt;
    body = lines.back();
    if (auto colon = body.rfind(':'); colon != std::string::npos) body = body.substr(colon + 1);
  }
  std::vector<std::string> elems;
  for (const auto& part : split(body, ',')) {
    std::string e = normalize_element(part);
    if (!e.empty()) elems.push_back(e);
  }
  if (elems.empty()) return std::nullopt;
  return render_list(elems);
}

std::optional<std::size_t> letter_index(char c, std::size_t n) {
  char u = (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
  if (u < 'A' || static_cast<std::size_t>(u - 'A') >= n) return std::nullopt;
  return static_cast<std::size_t>(u - 'A');
}

std::string letter(std::size_t i) { return std::string(1, static_cast<char>('A' + i)); }

std::optional<std::string> extract_choice(std::string_view response, const EvalItem& item) {
  const std::size_t n = item.choices.empty() ? 26 : item.choices.size();
  std::string s(response);

  // A reply that is only a letter, e.g. "b" or "(C)."
  std::string bare;
  for (char c : s) {
    if (is_alnum(c)) bare += c;
  }
  if (bare.size() == 1) {
    if (auto i = letter_index(bare[0], n)) return letter(*i);
  }

  // Strong markers: "(B)" and "answer is B"; the last one wins.
  static const std::regex paren(R"(\(([A-Za-z])\))");
  static const std::regex stated(R"(\banswer\s*(?:is|:)\s*:?\s*(?:option\s+)?\(?([A-Za-z])\)?(?![A-Za-z]))",
                                 std::regex::icase);
  std::optional<std::pair<std::size_t, std::size_t>> strong;  // (position, index)
  for (const auto* re : {&paren, &stated}) {
    for (auto it = std::sregex_iterator(s.begin(), s.end(), *re); it != std::sregex_iterator(); ++it) {
      auto idx = letter_index((*it)[1].str()[0], n);
      auto pos = static_cast<std::size_t>(it->position(1));
      if (idx && (!strong || pos > strong->first)) strong = {pos, *idx};
    }
  }
  if (strong) return letter(strong->second);
  if (is_refusal(s)) return std::nullopt;

  // Verbatim option text; latest end position, then longer option.
  std::string folded = casefold(s);
  std::optional<std::tuple<std::size_t, std::size_t, std::size_t>> best;  // (end, length, index)
  for (std::size_t i = 0; i < item.choices.size(); ++i) {
    std::string opt = casefold(trim(item.choices[i]));
    if (opt.empty()) continue;
    for (auto pos = folded.find(opt); pos != std::string::npos; pos = folded.find(opt, pos + 1)) {
      std::size_t end = pos + opt.size();
      bool left_ok = pos == 0 || !is_alnum(folded[pos - 1]) || !is_alnum(opt.front());
      bool right_ok = end == folded.size() || !is_alnum(folded[end]) || !is_alnum(opt.back());
      if (!left_ok || !right_ok) continue;
      std::tuple<std::size_t, std::size_t, std::size_t> cand{end, opt.size(), i};
      if (!best || std::get<0>(cand) > std::get<0>(*best) ||
          (std::get<0>(cand) == std::get<0>(*best) && std::get<1>(cand) > std::get<1>(*best))) {
        best = cand;
      }
    }
  }
  if (best) return letter(std::get<2>(*best));

  // Bare-letter heuristic: last standalone capital in range, skipping the
  // article "A word" and the pronoun "I ".
  std::optional<std::size_t> last;
  for (std::size_t p = 0; p < s.size(); ++p) {
    char c = s[p];
    if (c < 'A' || c > 'Z') continue;
    if (p > 0 && is_alnum(s[p - 1])) continue;
    if (p + 1 < s.size() && is_alnum(s[p + 1])) continue;
    if (p + 2 < s.size() && s[p + 1] == ' ' && s[p + 2] >= 'a' && s[p + 2] <= 'z' && (c == 'A' || c == 'I')) continue;
    if (auto idx = letter_index(c, n)) last = idx;
  }
  if (last) return letter(*last);
  return std::nullopt;
}

}  // namespace

std::optional<std::string> normalize_gold(const EvalItem& item) {
  const std::string gold(trim(item.gold));
  switch (item.answer_kind) {
    case AnswerKind::kChoice: {
      for (std::size_t i = 0; i < item.choices.size(); ++i) {
        if (normalize_text(item.choices[i]) == normalize_text(gold)) return letter(i);
      }
      if (gold.size() == 1) {
        if (auto i = letter_index(gold[0], item.choices.size())) return letter(*i);
      }
      return std::nullopt;
    }
    case AnswerKind::kInteger: {
      auto v = parse_integer(strip_commas(gold));
      if (!v) return std::nullopt;
      return std::to_string(*v);
    }
    case AnswerKind::kFloat: {
      auto v = parse_number(strip_commas(gold));
      if (!v) return std::nullopt;
      return format_number(*v);
    }
    case AnswerKind::kList: return parse_list(gold.find('[') == std::string::npos ? "[" + gold + "]" : gold);
    case AnswerKind::kFreeText: {
      std::string s = normalize_text(gold);
      if (s.empty()) return std::nullopt;
      return s;
    }
  }
  return std::nullopt;
}

Prediction RuleExtractor::extract(std::string_view response, const EvalItem& item) {
  if (is_blank(response)) return Prediction::failure();
  switch (item.answer_kind) {
    case AnswerKind::kChoice: {
      auto c = extract_choice(response, item);
      return c ? Prediction::of(*c) : Prediction::failure();
    }
    case AnswerKind::kInteger:
    case AnswerKind::kFloat: {
      if (is_refusal(response) && !mentions_answer(response)) return Prediction::failure();
      auto v = last_number(response);
      return v ? Prediction::of(format_number(*v)) : Prediction::failure();
    }
    case AnswerKind::kList: {
      if (is_refusal(response) && !mentions_answer(response)) return Prediction::failure();
      auto l = parse_list(response);
      return l ? Prediction::of(*l) : Prediction::failure();
    }
    case AnswerKind::kFreeText: {
      if (is_refusal(response) && !mentions_answer(response)) return Prediction::failure();
      std::string s = normalize_text(answer_tail(response));
      return s.empty() ? Prediction::failure() : Prediction::of(s);
    }
  }
  return Prediction::failure();
}

LlmExtractor::LlmExtractor(VlmClient& client, std::string model_id)
    : client_(client), model_id_(std::move(model_id)) {}

std::string LlmExtractor::build_prompt(std::string_view response, const EvalItem& item) {
  std::string p = "Extract the final answer from a model response.\n";
  p += "Answer type: " + std::string(to_string(item.answer_kind)) + "\n";
  if (!item.choices.empty()) p += "Options:\n" + [&] {
    std::string s;
    for (std::size_t i = 0; i < item.choices.size(); ++i) s += "(" + letter(i) + ") " + item.choices[i] + "\n";
    return s;
  }();
  p += "Model response:\n" + std::string(response) + "\n";
  p += "Reply with only the answer (the option letter for multiple choice, a number for numeric answers, "
       "a bracketed list for lists). Reply 'none' if the response gives no answer.\n";
  return p;
}

Prediction LlmExtractor::extract(std::string_view response, const EvalItem& item) {
  if (is_blank(response)) return Prediction::failure();
  auto reply = client_.complete_text(model_id_, build_prompt(response, item));
  if (normalize_text(reply.text) == "none") return Prediction::failure();
  return rules_.extract(reply.text, item);
}

Prediction extract_answer(std::string_view response, const EvalItem& item) {
  return RuleExtractor().extract(response, item);
}

bool score_item(const Prediction& pred, const EvalItem& item) {
  if (!pred.extracted) return false;
  auto gold = normalize_gold(item);
  if (!gold) return false;
  switch (item.answer_kind) {
    case AnswerKind::kChoice: return casefold(pred.value) == casefold(*gold);
    case AnswerKind::kInteger: {
      auto p = parse_number(pred.value);
      auto g = parse_number(*gold);
      return p && g && *p == *g;
    }
    case AnswerKind::kFloat: {
      auto p = parse_number(pred.value);
      auto g = parse_number(*gold);
      if (!p || !g) return false;
      // Compare in whole thousandths after rounding both sides.
      return std::llabs(std::llround(*p * 1000.0) - std::llround(*g * 1000.0)) <= 1;
    }
    case AnswerKind::kList:
    case AnswerKind::kFreeText: return pred.value == *gold;
  }
  return false;
}

namespace {

std::string gold_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return format_number(v.get<double>());
  if (v.is_array()) {
    std::vector<std::string> parts;
    for (const auto& e : v) parts.push_back(gold_text(e));
    return render_list(parts);
  }
  throw Error(ErrorCode::kRecordInvalid, "unsupported answer value " + v.dump());
}

}  // namespace

EvalItem eval_item_from_json(const Json& row) {
  EvalItem item;
  try {
    item.item_id = row.at("item_id").get<std::string>();
    auto task = parse_task(row.at("task").get<std::string>());
    if (!task) throw RecordInvalid("eval", 0, item.item_id + ": unknown task");
    item.task = *task;
    if (row.contains("choices") && !row.at("choices").is_null()) {
      item.choices = row.at("choices").get<std::vector<std::string>>();
    }
    item.gold = gold_text(row.at("answer"));
    if (row.contains("answer_kind")) {
      auto kind = parse_answer_kind(row.at("answer_kind").get<std::string>());
      if (!kind) throw RecordInvalid("eval", 0, item.item_id + ": unknown answer_kind");
      item.answer_kind = *kind;
    } else {
      item.answer_kind = infer_answer_kind(item.gold, !item.choices.empty());
    }
    for (const auto& s : row.at("skills")) {
      auto skill = parse_skill(s.get<std::string>());
      if (!skill) throw RecordInvalid("eval", 0, item.item_id + ": unknown skill " + s.dump());
      if (std::find(item.skills.begin(), item.skills.end(), *skill) == item.skills.end()) item.skills.push_back(*skill);
    }
  } catch (const Json::exception& e) {
    throw RecordInvalid("eval", 0, std::string("eval item: ") + e.what());
  }
  if (item.skills.empty()) throw RecordInvalid("eval", 0, item.item_id + ": no skill tags");
  if (item.answer_kind == AnswerKind::kChoice && item.choices.empty()) {
    throw RecordInvalid("eval", 0, item.item_id + ": choice item without choices");
  }
  if (!normalize_gold(item)) throw RecordInvalid("eval", 0, item.item_id + ": answer does not fit answer_kind");
  return item;
}

Json to_json(const EvalItem& item) {
  Json skills = Json::array();
  for (auto s : item.skills) skills.push_back(std::string(to_string(s)));
  Json j = {{"item_id", item.item_id},
            {"task", std::string(to_string(item.task))},
            {"answer_kind", std::string(to_string(item.answer_kind))}};
  if (!item.choices.empty()) j["choices"] = item.choices;
  j["answer"] = item.gold;
  j["skills"] = skills;
  return j;
}

std::vector<EvalItem> read_eval_items(const std::filesystem::path& path) {
  std::vector<EvalItem> items;
  std::set<std::string> ids;
  std::size_t line = 0;
  for (const auto& row : read_jsonl(path)) {
    ++line;
    try {
      items.push_back(eval_item_from_json(row));
    } catch (const RecordInvalid& e) {
      throw RecordInvalid(path.filename().string(), line, e.reason());
    }
    if (!ids.insert(items.back().item_id).second) {
      throw RecordInvalid(path.filename().string(), line, "duplicate item_id " + items.back().item_id);
    }
  }
  return items;
}

SubsetAccuracy aggregate(const std::vector<ItemResult>& results) {
  SubsetAccuracy acc;
  for (const auto& r : results) {
    std::size_t hit = r.correct ? 1 : 0;
    acc.overall.correct += hit;
    ++acc.overall.total;
    auto& t = acc.by_task[r.item->task];
    t.correct += hit;
    ++t.total;
    for (auto s : r.item->skills) {
      auto& c = acc.by_skill[s];
      c.correct += hit;
      ++c.total;
    }
  }
  return acc;
}

std::vector<ItemResult> evaluate(const std::vector<EvalItem>& items, const std::map<std::string, std::string>& responses,
                                 AnswerExtractor& extractor) {
  std::vector<ItemResult> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    ItemResult r;
    r.item = &item;
    auto it = responses.find(item.item_id);
    r.prediction = it == responses.end() ? Prediction::failure() : extractor.extract(it->second, item);
    r.correct = score_item(r.prediction, item);
    out.push_back(std::move(r));
  }
  return out;
}

std::map<std::string, std::string> read_predictions(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  std::size_t line = 0;
  for (const auto& row : read_jsonl(path)) {
    ++line;
    try {
      out[row.at("item_id").get<std::string>()] = row.at("response_text").get<std::string>();
    } catch (const Json::exception& e) {
      throw RecordInvalid(path.filename().string(), line, e.what());
    }
  }
  return out;
}

namespace {

Json cell_json(const Cell& c) {
  return {{"correct", c.correct}, {"total", c.total}, {"accuracy", c.accuracy()}};
}

}  // namespace

Json to_json(const SubsetAccuracy& acc) {
  Json by_task = Json::object(), by_skill = Json::object();
  for (const auto& [t, c] : acc.by_task) by_task[std::string(to_string(t))] = cell_json(c);
  for (const auto& [s, c] : acc.by_skill) by_skill[std::string(to_string(s))] = cell_json(c);
  return {{"overall", cell_json(acc.overall)}, {"by_task", by_task}, {"by_skill", by_skill}};
}

std::string render_table(const SubsetAccuracy& acc) {
  std::ostringstream out;
  auto row = [&](std::string_view name, const Cell& c) {
    out << std::left << std::setw(10) << name << std::right << std::setw(8) << c.correct << std::setw(8) << c.total
        << std::setw(10) << std::fixed << std::setprecision(1) << 100.0 * c.accuracy() << '\n';
  };
  out << std::left << std::setw(10) << "subset" << std::right << std::setw(8) << "correct" << std::setw(8) << "total"
      << std::setw(10) << "acc(%)" << '\n';
  row("overall", acc.overall);
  for (const auto& [t, c] : acc.by_task) row(to_string(t), c);
  for (const auto& [s, c] : acc.by_skill) row(to_string(s), c);
  return out.str();
}

}  // namespace forge
