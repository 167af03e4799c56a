// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Hand-built test fixtures shared by the unit and acceptance suites.

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

#include "forge/augment.hpp"
#include "forge/evalkit.hpp"

namespace fixtures {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("forge-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

struct ExtractionCase {
  forge::AnswerKind kind;
  std::vector<std::string> choices;
  std::string response;
  std::string expected;  // empty = extraction failure
};

inline const std::vector<std::string> kDigits = {"3", "5", "7", "9"};
inline const std::vector<std::string> kColours = {"red", "blue", "green", "yellow"};

inline std::vector<ExtractionCase> extraction_cases() {
  using K = forge::AnswerKind;
  return {
      {K::kChoice, kDigits, "The answer is (B).", "B"},
      {K::kChoice, kDigits, "(C)", "C"},
      {K::kChoice, kDigits, "c", "C"},
      {K::kChoice, kDigits, "Answer: D", "D"},
      {K::kChoice, kDigits, "I think it's (A) because the bars are equal.", "A"},
      {K::kChoice, kDigits, "Option (A) is wrong; the answer is C.", "C"},
      {K::kChoice, kDigits, "The correct option is 7.", "C"},
      {K::kChoice, kDigits, "Counting the squares, the total is 9", "D"},
      {K::kChoice, kDigits, "Looking at the chart, B.", "B"},
      {K::kChoice, kDigits, "A careful count gives the result D", "D"},
      {K::kChoice, kDigits, "I cannot determine the answer from the image.", ""},
      {K::kChoice, kDigits, "Sorry, I can't help with that.", ""},
      {K::kChoice, kDigits, "Therefore the answer is: (b)", "B"},
      {K::kChoice, kColours, "The car is blue.", "B"},
      {K::kChoice, kColours, "Both blue and yellow appear, but the answer is green.", "C"},
      {K::kFloat, {}, "so the total is 7.5 meters", "7.5"},
      {K::kInteger, {}, "The answer is 1,234.", "1234"},
      {K::kInteger, {}, "First 3 + 4 = 7, so the answer is 12", "12"},
      {K::kInteger, {}, "x = -3", "-3"},
      {K::kFloat, {}, "The value is 0.25", "0.25"},
      {K::kInteger, {}, "about 5 apples minus 2 gives 3 apples", "3"},
      {K::kInteger, {}, "I'm sorry, but I cannot answer this.", ""},
      {K::kInteger, {}, "There is no number here.", ""},
      {K::kFloat, {}, "It costs $1,200.50 in total", "1200.5"},
      {K::kInteger, {}, "Result: 42%", "42"},
      {K::kList, {}, "The values are [1, 2, 3].", "[1, 2, 3]"},
      {K::kList, {}, "Answer: 4, 5, 6", "[4, 5, 6]"},
      {K::kList, {}, "The sequence is [red, Blue, GREEN]", "[red, blue, green]"},
      {K::kList, {}, "I am unable to read the list.", ""},
      {K::kList, {}, "Final answer: [0.5, 1.50]", "[0.5, 1.5]"},
  };
}

inline forge::EvalItem item_for(const ExtractionCase& c, const std::string& id) {
  forge::EvalItem item;
  item.item_id = id;
  item.answer_kind = c.kind;
  item.choices = c.choices;
  item.gold = c.kind == forge::AnswerKind::kChoice ? "A" : c.kind == forge::AnswerKind::kList ? "[1]" : "1";
  item.skills = {forge::Skill::kARI};
  return item;
}

// 1000 items whose correctness is fixed by construction: exactly the indices
// in `correct` get a response that extracts to the gold answer.
struct EvalFixture {
  std::vector<forge::EvalItem> items;
  std::map<std::string, std::string> responses;
  std::vector<bool> correct;
};

inline EvalFixture eval_fixture(std::size_t n = 1000, std::size_t n_correct = 466, unsigned seed = 2024) {
  using forge::AnswerKind;
  EvalFixture fx;
  std::mt19937 gen(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), gen);
  std::set<std::size_t> good(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_correct));
  const std::array<AnswerKind, 4> kinds = {AnswerKind::kChoice, AnswerKind::kInteger, AnswerKind::kFloat,
                                           AnswerKind::kList};
  for (std::size_t i = 0; i < n; ++i) {
    forge::EvalItem item;
    item.item_id = "item-" + std::to_string(i);
    item.task = forge::kAllTasks[gen() % forge::kAllTasks.size()];
    item.answer_kind = kinds[gen() % kinds.size()];
    std::size_t first = gen() % forge::kAllSkills.size();
    item.skills = {forge::kAllSkills[first]};
    if (gen() % 3 == 0) {
      std::size_t second = (first + 1 + gen() % (forge::kAllSkills.size() - 1)) % forge::kAllSkills.size();
      item.skills.push_back(forge::kAllSkills[second]);
    }
    const bool ok = good.count(i) > 0;
    std::string response;
    const int v = static_cast<int>(gen() % 90) + 10;
    switch (item.answer_kind) {
      case AnswerKind::kChoice: {
        item.choices = {"option one", "option two", "option three", "option four"};
        std::size_t g = gen() % 4;
        item.gold = std::string(1, static_cast<char>('A' + g));
        char said = static_cast<char>('A' + (ok ? g : (g + 1 + gen() % 3) % 4));
        response = "After reading the figure, the answer is (" + std::string(1, said) + ").";
        break;
      }
      case AnswerKind::kInteger:
        item.gold = std::to_string(v);
        response = ok ? "Adding them up we get " + std::to_string(v) + "."
                      : (gen() % 2 ? "Adding them up we get " + std::to_string(v + 1) + "."
                                   : "I cannot tell from this image.");
        break;
      case AnswerKind::kFloat:
        item.gold = std::to_string(v) + ".25";
        response = "The length is " + (ok ? std::to_string(v) + ".25" : std::to_string(v) + ".75") + " cm";
        break;
      case AnswerKind::kList:
        item.gold = "[" + std::to_string(v) + ", " + std::to_string(v + 1) + "]";
        response = "The values are [" + std::to_string(v) + ", " + std::to_string(ok ? v + 1 : v + 2) + "]";
        break;
      default:
        break;
    }
    fx.items.push_back(item);
    fx.responses[item.item_id] = response;
    fx.correct.push_back(ok);
  }
  return fx;
}

}  // namespace fixtures
