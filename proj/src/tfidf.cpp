// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <set>

#include "forge/clustering.hpp"
#include "forge/error.hpp"

namespace forge {

double SparseVector::squared_norm() const {
  double s = 0;
  for (double v : value) s += v * v;
  return s;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    bool word = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || (c >= 'A' && c <= 'Z') || c >= 0x80;
    if (word) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

TfidfModel tfidf_fit(const std::vector<std::string>& questions) {
  if (questions.empty()) throw Error(ErrorCode::kNoVectors, "tfidf_fit needs at least one question");

  std::vector<std::map<std::string, std::size_t>> counts(questions.size());
  std::set<std::string> all_terms;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    auto tokens = tokenize(questions[i]);
    if (tokens.empty()) throw EmptyDocument(i);
    for (auto& t : tokens) {
      ++counts[i][t];
      all_terms.insert(std::move(t));
    }
  }

  TfidfModel model;
  model.terms.assign(all_terms.begin(), all_terms.end());
  for (std::uint32_t i = 0; i < model.terms.size(); ++i) model.vocabulary.emplace(model.terms[i], i);

  std::vector<std::size_t> df(model.terms.size(), 0);
  for (const auto& doc : counts) {
    for (const auto& [term, _] : doc) ++df[model.vocabulary.at(term)];
  }
  const double n = static_cast<double>(questions.size());
  model.idf.resize(df.size());
  for (std::size_t t = 0; t < df.size(); ++t) {
    model.idf[t] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[t]))) + 1.0;
  }

  model.doc_vectors.reserve(counts.size());
  for (const auto& doc : counts) {
    SparseVector v;
    for (const auto& [term, tf] : doc) {  // std::map iterates in term order, so indices ascend
      auto idx = model.vocabulary.at(term);
      v.index.push_back(idx);
      v.value.push_back(static_cast<double>(tf) * model.idf[idx]);
    }
    double norm = std::sqrt(v.squared_norm());
    for (auto& x : v.value) x /= norm;
    model.doc_vectors.push_back(std::move(v));
  }
  return model;
}

}  // namespace forge
