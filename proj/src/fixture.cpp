// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/fixture.hpp"

#include "forge/genclient.hpp"
#include "forge/hash.hpp"
#include "forge/io.hpp"
#include "forge/random.hpp"
#include "forge/scoring.hpp"

namespace forge {

const std::vector<SourceTableRow>& source_table() {
  using T = TaskType;
  static const std::vector<SourceTableRow> rows = {
      {"DocVQA", T::kFQA, "Document Image", 8535, 8227, {2086, 6007, 125, 9}},
      {"FigureQA", T::kFQA, "Charts and Plots", 18173, 18173, {687, 16792, 694, 0}},
      {"DVQA", T::kFQA, "Bar Chart", 19092, 19092, {21, 18021, 1045, 5}},
      {"PlotQA", T::kFQA, "Bar, Line, Scatter", 18782, 18782, {13, 18759, 10, 0}},
      {"ChartQA", T::kFQA, "Charts and Plots", 3699, 3699, {0, 3649, 50, 0}},
      {"MapQA", T::kFQA, "Map Chart", 10020, 10016, {1, 10015, 0, 0}},
      {"IconQA", T::kMWP, "Abstract Scene", 20000, 19068, {10991, 8055, 22, 0}},
      {"CLEVR-Math", T::kMWP, "Synthetic Scene", 17552, 17551, {1, 17550, 0, 0}},
      {"TabMWP", T::kMWP, "Table", 20000, 20000, {14919, 5081, 0, 0}},
      {"GEOS", T::kGPS, "Geometry Diagram", 66, 64, {2, 57, 5, 0}},
      {"Geometry3K", T::kGPS, "Geometry Diagram", 2101, 2101, {21, 1508, 568, 4}},
      {"GeoQA+", T::kGPS, "Geometry Diagram", 6027, 5956, {103, 4399, 1454, 0}},
      {"UniGeo", T::kGPS, "Geometry Diagram", 3499, 3432, {72, 2514, 846, 0}},
      {"TQA", T::kTQA, "Scientific Figure", 1499, 1497, {20, 949, 498, 30}},
      {"AI2D", T::kTQA, "Scientific Figure", 3247, 3235, {32, 2321, 823, 59}},
      {"ScienceQA", T::kTQA, "Scientific Figure", 6218, 6061, {1533, 4251, 273, 4}},
      {"A-OKVQA", T::kVQA, "Natural Image", 16540, 14526, {10, 11724, 2743, 49}},
      {"VQA2.0", T::kVQA, "Natural Image", 16912, 14521, {45, 12783, 1672, 21}},
      {"PMC-VQA", T::kVQA, "Medical Image", 19682, 9846, {62, 2989, 3501, 3294}},
      {"VizWiz", T::kVQA, "Natural Image", 20000, 16400, {790, 14800, 770, 40}},
      {"Super-CLEVR", T::kVQA, "Synthetic Scene", 2000, 1950, {1, 1568, 381, 0}},
      {"VQA-AS", T::kVQA, "Abstract Scene", 14065, 14065, {7, 13996, 62, 0}},
      {"VQA-RAD", T::kVQA, "Medical Image", 259, 248, {0, 91, 95, 62}},
      {"TextVQA", T::kVQA, "Natural Image", 15815, 11350, {179, 9497, 1598, 76}},
  };
  return rows;
}

Availability source_table_availability() {
  Availability out;
  for (const auto& row : source_table()) out[row.dataset_id] = row.complexity;
  return out;
}

namespace {

struct FixtureDataset {
  const char* id;
  TaskType task;
  std::vector<const char*> templates;  // "{n}" and "{m}" are replaced
  bool choice = false;
};

const std::vector<FixtureDataset>& fixture_datasets() {
  static const std::vector<FixtureDataset> sets = {
      {"bars",
       TaskType::kFQA,
       {"What is the value of bar {n} in the chart?", "Which year shows the highest sales in panel {n}?",
        "How many bars exceed {m} units?", "What is the difference between the first and last bar in group {n}?",
        "Is the trend in series {n} increasing or decreasing?", "What label is on the y axis of plot {n}?"}},
      {"plots",
       TaskType::kFQA,
       {"Which line is highest at x = {n}?", "What is the slope of curve {n} near the origin?",
        "How many points lie above the dashed line at {m}?", "Which colour marks the median in plot {n}?",
        "At what x value do the curves cross in figure {n}?"},
       true},
      {"geometry",
       TaskType::kGPS,
       {"Find the measure of angle {n} in the triangle.", "What is the length of side AB if BC = {m}?",
        "Find the area of the circle with radius {n}.", "What is the perimeter of the rectangle with width {m}?",
        "If two angles are {m} degrees each, what is the third angle {n}?"}},
      {"wordproblems",
       TaskType::kMWP,
       {"How many apples are left if {n} are eaten from the basket?", "Subtract all red cubes. How many objects remain in scene {n}?",
        "What is the total cost of {m} pencils shown in table {n}?", "How many more cats than dogs are in picture {n}?",
        "What is the average of the numbers in row {n}?"}},
      {"textbook",
       TaskType::kTQA,
       {"Which stage of the life cycle is labelled {n}?", "What does arrow {n} represent in the food web?",
        "Which layer of the earth is shown at depth {m}?", "What process converts water to vapour in diagram {n}?"},
       true},
      {"scenes",
       TaskType::kVQA,
       {"What colour is the car parked near sign {n}?", "How many people are standing on the bridge {n}?",
        "What is the man in picture {n} holding?", "Is the light in frame {n} red or green?",
        "What sport is being played on field {m}?"}},
  };
  return sets;
}

std::string fill(std::string text, std::size_t n, std::size_t m) {
  auto replace = [&](const std::string& key, const std::string& value) {
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
      text.replace(pos, key.size(), value);
    }
  };
  replace("{n}", std::to_string(n));
  replace("{m}", std::to_string(m));
  return text;
}

const std::vector<std::string> kColours = {"red", "blue", "green", "yellow"};

std::string qa_block(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::string out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out += "Q" + std::to_string(i + 1) + ": " + pairs[i].first + "\n";
    out += "A" + std::to_string(i + 1) + ": " + pairs[i].second + "\n";
  }
  return out;
}

}  // namespace

FixturePaths write_fixture(const std::filesystem::path& root, const FixtureOptions& options) {
  FixturePaths paths;
  paths.root = root;
  paths.manifest = root / "manifest.json";
  paths.scores_table = root / "scores.jsonl";
  paths.vlm_script = root / "mock_vlm.json";
  paths.config = root / "config.json";

  Rng rng(options.seed, "fixture");
  Json datasets = Json::array();
  std::vector<Json> score_rows;
  MockScript script;

  for (const auto& ds : fixture_datasets()) {
    std::vector<Json> rows;
    for (std::size_t i = 0; i < options.records_per_dataset; ++i) {
      const std::size_t n = i + 1;
      const std::size_t m = 10 + rng.below(90);
      std::string id = std::string(ds.id) + "-" + (n < 10 ? "00" : n < 100 ? "0" : "") + std::to_string(n);
      std::string image_ref = std::string(ds.id) + "/" + id + ".png";
      std::string question = fill(ds.templates[i % ds.templates.size()], n, m);

      Json row = {{"record_id", id}, {"image_ref", image_ref}, {"question", question}};
      std::string answer;
      if (ds.choice) {
        std::size_t pick = rng.below(kColours.size());
        answer = kColours[pick];
        row["answer_kind"] = "choice";
        row["choices"] = kColours;
      } else {
        answer = std::to_string(m + n);
        row["answer_kind"] = "integer";
      }
      row["answer"] = answer;
      rows.push_back(row);

      // Distinct bytes per image; the header keeps media-type sniffing honest.
      std::string bytes = "\x89PNG\r\n\x1a\n" + std::string("forge-fixture ") + image_ref + " " +
                          std::to_string(rng.next());
      write_file_atomic(root / "images" / image_ref, bytes);
      std::string digest = sha256_hex(bytes);

      int clarity = options.blur_every && n % options.blur_every == 0 ? 0 : 1;
      int complexity = static_cast<int>(rng.below(10) < 2 ? 0 : rng.below(10) < 8 ? 1 + rng.below(2) : 3);
      score_rows.push_back({{"image_ref", image_ref}, {"sha256", digest}, {"clarity", clarity},
                            {"complexity", complexity}});

      MockRule annotate;
      annotate.image_sha256 = digest;
      annotate.prompt_contains = {"clarity: <0 or 1>"};
      annotate.response = render_annotation_response({clarity, complexity});
      script.rules.push_back(annotate);

      std::vector<std::pair<std::string, std::string>> mined;
      for (std::size_t q = 1; q <= options.n_per_image; ++q) {
        mined.emplace_back("Mined question " + std::to_string(q) + " about " + id + ": what is quantity " +
                               std::to_string(q) + "?",
                           std::to_string(q * m));
      }
      MockRule ask;
      ask.image_sha256 = digest;
      ask.prompt_contains = {"Task: generate new question-answer pairs"};
      ask.response = qa_block(mined);
      script.rules.push_back(ask);

      MockRule comp;
      comp.image_sha256 = digest;
      comp.prompt_contains = {"Task: write a more complex version"};
      comp.response = qa_block({{question + " Then double the result and add " + std::to_string(n) + ".",
                                 std::to_string(2 * (m + n) + n)}});
      script.rules.push_back(comp);

      MockRule reph;
      reph.image_sha256 = digest;
      reph.prompt_contains = {"Task: rephrase the question."};
      reph.response = qa_block({{"Looking at the image, could you tell me: " + question, answer}});
      script.rules.push_back(reph);

      MockRule simp;
      simp.image_sha256 = digest;
      simp.prompt_contains = {"Task: simplify the question."};
      simp.response = qa_block({{"Short form for " + id + ": what is shown?", answer}});
      script.rules.push_back(simp);
    }
    std::string file = std::string("data/") + ds.id + ".jsonl";
    write_jsonl(root / file, rows);
    datasets.push_back({{"dataset_id", ds.id}, {"task", std::string(to_string(ds.task))}, {"records_file", file}});
  }

  Json manifest = {{"schema_version", kManifestSchemaVersion}, {"image_root", "images"}, {"datasets", datasets}};
  write_file_atomic(paths.manifest, dump_json_pretty(manifest));
  write_jsonl(paths.scores_table, score_rows);
  write_file_atomic(paths.vlm_script, dump_json_pretty(to_json(script)));

  Json config = {
      {"paths", {{"manifest", "manifest.json"}, {"cache_dir", "out/cache"}, {"out_dir", "out"}}},
      {"selection", {{"ratio", "2:3:4:1"}, {"budget", options.budget}, {"take_all_top_stratum", true},
                     {"seed", options.seed}}},
      {"clustering", {{"k", 5}, {"seed", options.seed + 1}}},
      {"augmentation", {{"ops", "askimg,compq,rephq,simpq"}, {"n_per_image", options.n_per_image}}},
      {"backend", {{"scorer", "mock:table:scores.jsonl"}, {"vlm", "mock:mock_vlm.json"}}},
  };
  write_file_atomic(paths.config, dump_json_pretty(config));
  return paths;
}

}  // namespace forge
