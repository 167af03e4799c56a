// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Writes the synthetic fixture corpus used by the end-to-end tests.

#include <CLI11.hpp>
#include <iostream>

#include "forge/error.hpp"
#include "forge/fixture.hpp"

int main(int argc, char** argv) {
  CLI::App app{"forge_fixture: write a synthetic corpus, scorer table, mock VLM script and run config"};
  std::string out;
  forge::FixtureOptions opts;
  app.add_option("--out", out, "Directory to create")->required();
  app.add_option("--seed", opts.seed, "Fixture and run seed")->capture_default_str();
  app.add_option("--records-per-dataset", opts.records_per_dataset, "Records in each of the six datasets")
      ->capture_default_str();
  app.add_option("--budget", opts.budget, "Selection budget written to config.json")->capture_default_str();
  app.add_option("--n-per-image", opts.n_per_image, "AskImg pairs scripted per image")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    auto paths = forge::write_fixture(out, opts);
    std::cout << paths.config.string() << '\n';
  } catch (const forge::Error& e) {
    std::cerr << "forge_fixture: " << e.what() << '\n';
    return forge::exit_status(e.code());
  }
  return 0;
}
