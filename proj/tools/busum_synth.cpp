// Copyright 2026 The busum Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Writes a synthetic JSON-lines corpus of trigger-marked extractive spans.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "busum/corpus.hpp"
#include "busum/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"busum-synth: generate a synthetic summarization corpus", "busum-synth"};
  std::size_t docs = 500;
  std::uint64_t seed = 1;
  std::string out;
  std::string prefix = "syn";
  busum::SyntheticConfig cfg;
  app.add_option("--docs", docs, "number of documents")->capture_default_str();
  app.add_option("--seed", seed, "random seed")->capture_default_str();
  app.add_option("--prefix", prefix, "id prefix")->capture_default_str();
  app.add_option("--noise", cfg.noise, "probability that a target span has one word substituted")
      ->capture_default_str();
  app.add_option("--out", out, "output file")->required();
  CLI11_PARSE(app, argc, argv);
  try {
    busum::write_dataset(busum::synthetic_corpus(docs, cfg, seed, prefix), out);
  } catch (const std::exception& e) {
    std::cerr << "busum-synth: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
