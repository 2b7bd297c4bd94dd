// Copyright 2026 The factree Authors.
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

// Writes the model files under tests/fixtures: a current-format model and
// the same model in the version 1 layout (no config block, no seen lists).
#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "core/eval.hpp"
#include "core/model.hpp"

using nlohmann::json;

namespace {

std::string checksum(const json& j) {
  const std::string body = j.dump();
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x",
                static_cast<unsigned>(crc32(
                    0L, reinterpret_cast<const Bytef*>(body.data()),
                    static_cast<uInt>(body.size()))));
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <fixture-dir>\n";
    return 1;
  }
  const std::filesystem::path dir = argv[1];
  factree::SyntheticSpec spec;
  spec.users = 12;
  spec.items = 10;
  spec.reviews_per_user = 4;
  spec.seed = 3;
  const auto ds = factree::synth_generate(spec).dataset;

  factree::TrainConfig cfg;
  cfg.depth = 2;
  cfg.max_alternations = 1;
  cfg.hp.dim = 2;
  cfg.hp.epochs = 10;
  cfg.hp.mf_rounds = 2;
  cfg.hp.personal_epochs = 10;
  cfg.hp.seed = 5;
  const auto model = factree::alternate(ds, cfg);
  factree::save_model(model, dir / "model_v2.json");

  json v1 = factree::model_to_json(model);
  v1.erase("checksum");
  v1.erase("config");
  v1.erase("user_seen");
  v1["version"] = 1;
  v1["checksum"] = checksum(v1);
  std::ofstream(dir / "model_v1.json") << v1.dump(1) << "\n";
  std::ofstream data(dir / "model_data.jsonl");
  factree::write_dataset(data, ds);
  return 0;
}
