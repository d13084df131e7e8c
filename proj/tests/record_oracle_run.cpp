/* unitcorr - accent correction for discrete acoustic units.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Re-generates tests/data/recorded_run.json, the pinned reference numbers
// the acceptance suite re-verifies against. Run from the repo root:
//   build/tests/record_oracle_run tests/data/recorded_run.json

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "acceptance_lib.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: record_oracle_run <output.json>\n");
    return 1;
  }

  acceptance::E2eData data = acceptance::run_e2e();
  auto temp = std::filesystem::temp_directory_path() / "unitcorr_record";
  std::filesystem::create_directories(temp);
  acceptance::AdaptOutcome adapt = acceptance::run_adapter_experiment(data, temp.string());

  nlohmann::json j;
  j["seed"] = acceptance::kSeed;
  j["per"] = data.per;
  j["adapt"] = {{"corrected_acc", adapt.corrected_acc},
                {"uncorrected_acc", adapt.uncorrected_acc},
                {"adapter_steps", adapt.adapter_steps}};

  std::ofstream os(argv[1], std::ios::binary);
  if (!os) {
    std::fprintf(stderr, "cannot open %s\n", argv[1]);
    return 1;
  }
  os << j.dump(2) << "\n";

  std::printf("recorded:\n%s\n", j.dump(2).c_str());
  return 0;
}
