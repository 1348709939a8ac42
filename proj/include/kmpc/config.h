// Copyright 2026 The kmpc Authors
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


// Run configuration: INI-style sections of `key = value` lines, defaults that
// depend on the model kind, `section.key=value` overrides, and a canonical
// form whose hash tags every artifact.

#ifndef KMPC_CONFIG_H_
#define KMPC_CONFIG_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kmpc/edmd.h"
#include "kmpc/experiments.h"
#include "kmpc/mpc.h"
#include "kmpc/postprocess.h"
#include "kmpc/sampler.h"
#include "kmpc/types.h"
#include "kmpc/vehicle.h"

namespace kmpc {

inline constexpr char kVersion[] = "0.1.0";

// Environment variable naming the default output root.
inline constexpr char kOutputRootEnv[] = "KMPC_OUTPUT_ROOT";

class RunConfig {
 public:
  // Defaults for a model kind; general.output_dir falls back to
  // $KMPC_OUTPUT_ROOT, then "kmpc-out".
  static RunConfig Defaults(ModelKind kind);

  // Parses an INI stream and applies `section.key=value` overrides on top.
  // general.kind is resolved first so that the remaining defaults match it.
  // Throws ConfigError on unknown keys, malformed values or inconsistent
  // parameters.
  static RunConfig Parse(std::istream& in, const std::vector<std::string>& overrides = {});
  static RunConfig Load(const std::string& path, const std::vector<std::string>& overrides = {});
  static RunConfig FromOverrides(const std::vector<std::string>& overrides);

  // Sets one key and revalidates. Throws ConfigError.
  void Set(const std::string& dotted_key, const std::string& value);
  std::string Get(const std::string& dotted_key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  // Checks every stage's parameters, including Delta t and rate consistency
  // across sampling, postprocessing, the OCP and the experiments.
  void Validate() const;

  // Sorted `section.key=value` lines of every key that can affect a result
  // (all but general.output_dir and general.jobs).
  std::string Canonical() const;
  // 64-bit FNV-1a of Canonical().
  uint64_t Hash() const;
  std::string HashHex() const;
  // Header lines: tool version, config hash, seed, then the canonical keys.
  std::vector<std::string> Provenance() const;
  void Write(std::ostream& out) const;

  ModelKind kind() const;
  uint64_t seed() const;
  double dt() const;
  int jobs() const;
  std::string output_dir() const;
  std::string dictionary() const;

  // "auto" selects 1 / dt for the kinematic robot and 240 Hz otherwise.
  double SensorRate() const;
  SamplingSpec Sampling() const;
  PostprocessSpec Postprocess() const;
  RegressionOptions Regression() const;
  // 0 keeps every pair.
  size_t PerBasis() const;
  // "random" or "first".
  std::string Selection() const;

  McConfig Controller() const;
  MonteCarloOptions MonteCarlo() const;
  OcpSpec Ocp(std::shared_ptr<const KoopmanSurrogate> surrogate) const;
  StateVector InitialState() const;
  PoseState Goal() const;
  double Duration() const;

  std::vector<McConfig> Configs() const;
  std::vector<ReferenceShape> Shapes() const;
  ReferenceOptions Reference() const;
  int ReferenceCount() const;
  int OpenLoopHorizon() const;
  std::vector<std::string> Dictionaries() const;
  std::vector<int> Windows() const;
  std::vector<size_t> SweepSizes() const;

 private:
  std::map<std::string, std::string> values_;
};

// Splits `a,b,c` into doubles. Throws ConfigError.
std::vector<double> ParseDoubleList(const std::string& text);

}  // namespace kmpc

#endif  // KMPC_CONFIG_H_
