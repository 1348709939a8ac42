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


// Surrogates fitted by the default pipeline, built once per test binary.

#ifndef KMPC_TESTS_FIXTURES_H_
#define KMPC_TESTS_FIXTURES_H_

#include <memory>
#include <string>

#include "kmpc/dictionary.h"
#include "kmpc/edmd.h"
#include "kmpc/postprocess.h"
#include "kmpc/sampler.h"

namespace kmpc::testing {

// Kinematic robot, Delta t = 0.1 s, one pose per step.
inline SamplingSpec KinematicSpec(bool noisy) {
  SamplingSpec s = DefaultKinematicSpec();
  s.dt = 0.1;
  s.sensor_rate = 10.0;
  if (!noisy) {
    s.position_noise = 0.0;
    s.heading_noise = 0.0;
  }
  return s;
}

inline LabeledDataset KinematicDataset(bool noisy, uint64_t seed = 1) {
  SamplingSpec s = KinematicSpec(noisy);
  s.seed = seed;
  return BuildDataset(SampleKinematic(s), {1, 0.1, 10.0}, ModelKind::kKinematic);
}

inline std::shared_ptr<const KoopmanSurrogate> NoiselessKinematicSurrogate() {
  static const auto s = std::make_shared<const KoopmanSurrogate>(
      FitSurrogate(FindDictionary("D5t"), KinematicDataset(false), {}, false));
  return s;
}

inline const RawRecording& DynamicTraining() {
  static const RawRecording rec = SampleDynamic(DefaultDynamicSpec());
  return rec;
}

inline const LabeledDataset& DynamicDataset() {
  static const LabeledDataset data =
      BuildDataset(DynamicTraining(), {40, 0.05, 240.0}, ModelKind::kDynamic);
  return data;
}

inline std::shared_ptr<const KoopmanSurrogate> DynamicSurrogate() {
  static const auto s = std::make_shared<const KoopmanSurrogate>(
      FitSurrogate(FindDictionary("D8Eul"), DynamicDataset(), {}, true));
  return s;
}

}  // namespace kmpc::testing

#endif  // KMPC_TESTS_FIXTURES_H_
