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

// Synthetic data generation: random target draws, rotate-translate-rotate
// transfers with trapezoidal velocity profiles, feasibility pre-simulation,
// and open-loop application of the input bases, observed by a position-only
// sensor.

#ifndef KMPC_SAMPLER_H_
#define KMPC_SAMPLER_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kmpc/types.h"

namespace kmpc {

struct SamplingSpec {
  ModelKind kind = ModelKind::kDynamic;
  // Admissible pose box X0 (x1, x2, theta).
  Eigen::Vector3d pose_lower{0.0, -0.75, -kPi};
  Eigen::Vector3d pose_upper{1.5, 0.75, kPi};
  // Admissible velocity box V0 (v, omega); dynamic sampling only.
  Eigen::Vector2d velocity_lower{0.0, -1.0};
  Eigen::Vector2d velocity_upper{0.4, 1.0};
  // Dynamic: u_0, u_1, u_2. Kinematic: v_1, v_2.
  std::vector<Input> bases;
  double dt = 0.05;
  double sensor_rate = 240.0;  // Hz
  int max_segment_steps = 100;
  int min_segment_steps = 10;
  int segments_per_basis = 100;
  uint64_t seed = 1;
  double position_noise = 5e-4;        // m
  double heading_noise = 0.1 * kPi / 180.0;  // rad
  // Transfer profiles.
  double cruise_speed = 0.3;
  double cruise_accel = 0.3;
  double turn_rate = 1.0;
  double turn_accel = 1.0;
  int max_rejections = 1000;

  // Samples per control step.
  int SamplesPerStep() const;
  // Throws ConfigError.
  void Validate() const;
};

// Reference-setup defaults.
SamplingSpec DefaultKinematicSpec();
SamplingSpec DefaultDynamicSpec();

enum class ProfileKind { kConstant, kLinear };

struct SegmentAnnotation {
  int basis = -1;  // -1 for transfer, acceleration and deceleration phases
  // Pose-stream sample indices, both inclusive.
  long first = 0;
  long last = 0;
  ProfileKind profile = ProfileKind::kConstant;
};

struct TimedSample {
  double t = 0.0;
  Eigen::Vector3d value = Eigen::Vector3d::Zero();
};

struct RawRecording {
  ModelKind kind = ModelKind::kDynamic;
  double dt = 0.0;
  double sensor_rate = 0.0;
  uint64_t seed = 0;
  double position_noise = 0.0;
  double heading_noise = 0.0;
  std::vector<Input> bases;
  // (x1, x2, theta) at 1 / sensor_rate, theta in (-pi, pi].
  std::vector<TimedSample> poses;
  // (u1, u2, basis index or -1) at dt.
  std::vector<TimedSample> inputs;
  std::vector<SegmentAnnotation> segments;

  int SamplesPerStep() const;
  double PoseTime(long index) const { return static_cast<double>(index) / sensor_rate; }
  // Throws std::invalid_argument on violated invariants.
  void Validate() const;
  // Number of basis-segment control steps per basis.
  std::vector<long> StepsPerBasis() const;
  std::vector<int> SegmentsPerBasis() const;
};

// Throw InfeasibleSpecError after spec.max_rejections consecutive rejected
// draws, ConfigError on an invalid spec.
RawRecording SampleKinematic(const SamplingSpec& spec);
RawRecording SampleDynamic(const SamplingSpec& spec);
RawRecording Sample(const SamplingSpec& spec);

// Records an open-loop input script from x0 with the spec's rates and
// noise (bases and boxes are ignored). Each run of equal inputs becomes one
// annotated segment with basis -1.
RawRecording RecordScript(const SamplingSpec& spec, const StateVector& x0,
                          const std::vector<Input>& script);

void WriteRecording(std::ostream& out, const RawRecording& rec,
                    const std::vector<std::string>& provenance = {});
// Throws IoError.
RawRecording ReadRecording(std::istream& in);

}  // namespace kmpc

#endif  // KMPC_SAMPLER_H_
