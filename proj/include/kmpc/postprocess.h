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

// Position-only recordings to EDMD-ready datasets: central-difference
// velocities, body-frame rotation, per-segment moving averages, angle
// continuation and pairing of samples dt apart.

#ifndef KMPC_POSTPROCESS_H_
#define KMPC_POSTPROCESS_H_

#include <cstddef>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "kmpc/edmd.h"
#include "kmpc/sampler.h"
#include "kmpc/types.h"

namespace kmpc {

struct PostprocessSpec {
  // Moving-average width in sensor samples; the centered window spans
  // 2 * (window / 2) + 1 samples, so window = 1 disables smoothing.
  int window = 40;
  double dt = 0.05;
  double sensor_rate = 240.0;

  int Offset() const;  // samples per dt
  void Validate() const;  // throws ConfigError
};

// Interior points use central differences, endpoints one-sided ones.
// Throws std::invalid_argument on fewer than 3 samples or non-increasing
// timestamps.
std::vector<double> CentralDiff(std::span<const double> t, std::span<const double> x);

// Returns (v_body, v_lateral).
Eigen::Vector2d ToBodyFrame(const Eigen::Vector2d& inertial_velocity, double theta);

// Centered moving average applied to [first, last] ranges independently;
// near range edges the window shrinks symmetrically. Samples outside every
// range are copied. Throws std::invalid_argument on empty or out-of-range
// segments.
std::vector<double> SmoothSegments(std::span<const double> series,
                                   const std::vector<std::pair<size_t, size_t>>& segments,
                                   int window);

// Each successor is moved by a multiple of 2 pi to lie closest to its
// predecessor.
std::vector<double> ContinueAngles(std::span<const double> theta);

// Pairs from every basis segment. X angles are normalized to (-pi, pi] and
// the paired Y angle gets the same shift. Throws std::invalid_argument on
// inconsistent rates or a recording without basis annotations.
LabeledDataset BuildDataset(const RawRecording& recording, const PostprocessSpec& spec,
                            ModelKind kind);

// Lateral body-frame velocity at every pose sample (diagnostic).
std::vector<double> LateralVelocity(const RawRecording& recording);

// External data: header `basis,t,x1,x2,theta[,v,omega]`, one row per
// sample, consecutive rows with equal basis forming a segment. Without
// velocity columns, dynamic velocities are estimated as for recordings.
// Throws IoError.
LabeledDataset ReadExternalDataset(std::istream& in, const std::vector<Input>& bases,
                                   const PostprocessSpec& spec, ModelKind kind);

}  // namespace kmpc

#endif  // KMPC_POSTPROCESS_H_
