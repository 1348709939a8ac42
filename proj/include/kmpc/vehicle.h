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

// Nominal differential-drive models used as ground-truth plants.
//
// The kinematic robot takes velocity commands (v, omega); the second-order
// robot takes acceleration commands (a, omega_dot) and carries its velocities
// in the state. Both are propagated under zero-order hold.

#ifndef KMPC_VEHICLE_H_
#define KMPC_VEHICLE_H_

#include <array>

#include "kmpc/types.h"

namespace kmpc {

struct PoseState {
  double x1 = 0.0;
  double x2 = 0.0;
  double theta = 0.0;
};

struct FullState {
  PoseState pose;
  double v = 0.0;
  double omega = 0.0;
};

struct VelocityInput {
  double v = 0.0;
  double omega = 0.0;
};

struct AccelInput {
  double a = 0.0;
  double omega_dot = 0.0;
};

struct WheelGeometry {
  double r_w = 0.0;
  double axle = 0.0;
};

struct WheelSpeeds {
  double left = 0.0;
  double right = 0.0;
};

// Axis-aligned box over a two-dimensional input.
struct InputBox {
  Input lower;
  Input upper;

  bool Contains(const Input& u) const;
  Input Project(const Input& u) const;
  void Validate() const;  // throws ConfigError
};

InputBox DefaultVelocityBox();      // [-0.5, 0.5] m/s x [-2, 2] rad/s
InputBox DefaultAccelerationBox();  // [-0.5, 0.5] m/s^2 x [-2, 2] rad/s^2

// Maps any finite angle into (-pi, pi].
double NormalizeAngle(double theta);

VelocityInput WheelsToBody(const WheelSpeeds& wheels, const WheelGeometry& geom);

// Exact flow of the kinematic model over dt under constant (v, omega).
PoseState KinematicZohStep(const PoseState& x, const VelocityInput& u, double dt);

// Flow of the second-order model over dt under constant (a, omega_dot). With
// zero acceleration this is the kinematic closed form; otherwise 64 RK4
// substeps are used.
FullState DynamicZohStep(const FullState& z, const AccelInput& u, double dt);

// Continuous-time right-hand sides.
Eigen::Vector3d KinematicRhs(const Eigen::Vector3d& x, const Input& u);
Eigen::Matrix<double, 5, 1> DynamicRhs(const Eigen::Matrix<double, 5, 1>& z,
                                       const Input& u);

// Generic ZOH step dispatching on the state dimension (3 or 5).
StateVector ZohStep(ModelKind kind, const StateVector& x, const Input& u, double dt);

// Expresses a state in the frame of a goal pose (goal at the origin, goal
// heading along the first axis). Velocities are body-frame and unchanged.
StateVector ToGoalFrame(const StateVector& x, const PoseState& goal);

StateVector ToVector(const PoseState& x);
StateVector ToVector(const FullState& z);
PoseState ToPose(const StateVector& x);
FullState ToFull(const StateVector& z);

}  // namespace kmpc

#endif  // KMPC_VEHICLE_H_
