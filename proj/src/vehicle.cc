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

#include "kmpc/vehicle.h"

#include <cmath>
#include <numbers>

namespace kmpc {

namespace {

constexpr double kStraightLineOmega = 1e-8;
constexpr int kRk4Substeps = 64;

using Vector5d = Eigen::Matrix<double, 5, 1>;

// sin(phi) / phi for phi = omega * dt / 2; the straight-line branch uses the
// Taylor expansion.
double HalfTurnSinc(double omega, double phi) {
  if (std::abs(omega) < kStraightLineOmega) return 1.0 - phi * phi / 6.0;
  return std::sin(phi) / phi;
}

}  // namespace

std::string ToString(ModelKind kind) {
  return kind == ModelKind::kKinematic ? "kinematic" : "dynamic";
}

ModelKind ParseModelKind(const std::string& name) {
  if (name == "kinematic") return ModelKind::kKinematic;
  if (name == "dynamic") return ModelKind::kDynamic;
  throw ConfigError("unknown model kind '" + name + "' (expected kinematic|dynamic)");
}

bool InputBox::Contains(const Input& u) const {
  return (u.array() >= lower.array()).all() && (u.array() <= upper.array()).all();
}

Input InputBox::Project(const Input& u) const {
  return u.cwiseMax(lower).cwiseMin(upper);
}

void InputBox::Validate() const {
  if (!(lower.array() < upper.array()).all()) {
    throw ConfigError("input box lower bounds must be strictly below upper bounds");
  }
  if (!(lower.array() < 0.0).all() || !(upper.array() > 0.0).all()) {
    throw ConfigError("input box must contain the zero input in its interior");
  }
}

InputBox DefaultVelocityBox() { return {Input(-0.5, -2.0), Input(0.5, 2.0)}; }

InputBox DefaultAccelerationBox() { return {Input(-0.5, -2.0), Input(0.5, 2.0)}; }

double NormalizeAngle(double theta) {
  constexpr double kPi = std::numbers::pi;
  double r = std::remainder(theta, 2.0 * kPi);  // in [-pi, pi]
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

VelocityInput WheelsToBody(const WheelSpeeds& wheels, const WheelGeometry& geom) {
  return {geom.r_w * (wheels.left + wheels.right) / 2.0,
          geom.r_w * (wheels.right - wheels.left) / geom.axle};
}

PoseState KinematicZohStep(const PoseState& x, const VelocityInput& u, double dt) {
  // sin(b) - sin(a) = 2 cos((a+b)/2) sin((b-a)/2) keeps the arc formula
  // well conditioned as omega -> 0.
  const double half_turn = 0.5 * u.omega * dt;
  const double mid_heading = x.theta + half_turn;
  const double chord = u.v * dt * HalfTurnSinc(u.omega, half_turn);
  return {x.x1 + chord * std::cos(mid_heading), x.x2 + chord * std::sin(mid_heading),
          x.theta + u.omega * dt};
}

Eigen::Vector3d KinematicRhs(const Eigen::Vector3d& x, const Input& u) {
  return {u(0) * std::cos(x(2)), u(0) * std::sin(x(2)), u(1)};
}

Vector5d DynamicRhs(const Vector5d& z, const Input& u) {
  Vector5d dz;
  dz << z(3) * std::cos(z(2)), z(3) * std::sin(z(2)), z(4), u(0), u(1);
  return dz;
}

FullState DynamicZohStep(const FullState& z, const AccelInput& u, double dt) {
  if (u.a == 0.0 && u.omega_dot == 0.0) {
    return {KinematicZohStep(z.pose, {z.v, z.omega}, dt), z.v, z.omega};
  }
  const Input uu(u.a, u.omega_dot);
  Vector5d s;
  s << z.pose.x1, z.pose.x2, z.pose.theta, z.v, z.omega;
  const double h = dt / kRk4Substeps;
  for (int i = 0; i < kRk4Substeps; ++i) {
    const Vector5d k1 = DynamicRhs(s, uu);
    const Vector5d k2 = DynamicRhs(s + 0.5 * h * k1, uu);
    const Vector5d k3 = DynamicRhs(s + 0.5 * h * k2, uu);
    const Vector5d k4 = DynamicRhs(s + h * k3, uu);
    s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  // The velocity channels are pure integrators; use their exact values.
  return {{s(0), s(1), s(2)}, z.v + u.a * dt, z.omega + u.omega_dot * dt};
}

StateVector ZohStep(ModelKind kind, const StateVector& x, const Input& u, double dt) {
  if (kind == ModelKind::kKinematic) {
    return ToVector(KinematicZohStep(ToPose(x), {u(0), u(1)}, dt));
  }
  return ToVector(DynamicZohStep(ToFull(x), {u(0), u(1)}, dt));
}

StateVector ToGoalFrame(const StateVector& x, const PoseState& goal) {
  StateVector out = x;
  const double dx = x(0) - goal.x1;
  const double dy = x(1) - goal.x2;
  const double c = std::cos(goal.theta);
  const double s = std::sin(goal.theta);
  out(0) = c * dx + s * dy;
  out(1) = -s * dx + c * dy;
  out(2) = NormalizeAngle(x(2) - goal.theta);
  return out;
}

StateVector ToVector(const PoseState& x) {
  StateVector v(3);
  v << x.x1, x.x2, x.theta;
  return v;
}

StateVector ToVector(const FullState& z) {
  StateVector v(5);
  v << z.pose.x1, z.pose.x2, z.pose.theta, z.v, z.omega;
  return v;
}

PoseState ToPose(const StateVector& x) { return {x(0), x(1), x(2)}; }

FullState ToFull(const StateVector& z) { return {{z(0), z(1), z(2)}, z(3), z(4)}; }

}  // namespace kmpc
