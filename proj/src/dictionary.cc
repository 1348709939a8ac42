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

#include "kmpc/dictionary.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <utility>

#include "kmpc/vehicle.h"

namespace kmpc {

namespace {

constexpr double kDegenerateTrig = 1e-12;

Reprojection Coordinates(std::vector<int> index) {
  return {Reprojection::Kind::kCoordinate, std::move(index), -1, -1};
}

Reprojection Atan2(std::vector<int> index, int cos_index, int sin_index) {
  return {Reprojection::Kind::kAtan2, std::move(index), cos_index, sin_index};
}

Dictionary MakeD5t() {
  return Dictionary(
      "D5t", 3, {"1", "x1", "x2", "cos(theta)", "sin(theta)"},
      [](const StateVector& x, LiftVector& out) {
        out.resize(5);
        out << 1.0, x(0), x(1), std::cos(x(2)), std::sin(x(2));
      },
      [](const StateVector& x, LiftJacobian& j) {
        j.setZero(5, 3);
        j(1, 0) = 1.0;
        j(2, 1) = 1.0;
        j(3, 2) = -std::sin(x(2));
        j(4, 2) = std::cos(x(2));
      },
      Atan2({1, 2, -1}, 3, 4));
}

Dictionary MakeD8Eul() {
  return Dictionary(
      "D8Eul", 5, {"1", "x1", "x2", "theta", "v", "omega", "v*cos(theta)", "v*sin(theta)"},
      [](const StateVector& z, LiftVector& out) {
        const double c = std::cos(z(2)), s = std::sin(z(2));
        out.resize(8);
        out << 1.0, z(0), z(1), z(2), z(3), z(4), z(3) * c, z(3) * s;
      },
      [](const StateVector& z, LiftJacobian& j) {
        const double c = std::cos(z(2)), s = std::sin(z(2)), v = z(3);
        j.setZero(8, 5);
        for (int i = 0; i < 5; ++i) j(i + 1, i) = 1.0;
        j(6, 2) = -v * s;
        j(6, 3) = c;
        j(7, 2) = v * c;
        j(7, 3) = s;
      },
      Coordinates({1, 2, 3, 4, 5}));
}

Dictionary MakeD10m() {
  return Dictionary(
      "D10m", 5,
      {"1", "x1", "x2", "theta", "v", "omega", "v*omega", "v*theta^2", "v*theta^3",
       "v*theta^4"},
      [](const StateVector& z, LiftVector& out) {
        const double th = z(2), v = z(3), w = z(4);
        const double th2 = th * th;
        out.resize(10);
        out << 1.0, z(0), z(1), th, v, w, v * w, v * th2, v * th2 * th, v * th2 * th2;
      },
      [](const StateVector& z, LiftJacobian& j) {
        const double th = z(2), v = z(3), w = z(4);
        const double th2 = th * th;
        j.setZero(10, 5);
        for (int i = 0; i < 5; ++i) j(i + 1, i) = 1.0;
        j(6, 3) = w;
        j(6, 4) = v;
        j(7, 2) = 2.0 * v * th;
        j(7, 3) = th2;
        j(8, 2) = 3.0 * v * th2;
        j(8, 3) = th2 * th;
        j(9, 2) = 4.0 * v * th2 * th;
        j(9, 3) = th2 * th2;
      },
      Coordinates({1, 2, 3, 4, 5}));
}

Dictionary MakeD13t() {
  return Dictionary(
      "D13t", 5,
      {"1", "x1", "x2", "sin(theta)", "cos(theta)", "v", "omega", "v*cos(theta)",
       "v*sin(theta)", "omega*sin(theta)", "omega*cos(theta)", "sin(theta)*cos(theta)",
       "cos(theta)^2"},
      [](const StateVector& z, LiftVector& out) {
        const double c = std::cos(z(2)), s = std::sin(z(2)), v = z(3), w = z(4);
        out.resize(13);
        out << 1.0, z(0), z(1), s, c, v, w, v * c, v * s, w * s, w * c, s * c, c * c;
      },
      [](const StateVector& z, LiftJacobian& j) {
        const double c = std::cos(z(2)), s = std::sin(z(2)), v = z(3), w = z(4);
        j.setZero(13, 5);
        j(1, 0) = 1.0;
        j(2, 1) = 1.0;
        j(3, 2) = c;
        j(4, 2) = -s;
        j(5, 3) = 1.0;
        j(6, 4) = 1.0;
        j(7, 2) = -v * s;
        j(7, 3) = c;
        j(8, 2) = v * c;
        j(8, 3) = s;
        j(9, 2) = w * c;
        j(9, 4) = s;
        j(10, 2) = -w * s;
        j(10, 4) = c;
        j(11, 2) = c * c - s * s;
        j(12, 2) = -2.0 * c * s;
      },
      Atan2({1, 2, -1, 5, 6}, 4, 3));
}

Dictionary MakeD12f() {
  return Dictionary(
      "D12f", 5,
      {"1", "x1", "x2", "theta", "v", "omega", "v*cos(theta)", "v*sin(theta)",
       "v*cos(2*theta)", "v*sin(2*theta)", "v*cos(3*theta)", "v*sin(3*theta)"},
      [](const StateVector& z, LiftVector& out) {
        const double th = z(2), v = z(3);
        out.resize(12);
        out << 1.0, z(0), z(1), th, v, z(4), v * std::cos(th), v * std::sin(th),
            v * std::cos(2.0 * th), v * std::sin(2.0 * th), v * std::cos(3.0 * th),
            v * std::sin(3.0 * th);
      },
      [](const StateVector& z, LiftJacobian& j) {
        const double th = z(2), v = z(3);
        j.setZero(12, 5);
        for (int i = 0; i < 5; ++i) j(i + 1, i) = 1.0;
        for (int k = 1; k <= 3; ++k) {
          const double c = std::cos(k * th), s = std::sin(k * th);
          const int row = 6 + 2 * (k - 1);
          j(row, 2) = -k * v * s;
          j(row, 3) = c;
          j(row + 1, 2) = k * v * c;
          j(row + 1, 3) = s;
        }
      },
      Coordinates({1, 2, 3, 4, 5}));
}

}  // namespace

Dictionary::Dictionary(std::string name, int arity, std::vector<std::string> observable_names,
                       EvalFn eval, JacobianFn jacobian, Reprojection reprojection)
    : name_(std::move(name)),
      arity_(arity),
      observable_names_(std::move(observable_names)),
      eval_(std::move(eval)),
      jacobian_(std::move(jacobian)),
      reprojection_(std::move(reprojection)) {
  if (arity_ != 3 && arity_ != 5) {
    throw std::invalid_argument("dictionary arity must be 3 or 5");
  }
  if (size() < 1 || size() > kMaxLiftDim) {
    throw std::invalid_argument("dictionary size must be in [1, " +
                                std::to_string(kMaxLiftDim) + "]");
  }
  if (static_cast<int>(reprojection_.state_index.size()) != arity_) {
    throw std::invalid_argument("reprojection index map must have one entry per state");
  }
  for (int i = 0; i < arity_; ++i) {
    const bool heading_from_trig = reprojection_.kind == Reprojection::Kind::kAtan2 && i == 2;
    const int idx = reprojection_.state_index[i];
    if (!heading_from_trig && (idx < 0 || idx >= size())) {
      throw std::invalid_argument("reprojection index out of range");
    }
  }
  if (reprojection_.kind == Reprojection::Kind::kAtan2 &&
      (reprojection_.cos_index < 0 || reprojection_.cos_index >= size() ||
       reprojection_.sin_index < 0 || reprojection_.sin_index >= size())) {
    throw std::invalid_argument("atan2 reprojection needs valid cos/sin indices");
  }
}

Dictionary Dictionary::FromObservables(std::string name, int arity,
                                       std::vector<Observable> observables,
                                       Reprojection reprojection) {
  std::vector<std::string> names;
  names.reserve(observables.size());
  for (const auto& o : observables) names.push_back(o.name);
  auto shared = std::make_shared<const std::vector<Observable>>(std::move(observables));
  return Dictionary(
      std::move(name), arity, std::move(names),
      [shared](const StateVector& x, LiftVector& out) {
        out.resize(static_cast<Eigen::Index>(shared->size()));
        for (size_t i = 0; i < shared->size(); ++i) out(i) = (*shared)[i].value(x);
      },
      [shared, arity](const StateVector& x, LiftJacobian& j) {
        j.resize(static_cast<Eigen::Index>(shared->size()), arity);
        for (size_t i = 0; i < shared->size(); ++i) {
          j.row(i) = (*shared)[i].gradient(x).transpose();
        }
      },
      std::move(reprojection));
}

LiftVector Dictionary::Lift(const StateVector& x) const {
  if (x.size() != arity_) {
    throw std::invalid_argument("dictionary " + name_ + " lifts " + std::to_string(arity_) +
                                "-dimensional states, got " + std::to_string(x.size()));
  }
  LiftVector out;
  eval_(x, out);
  return out;
}

LiftJacobian Dictionary::Jacobian(const StateVector& x) const {
  if (x.size() != arity_) {
    throw std::invalid_argument("dictionary " + name_ + ": state arity mismatch");
  }
  LiftJacobian j;
  jacobian_(x, j);
  return j;
}

StateVector Dictionary::Reproject(const LiftVector& lifted) const {
  if (lifted.size() != size()) {
    throw std::invalid_argument("lifted vector does not belong to dictionary " + name_);
  }
  StateVector x(arity_);
  for (int i = 0; i < arity_; ++i) {
    const int idx = reprojection_.state_index[i];
    if (idx >= 0) x(i) = lifted(idx);
  }
  if (reprojection_.kind == Reprojection::Kind::kAtan2) {
    const double c = lifted(reprojection_.cos_index);
    const double s = lifted(reprojection_.sin_index);
    if (std::abs(c) < kDegenerateTrig && std::abs(s) < kDegenerateTrig) {
      throw DegenerateLiftError("degenerate lift: cos/sin observables vanish in " + name_);
    }
    x(2) = std::atan2(s, c);
  }
  x(2) = NormalizeAngle(x(2));
  return x;
}

ReprojectionJacobian Dictionary::ReprojectJacobian(const LiftVector& lifted) const {
  ReprojectionJacobian j;
  j.setZero(arity_, size());
  for (int i = 0; i < arity_; ++i) {
    const int idx = reprojection_.state_index[i];
    const bool heading_from_trig = reprojection_.kind == Reprojection::Kind::kAtan2 && i == 2;
    if (!heading_from_trig) j(i, idx) = 1.0;
  }
  if (reprojection_.kind == Reprojection::Kind::kAtan2) {
    const double c = lifted(reprojection_.cos_index);
    const double s = lifted(reprojection_.sin_index);
    const double r2 = c * c + s * s;
    if (r2 < kDegenerateTrig * kDegenerateTrig) {
      throw DegenerateLiftError("degenerate lift: atan2 derivative undefined in " + name_);
    }
    j(2, reprojection_.cos_index) = -s / r2;
    j(2, reprojection_.sin_index) = c / r2;
  }
  return j;
}

const std::vector<Dictionary>& Registry() {
  static const std::vector<Dictionary> registry = {MakeD5t(), MakeD8Eul(), MakeD10m(),
                                                   MakeD13t(), MakeD12f()};
  return registry;
}

const Dictionary& FindDictionary(const std::string& name) {
  for (const auto& d : Registry()) {
    if (d.name() == name) return d;
  }
  throw ConfigError("unknown dictionary '" + name + "' (expected D5t|D8Eul|D10m|D13t|D12f)");
}

RoundTripReport ValidateRoundTrip(const Dictionary& dict,
                                  std::span<const StateVector> states, double tol) {
  RoundTripReport report;
  for (const auto& x : states) {
    double err = 0.0;
    try {
      const StateVector back = dict.Reproject(dict.Lift(x));
      for (int i = 0; i < x.size(); ++i) {
        const double d = i == 2 ? NormalizeAngle(back(i) - x(i)) : back(i) - x(i);
        err = std::max(err, std::abs(d));
      }
    } catch (const DegenerateLiftError&) {
      err = std::numeric_limits<double>::infinity();
    }
    report.max_error = std::max(report.max_error, err);
    if (!(err <= tol)) ++report.failures;
  }
  report.ok = report.failures == 0;
  return report;
}

}  // namespace kmpc
