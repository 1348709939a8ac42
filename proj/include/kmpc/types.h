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

#ifndef KMPC_TYPES_H_
#define KMPC_TYPES_H_

#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace kmpc {

inline constexpr int kMaxStateDim = 5;
inline constexpr int kMaxLiftDim = 32;
inline constexpr int kInputDim = 2;
inline constexpr double kPi = std::numbers::pi;

// Small vectors live on the stack; only their active length is dynamic.
using StateVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxStateDim, 1>;
using LiftVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxLiftDim, 1>;
using Input = Eigen::Vector2d;
// Jacobian of a lift (M x n) and of a reprojection (n x M).
using LiftJacobian =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxLiftDim, kMaxStateDim>;
using ReprojectionJacobian =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxStateDim, kMaxLiftDim>;

enum class ModelKind { kKinematic, kDynamic };

inline int StateDim(ModelKind kind) { return kind == ModelKind::kKinematic ? 3 : 5; }
std::string ToString(ModelKind kind);
ModelKind ParseModelKind(const std::string& name);

// Error categories map one-to-one onto CLI exit codes.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleSpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RegressionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kmpc

#endif  // KMPC_TYPES_H_
