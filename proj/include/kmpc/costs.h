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

// Stage costs for setpoint stabilization at the origin.
//
//   me: mixed-exponents pseudo-norm cost, quartic in x1, theta, and the
//       velocity/input channels, quadratic in the lateral coordinate x2.
//   ce: quadratic form in the state and input.
//   ds: quadratic form in the lifted deviation psi - psi_d and the input.

#ifndef KMPC_COSTS_H_
#define KMPC_COSTS_H_

#include <string>

#include <Eigen/Core>

#include "kmpc/dictionary.h"
#include "kmpc/types.h"

namespace kmpc {

enum class CostKind { kMixedExponents, kControlEngineering, kDataScientific };

std::string ToString(CostKind kind);
// Accepts "me", "ce", "ds".
CostKind ParseCostKind(const std::string& name);

struct CostSpec {
  CostKind kind = CostKind::kMixedExponents;
  ModelKind model = ModelKind::kKinematic;
  // me: q_1..q_n (n = 3 or 5) and r_1, r_2.
  Eigen::VectorXd q;
  Eigen::Vector2d r = Eigen::Vector2d::Constant(0.01);
  // ce: Q (n x n); ds: Q_psi (M x M).
  Eigen::MatrixXd state_weight;
  Eigen::Matrix2d input_weight = 0.01 * Eigen::Matrix2d::Identity();
  // ds only: psi_d, the lift of the goal state.
  LiftVector lifted_goal;

  // Expected length of the first argument of StageCost.
  int ArgumentDim() const;
  // Throws ConfigError.
  void Validate() const;
};

// me: q = 1 (q_2 = 10 for the dynamic robot), r = 0.01; ce: Q = I,
// R = 0.01 I; ds: Q_psi = I with the constant observable's row and column
// zeroed, R = 0.01 I, psi_d = lift(0).
// `dict` is required for ds.
CostSpec DefaultCost(CostKind kind, ModelKind model, const Dictionary* dict = nullptr);

// `arg` is the state for me/ce and the lifted vector for ds. Throws
// std::invalid_argument on dimension mismatch.
double StageCost(const CostSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& arg,
                 const Input& u);

struct StageGradient {
  LiftVector arg;  // d cost / d arg
  Input input;     // d cost / d u
};

StageGradient StageCostGradient(const CostSpec& spec,
                                const Eigen::Ref<const Eigen::VectorXd>& arg, const Input& u);

}  // namespace kmpc

#endif  // KMPC_COSTS_H_
