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

#include "kmpc/costs.h"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace kmpc {

namespace {

// Exponent per state coordinate of the mixed-exponents cost.
int StateExponent(int i) { return i == 1 ? 2 : 4; }

void CheckDims(const CostSpec& spec, Eigen::Index n) {
  if (n != spec.ArgumentDim()) {
    throw std::invalid_argument("stage cost expects a " + std::to_string(spec.ArgumentDim()) +
                                "-dimensional argument, got " + std::to_string(n));
  }
}

bool IsSymmetricPositiveDefinite(const Eigen::MatrixXd& m, bool allow_semidefinite) {
  if (m.rows() != m.cols() || !m.isApprox(m.transpose())) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  return allow_semidefinite ? eig.eigenvalues().minCoeff() >= 0.0
                            : eig.eigenvalues().minCoeff() > 0.0;
}

}  // namespace

std::string ToString(CostKind kind) {
  switch (kind) {
    case CostKind::kMixedExponents:
      return "me";
    case CostKind::kControlEngineering:
      return "ce";
    case CostKind::kDataScientific:
      return "ds";
  }
  return "?";
}

CostKind ParseCostKind(const std::string& name) {
  if (name == "me") return CostKind::kMixedExponents;
  if (name == "ce") return CostKind::kControlEngineering;
  if (name == "ds") return CostKind::kDataScientific;
  throw ConfigError("unknown cost '" + name + "' (expected me|ce|ds)");
}

int CostSpec::ArgumentDim() const {
  if (kind == CostKind::kDataScientific) return static_cast<int>(lifted_goal.size());
  return StateDim(model);
}

void CostSpec::Validate() const {
  if (!(r.array() > 0.0).all()) throw ConfigError("input weights must be positive");
  switch (kind) {
    case CostKind::kMixedExponents:
      if (q.size() != StateDim(model)) {
        throw ConfigError("mixed-exponents cost needs one weight per state coordinate");
      }
      if (!(q.array() > 0.0).all()) throw ConfigError("state weights must be positive");
      break;
    case CostKind::kControlEngineering:
      if (state_weight.rows() != StateDim(model) ||
          !IsSymmetricPositiveDefinite(state_weight, false)) {
        throw ConfigError("ce state weight must be symmetric positive definite n x n");
      }
      break;
    case CostKind::kDataScientific:
      // The constant observable never deviates, so its weight may be zero.
      if (lifted_goal.size() == 0 || state_weight.rows() != lifted_goal.size() ||
          !IsSymmetricPositiveDefinite(state_weight, true)) {
        throw ConfigError("ds weight must be symmetric positive semidefinite M x M");
      }
      break;
  }
  if (kind != CostKind::kMixedExponents && !IsSymmetricPositiveDefinite(input_weight, false)) {
    throw ConfigError("input weight must be symmetric positive definite");
  }
}

CostSpec DefaultCost(CostKind kind, ModelKind model, const Dictionary* dict) {
  CostSpec spec;
  spec.kind = kind;
  spec.model = model;
  const int n = StateDim(model);
  switch (kind) {
    case CostKind::kMixedExponents:
      spec.q = Eigen::VectorXd::Ones(n);
      if (model == ModelKind::kDynamic) spec.q(1) = 10.0;
      spec.r = Eigen::Vector2d::Constant(0.01);
      break;
    case CostKind::kControlEngineering:
      spec.state_weight = Eigen::MatrixXd::Identity(n, n);
      break;
    case CostKind::kDataScientific: {
      if (dict == nullptr) throw ConfigError("ds cost requires a dictionary");
      if (dict->arity() != n) throw ConfigError("dictionary does not match the model kind");
      spec.state_weight = Eigen::MatrixXd::Identity(dict->size(), dict->size());
      spec.state_weight(0, 0) = 0.0;
      spec.lifted_goal = dict->Lift(StateVector::Zero(n));
      break;
    }
  }
  return spec;
}

double StageCost(const CostSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& arg,
                 const Input& u) {
  CheckDims(spec, arg.size());
  switch (spec.kind) {
    case CostKind::kMixedExponents: {
      double c = 0.0;
      for (Eigen::Index i = 0; i < arg.size(); ++i) {
        const double s2 = arg(i) * arg(i);
        c += spec.q(i) * (StateExponent(static_cast<int>(i)) == 2 ? s2 : s2 * s2);
      }
      const Eigen::Vector2d u2 = u.cwiseProduct(u);
      return c + spec.r.dot(u2.cwiseProduct(u2));
    }
    case CostKind::kControlEngineering: {
      LiftVector weighted;
      weighted.noalias() = spec.state_weight * arg;
      return arg.dot(weighted) + u.dot(spec.input_weight * u);
    }
    case CostKind::kDataScientific: {
      const LiftVector dpsi = arg - spec.lifted_goal;
      LiftVector weighted;
      weighted.noalias() = spec.state_weight * dpsi;
      return dpsi.dot(weighted) + u.dot(spec.input_weight * u);
    }
  }
  return 0.0;
}

StageGradient StageCostGradient(const CostSpec& spec,
                                const Eigen::Ref<const Eigen::VectorXd>& arg, const Input& u) {
  CheckDims(spec, arg.size());
  StageGradient g;
  switch (spec.kind) {
    case CostKind::kMixedExponents:
      g.arg.resize(arg.size());
      for (Eigen::Index i = 0; i < arg.size(); ++i) {
        const double s = arg(i);
        g.arg(i) = StateExponent(static_cast<int>(i)) == 2 ? 2.0 * spec.q(i) * s
                                                           : 4.0 * spec.q(i) * s * s * s;
      }
      g.input = 4.0 * spec.r.cwiseProduct(u.cwiseProduct(u).cwiseProduct(u));
      break;
    case CostKind::kControlEngineering:
      g.arg.noalias() = spec.state_weight * arg;
      g.arg.noalias() += spec.state_weight.transpose() * arg;
      g.input = (spec.input_weight + spec.input_weight.transpose()) * u;
      break;
    case CostKind::kDataScientific:
    {
      const LiftVector dpsi = arg - spec.lifted_goal;
      g.arg.noalias() = spec.state_weight * dpsi;
      g.arg.noalias() += spec.state_weight.transpose() * dpsi;
    }
      g.input = (spec.input_weight + spec.input_weight.transpose()) * u;
      break;
  }
  return g;
}

}  // namespace kmpc
