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

// Receding-horizon control over a Koopman surrogate or a nominal model.
//
// The optimal control problem is posed by single shooting: the decision
// variables are the H + 1 inputs u(t), ..., u(t + H), states follow from the
// prediction model, and the objective sums H + 1 stage costs. Only box
// constraints on the inputs remain, handled by projection.

#ifndef KMPC_MPC_H_
#define KMPC_MPC_H_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kmpc/costs.h"
#include "kmpc/edmd.h"
#include "kmpc/types.h"
#include "kmpc/vehicle.h"

namespace kmpc {

enum class PredictionMode { kSurrogateReprojected, kSurrogateLifted, kNominal };

std::string ToString(PredictionMode mode);

struct PredictionModel {
  PredictionMode mode = PredictionMode::kSurrogateReprojected;
  std::shared_ptr<const KoopmanSurrogate> surrogate;  // surrogate modes
  ModelKind nominal_kind = ModelKind::kKinematic;     // nominal mode
  // Nominal mode with a ds cost lifts through this dictionary.
  std::shared_ptr<const Dictionary> dictionary;

  ModelKind kind() const { return surrogate ? surrogate->kind() : nominal_kind; }
};

enum class SolverKind { kProjectedGradient, kProjectedLbfgs };

struct SolverOptions {
  SolverKind kind = SolverKind::kProjectedGradient;
  int max_iterations = 300;
  // Converged when |u - P(u - grad)| <= gradient_tolerance.
  double gradient_tolerance = 1e-8;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 40;
  // Projected gradient: reset the spectral step every this many iterations
  // (0 disables).
  int momentum_restart = 10;
  // Projected L-BFGS history length.
  int lbfgs_memory = 8;
};

struct OcpSpec {
  int horizon = 60;
  double dt = 0.1;
  InputBox box = DefaultVelocityBox();
  CostSpec cost;
  PredictionModel model;
  SolverOptions solver;

  // Throws ConfigError.
  void Validate() const;
};

struct OcpSolution {
  std::vector<Input> inputs;        // H + 1 entries
  std::vector<StateVector> states;  // predicted, H + 1 entries
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  // Set when the rollout produced a non-finite cost or a degenerate lift.
  bool failed = false;
  int failure_step = -1;
  std::string failure;
};

// Solves the OCP from x_now (already expressed in the goal frame). A warm
// start, if given, must hold H + 1 inputs inside the box.
OcpSolution SolveOcp(const OcpSpec& spec, const StateVector& x_now,
                     const std::optional<std::vector<Input>>& warm_start = std::nullopt);

// Objective of a given input sequence, for tests and diagnostics. Returns
// +inf if the rollout breaks down.
double EvaluateObjective(const OcpSpec& spec, const StateVector& x_now,
                         const std::vector<Input>& inputs);

struct ClosedLoopResult {
  std::vector<double> times;
  std::vector<StateVector> states;  // plant states, world frame
  std::vector<Input> inputs;        // input applied from times[k] (zero on the last row)
  std::vector<double> values;
  std::vector<int> iterations;
  std::vector<bool> converged;
  bool failed = false;
  int failure_step = -1;
  std::string failure;
};

// Runs the receding-horizon loop against the nominal ZOH plant for
// `duration` seconds (a multiple of spec.dt). Solves at every sampling
// instant including the final one, applies the first input, and warm starts
// with the shifted previous solution padded by zero.
ClosedLoopResult ClosedLoop(const OcpSpec& spec, ModelKind plant, const StateVector& x0,
                            double duration, const PoseState& goal = {});

// Writes `t,x1,x2,theta[,v,omega],u1,u2,value,iters,converged`.
void WriteTrajectoryCsv(std::ostream& out, const ClosedLoopResult& result,
                        const std::vector<std::string>& provenance = {});

}  // namespace kmpc

#endif  // KMPC_MPC_H_
