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


#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.h"
#include "generators.h"
#include "kmpc/mpc.h"

namespace kmpc {
namespace {

OcpSpec KinematicOcp(CostKind cost, PredictionMode mode = PredictionMode::kSurrogateReprojected) {
  OcpSpec spec;
  spec.horizon = 60;
  spec.dt = 0.1;
  spec.box = DefaultVelocityBox();
  spec.model.mode = mode;
  spec.model.nominal_kind = ModelKind::kKinematic;
  if (mode != PredictionMode::kNominal) spec.model.surrogate = testing::NoiselessKinematicSurrogate();
  spec.cost = DefaultCost(cost, ModelKind::kKinematic, &FindDictionary("D5t"));
  if (mode == PredictionMode::kNominal && cost == CostKind::kDataScientific) {
    spec.model.dictionary = std::make_shared<const Dictionary>(FindDictionary("D5t"));
  }
  return spec;
}

StateVector Vec(std::initializer_list<double> xs) {
  StateVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

TEST(SolveOcpTest, GoalIsOptimalImmediately) {
  for (CostKind c : {CostKind::kMixedExponents, CostKind::kControlEngineering,
                     CostKind::kDataScientific}) {
    const OcpSpec spec = KinematicOcp(c);
    const OcpSolution sol = SolveOcp(spec, Vec({0, 0, 0}),
                                     std::vector<Input>(spec.horizon + 1, Input::Zero()));
    EXPECT_EQ(sol.value, 0.0);
    EXPECT_TRUE(sol.converged);
    EXPECT_LE(sol.iterations, 1);
    for (const auto& u : sol.inputs) EXPECT_EQ(u, Input::Zero());
  }
}

TEST(SolveOcpTest, OneStepQuadraticMatchesGridSearch) {
  OcpSpec spec = KinematicOcp(CostKind::kControlEngineering, PredictionMode::kNominal);
  spec.horizon = 1;
  spec.dt = 0.01;
  spec.solver.max_iterations = 2000;
  spec.solver.gradient_tolerance = 1e-12;
  for (const StateVector& x : {Vec({1.0, 0.5, 0.3}), Vec({-0.02, 0.01, 0.4}),
                               Vec({0.3, -0.8, -2.5})}) {
    const OcpSolution sol = SolveOcp(spec, x);
    double best = std::numeric_limits<double>::infinity();
    Input arg = Input::Zero();
    const Input lo = spec.box.lower, hi = spec.box.upper;
    for (double v = lo(0); v <= hi(0) + 1e-12; v += 1e-3) {
      for (double w = lo(1); w <= hi(1) + 1e-12; w += 1e-3) {
        const double f = EvaluateObjective(spec, x, {Input(v, w), Input::Zero()});
        if (f < best) {
          best = f;
          arg = Input(v, w);
        }
      }
    }
    EXPECT_LE(sol.value, best + 1e-12);
    EXPECT_LE((sol.inputs[0] - arg).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_LE(sol.inputs[1].norm(), 1e-9);
  }
}

TEST(SolveOcpTest, SolutionInvariants) {
  testing::Gen gen(41);
  for (CostKind c : {CostKind::kMixedExponents, CostKind::kControlEngineering,
                     CostKind::kDataScientific}) {
    OcpSpec spec = KinematicOcp(c);
    spec.horizon = 20;
    for (int trial = 0; trial < 5; ++trial) {
      const StateVector x = gen.State(ModelKind::kKinematic);
      std::vector<Input> warm;
      for (int k = 0; k <= spec.horizon; ++k) warm.push_back(gen.InputIn(spec.box));
      const OcpSolution sol = SolveOcp(spec, x, warm);
      ASSERT_FALSE(sol.failed);
      EXPECT_GE(sol.value, 0.0);
      EXPECT_LE(sol.value, EvaluateObjective(spec, x, warm));
      ASSERT_EQ(static_cast<int>(sol.inputs.size()), spec.horizon + 1);
      ASSERT_EQ(static_cast<int>(sol.states.size()), spec.horizon + 1);
      for (const auto& u : sol.inputs) EXPECT_TRUE(spec.box.Contains(u));
    }
  }
}

TEST(SolveOcpTest, LbfgsAgreesWithProjectedGradient) {
  OcpSpec spec = KinematicOcp(CostKind::kMixedExponents);
  spec.horizon = 30;
  spec.solver.max_iterations = 1000;
  const StateVector x = Vec({-1, -0.5, -0.5236});
  const OcpSolution pg = SolveOcp(spec, x);
  spec.solver.kind = SolverKind::kProjectedLbfgs;
  const OcpSolution lb = SolveOcp(spec, x);
  EXPECT_NEAR(lb.value, pg.value, 1e-3 * pg.value);
}

TEST(SolveOcpTest, WarmStartDominance) {
  const OcpSpec spec = KinematicOcp(CostKind::kMixedExponents, PredictionMode::kNominal);
  testing::Gen gen(42);
  for (int trial = 0; trial < 5; ++trial) {
    const StateVector x = gen.State(ModelKind::kKinematic);
    const OcpSolution first = SolveOcp(spec, x);
    std::vector<Input> shifted(first.inputs.begin() + 1, first.inputs.end());
    shifted.push_back(Input::Zero());
    const StateVector next = first.states[1];
    const OcpSolution second = SolveOcp(spec, next, shifted);
    EXPECT_LE(second.value, EvaluateObjective(spec, next, shifted) + 1e-12);
  }
}

TEST(SolveOcpTest, DivergingLiftedRolloutReportsFailureStep) {
  const Dictionary& d = FindDictionary("D5t");
  Eigen::MatrixXd blow = 1e120 * Eigen::MatrixXd::Identity(5, 5);
  blow(0, 0) = 1.0;
  auto surrogate = std::make_shared<const KoopmanSurrogate>(
      d, std::vector<Eigen::MatrixXd>{Eigen::MatrixXd::Identity(5, 5), blow, blow},
      std::vector<Input>{Input::Zero(), Input(0.2, -0.4), Input(0.2, 0.6)}, 0.1, false);
  OcpSpec spec = KinematicOcp(CostKind::kMixedExponents, PredictionMode::kSurrogateLifted);
  spec.model.surrogate = surrogate;
  spec.horizon = 10;
  const OcpSolution sol =
      SolveOcp(spec, Vec({0.5, 0.5, 0.5}), std::vector<Input>(11, Input(0.2, 0.1)));
  EXPECT_TRUE(sol.failed || std::isfinite(sol.value));
  if (sol.failed) {
    EXPECT_GE(sol.failure_step, 1);
    EXPECT_FALSE(sol.failure.empty());
  }
  EXPECT_EQ(EvaluateObjective(spec, Vec({0.5, 0.5, 0.5}), std::vector<Input>(11, Input(0.2, 0.1))),
            std::numeric_limits<double>::infinity());
}

TEST(SolveOcpTest, SpecValidation) {
  OcpSpec spec = KinematicOcp(CostKind::kMixedExponents);
  spec.dt = 0.05;
  EXPECT_THROW(spec.Validate(), ConfigError);
  spec = KinematicOcp(CostKind::kMixedExponents);
  spec.horizon = 0;
  EXPECT_THROW(spec.Validate(), ConfigError);
  spec = KinematicOcp(CostKind::kDataScientific, PredictionMode::kNominal);
  spec.model.dictionary.reset();
  EXPECT_THROW(spec.Validate(), ConfigError);
  spec = KinematicOcp(CostKind::kMixedExponents);
  spec.cost = DefaultCost(CostKind::kMixedExponents, ModelKind::kDynamic);
  EXPECT_THROW(spec.Validate(), ConfigError);
}

TEST(ClosedLoopTest, StaysAtGoal) {
  const OcpSpec spec = KinematicOcp(CostKind::kMixedExponents);
  const ClosedLoopResult r = ClosedLoop(spec, ModelKind::kKinematic, Vec({0, 0, 0}), 2.0);
  ASSERT_EQ(r.states.size(), 21u);
  for (const auto& x : r.states) EXPECT_EQ(x.norm(), 0.0);
  for (double v : r.values) EXPECT_EQ(v, 0.0);
}

TEST(ClosedLoopTest, ParallelParkingWithMixedExponents) {
  const OcpSpec spec = KinematicOcp(CostKind::kMixedExponents);
  const ClosedLoopResult r = ClosedLoop(spec, ModelKind::kKinematic, Vec({0, 0.5, 0}), 10.0);
  ASSERT_FALSE(r.failed);
  EXPECT_LE(std::abs(r.states.back()(1)), 1e-3);
  // Below this floor the surrogate's interpolation error dominates the value.
  const double floor = 1e-6;
  for (size_t k = 1; k < r.values.size() && r.values[k - 1] > floor; ++k) {
    EXPECT_LE(r.values[k], r.values[k - 1]) << "step " << k;
  }
  for (const auto& u : r.inputs) EXPECT_TRUE(spec.box.Contains(u));
}

TEST(ClosedLoopTest, OneStepHorizonModesAgree) {
  OcpSpec proj = KinematicOcp(CostKind::kMixedExponents, PredictionMode::kSurrogateReprojected);
  proj.horizon = 1;
  OcpSpec lifted = proj;
  lifted.model.mode = PredictionMode::kSurrogateLifted;
  const StateVector x0 = Vec({-0.4, 0.3, 1.0});
  const ClosedLoopResult a = ClosedLoop(proj, ModelKind::kKinematic, x0, 3.0);
  const ClosedLoopResult b = ClosedLoop(lifted, ModelKind::kKinematic, x0, 3.0);
  ASSERT_EQ(a.states.size(), b.states.size());
  for (size_t k = 0; k < a.states.size(); ++k) {
    EXPECT_LE((a.states[k] - b.states[k]).cwiseAbs().maxCoeff(), 1e-12) << k;
  }
}

TEST(ClosedLoopTest, BitwiseDeterministic) {
  const OcpSpec spec = KinematicOcp(CostKind::kMixedExponents);
  const StateVector x0 = Vec({-1, -0.5, -0.5236});
  const ClosedLoopResult a = ClosedLoop(spec, ModelKind::kKinematic, x0, 3.0);
  const ClosedLoopResult b = ClosedLoop(spec, ModelKind::kKinematic, x0, 3.0);
  for (size_t k = 0; k < a.states.size(); ++k) EXPECT_EQ(a.states[k], b.states[k]);
  EXPECT_EQ(a.values, b.values);
}

TEST(ClosedLoopTest, NonOriginGoalViaFrameChange) {
  const OcpSpec spec = KinematicOcp(CostKind::kMixedExponents);
  const PoseState goal{0.3, -0.2, 0.5};
  const ClosedLoopResult r = ClosedLoop(spec, ModelKind::kKinematic, Vec({-0.5, 0.2, 0.0}), 10.0, goal);
  const StateVector local = ToGoalFrame(r.states.back(), goal);
  EXPECT_LE(local.head<2>().norm(), 1e-2);
}

TEST(ClosedLoopTest, DurationMustBeMultipleOfDt) {
  const OcpSpec spec = KinematicOcp(CostKind::kMixedExponents);
  EXPECT_ANY_THROW(ClosedLoop(spec, ModelKind::kKinematic, Vec({0, 0, 0}), 0.25));
}

TEST(ClosedLoopTest, TrajectoryCsvLayout) {
  const OcpSpec spec = KinematicOcp(CostKind::kMixedExponents);
  const ClosedLoopResult r = ClosedLoop(spec, ModelKind::kKinematic, Vec({0, 0, 0}), 0.3);
  std::ostringstream out;
  WriteTrajectoryCsv(out, r, {"seed=1"});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# seed=1");
  std::getline(in, line);
  EXPECT_EQ(line, "t,x1,x2,theta,u1,u2,value,iters,converged");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
}

TEST(ClosedLoopTest, DynamicQuadraticCostStallsAwayFromGoal) {
  OcpSpec spec;
  spec.horizon = 50;
  spec.dt = 0.05;
  spec.box = DefaultAccelerationBox();
  spec.model.surrogate = testing::DynamicSurrogate();
  spec.cost = DefaultCost(CostKind::kControlEngineering, ModelKind::kDynamic);
  spec.solver.max_iterations = 50;
  const ClosedLoopResult r =
      ClosedLoop(spec, ModelKind::kDynamic, Vec({1, 0.2, kPi / 4, 0, 0}), 20.0);
  EXPECT_GT(std::abs(r.states.back()(1)), 2e-3);
}

}  // namespace
}  // namespace kmpc
