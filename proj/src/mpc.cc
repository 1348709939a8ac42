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

#include "kmpc/mpc.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>

namespace kmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFdStep = 1e-6;

// Objective and adjoint gradient of the single-shooting OCP. The propagated
// variable p_k is the state (reprojected and nominal modes) or the lifted
// vector (lifted mode); both fit in a LiftVector.
class ShootingObjective {
 public:
  ShootingObjective(const OcpSpec& spec, const StateVector& x0)
      : spec_(spec), x0_(x0), horizon_(spec.horizon) {
    const auto n = static_cast<size_t>(horizon_ + 1);
    p_.resize(n);
    lifted_.resize(n);
    next_lifted_.resize(n);
    arg_.resize(n);
    if (spec.model.surrogate) dict_ = &spec.model.surrogate->dictionary();
    if (spec.model.mode == PredictionMode::kNominal && spec.model.dictionary) {
      dict_ = spec.model.dictionary.get();
    }
  }

  // Returns +inf on breakdown and records the failing step.
  double Evaluate(const Eigen::VectorXd& u, Eigen::VectorXd* grad) {
    failure_step_ = -1;
    failure_.clear();
    try {
      const double f = Forward(u);
      if (!std::isfinite(f)) return kInf;
      if (grad != nullptr) Backward(u, grad);
      if (grad != nullptr && !grad->allFinite()) {
        failure_step_ = 0;
        failure_ = "non-finite gradient";
        return kInf;
      }
      return f;
    } catch (const DegenerateLiftError& e) {
      failure_ = e.what();
      return kInf;
    }
  }

  std::vector<StateVector> States() const {
    std::vector<StateVector> out;
    out.reserve(p_.size());
    for (size_t k = 0; k < p_.size(); ++k) {
      if (spec_.model.mode == PredictionMode::kSurrogateLifted) {
        out.push_back(dict_->Reproject(p_[k]));
      } else {
        out.push_back(p_[k]);
      }
    }
    return out;
  }

  int failure_step() const { return failure_step_; }
  const std::string& failure() const { return failure_; }

 private:
  PredictionMode mode() const { return spec_.model.mode; }
  bool lifted_cost() const { return spec_.cost.kind == CostKind::kDataScientific; }

  static Input InputAt(const Eigen::VectorXd& u, int k) { return u.segment<2>(2 * k); }

  double Forward(const Eigen::VectorXd& u) {
    double total = 0.0;
    if (mode() == PredictionMode::kSurrogateLifted) {
      p_[0] = dict_->Lift(x0_);
    } else {
      p_[0] = x0_;
    }
    for (int k = 0; k <= horizon_; ++k) {
      const Input uk = InputAt(u, k);
      // Cost argument.
      switch (mode()) {
        case PredictionMode::kSurrogateReprojected:
        case PredictionMode::kNominal:
          if (lifted_cost() || mode() == PredictionMode::kSurrogateReprojected) {
            lifted_[k] = dict_ != nullptr ? dict_->Lift(p_[k]) : LiftVector();
          }
          arg_[k] = lifted_cost() ? lifted_[k] : p_[k];
          break;
        case PredictionMode::kSurrogateLifted:
          arg_[k] = lifted_cost() ? p_[k] : LiftVector(dict_->Reproject(p_[k]));
          break;
      }
      const double stage = StageCost(spec_.cost, arg_[k], uk);
      if (!std::isfinite(stage)) return Fail(k, "non-finite stage cost");
      total += stage;
      if (k == horizon_) break;
      // Transition.
      switch (mode()) {
        case PredictionMode::kSurrogateReprojected:
          next_lifted_[k] = spec_.model.surrogate->Apply(uk, lifted_[k]);
          p_[k + 1] = dict_->Reproject(next_lifted_[k]);
          break;
        case PredictionMode::kSurrogateLifted:
          p_[k + 1] = spec_.model.surrogate->Apply(uk, p_[k]);
          break;
        case PredictionMode::kNominal:
          p_[k + 1] = ZohStep(spec_.model.nominal_kind, p_[k], uk, spec_.dt);
          break;
      }
      if (!p_[k + 1].allFinite()) return Fail(k + 1, "non-finite predicted state");
    }
    return std::isfinite(total) ? total : Fail(horizon_, "non-finite objective");
  }

  double Fail(int step, const char* what) {
    failure_step_ = step;
    failure_ = std::string(what) + " at prediction step " + std::to_string(step);
    return kInf;
  }

  void Backward(const Eigen::VectorXd& u, Eigen::VectorXd* grad) {
    grad->resize(u.size());
    LiftVector adjoint;  // d J / d p_{k+1}
    for (int k = horizon_; k >= 0; --k) {
      const Input uk = InputAt(u, k);
      const StageGradient g = StageCostGradient(spec_.cost, arg_[k], uk);
      Input du = g.input;
      LiftVector dp;
      // Stage cost contribution mapped onto p_k.
      switch (mode()) {
        case PredictionMode::kSurrogateReprojected:
        case PredictionMode::kNominal:
          if (lifted_cost()) {
            dp.noalias() = dict_->Jacobian(p_[k]).transpose() * g.arg;
          } else {
            dp = g.arg;
          }
          break;
        case PredictionMode::kSurrogateLifted:
          if (lifted_cost()) {
            dp = g.arg;
          } else {
            dp.noalias() = dict_->ReprojectJacobian(p_[k]).transpose() * g.arg;
          }
          break;
      }
      if (k < horizon_) {
        switch (mode()) {
          case PredictionMode::kSurrogateReprojected: {
            const auto& sur = *spec_.model.surrogate;
            LiftVector w;
            w.noalias() = dict_->ReprojectJacobian(next_lifted_[k]).transpose() * adjoint;
            const LiftVector kt_w = sur.ApplyTransposed(uk, w);
            dp.noalias() += dict_->Jacobian(p_[k]).transpose() * kt_w;
            for (int j = 0; j < kInputDim; ++j) {
              LiftVector gl;
              gl.noalias() = sur.InputGain(j) * lifted_[k];
              du(j) += w.dot(gl);
            }
            break;
          }
          case PredictionMode::kSurrogateLifted: {
            const auto& sur = *spec_.model.surrogate;
            dp += sur.ApplyTransposed(uk, adjoint);
            for (int j = 0; j < kInputDim; ++j) {
              LiftVector gp;
              gp.noalias() = sur.InputGain(j) * p_[k];
              du(j) += adjoint.dot(gp);
            }
            break;
          }
          case PredictionMode::kNominal: {
            // Central differences of the plant map.
            const ModelKind kind = spec_.model.nominal_kind;
            const StateVector x = p_[k];
            for (int i = 0; i < x.size(); ++i) {
              StateVector xp = x, xm = x;
              xp(i) += kFdStep;
              xm(i) -= kFdStep;
              const StateVector d = (ZohStep(kind, xp, uk, spec_.dt) -
                                     ZohStep(kind, xm, uk, spec_.dt)) /
                                    (2.0 * kFdStep);
              dp(i) += d.dot(adjoint);
            }
            for (int j = 0; j < kInputDim; ++j) {
              Input up = uk, um = uk;
              up(j) += kFdStep;
              um(j) -= kFdStep;
              const StateVector d = (ZohStep(kind, x, up, spec_.dt) -
                                     ZohStep(kind, x, um, spec_.dt)) /
                                    (2.0 * kFdStep);
              du(j) += d.dot(adjoint);
            }
            break;
          }
        }
      }
      grad->segment<2>(2 * k) = du;
      adjoint = dp;
    }
  }

  const OcpSpec& spec_;
  StateVector x0_;
  int horizon_;
  const Dictionary* dict_ = nullptr;
  std::vector<LiftVector> p_;
  std::vector<LiftVector> lifted_;
  std::vector<LiftVector> next_lifted_;
  std::vector<LiftVector> arg_;
  int failure_step_ = -1;
  std::string failure_;
};

struct Bounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::VectorXd Project(const Eigen::VectorXd& u) const {
    return u.cwiseMax(lower).cwiseMin(upper);
  }
};

Bounds MakeBounds(const InputBox& box, int horizon) {
  Bounds b;
  b.lower = box.lower.replicate(horizon + 1, 1);
  b.upper = box.upper.replicate(horizon + 1, 1);
  return b;
}

struct SolverResult {
  Eigen::VectorXd u;
  double value = kInf;
  int iterations = 0;
  bool converged = false;
};

double ProjectedGradientNorm(const Bounds& b, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& g) {
  return (u - b.Project(u - g)).norm();
}

// Spectral projected gradient: Barzilai-Borwein trial steps along the
// projection arc, accepted by Armijo backtracking. Monotone, so the last
// iterate is the best one.
SolverResult SolveProjectedGradient(ShootingObjective& obj, const Bounds& bounds,
                                    Eigen::VectorXd u, double f, Eigen::VectorXd g,
                                    const SolverOptions& opts) {
  SolverResult res;
  double step = 1.0;
  Eigen::VectorXd g_new;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    if (ProjectedGradientNorm(bounds, u, g) <= opts.gradient_tolerance) {
      res.converged = true;
      break;
    }
    if (opts.momentum_restart > 0 && it % opts.momentum_restart == 0 && it > 0) {
      step = std::max(step, 1.0);
    }
    bool accepted = false;
    double trial = step;
    Eigen::VectorXd u_new;
    double f_new = kInf;
    for (int b = 0; b < opts.max_backtracks; ++b) {
      u_new = bounds.Project(u - trial * g);
      const double decrease = g.dot(u_new - u);
      f_new = obj.Evaluate(u_new, &g_new);
      if (f_new <= f + opts.armijo_c * decrease) {
        accepted = true;
        break;
      }
      trial *= opts.shrink;
    }
    if (!accepted) break;
    const Eigen::VectorXd s = u_new - u;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-10, 1e10) : 2.0 * trial;
    u = std::move(u_new);
    f = f_new;
    g = g_new;
  }
  if (!res.converged && ProjectedGradientNorm(bounds, u, g) <= opts.gradient_tolerance) {
    res.converged = true;
  }
  res.u = std::move(u);
  res.value = f;
  res.iterations = it;
  return res;
}

// Two-metric projected L-BFGS: quasi-Newton directions on the variables not
// held at an active bound, projected Armijo search.
SolverResult SolveProjectedLbfgs(ShootingObjective& obj, const Bounds& bounds,
                                 Eigen::VectorXd u, double f, Eigen::VectorXd g,
                                 const SolverOptions& opts) {
  SolverResult res;
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> history;
  Eigen::VectorXd g_new;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const double pg = ProjectedGradientNorm(bounds, u, g);
    if (pg <= opts.gradient_tolerance) {
      res.converged = true;
      break;
    }
    // Variables at a bound with the gradient pushing outward stay fixed.
    const double eps = std::min(1e-8, pg);
    Eigen::VectorXd free = Eigen::VectorXd::Ones(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      if ((u(i) <= bounds.lower(i) + eps && g(i) > 0.0) ||
          (u(i) >= bounds.upper(i) - eps && g(i) < 0.0)) {
        free(i) = 0.0;
      }
    }
    Eigen::VectorXd q = g.cwiseProduct(free);
    std::vector<double> alpha(history.size());
    for (int i = static_cast<int>(history.size()) - 1; i >= 0; --i) {
      const auto& [s, y] = history[i];
      alpha[i] = s.cwiseProduct(free).dot(q) / s.cwiseProduct(free).dot(y.cwiseProduct(free));
      if (!std::isfinite(alpha[i])) alpha[i] = 0.0;
      q -= alpha[i] * y.cwiseProduct(free);
    }
    if (!history.empty()) {
      const auto& [s, y] = history.back();
      const double gamma = s.dot(y) / y.squaredNorm();
      if (std::isfinite(gamma) && gamma > 0.0) q *= gamma;
    }
    for (size_t i = 0; i < history.size(); ++i) {
      const auto& [s, y] = history[i];
      double beta = y.cwiseProduct(free).dot(q) / s.cwiseProduct(free).dot(y.cwiseProduct(free));
      if (!std::isfinite(beta)) beta = 0.0;
      q += (alpha[i] - beta) * s.cwiseProduct(free);
    }
    Eigen::VectorXd dir = -q.cwiseProduct(free);
    if (!(g.dot(dir) < 0.0)) {
      history.clear();
      dir = -g;
    }
    double trial = history.empty() ? std::min(1.0, 1.0 / std::max(1e-12, g.lpNorm<Eigen::Infinity>()))
                                   : 1.0;
    bool accepted = false;
    Eigen::VectorXd u_new;
    double f_new = kInf;
    for (int b = 0; b < opts.max_backtracks; ++b) {
      u_new = bounds.Project(u + trial * dir);
      const double decrease = g.dot(u_new - u);
      f_new = obj.Evaluate(u_new, &g_new);
      if (decrease < 0.0 && f_new <= f + opts.armijo_c * decrease) {
        accepted = true;
        break;
      }
      trial *= opts.shrink;
    }
    if (!accepted) {
      if (history.empty()) break;
      history.clear();
      continue;
    }
    Eigen::VectorXd s = u_new - u;
    Eigen::VectorXd y = g_new - g;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      history.emplace_back(std::move(s), std::move(y));
      if (static_cast<int>(history.size()) > opts.lbfgs_memory) history.pop_front();
    }
    u = std::move(u_new);
    f = f_new;
    g = g_new;
  }
  if (!res.converged && ProjectedGradientNorm(bounds, u, g) <= opts.gradient_tolerance) {
    res.converged = true;
  }
  res.u = std::move(u);
  res.value = f;
  res.iterations = it;
  return res;
}

Eigen::VectorXd Flatten(const std::vector<Input>& inputs) {
  Eigen::VectorXd u(2 * inputs.size());
  for (size_t k = 0; k < inputs.size(); ++k) u.segment<2>(2 * k) = inputs[k];
  return u;
}

std::vector<Input> Unflatten(const Eigen::VectorXd& u) {
  std::vector<Input> out(u.size() / 2);
  for (size_t k = 0; k < out.size(); ++k) out[k] = u.segment<2>(2 * k);
  return out;
}

}  // namespace

std::string ToString(PredictionMode mode) {
  switch (mode) {
    case PredictionMode::kSurrogateReprojected:
      return "proj";
    case PredictionMode::kSurrogateLifted:
      return "noproj";
    case PredictionMode::kNominal:
      return "nominal";
  }
  return "?";
}

void OcpSpec::Validate() const {
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (!(dt > 0.0)) throw ConfigError("sampling interval must be positive");
  box.Validate();
  cost.Validate();
  if (model.mode == PredictionMode::kNominal) {
    if (cost.kind == CostKind::kDataScientific && !model.dictionary) {
      throw ConfigError("ds cost with the nominal model needs a dictionary");
    }
    if (cost.model != model.nominal_kind) {
      throw ConfigError("cost and nominal model disagree on the robot kind");
    }
  } else {
    if (!model.surrogate) throw ConfigError("surrogate prediction requires a surrogate");
    if (std::abs(model.surrogate->dt() - dt) > 1e-12 * dt) {
      throw ConfigError("OCP sampling interval does not match the surrogate's");
    }
    if (cost.model != model.surrogate->kind()) {
      throw ConfigError("cost and surrogate disagree on the robot kind");
    }
    if (cost.kind == CostKind::kDataScientific &&
        cost.lifted_goal.size() != model.surrogate->dictionary().size()) {
      throw ConfigError("ds cost goal does not match the surrogate dictionary");
    }
  }
  if (solver.max_iterations < 0 || !(solver.shrink > 0.0 && solver.shrink < 1.0) ||
      !(solver.armijo_c > 0.0 && solver.armijo_c < 1.0)) {
    throw ConfigError("invalid solver options");
  }
}

double EvaluateObjective(const OcpSpec& spec, const StateVector& x_now,
                         const std::vector<Input>& inputs) {
  if (static_cast<int>(inputs.size()) != spec.horizon + 1) {
    throw std::invalid_argument("input sequence must hold H + 1 entries");
  }
  ShootingObjective obj(spec, x_now);
  return obj.Evaluate(Flatten(inputs), nullptr);
}

OcpSolution SolveOcp(const OcpSpec& spec, const StateVector& x_now,
                     const std::optional<std::vector<Input>>& warm_start) {
  if (!x_now.allFinite()) throw std::invalid_argument("current state is not finite");
  if (x_now.size() != StateDim(spec.model.kind())) {
    throw std::invalid_argument("state dimension does not match the prediction model");
  }
  const Bounds bounds = MakeBounds(spec.box, spec.horizon);
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(2 * (spec.horizon + 1));
  if (warm_start) {
    if (static_cast<int>(warm_start->size()) != spec.horizon + 1) {
      throw std::invalid_argument("warm start must hold H + 1 inputs");
    }
    u0 = bounds.Project(Flatten(*warm_start));
  }
  ShootingObjective obj(spec, x_now);
  Eigen::VectorXd g;
  double f = obj.Evaluate(u0, &g);
  if (!std::isfinite(f) && warm_start) {
    u0.setZero();
    f = obj.Evaluate(u0, &g);
  }
  OcpSolution sol;
  if (!std::isfinite(f)) {
    sol.failed = true;
    sol.failure_step = obj.failure_step();
    sol.failure = obj.failure();
    sol.inputs = Unflatten(u0);
    sol.value = kInf;
    return sol;
  }
  const SolverResult res =
      spec.solver.kind == SolverKind::kProjectedLbfgs
          ? SolveProjectedLbfgs(obj, bounds, u0, f, g, spec.solver)
          : SolveProjectedGradient(obj, bounds, u0, f, g, spec.solver);
  // Re-evaluate at the returned iterate so the stored prediction matches it.
  sol.value = obj.Evaluate(res.u, nullptr);
  sol.inputs = Unflatten(res.u);
  sol.states = obj.States();
  sol.iterations = res.iterations;
  sol.converged = res.converged;
  return sol;
}

ClosedLoopResult ClosedLoop(const OcpSpec& spec, ModelKind plant, const StateVector& x0,
                            double duration, const PoseState& goal) {
  spec.Validate();
  if (x0.size() != StateDim(plant)) {
    throw std::invalid_argument("initial state does not match the plant");
  }
  const double ratio = duration / spec.dt;
  const long steps = std::lround(ratio);
  if (steps < 0 || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio)) {
    throw std::invalid_argument("duration must be a nonnegative multiple of dt");
  }
  ClosedLoopResult out;
  StateVector x = x0;
  std::optional<std::vector<Input>> warm;
  for (long k = 0; k <= steps; ++k) {
    const OcpSolution sol = SolveOcp(spec, ToGoalFrame(x, goal), warm);
    out.times.push_back(static_cast<double>(k) * spec.dt);
    out.states.push_back(x);
    if (sol.failed) {
      out.inputs.push_back(Input::Zero());
      out.values.push_back(kInf);
      out.iterations.push_back(sol.iterations);
      out.converged.push_back(false);
      out.failed = true;
      out.failure_step = static_cast<int>(k);
      out.failure = sol.failure;
      break;
    }
    out.values.push_back(sol.value);
    out.iterations.push_back(sol.iterations);
    out.converged.push_back(sol.converged);
    if (k == steps) {
      out.inputs.push_back(Input::Zero());
      break;
    }
    const Input u = sol.inputs.front();
    out.inputs.push_back(u);
    x = ZohStep(plant, x, u, spec.dt);
    std::vector<Input> shifted(sol.inputs.begin() + 1, sol.inputs.end());
    shifted.push_back(Input::Zero());
    warm = std::move(shifted);
  }
  return out;
}

void WriteTrajectoryCsv(std::ostream& out, const ClosedLoopResult& result,
                        const std::vector<std::string>& provenance) {
  for (const auto& line : provenance) out << "# " << line << "\n";
  const bool full = !result.states.empty() && result.states.front().size() == 5;
  out << "t,x1,x2,theta" << (full ? ",v,omega" : "") << ",u1,u2,value,iters,converged\n";
  out << std::setprecision(17);
  for (size_t k = 0; k < result.states.size(); ++k) {
    out << result.times[k];
    for (Eigen::Index i = 0; i < result.states[k].size(); ++i) out << "," << result.states[k](i);
    out << "," << result.inputs[k](0) << "," << result.inputs[k](1) << "," << result.values[k]
        << "," << result.iterations[k] << "," << (result.converged[k] ? 1 : 0) << "\n";
  }
}

}  // namespace kmpc
