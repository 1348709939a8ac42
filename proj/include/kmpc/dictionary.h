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

// Observable dictionaries for lifting robot states, with the reprojection
// rules that map lifted coordinates back to states.

#ifndef KMPC_DICTIONARY_H_
#define KMPC_DICTIONARY_H_

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmpc/types.h"

namespace kmpc {

// Raised when an atan2 reprojection meets a (cos, sin) pair that is
// numerically zero.
class DegenerateLiftError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Reprojection {
  enum class Kind { kCoordinate, kAtan2 };
  Kind kind = Kind::kCoordinate;
  // Lifted index holding each state component. For kAtan2 the heading entry
  // (component 2) is ignored and recovered from cos_index / sin_index.
  std::vector<int> state_index;
  int cos_index = -1;
  int sin_index = -1;
};

// A single observable with its gradient with respect to the state.
struct Observable {
  std::string name;
  std::function<double(const StateVector&)> value;
  std::function<StateVector(const StateVector&)> gradient;
};

class Dictionary {
 public:
  using EvalFn = std::function<void(const StateVector&, LiftVector&)>;
  using JacobianFn = std::function<void(const StateVector&, LiftJacobian&)>;

  Dictionary(std::string name, int arity, std::vector<std::string> observable_names,
             EvalFn eval, JacobianFn jacobian, Reprojection reprojection);

  // Builds a dictionary from individual observables (custom dictionaries).
  static Dictionary FromObservables(std::string name, int arity,
                                    std::vector<Observable> observables,
                                    Reprojection reprojection);

  const std::string& name() const { return name_; }
  int arity() const { return arity_; }
  int size() const { return static_cast<int>(observable_names_.size()); }
  const std::vector<std::string>& observable_names() const { return observable_names_; }
  const Reprojection& reprojection() const { return reprojection_; }

  // Throws std::invalid_argument on arity mismatch.
  LiftVector Lift(const StateVector& x) const;
  LiftJacobian Jacobian(const StateVector& x) const;

  // Heading is returned normalized to (-pi, pi]. Throws DegenerateLiftError.
  StateVector Reproject(const LiftVector& lifted) const;
  // Derivative of Reproject (ignoring the normalization jump).
  ReprojectionJacobian ReprojectJacobian(const LiftVector& lifted) const;

 private:
  std::string name_;
  int arity_;
  std::vector<std::string> observable_names_;
  EvalFn eval_;
  JacobianFn jacobian_;
  Reprojection reprojection_;
};

// The five shipped dictionaries: D5t (pose), D8Eul, D10m, D13t, D12f (full
// state), with observables in their published order.
const std::vector<Dictionary>& Registry();

// Throws ConfigError for unknown names.
const Dictionary& FindDictionary(const std::string& name);

struct RoundTripReport {
  bool ok = true;
  double max_error = 0.0;
  int failures = 0;
};

// Checks reproject(lift(x)) == x (heading modulo 2 pi) on the given states.
RoundTripReport ValidateRoundTrip(const Dictionary& dict,
                                  std::span<const StateVector> states, double tol);

}  // namespace kmpc

#endif  // KMPC_DICTIONARY_H_
