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

// Extended dynamic mode decomposition (EDMD) of per-input-basis Koopman
// matrices and the bilinear surrogate assembled from them.
//
// Storage convention: lifted coordinates are column vectors and every stored
// matrix K propagates them by left multiplication, psi(x+) ~= K psi(x).

#ifndef KMPC_EDMD_H_
#define KMPC_EDMD_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kmpc/dictionary.h"
#include "kmpc/types.h"

namespace kmpc {

// State / successor pairs recorded under one constant input.
struct BasisPartition {
  Input input = Input::Zero();
  std::vector<StateVector> x;
  std::vector<StateVector> y;
};

struct LabeledDataset {
  ModelKind kind = ModelKind::kKinematic;
  double dt = 0.0;
  // For drift systems: u_0, u_1, ..., u_m. For driftless systems: u_1 ... u_m.
  std::vector<BasisPartition> partitions;

  // Throws std::invalid_argument on violated invariants.
  void Validate() const;
  // First `per_basis` pairs of every partition. Throws std::invalid_argument
  // if any partition holds fewer.
  LabeledDataset Truncated(size_t per_basis) const;
  // A seeded uniform subset of `per_basis` pairs of every partition, kept in
  // recording order; the identity when a partition holds exactly that many.
  LabeledDataset Subsampled(size_t per_basis, uint64_t seed) const;
  size_t TotalPairs() const;
};

struct RegressionOptions {
  // Tikhonov parameter relative to trace(C)/M; zero selects plain EDMD.
  double ridge = 1e-10;
  // A warning is recorded when cond(C) exceeds this.
  double condition_warn = 1e12;
};

struct FitDiagnostics {
  int samples = 0;
  double condition = 0.0;
  bool ill_conditioned = false;
};

// Least-squares Koopman matrix for one autonomous system. Throws
// RegressionError when the Gram matrix is singular and ridge == 0, and
// std::invalid_argument on malformed input.
Eigen::MatrixXd FitAutonomous(const Dictionary& dict, std::span<const StateVector> x,
                              std::span<const StateVector> y,
                              const RegressionOptions& opts,
                              FitDiagnostics* diagnostics = nullptr);

class KoopmanSurrogate {
 public:
  // matrices[i] and bases[i] for i = 0..m; bases[1..m] - bases[0] must be
  // linearly independent.
  KoopmanSurrogate(Dictionary dict, std::vector<Eigen::MatrixXd> matrices,
                   std::vector<Input> bases, double dt, bool drift);

  const Dictionary& dictionary() const { return dict_; }
  const std::vector<Eigen::MatrixXd>& matrices() const { return matrices_; }
  const std::vector<Input>& bases() const { return bases_; }
  double dt() const { return dt_; }
  bool drift() const { return drift_; }
  ModelKind kind() const {
    return dict_.arity() == 3 ? ModelKind::kKinematic : ModelKind::kDynamic;
  }
  const std::vector<FitDiagnostics>& diagnostics() const { return diagnostics_; }
  void set_diagnostics(std::vector<FitDiagnostics> d) { diagnostics_ = std::move(d); }

  // Interpolation weights: solves sum_i lambda_i (u_i - u_0) = u - u_0.
  Eigen::Vector2d Coefficients(const Input& u) const;
  // K_0 + sum_i lambda_i (K_i - K_0).
  Eigen::MatrixXd Combine(const Input& u) const;

  // K(u) * psi without forming K(u).
  LiftVector Apply(const Input& u, const LiftVector& psi) const;
  // K(u)^T * w.
  LiftVector ApplyTransposed(const Input& u, const LiftVector& w) const;
  // dK/du_j, constant because K(u) is affine in u.
  const Eigen::MatrixXd& InputGain(int j) const { return gains_[j]; }

  void Save(std::ostream& out, const std::vector<std::string>& provenance = {}) const;
  // Throws IoError on malformed files, ConfigError on unknown dictionaries.
  static KoopmanSurrogate Load(std::istream& in);

 private:
  Dictionary dict_;
  std::vector<Eigen::MatrixXd> matrices_;
  std::vector<Input> bases_;
  double dt_;
  bool drift_;
  Eigen::Matrix2d basis_;  // columns u_i - u_0
  double basis_det_ = 0.0;
  Eigen::MatrixXd offset_;                // K(0)
  std::vector<Eigen::MatrixXd> gains_;    // dK/du_j
  std::vector<FitDiagnostics> diagnostics_;
};

// Regresses K_i on every partition. Without drift, K_0 is the identity and
// u_0 is the zero input.
KoopmanSurrogate FitSurrogate(const Dictionary& dict, const LabeledDataset& data,
                              const RegressionOptions& opts, bool drift);

// Propagates x0 through the inputs. Returns inputs.size() + 1 states,
// starting with x0. With reproject_each_step the lifted iterate is
// reprojected and lifted again at every step; otherwise the lifted state
// evolves linearly and states are reprojected for output only.
std::vector<StateVector> Predict(const KoopmanSurrogate& surrogate, const StateVector& x0,
                                 std::span<const Input> inputs, bool reproject_each_step);

}  // namespace kmpc

#endif  // KMPC_EDMD_H_
