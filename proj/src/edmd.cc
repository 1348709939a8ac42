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

#include "kmpc/edmd.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

namespace kmpc {

namespace {

constexpr char kModelMagic[] = "kmpc-model v1";
// Eigenvalues of the Gram matrix below this fraction of the largest count as
// a null space when no regularization is requested.
constexpr double kRankTolerance = 1e-13;

}  // namespace

void LabeledDataset::Validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dataset sampling interval must be positive");
  if (partitions.empty()) throw std::invalid_argument("dataset has no partitions");
  const int n = StateDim(kind);
  for (size_t i = 0; i < partitions.size(); ++i) {
    const auto& p = partitions[i];
    if (p.x.size() != p.y.size()) {
      throw std::invalid_argument("partition " + std::to_string(i) +
                                  ": state and successor counts differ");
    }
    if (p.x.empty()) {
      throw std::invalid_argument("partition " + std::to_string(i) + " is empty");
    }
    for (size_t j = 0; j < p.x.size(); ++j) {
      if (p.x[j].size() != n || p.y[j].size() != n) {
        throw std::invalid_argument("partition " + std::to_string(i) +
                                    ": state dimension mismatch");
      }
    }
  }
}

LabeledDataset LabeledDataset::Truncated(size_t per_basis) const {
  LabeledDataset out = *this;
  for (size_t i = 0; i < out.partitions.size(); ++i) {
    auto& p = out.partitions[i];
    if (p.x.size() < per_basis) {
      throw std::invalid_argument("partition " + std::to_string(i) + " holds " +
                                  std::to_string(p.x.size()) + " pairs, fewer than " +
                                  std::to_string(per_basis));
    }
    p.x.resize(per_basis);
    p.y.resize(per_basis);
  }
  return out;
}

LabeledDataset LabeledDataset::Subsampled(size_t per_basis, uint64_t seed) const {
  LabeledDataset out = Truncated(per_basis);
  std::mt19937_64 rng(seed);
  for (size_t i = 0; i < partitions.size(); ++i) {
    const auto& src = partitions[i];
    std::vector<size_t> idx(src.x.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(per_basis);
    std::sort(idx.begin(), idx.end());
    for (size_t k = 0; k < per_basis; ++k) {
      out.partitions[i].x[k] = src.x[idx[k]];
      out.partitions[i].y[k] = src.y[idx[k]];
    }
  }
  return out;
}

size_t LabeledDataset::TotalPairs() const {
  size_t n = 0;
  for (const auto& p : partitions) n += p.x.size();
  return n;
}

Eigen::MatrixXd FitAutonomous(const Dictionary& dict, std::span<const StateVector> x,
                              std::span<const StateVector> y,
                              const RegressionOptions& opts, FitDiagnostics* diagnostics) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("state and successor lists differ in length");
  }
  if (x.empty()) throw std::invalid_argument("at least one sample pair is required");
  if (opts.ridge < 0.0) throw std::invalid_argument("ridge must be nonnegative");

  const int m = dict.size();
  const auto d = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd psi_x(m, d);
  Eigen::MatrixXd psi_y(m, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    psi_x.col(j) = dict.Lift(x[j]);
    psi_y.col(j) = dict.Lift(y[j]);
  }
  const Eigen::MatrixXd gram = psi_x * psi_x.transpose() / static_cast<double>(d);
  const Eigen::MatrixXd cross = psi_x * psi_y.transpose() / static_cast<double>(d);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double ev_max = ev.maxCoeff();
  const double ev_min = ev.minCoeff();
  const double condition = ev_min > 0.0 ? ev_max / ev_min
                                        : std::numeric_limits<double>::infinity();
  if (diagnostics != nullptr) {
    diagnostics->samples = static_cast<int>(d);
    diagnostics->condition = condition;
    diagnostics->ill_conditioned = !(condition <= opts.condition_warn);
  }

  const double lambda = opts.ridge * gram.trace() / m;
  if (lambda == 0.0) {
    const int deficiency = static_cast<int>((ev.array() <= kRankTolerance * ev_max).count());
    if (deficiency > 0) {
      throw RegressionError("Gram matrix of dictionary " + dict.name() +
                            " is rank deficient: " + std::to_string(deficiency) +
                            "-dimensional null space in the lifted data (" +
                            std::to_string(d) + " samples, " + std::to_string(m) +
                            " observables)");
    }
  }
  const Eigen::MatrixXd regularized =
      gram + lambda * Eigen::MatrixXd::Identity(m, m);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(regularized);
  if (ldlt.info() != Eigen::Success) {
    throw RegressionError("failed to factor the Gram matrix of dictionary " + dict.name());
  }
  // Solves C K = A; the propagation matrix is K^T.
  const Eigen::MatrixXd k = ldlt.solve(cross);
  if (!k.allFinite()) {
    throw RegressionError("non-finite Koopman matrix for dictionary " + dict.name());
  }
  return k.transpose();
}

KoopmanSurrogate::KoopmanSurrogate(Dictionary dict, std::vector<Eigen::MatrixXd> matrices,
                                   std::vector<Input> bases, double dt, bool drift)
    : dict_(std::move(dict)),
      matrices_(std::move(matrices)),
      bases_(std::move(bases)),
      dt_(dt),
      drift_(drift) {
  if (matrices_.size() != kInputDim + 1 || bases_.size() != kInputDim + 1) {
    throw std::invalid_argument("surrogate needs m + 1 = 3 matrices and bases");
  }
  const int m = dict_.size();
  for (const auto& k : matrices_) {
    if (k.rows() != m || k.cols() != m) {
      throw std::invalid_argument("Koopman matrix dimension does not match dictionary");
    }
    if (!k.allFinite()) throw std::invalid_argument("Koopman matrix has non-finite entries");
  }
  if (!(dt_ > 0.0)) throw std::invalid_argument("surrogate sampling interval must be positive");
  for (int i = 0; i < kInputDim; ++i) basis_.col(i) = bases_[i + 1] - bases_[0];
  basis_det_ = basis_(0, 0) * basis_(1, 1) - basis_(0, 1) * basis_(1, 0);
  const double scale = basis_.cwiseAbs().maxCoeff();
  if (!(std::abs(basis_det_) > 1e-12 * scale * scale)) {
    throw std::invalid_argument("input bases do not span the input space");
  }
  const Eigen::Matrix2d inv = basis_.inverse();
  gains_.assign(kInputDim, Eigen::MatrixXd::Zero(m, m));
  for (int j = 0; j < kInputDim; ++j) {
    for (int i = 0; i < kInputDim; ++i) {
      gains_[j] += inv(i, j) * (matrices_[i + 1] - matrices_[0]);
    }
  }
  offset_ = matrices_[0];
  for (int j = 0; j < kInputDim; ++j) offset_ -= bases_[0](j) * gains_[j];
}

Eigen::Vector2d KoopmanSurrogate::Coefficients(const Input& u) const {
  // Cramer's rule reproduces the basis inputs exactly.
  const Input r = u - bases_[0];
  const double l1 = (r(0) * basis_(1, 1) - basis_(0, 1) * r(1)) / basis_det_;
  const double l2 = (basis_(0, 0) * r(1) - r(0) * basis_(1, 0)) / basis_det_;
  return {l1, l2};
}

Eigen::MatrixXd KoopmanSurrogate::Combine(const Input& u) const {
  const Eigen::Vector2d lambda = Coefficients(u);
  Eigen::MatrixXd k = matrices_[0];
  for (int i = 0; i < kInputDim; ++i) {
    if (lambda(i) != 0.0) k += lambda(i) * (matrices_[i + 1] - matrices_[0]);
  }
  return k;
}

LiftVector KoopmanSurrogate::Apply(const Input& u, const LiftVector& psi) const {
  LiftVector out = offset_ * psi;
  for (int j = 0; j < kInputDim; ++j) out.noalias() += u(j) * (gains_[j] * psi);
  return out;
}

LiftVector KoopmanSurrogate::ApplyTransposed(const Input& u, const LiftVector& w) const {
  LiftVector out = offset_.transpose() * w;
  for (int j = 0; j < kInputDim; ++j) out.noalias() += u(j) * (gains_[j].transpose() * w);
  return out;
}

void KoopmanSurrogate::Save(std::ostream& out,
                            const std::vector<std::string>& provenance) const {
  out << "# " << kModelMagic << "\n";
  for (const auto& line : provenance) out << "# " << line << "\n";
  out << std::setprecision(17);
  out << "dictionary " << dict_.name() << "\n";
  out << "size " << dict_.size() << "\n";
  out << "dt " << dt_ << "\n";
  out << "inputs " << kInputDim << "\n";
  out << "drift " << (drift_ ? 1 : 0) << "\n";
  out << "convention lifted-column left-multiply row-major\n";
  for (size_t i = 0; i < bases_.size(); ++i) {
    out << "basis " << i << " " << bases_[i](0) << " " << bases_[i](1) << "\n";
  }
  for (size_t i = 0; i < matrices_.size(); ++i) {
    out << "matrix " << i << "\n";
    const auto& k = matrices_[i];
    for (Eigen::Index r = 0; r < k.rows(); ++r) {
      for (Eigen::Index c = 0; c < k.cols(); ++c) {
        out << (c == 0 ? "" : " ") << k(r, c);
      }
      out << "\n";
    }
  }
}

KoopmanSurrogate KoopmanSurrogate::Load(std::istream& in) {
  std::string line;
  std::string dict_name;
  int size = -1;
  int inputs = -1;
  double dt = 0.0;
  int drift = -1;
  std::vector<Input> bases(kInputDim + 1, Input::Zero());
  std::vector<bool> have_basis(kInputDim + 1, false);
  std::vector<Eigen::MatrixXd> matrices(kInputDim + 1);
  std::vector<bool> have_matrix(kInputDim + 1, false);
  bool magic = false;
  auto fail = [](const std::string& what) -> void {
    throw IoError("malformed model file: " + what);
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find(kModelMagic) != std::string::npos) magic = true;
      continue;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "dictionary") {
      ls >> dict_name;
    } else if (key == "size") {
      ls >> size;
    } else if (key == "dt") {
      ls >> dt;
    } else if (key == "inputs") {
      ls >> inputs;
    } else if (key == "drift") {
      ls >> drift;
    } else if (key == "convention") {
      continue;
    } else if (key == "basis") {
      int i = -1;
      double a = 0.0, b = 0.0;
      ls >> i >> a >> b;
      if (!ls || i < 0 || i > kInputDim) fail("bad basis line '" + line + "'");
      bases[i] = Input(a, b);
      have_basis[i] = true;
    } else if (key == "matrix") {
      int i = -1;
      ls >> i;
      if (!ls || i < 0 || i > kInputDim || size <= 0) fail("bad matrix header '" + line + "'");
      Eigen::MatrixXd k(size, size);
      for (int r = 0; r < size; ++r) {
        if (!std::getline(in, line)) fail("truncated matrix " + std::to_string(i));
        std::istringstream rs(line);
        for (int c = 0; c < size; ++c) {
          if (!(rs >> k(r, c))) fail("short row in matrix " + std::to_string(i));
        }
      }
      matrices[i] = std::move(k);
      have_matrix[i] = true;
    } else {
      fail("unknown key '" + key + "'");
    }
    if (!ls && key != "matrix") fail("unreadable value for '" + key + "'");
  }
  if (!magic) fail("missing header");
  if (inputs != kInputDim) fail("unsupported input dimension");
  if (drift != 0 && drift != 1) fail("missing drift flag");
  for (int i = 0; i <= kInputDim; ++i) {
    if (!have_basis[i] || !have_matrix[i]) fail("missing basis or matrix " + std::to_string(i));
  }
  const Dictionary& dict = FindDictionary(dict_name);
  if (dict.size() != size) fail("size does not match dictionary " + dict_name);
  return KoopmanSurrogate(dict, std::move(matrices), std::move(bases), dt, drift == 1);
}

KoopmanSurrogate FitSurrogate(const Dictionary& dict, const LabeledDataset& data,
                              const RegressionOptions& opts, bool drift) {
  data.Validate();
  if (StateDim(data.kind) != dict.arity()) {
    throw std::invalid_argument("dictionary " + dict.name() + " does not match " +
                                ToString(data.kind) + " data");
  }
  const size_t expected = drift ? kInputDim + 1 : kInputDim;
  if (data.partitions.size() != expected) {
    throw std::invalid_argument("expected " + std::to_string(expected) +
                                " basis partitions, got " +
                                std::to_string(data.partitions.size()));
  }
  std::vector<Eigen::MatrixXd> matrices;
  std::vector<Input> bases;
  std::vector<FitDiagnostics> diagnostics;
  if (!drift) {
    matrices.push_back(Eigen::MatrixXd::Identity(dict.size(), dict.size()));
    bases.push_back(Input::Zero());
    diagnostics.push_back({});
  }
  for (const auto& p : data.partitions) {
    FitDiagnostics diag;
    matrices.push_back(FitAutonomous(dict, p.x, p.y, opts, &diag));
    bases.push_back(p.input);
    diagnostics.push_back(diag);
  }
  KoopmanSurrogate surrogate(dict, std::move(matrices), std::move(bases), data.dt, drift);
  surrogate.set_diagnostics(std::move(diagnostics));
  return surrogate;
}

std::vector<StateVector> Predict(const KoopmanSurrogate& surrogate, const StateVector& x0,
                                 std::span<const Input> inputs, bool reproject_each_step) {
  const Dictionary& dict = surrogate.dictionary();
  std::vector<StateVector> states;
  states.reserve(inputs.size() + 1);
  states.push_back(x0);
  LiftVector lifted = dict.Lift(x0);
  for (const Input& u : inputs) {
    lifted = surrogate.Apply(u, lifted);
    StateVector next = dict.Reproject(lifted);
    if (reproject_each_step) lifted = dict.Lift(next);
    states.push_back(std::move(next));
  }
  return states;
}

}  // namespace kmpc
