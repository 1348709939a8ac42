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

// Study harnesses: open-loop prediction errors along reference runs,
// Monte-Carlo closed-loop ECDFs of the x2 deviation, data-efficiency sweeps.

#ifndef KMPC_EXPERIMENTS_H_
#define KMPC_EXPERIMENTS_H_

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kmpc/costs.h"
#include "kmpc/edmd.h"
#include "kmpc/mpc.h"
#include "kmpc/postprocess.h"
#include "kmpc/sampler.h"

namespace kmpc {

// ---------------------------------------------------------------------------
// Reference runs

enum class ReferenceShape { kInfinity, kSquare };

std::string ToString(ReferenceShape shape);
ReferenceShape ParseReferenceShape(const std::string& name);  // throws ConfigError

struct ReferenceOptions {
  double dt = 0.05;
  double sensor_rate = 240.0;
  double position_noise = 5e-4;
  double heading_noise = 0.1 * kPi / 180.0;
  uint64_t seed = 1;
};

// Acceleration script of the shape, one entry per control step.
std::vector<Input> ReferenceScript(ReferenceShape shape, double dt);

// n recordings of the second-order robot driving the script from the
// origin; runs share the nominal trajectory and differ only in sensor noise.
// Every run of constant input is annotated as one segment (basis -1).
std::vector<RawRecording> ReferenceRuns(ReferenceShape shape, int n,
                                        const ReferenceOptions& opts);

// ---------------------------------------------------------------------------
// Open-loop study

enum class OpenLoopVariant { kReprojected, kLifted, kNominal };
std::string ToString(OpenLoopVariant variant);

struct SurrogateCandidate {
  std::string dictionary;
  int window = 40;
  std::shared_ptr<const KoopmanSurrogate> surrogate;
};

// Fits one surrogate per (dictionary, window) from the training recording.
std::vector<SurrogateCandidate> FitCandidates(const RawRecording& training,
                                              const std::vector<std::string>& dictionaries,
                                              const std::vector<int>& windows,
                                              const RegressionOptions& regression);

// Errors indexed by (start, lookahead); flat storage, start-major. Row s
// belongs to control step first_start + s.
struct ErrorTable {
  int first_start = 0;
  int starts = 0;
  int horizon = 0;
  std::vector<double> mean_position;
  std::vector<double> max_position;
  std::vector<double> mean_rotation;
  std::vector<double> max_rotation;

  size_t Index(int start, int lookahead) const {
    return static_cast<size_t>(start) * horizon + (lookahead - 1);
  }
  // Largest max-aggregated error over all starts at one lookahead.
  double WorstPosition(int lookahead) const;
  double WorstRotation(int lookahead) const;
};

struct OpenLoopEntry {
  std::string dictionary;  // empty for the nominal model
  int window = 0;
  OpenLoopVariant variant = OpenLoopVariant::kReprojected;
  ErrorTable table;
  // One-step errors per start, averaged over runs.
  std::vector<double> one_step_position;
  std::vector<double> one_step_rotation;
  std::vector<double> one_step_velocity;
  std::vector<double> one_step_angular_velocity;
};

struct OpenLoopReport {
  int horizon = 0;
  std::vector<OpenLoopEntry> entries;

  // Throws std::out_of_range.
  const OpenLoopEntry& Find(const std::string& dictionary, int window,
                            OpenLoopVariant variant) const;
};

// Compares predictions from the estimated state at every start index with
// the recorded poses `lookahead` steps later. Velocities of the reference
// runs are estimated with each candidate's window. Throws
// std::invalid_argument on a dictionary/model arity mismatch.
OpenLoopReport OpenLoopStudy(const std::vector<RawRecording>& runs,
                             const std::vector<SurrogateCandidate>& candidates, int horizon,
                             bool include_nominal = true);

// ---------------------------------------------------------------------------
// Closed-loop Monte Carlo

struct McConfig {
  CostKind cost = CostKind::kMixedExponents;
  PredictionMode mode = PredictionMode::kSurrogateReprojected;

  std::string Label() const;  // e.g. "me-proj"
};

// Accepts "<me|ce|ds>-<proj|noproj|nominal>". Throws ConfigError.
McConfig ParseMcConfig(const std::string& label);
std::vector<McConfig> ParseMcConfigs(const std::string& comma_separated);

class Ecdf {
 public:
  Ecdf() = default;
  // +inf entries are censored failures.
  explicit Ecdf(std::vector<double> samples);

  const std::vector<double>& sorted() const { return sorted_; }
  size_t size() const { return sorted_.size(); }
  // Fraction of samples <= x; right-continuous.
  double operator()(double x) const;
  // Smallest sample s with F(s) >= p, p in (0, 1].
  double Quantile(double p) const;
  size_t failures() const;

 private:
  std::vector<double> sorted_;
};

// sup_x |F(x) - G(x)|.
double KsDistance(const Ecdf& a, const Ecdf& b);

struct EcdfReport {
  std::string label;
  std::vector<double> deviations;  // |x2(eval_time)| per draw, draw order
  std::vector<std::string> failures;  // per draw, empty if the run succeeded
  Ecdf ecdf;
};

struct MonteCarloOptions {
  ModelKind kind = ModelKind::kDynamic;
  int draws = 100;
  double eval_time = 20.0;
  uint64_t seed = 1;
  int jobs = 1;
  int horizon = 50;
  double dt = 0.05;
  InputBox box = DefaultAccelerationBox();
  SolverOptions solver;
  // Initial poses are drawn from this box (velocities start at zero).
  Eigen::Vector3d pose_lower{0.0, -0.75, -kPi};
  Eigen::Vector3d pose_upper{1.5, 0.75, kPi};
  // Cost weights; unset fields take DefaultCost values.
  std::optional<Eigen::VectorXd> me_q;
  std::optional<Eigen::Vector2d> me_r;

  void Validate() const;  // throws ConfigError
};

MonteCarloOptions DefaultMonteCarlo(ModelKind kind);

// Initial states used by the study, in draw order.
std::vector<StateVector> DrawInitialStates(const MonteCarloOptions& opts);

// One report per configuration, all from the same draws. Runs in parallel
// on opts.jobs threads; results do not depend on the thread count.
std::vector<EcdfReport> MonteCarloClosedLoop(
    const MonteCarloOptions& opts, std::shared_ptr<const KoopmanSurrogate> surrogate,
    const std::vector<McConfig>& configs);

// Same as above from explicit initial states.
std::vector<EcdfReport> MonteCarloClosedLoop(
    const MonteCarloOptions& opts, std::shared_ptr<const KoopmanSurrogate> surrogate,
    const std::vector<McConfig>& configs, const std::vector<StateVector>& initial_states);

OcpSpec MakeOcp(const MonteCarloOptions& opts, std::shared_ptr<const KoopmanSurrogate> surrogate,
                const McConfig& config);

// ---------------------------------------------------------------------------
// Data efficiency

struct SweepPoint {
  size_t per_basis = 0;
  EcdfReport report;
};

// For every size d: a seeded subset of d pairs per basis, refit, Monte
// Carlo with the given configuration. Sizes equal to a partition's full
// length use that partition unchanged. Throws ConfigError when d exceeds the
// available pairs.
std::vector<SweepPoint> DataEfficiencySweep(const LabeledDataset& training,
                                            const std::string& dictionary,
                                            const RegressionOptions& regression, bool drift,
                                            const std::vector<size_t>& sizes,
                                            const MonteCarloOptions& opts,
                                            const McConfig& config = {});

// ---------------------------------------------------------------------------
// Reports

void WriteOpenLoopCsv(std::ostream& out, const OpenLoopReport& report,
                      const std::vector<std::string>& provenance = {});
// `label,draw,deviation,failure` rows.
void WriteEcdfCsv(std::ostream& out, const EcdfReport& report,
                  const std::vector<std::string>& provenance = {});
// Quantiles 0.1, 0.25, 0.5, 0.75, 0.9 and the fractions below 1 mm / 2 mm.
void WriteEcdfSummary(std::ostream& out, const std::vector<EcdfReport>& reports);

}  // namespace kmpc

#endif  // KMPC_EXPERIMENTS_H_
