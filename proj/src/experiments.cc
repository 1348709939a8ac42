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

#include "kmpc/experiments.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "kmpc/dictionary.h"
#include "kmpc/vehicle.h"

namespace kmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void Append(std::vector<Input>& script, const Input& u, long steps) {
  script.insert(script.end(), static_cast<size_t>(steps), u);
}

long Steps(double seconds, double dt) { return std::lround(seconds / dt); }

// Control-instant states of a recording: raw poses with continued headings
// and, for the second-order robot, velocities estimated with `window`.
struct StateTrack {
  std::vector<StateVector> states;
  std::vector<Input> inputs;
};

StateTrack EstimateTrack(const RawRecording& rec, int window) {
  const size_t n = rec.poses.size();
  const int r = rec.SamplesPerStep();
  std::vector<double> t(n), x1(n), x2(n), th(n);
  for (size_t i = 0; i < n; ++i) {
    t[i] = rec.poses[i].t;
    x1[i] = rec.poses[i].value(0);
    x2[i] = rec.poses[i].value(1);
    th[i] = rec.poses[i].value(2);
  }
  const std::vector<double> theta = ContinueAngles(th);
  std::vector<double> v, omega;
  if (rec.kind == ModelKind::kDynamic) {
    const auto d1 = CentralDiff(t, x1);
    const auto d2 = CentralDiff(t, x2);
    omega = CentralDiff(t, theta);
    v.resize(n);
    for (size_t i = 0; i < n; ++i) v[i] = ToBodyFrame({d1[i], d2[i]}, theta[i])(0);
    // Velocities are continuous along a reference run, so the whole run is
    // smoothed at once.
    const std::vector<std::pair<size_t, size_t>> whole{{0, n - 1}};
    v = SmoothSegments(v, whole, window);
    omega = SmoothSegments(omega, whole, window);
  }
  StateTrack track;
  const int dim = StateDim(rec.kind);
  for (size_t i = 0; i < n; i += static_cast<size_t>(r)) {
    StateVector x(dim);
    x(0) = x1[i];
    x(1) = x2[i];
    x(2) = theta[i];
    if (dim == 5) {
      x(3) = v[i];
      x(4) = omega[i];
    }
    track.states.push_back(x);
  }
  for (const auto& in : rec.inputs) track.inputs.push_back(in.value.head<2>());
  track.states.resize(std::min(track.states.size(), track.inputs.size() + 1));
  return track;
}

struct Accumulator {
  std::vector<double> sum;
  std::vector<double> max;
  explicit Accumulator(size_t n = 0) : sum(n, 0.0), max(n, 0.0) {}
  void Add(size_t i, double e) {
    sum[i] += e;
    max[i] = std::max(max[i], e);
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Reference runs

std::string ToString(ReferenceShape shape) {
  return shape == ReferenceShape::kInfinity ? "infinity" : "square";
}

ReferenceShape ParseReferenceShape(const std::string& name) {
  if (name == "infinity") return ReferenceShape::kInfinity;
  if (name == "square") return ReferenceShape::kSquare;
  throw ConfigError("unknown reference shape '" + name + "' (infinity|square)");
}

std::vector<Input> ReferenceScript(ReferenceShape shape, double dt) {
  std::vector<Input> s;
  const long rest = Steps(0.5, dt);
  Append(s, {0.0, 0.0}, rest);
  if (shape == ReferenceShape::kInfinity) {
    // Speed up to 0.2 m/s, circle left, swing over, circle right, stop.
    Append(s, {0.2, 0.0}, Steps(1.0, dt));
    Append(s, {0.0, 0.5}, Steps(1.2, dt));
    Append(s, {0.0, 0.0}, Steps(9.25, dt));
    Append(s, {0.0, -0.5}, Steps(2.4, dt));
    Append(s, {0.0, 0.0}, Steps(9.25, dt));
    Append(s, {0.0, 0.5}, Steps(1.2, dt));
    Append(s, {-0.2, 0.0}, Steps(1.0, dt));
  } else {
    // 0.8 m sides, quarter turns in place, counter-clockwise only.
    const double turn_time = 1.8;
    const double alpha = 0.5 * kPi / (turn_time * turn_time);
    for (int side = 0; side < 4; ++side) {
      Append(s, {0.2, 0.0}, Steps(1.0, dt));
      Append(s, {0.0, 0.0}, Steps(3.0, dt));
      Append(s, {-0.2, 0.0}, Steps(1.0, dt));
      Append(s, {0.0, alpha}, Steps(turn_time, dt));
      Append(s, {0.0, -alpha}, Steps(turn_time, dt));
    }
  }
  Append(s, {0.0, 0.0}, rest);
  return s;
}

std::vector<RawRecording> ReferenceRuns(ReferenceShape shape, int n,
                                        const ReferenceOptions& opts) {
  if (n < 1) throw ConfigError("reference run count must be positive");
  SamplingSpec spec;
  spec.kind = ModelKind::kDynamic;
  spec.dt = opts.dt;
  spec.sensor_rate = opts.sensor_rate;
  spec.position_noise = opts.position_noise;
  spec.heading_noise = opts.heading_noise;
  const std::vector<Input> script = ReferenceScript(shape, opts.dt);
  std::vector<RawRecording> runs;
  runs.reserve(n);
  for (int i = 0; i < n; ++i) {
    spec.seed = opts.seed + static_cast<uint64_t>(i);
    runs.push_back(RecordScript(spec, StateVector::Zero(5), script));
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Open-loop study

std::string ToString(OpenLoopVariant variant) {
  switch (variant) {
    case OpenLoopVariant::kReprojected:
      return "proj";
    case OpenLoopVariant::kLifted:
      return "noproj";
    case OpenLoopVariant::kNominal:
      return "nominal";
  }
  return "?";
}

std::vector<SurrogateCandidate> FitCandidates(const RawRecording& training,
                                              const std::vector<std::string>& dictionaries,
                                              const std::vector<int>& windows,
                                              const RegressionOptions& regression) {
  std::vector<SurrogateCandidate> out;
  const bool drift = training.kind == ModelKind::kDynamic;
  for (int w : windows) {
    PostprocessSpec pp;
    pp.window = w;
    pp.dt = training.dt;
    pp.sensor_rate = training.sensor_rate;
    const LabeledDataset data = BuildDataset(training, pp, training.kind);
    for (const auto& name : dictionaries) {
      SurrogateCandidate c;
      c.dictionary = name;
      c.window = w;
      c.surrogate = std::make_shared<const KoopmanSurrogate>(
          FitSurrogate(FindDictionary(name), data, regression, drift));
      out.push_back(std::move(c));
    }
  }
  return out;
}

double ErrorTable::WorstPosition(int lookahead) const {
  double w = 0.0;
  for (int s = 0; s < starts; ++s) w = std::max(w, max_position[Index(s, lookahead)]);
  return w;
}

double ErrorTable::WorstRotation(int lookahead) const {
  double w = 0.0;
  for (int s = 0; s < starts; ++s) w = std::max(w, max_rotation[Index(s, lookahead)]);
  return w;
}

const OpenLoopEntry& OpenLoopReport::Find(const std::string& dictionary, int window,
                                          OpenLoopVariant variant) const {
  for (const auto& e : entries) {
    if (e.variant != variant || e.window != window) continue;
    if (variant == OpenLoopVariant::kNominal || e.dictionary == dictionary) return e;
  }
  throw std::out_of_range("no open-loop entry for " + dictionary + "/" + std::to_string(window) +
                          "/" + ToString(variant));
}

OpenLoopReport OpenLoopStudy(const std::vector<RawRecording>& runs,
                             const std::vector<SurrogateCandidate>& candidates, int horizon,
                             bool include_nominal) {
  if (runs.empty()) throw std::invalid_argument("open-loop study needs at least one run");
  if (horizon < 1) throw std::invalid_argument("horizon must be positive");
  const ModelKind kind = runs.front().kind;
  for (const auto& c : candidates) {
    if (!c.surrogate || c.surrogate->dictionary().arity() != StateDim(kind)) {
      throw std::invalid_argument("dictionary " + c.dictionary + " does not match the " +
                                  ToString(kind) + " runs");
    }
  }
  struct Job {
    const SurrogateCandidate* candidate;
    OpenLoopVariant variant;
    int window;
  };
  std::vector<Job> jobs;
  std::vector<int> windows;
  for (const auto& c : candidates) {
    jobs.push_back({&c, OpenLoopVariant::kReprojected, c.window});
    jobs.push_back({&c, OpenLoopVariant::kLifted, c.window});
    if (std::find(windows.begin(), windows.end(), c.window) == windows.end()) {
      windows.push_back(c.window);
    }
  }
  if (include_nominal) {
    if (windows.empty()) windows.push_back(1);
    for (int w : windows) jobs.push_back({nullptr, OpenLoopVariant::kNominal, w});
  }

  // Tracks per window.
  std::vector<std::vector<StateTrack>> tracks(windows.size());
  for (size_t wi = 0; wi < windows.size(); ++wi) {
    for (const auto& run : runs) tracks[wi].push_back(EstimateTrack(run, windows[wi]));
  }
  const size_t steps = tracks.empty() ? 0 : tracks[0][0].inputs.size();
  for (const auto& per_window : tracks) {
    for (const auto& t : per_window) {
      if (t.inputs.size() != steps || t.states.size() != steps + 1) {
        throw std::invalid_argument("reference runs differ in length");
      }
    }
  }
  if (steps < static_cast<size_t>(horizon)) {
    throw std::invalid_argument("reference runs are shorter than the horizon");
  }
  // Starts whose velocity window is cut by the recording's ends are skipped.
  int first_start = 0;
  if (kind == ModelKind::kDynamic) {
    const int r = runs.front().SamplesPerStep();
    const int reach = *std::max_element(windows.begin(), windows.end()) / 2;
    first_start = (reach + r - 1) / r;
  }
  const int starts = static_cast<int>(steps) - horizon + 1 - first_start;
  if (starts < 1) throw std::invalid_argument("reference runs are too short for the horizon");
  const double nruns = static_cast<double>(runs.size());

  OpenLoopReport report;
  report.horizon = horizon;
  for (const auto& job : jobs) {
    const size_t wi = static_cast<size_t>(
        std::find(windows.begin(), windows.end(), job.window) - windows.begin());
    const size_t cells = static_cast<size_t>(starts) * horizon;
    Accumulator pos(cells), rot(cells);
    std::vector<double> os_pos(starts, 0.0), os_rot(starts, 0.0), os_v(starts, 0.0),
        os_w(starts, 0.0);
    for (const auto& track : tracks[wi]) {
      for (int si = 0; si < starts; ++si) {
        const int s = first_start + si;
        StateVector x0 = track.states[s];
        x0(2) = NormalizeAngle(x0(2));
        const std::span<const Input> inputs(track.inputs.data() + s, horizon);
        std::vector<StateVector> pred;
        if (job.variant == OpenLoopVariant::kNominal) {
          pred.push_back(x0);
          for (const auto& u : inputs) pred.push_back(ZohStep(kind, pred.back(), u, runs[0].dt));
        } else {
          pred = Predict(*job.candidate->surrogate, x0, inputs,
                         job.variant == OpenLoopVariant::kReprojected);
        }
        for (int j = 1; j <= horizon; ++j) {
          const StateVector& truth = track.states[s + j];
          const StateVector& p = pred[j];
          const double ep = std::hypot(p(0) - truth(0), p(1) - truth(1));
          const double er = std::abs(NormalizeAngle(p(2) - truth(2)));
          const size_t idx = static_cast<size_t>(si) * horizon + (j - 1);
          pos.Add(idx, std::isfinite(ep) ? ep : kInf);
          rot.Add(idx, std::isfinite(er) ? er : kInf);
          if (j == 1) {
            os_pos[si] += ep / nruns;
            os_rot[si] += er / nruns;
            if (kind == ModelKind::kDynamic) {
              os_v[si] += std::abs(p(3) - truth(3)) / nruns;
              os_w[si] += std::abs(p(4) - truth(4)) / nruns;
            }
          }
        }
      }
    }
    OpenLoopEntry e;
    e.dictionary = job.candidate ? job.candidate->dictionary : "";
    e.window = job.window;
    e.variant = job.variant;
    e.table.first_start = first_start;
    e.table.starts = starts;
    e.table.horizon = horizon;
    e.table.mean_position = pos.sum;
    e.table.mean_rotation = rot.sum;
    for (auto& v : e.table.mean_position) v /= nruns;
    for (auto& v : e.table.mean_rotation) v /= nruns;
    e.table.max_position = pos.max;
    e.table.max_rotation = rot.max;
    e.one_step_position = std::move(os_pos);
    e.one_step_rotation = std::move(os_rot);
    e.one_step_velocity = std::move(os_v);
    e.one_step_angular_velocity = std::move(os_w);
    report.entries.push_back(std::move(e));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Monte Carlo

std::string McConfig::Label() const { return ToString(cost) + "-" + ToString(mode); }

McConfig ParseMcConfig(const std::string& label) {
  const auto dash = label.find('-');
  if (dash == std::string::npos) {
    throw ConfigError("configuration '" + label + "' is not <cost>-<proj|noproj|nominal>");
  }
  McConfig c;
  c.cost = ParseCostKind(label.substr(0, dash));
  const std::string mode = label.substr(dash + 1);
  if (mode == "proj") {
    c.mode = PredictionMode::kSurrogateReprojected;
  } else if (mode == "noproj") {
    c.mode = PredictionMode::kSurrogateLifted;
  } else if (mode == "nominal") {
    c.mode = PredictionMode::kNominal;
  } else {
    throw ConfigError("unknown prediction mode '" + mode + "' in '" + label + "'");
  }
  return c;
}

std::vector<McConfig> ParseMcConfigs(const std::string& comma_separated) {
  std::vector<McConfig> out;
  std::istringstream ss(comma_separated);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(ParseMcConfig(item));
  }
  if (out.empty()) throw ConfigError("no Monte-Carlo configurations given");
  return out;
}

Ecdf::Ecdf(std::vector<double> samples) : sorted_(std::move(samples)) {
  for (double& s : sorted_) {
    if (std::isnan(s)) s = kInf;
  }
  std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const {
  if (sorted_.empty()) return 0.0;
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double Ecdf::Quantile(double p) const {
  if (sorted_.empty()) throw std::logic_error("quantile of an empty ECDF");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level must be in (0, 1]");
  const auto n = static_cast<double>(sorted_.size());
  auto k = static_cast<size_t>(std::ceil(p * n - 1e-12));
  k = std::clamp<size_t>(k, 1, sorted_.size());
  return sorted_[k - 1];
}

size_t Ecdf::failures() const {
  return static_cast<size_t>(std::count(sorted_.begin(), sorted_.end(), kInf));
}

double KsDistance(const Ecdf& a, const Ecdf& b) {
  double d = 0.0;
  for (const auto* e : {&a, &b}) {
    for (double x : e->sorted()) {
      if (std::isfinite(x)) d = std::max(d, std::abs(a(x) - b(x)));
    }
  }
  // Censored mass: both curves end at their finite fractions.
  const double fa = 1.0 - static_cast<double>(a.failures()) / std::max<size_t>(1, a.size());
  const double fb = 1.0 - static_cast<double>(b.failures()) / std::max<size_t>(1, b.size());
  return std::max(d, std::abs(fa - fb));
}

void MonteCarloOptions::Validate() const {
  if (draws < 1) throw ConfigError("draw count must be positive");
  if (horizon < 1) throw ConfigError("horizon must be positive");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  const double ratio = eval_time / dt;
  if (!(eval_time >= 0.0) || std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("evaluation time must be a nonnegative multiple of dt");
  }
  if (jobs < 1) throw ConfigError("jobs must be positive");
  if (!(pose_lower.array() <= pose_upper.array()).all()) {
    throw ConfigError("initial pose box is not well ordered");
  }
  box.Validate();
  if (me_q && me_q->size() != StateDim(kind)) throw ConfigError("me weight q has wrong length");
}

MonteCarloOptions DefaultMonteCarlo(ModelKind kind) {
  MonteCarloOptions o;
  o.kind = kind;
  if (kind == ModelKind::kKinematic) {
    o.eval_time = 10.0;
    o.horizon = 60;
    o.dt = 0.1;
    o.box = DefaultVelocityBox();
    o.pose_lower = {-1.0, -1.0, -kPi};
    o.pose_upper = {1.0, 1.0, kPi};
  }
  o.solver.max_iterations = 50;
  return o;
}

std::vector<StateVector> DrawInitialStates(const MonteCarloOptions& opts) {
  opts.Validate();
  std::mt19937_64 rng(opts.seed);
  std::vector<StateVector> out;
  out.reserve(opts.draws);
  for (int i = 0; i < opts.draws; ++i) {
    StateVector x = StateVector::Zero(StateDim(opts.kind));
    for (int k = 0; k < 3; ++k) {
      x(k) = std::uniform_real_distribution<double>(opts.pose_lower(k), opts.pose_upper(k))(rng);
    }
    out.push_back(x);
  }
  return out;
}

OcpSpec MakeOcp(const MonteCarloOptions& opts, std::shared_ptr<const KoopmanSurrogate> surrogate,
                const McConfig& config) {
  OcpSpec spec;
  spec.horizon = opts.horizon;
  spec.dt = opts.dt;
  spec.box = opts.box;
  spec.solver = opts.solver;
  const Dictionary* dict = surrogate ? &surrogate->dictionary() : nullptr;
  spec.cost = DefaultCost(config.cost, opts.kind, dict);
  if (config.cost == CostKind::kMixedExponents) {
    if (opts.me_q) spec.cost.q = *opts.me_q;
    if (opts.me_r) spec.cost.r = *opts.me_r;
  }
  spec.model.mode = config.mode;
  spec.model.nominal_kind = opts.kind;
  if (config.mode == PredictionMode::kNominal) {
    if (surrogate) spec.model.dictionary = std::make_shared<const Dictionary>(*dict);
  } else {
    spec.model.surrogate = std::move(surrogate);
  }
  spec.Validate();
  return spec;
}

std::vector<EcdfReport> MonteCarloClosedLoop(const MonteCarloOptions& opts,
                                             std::shared_ptr<const KoopmanSurrogate> surrogate,
                                             const std::vector<McConfig>& configs) {
  return MonteCarloClosedLoop(opts, std::move(surrogate), configs, DrawInitialStates(opts));
}

std::vector<EcdfReport> MonteCarloClosedLoop(const MonteCarloOptions& opts,
                                             std::shared_ptr<const KoopmanSurrogate> surrogate,
                                             const std::vector<McConfig>& configs,
                                             const std::vector<StateVector>& initial_states) {
  opts.Validate();
  if (configs.empty()) throw ConfigError("no Monte-Carlo configurations given");
  std::vector<OcpSpec> specs;
  for (const auto& c : configs) specs.push_back(MakeOcp(opts, surrogate, c));
  const size_t draws = initial_states.size();
  const size_t tasks = draws * configs.size();
  std::vector<double> deviation(tasks, kInf);
  std::vector<std::string> failure(tasks);
  const long eval_step = std::lround(opts.eval_time / opts.dt);
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t task = next++; task < tasks; task = next++) {
      const size_t ci = task / draws;
      const size_t di = task % draws;
      try {
        const ClosedLoopResult r =
            ClosedLoop(specs[ci], opts.kind, initial_states[di], opts.eval_time);
        if (r.failed) {
          failure[task] = "step " + std::to_string(r.failure_step) + ": " + r.failure;
        } else {
          deviation[task] = std::abs(r.states[static_cast<size_t>(eval_step)](1));
          if (!std::isfinite(deviation[task])) {
            deviation[task] = kInf;
            failure[task] = "non-finite plant state";
          }
        }
      } catch (const std::exception& e) {
        failure[task] = e.what();
      }
    }
  };
  const int nthreads = std::max(1, std::min<int>(opts.jobs, static_cast<int>(tasks)));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::vector<EcdfReport> out;
  for (size_t ci = 0; ci < configs.size(); ++ci) {
    EcdfReport rep;
    rep.label = configs[ci].Label();
    rep.deviations.assign(deviation.begin() + static_cast<long>(ci * draws),
                          deviation.begin() + static_cast<long>((ci + 1) * draws));
    rep.failures.assign(failure.begin() + static_cast<long>(ci * draws),
                        failure.begin() + static_cast<long>((ci + 1) * draws));
    rep.ecdf = Ecdf(rep.deviations);
    out.push_back(std::move(rep));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Data efficiency

std::vector<SweepPoint> DataEfficiencySweep(const LabeledDataset& training,
                                            const std::string& dictionary,
                                            const RegressionOptions& regression, bool drift,
                                            const std::vector<size_t>& sizes,
                                            const MonteCarloOptions& opts,
                                            const McConfig& config) {
  const Dictionary& dict = FindDictionary(dictionary);
  for (size_t d : sizes) {
    for (const auto& p : training.partitions) {
      if (d > p.x.size()) {
        throw ConfigError("sweep size " + std::to_string(d) + " exceeds the " +
                          std::to_string(p.x.size()) + " available pairs of a basis");
      }
    }
  }
  const std::vector<StateVector> initial = DrawInitialStates(opts);
  std::vector<SweepPoint> out;
  for (size_t d : sizes) {
    bool full = true;
    for (const auto& p : training.partitions) full = full && p.x.size() == d;
    const LabeledDataset data = full ? training : training.Subsampled(d, opts.seed + d);
    auto sur = std::make_shared<const KoopmanSurrogate>(FitSurrogate(dict, data, regression, drift));
    SweepPoint point;
    point.per_basis = d;
    point.report = MonteCarloClosedLoop(opts, sur, {config}, initial).front();
    point.report.label = config.Label() + "-d" + std::to_string(d);
    out.push_back(std::move(point));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

void WriteOpenLoopCsv(std::ostream& out, const OpenLoopReport& report,
                      const std::vector<std::string>& provenance) {
  for (const auto& line : provenance) out << "# " << line << "\n";
  out << "dictionary,window,variant,start,lookahead,mean_position,max_position,mean_rotation,"
         "max_rotation\n";
  out << std::setprecision(10);
  for (const auto& e : report.entries) {
    const std::string dict = e.dictionary.empty() ? "nominal" : e.dictionary;
    for (int s = 0; s < e.table.starts; ++s) {
      for (int j = 1; j <= e.table.horizon; ++j) {
        const size_t i = e.table.Index(s, j);
        out << dict << "," << e.window << "," << ToString(e.variant) << "," << e.table.first_start + s << "," << j
            << "," << e.table.mean_position[i] << "," << e.table.max_position[i] << ","
            << e.table.mean_rotation[i] << "," << e.table.max_rotation[i] << "\n";
      }
    }
  }
}

void WriteEcdfCsv(std::ostream& out, const EcdfReport& report,
                  const std::vector<std::string>& provenance) {
  for (const auto& line : provenance) out << "# " << line << "\n";
  out << "label,draw,deviation,failure\n";
  out << std::setprecision(17);
  for (size_t i = 0; i < report.deviations.size(); ++i) {
    std::string why = i < report.failures.size() ? report.failures[i] : "";
    std::replace(why.begin(), why.end(), ',', ';');
    out << report.label << "," << i << "," << report.deviations[i] << "," << why << "\n";
  }
}

void WriteEcdfSummary(std::ostream& out, const std::vector<EcdfReport>& reports) {
  out << std::setprecision(6);
  for (const auto& r : reports) {
    out << r.label << ": n=" << r.ecdf.size() << " failures=" << r.ecdf.failures();
    if (r.ecdf.size() > 0) {
      for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) out << " q" << p << "=" << r.ecdf.Quantile(p);
      out << " F(1mm)=" << r.ecdf(1e-3) << " F(2mm)=" << r.ecdf(2e-3);
    }
    out << "\n";
  }
}

}  // namespace kmpc
