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

#include "kmpc/sampler.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/LU>

#include "kmpc/vehicle.h"

namespace kmpc {

namespace {

// Per-step accelerations of a rest-to-rest trapezoid covering `distance`
// in whole steps of length dt.
std::vector<double> TrapezoidAccelerations(double distance, double speed, double accel,
                                           double dt) {
  if (distance <= 1e-12) return {};
  const double unit = accel * dt * dt;
  const long full_ramp = std::max(1L, static_cast<long>(std::ceil(speed / (accel * dt) - 1e-9)));
  long ramp = full_ramp;
  long cruise = 0;
  if (distance <= unit * static_cast<double>(full_ramp * full_ramp)) {
    ramp = std::max(1L, static_cast<long>(std::ceil(std::sqrt(distance / unit) - 1e-9)));
  } else {
    cruise = static_cast<long>(std::ceil(distance / (unit * static_cast<double>(ramp)) -
                                         static_cast<double>(ramp) - 1e-9));
    cruise = std::max(0L, cruise);
  }
  const double a = distance / (dt * dt * static_cast<double>(ramp * (ramp + cruise)));
  std::vector<double> out;
  out.insert(out.end(), ramp, a);
  out.insert(out.end(), cruise, 0.0);
  out.insert(out.end(), ramp, -a);
  return out;
}

// Accelerations moving (v, omega) to the target in equal steps.
std::vector<Input> VelocityRamp(const Input& from, const Input& to, const SamplingSpec& spec) {
  const Input delta = to - from;
  const double t_needed =
      std::max(std::abs(delta(0)) / spec.cruise_accel, std::abs(delta(1)) / spec.turn_accel);
  if (t_needed <= 1e-12) return {};
  const long n = std::max(1L, static_cast<long>(std::ceil(t_needed / spec.dt - 1e-9)));
  return std::vector<Input>(n, delta / (static_cast<double>(n) * spec.dt));
}

class Simulator {
 public:
  Simulator(const SamplingSpec& spec, StateVector initial)
      : spec_(spec),
        rng_(spec.seed),
        noise_(0.0, 1.0),
        x_(std::move(initial)),
        substeps_(spec.SamplesPerStep()) {
    rec_.kind = spec.kind;
    rec_.dt = spec.dt;
    rec_.sensor_rate = spec.sensor_rate;
    rec_.seed = spec.seed;
    rec_.position_noise = spec.position_noise;
    rec_.heading_noise = spec.heading_noise;
    rec_.bases = spec.bases;
    RecordPose(x_);
  }

  std::mt19937_64& rng() { return rng_; }
  const StateVector& state() const { return x_; }
  long index() const { return static_cast<long>(rec_.poses.size()) - 1; }

  // True states at the substep instants of one control step.
  std::vector<StateVector> Propagate(const StateVector& x, const Input& u) const {
    std::vector<StateVector> out;
    out.reserve(substeps_);
    StateVector s = x;
    const double h = spec_.dt / substeps_;
    for (int j = 0; j < substeps_; ++j) {
      s = ZohStep(spec_.kind, s, u, h);
      out.push_back(s);
    }
    return out;
  }

  void Commit(const Input& u, int basis, const std::vector<StateVector>& samples) {
    TimedSample in;
    in.t = rec_.PoseTime(index());
    in.value << u(0), u(1), basis;
    rec_.inputs.push_back(in);
    for (const auto& s : samples) RecordPose(s);
    x_ = samples.back();
  }

  void Run(const std::vector<Input>& inputs, int basis, ProfileKind profile) {
    if (inputs.empty()) return;
    SegmentAnnotation seg;
    seg.basis = basis;
    seg.profile = profile;
    seg.first = index();
    for (const auto& u : inputs) Commit(u, basis, Propagate(x_, u));
    seg.last = index();
    rec_.segments.push_back(seg);
  }

  void Annotate(int basis, long first, ProfileKind profile) {
    rec_.segments.push_back({basis, first, index(), profile});
  }

  RawRecording Finish() { return std::move(rec_); }

 private:
  void RecordPose(const StateVector& s) {
    TimedSample p;
    p.t = static_cast<double>(rec_.poses.size()) / spec_.sensor_rate;
    const double n1 = noise_(rng_);
    const double n2 = noise_(rng_);
    const double n3 = noise_(rng_);
    p.value << s(0) + spec_.position_noise * n1, s(1) + spec_.position_noise * n2,
        NormalizeAngle(s(2) + spec_.heading_noise * n3);
    rec_.poses.push_back(p);
  }

  const SamplingSpec& spec_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_;
  StateVector x_;
  int substeps_;
  RawRecording rec_;
};

bool InPoseBox(const SamplingSpec& spec, const StateVector& x) {
  const double theta = NormalizeAngle(x(2));
  return x(0) >= spec.pose_lower(0) && x(0) <= spec.pose_upper(0) &&
         x(1) >= spec.pose_lower(1) && x(1) <= spec.pose_upper(1) &&
         theta >= spec.pose_lower(2) && theta <= spec.pose_upper(2);
}

bool InAdmissibleSet(const SamplingSpec& spec, const StateVector& x) {
  if (!InPoseBox(spec, x)) return false;
  if (spec.kind == ModelKind::kKinematic) return true;
  return x(3) >= spec.velocity_lower(0) && x(3) <= spec.velocity_upper(0) &&
         x(4) >= spec.velocity_lower(1) && x(4) <= spec.velocity_upper(1);
}

Eigen::Vector3d DrawPose(const SamplingSpec& spec, std::mt19937_64& rng) {
  Eigen::Vector3d p;
  for (int i = 0; i < 3; ++i) {
    p(i) = std::uniform_real_distribution<double>(spec.pose_lower(i), spec.pose_upper(i))(rng);
  }
  return p;
}

// Rotate towards the target position, drive there, rotate to the target
// heading. Kinematic robots follow the trapezoid's per-step mean velocity,
// second-order robots its accelerations.
void Transfer(Simulator& sim, const SamplingSpec& spec, const Eigen::Vector3d& target) {
  auto phase = [&](double signed_distance, bool turn) {
    const double speed = turn ? spec.turn_rate : spec.cruise_speed;
    const double accel = turn ? spec.turn_accel : spec.cruise_accel;
    const std::vector<double> acc =
        TrapezoidAccelerations(std::abs(signed_distance), speed, accel, spec.dt);
    if (acc.empty()) return;
    const double sign = signed_distance < 0.0 ? -1.0 : 1.0;
    std::vector<Input> inputs;
    inputs.reserve(acc.size());
    double vel = 0.0;
    for (double a : acc) {
      const double ai = sign * a;
      const double value = spec.kind == ModelKind::kKinematic ? vel + 0.5 * ai * spec.dt : ai;
      vel += ai * spec.dt;
      inputs.push_back(turn ? Input(0.0, value) : Input(value, 0.0));
    }
    sim.Run(inputs, -1, ProfileKind::kLinear);
  };
  const StateVector& x = sim.state();
  const double dx = target(0) - x(0);
  const double dy = target(1) - x(1);
  const double distance = std::hypot(dx, dy);
  if (distance > 1e-9) {
    phase(NormalizeAngle(std::atan2(dy, dx) - x(2)), true);
    phase(distance, false);
  }
  phase(NormalizeAngle(target(2) - sim.state()(2)), true);
}

// Applies the basis input while the admissible set is respected. Returns
// the number of steps recorded.
int ApplyBasis(Simulator& sim, const SamplingSpec& spec, int basis) {
  const Input& u = spec.bases[basis];
  const long first = sim.index();
  int steps = 0;
  while (steps < spec.max_segment_steps) {
    const auto samples = sim.Propagate(sim.state(), u);
    if (!std::all_of(samples.begin(), samples.end(),
                     [&](const StateVector& s) { return InAdmissibleSet(spec, s); })) {
      break;
    }
    sim.Commit(u, basis, samples);
    ++steps;
  }
  if (steps > 0) sim.Annotate(basis, first, spec.kind == ModelKind::kKinematic ||
                                                    u.isZero() ? ProfileKind::kConstant
                                                               : ProfileKind::kLinear);
  return steps;
}

// Nominal pre-simulation: the draw is usable if the basis can run for the
// minimum segment length after the given preparatory inputs.
bool PreSimulate(const SamplingSpec& spec, StateVector x, const std::vector<Input>& prep,
                 const Input& basis) {
  for (const auto& u : prep) x = ZohStep(spec.kind, x, u, spec.dt);
  if (!InAdmissibleSet(spec, x)) return false;
  const int r = spec.SamplesPerStep();
  const double h = spec.dt / r;
  for (int k = 0; k < spec.min_segment_steps; ++k) {
    for (int j = 0; j < r; ++j) {
      x = ZohStep(spec.kind, x, basis, h);
      if (!InAdmissibleSet(spec, x)) return false;
    }
  }
  return true;
}

[[noreturn]] void ThrowInfeasible(const SamplingSpec& spec, int basis) {
  std::ostringstream msg;
  msg << "no admissible draw for basis " << basis << " after " << spec.max_rejections
      << " attempts";
  throw InfeasibleSpecError(msg.str());
}

StateVector InitialState(const SamplingSpec& spec) {
  StateVector x = StateVector::Zero(StateDim(spec.kind));
  x(0) = 0.5 * (spec.pose_lower(0) + spec.pose_upper(0));
  x(1) = 0.5 * (spec.pose_lower(1) + spec.pose_upper(1));
  return x;
}

}  // namespace

int SamplingSpec::SamplesPerStep() const { return static_cast<int>(std::lround(sensor_rate * dt)); }

void SamplingSpec::Validate() const {
  if (!(dt > 0.0) || !(sensor_rate > 0.0)) throw ConfigError("dt and sensor rate must be positive");
  const double r = sensor_rate * dt;
  if (std::lround(r) < 1 || std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r)) {
    throw ConfigError("sensor_rate * dt must be a positive integer");
  }
  if (!(pose_lower.array() < pose_upper.array()).all()) throw ConfigError("pose box is not well ordered");
  if (kind == ModelKind::kDynamic && !(velocity_lower.array() < velocity_upper.array()).all()) {
    throw ConfigError("velocity box is not well ordered");
  }
  const size_t expected = kind == ModelKind::kKinematic ? 2 : 3;
  if (bases.size() != expected) {
    throw ConfigError("sampling needs " + std::to_string(expected) + " input bases");
  }
  const Input origin = kind == ModelKind::kKinematic ? Input::Zero() : bases[0];
  const size_t off = kind == ModelKind::kKinematic ? 0 : 1;
  Eigen::Matrix2d span;
  span.col(0) = bases[off] - origin;
  span.col(1) = bases[off + 1] - origin;
  if (std::abs(span.determinant()) < 1e-12) throw ConfigError("input bases do not span the input space");
  if (min_segment_steps < 1 || max_segment_steps < min_segment_steps) {
    throw ConfigError("segment lengths must satisfy 1 <= min <= max");
  }
  if (segments_per_basis < 1) throw ConfigError("segments_per_basis must be positive");
  if (position_noise < 0.0 || heading_noise < 0.0) throw ConfigError("noise must be nonnegative");
  if (!(cruise_speed > 0.0 && cruise_accel > 0.0 && turn_rate > 0.0 && turn_accel > 0.0)) {
    throw ConfigError("transfer profile parameters must be positive");
  }
  if (max_rejections < 1) throw ConfigError("max_rejections must be positive");
}

SamplingSpec DefaultKinematicSpec() {
  SamplingSpec s;
  s.kind = ModelKind::kKinematic;
  s.pose_lower = {-1.0, -1.0, -kPi};
  s.pose_upper = {1.0, 1.0, kPi};
  s.bases = {Input(0.2, -0.4), Input(0.2, 0.6)};
  s.dt = 0.05;
  s.sensor_rate = 20.0;
  s.segments_per_basis = 5;
  return s;
}

SamplingSpec DefaultDynamicSpec() {
  SamplingSpec s;
  s.kind = ModelKind::kDynamic;
  s.bases = {Input(0.0, 0.0), Input(0.2, 0.0), Input(0.0, 0.5)};
  return s;
}

int RawRecording::SamplesPerStep() const { return static_cast<int>(std::lround(sensor_rate * dt)); }

void RawRecording::Validate() const {
  if (!(dt > 0.0) || !(sensor_rate > 0.0)) throw std::invalid_argument("bad recording rates");
  for (size_t i = 1; i < poses.size(); ++i) {
    if (!(poses[i].t > poses[i - 1].t)) throw std::invalid_argument("pose timestamps not increasing");
  }
  for (size_t i = 1; i < inputs.size(); ++i) {
    if (!(inputs[i].t > inputs[i - 1].t)) throw std::invalid_argument("input timestamps not increasing");
  }
  const long n = static_cast<long>(poses.size());
  for (const auto& s : segments) {
    if (s.first < 0 || s.last >= n || s.last <= s.first) {
      throw std::invalid_argument("segment annotation out of range");
    }
    if (s.basis >= static_cast<int>(bases.size()) || s.basis < -1) {
      throw std::invalid_argument("segment annotation names an unknown basis");
    }
  }
}

std::vector<long> RawRecording::StepsPerBasis() const {
  std::vector<long> out(bases.size(), 0);
  const int r = SamplesPerStep();
  for (const auto& s : segments) {
    if (s.basis >= 0) out[s.basis] += (s.last - s.first) / r;
  }
  return out;
}

std::vector<int> RawRecording::SegmentsPerBasis() const {
  std::vector<int> out(bases.size(), 0);
  for (const auto& s : segments) {
    if (s.basis >= 0) ++out[s.basis];
  }
  return out;
}

RawRecording SampleKinematic(const SamplingSpec& spec) {
  spec.Validate();
  if (spec.kind != ModelKind::kKinematic) throw ConfigError("spec is not kinematic");
  Simulator sim(spec, InitialState(spec));
  const int nb = static_cast<int>(spec.bases.size());
  for (int draw = 0; draw < spec.segments_per_basis * nb; ++draw) {
    const int basis = draw % nb;
    int rejected = 0;
    while (true) {
      const Eigen::Vector3d target = DrawPose(spec, sim.rng());
      StateVector x(3);
      x << target(0), target(1), target(2);
      if (PreSimulate(spec, x, {}, spec.bases[basis])) {
        Transfer(sim, spec, target);
        ApplyBasis(sim, spec, basis);
        break;
      }
      if (++rejected >= spec.max_rejections) ThrowInfeasible(spec, basis);
    }
  }
  return sim.Finish();
}

RawRecording SampleDynamic(const SamplingSpec& spec) {
  spec.Validate();
  if (spec.kind != ModelKind::kDynamic) throw ConfigError("spec is not dynamic");
  Simulator sim(spec, InitialState(spec));
  const int nb = static_cast<int>(spec.bases.size());
  for (int draw = 0; draw < spec.segments_per_basis * nb; ++draw) {
    const int basis = draw % nb;
    int rejected = 0;
    while (true) {
      const Eigen::Vector3d pose = DrawPose(spec, sim.rng());
      Input vel;
      for (int i = 0; i < 2; ++i) {
        vel(i) = std::uniform_real_distribution<double>(spec.velocity_lower(i),
                                                        spec.velocity_upper(i))(sim.rng());
      }
      const std::vector<Input> ramp = VelocityRamp(Input::Zero(), vel, spec);
      StateVector x(5);
      x << pose(0), pose(1), pose(2), 0.0, 0.0;
      if (PreSimulate(spec, x, ramp, spec.bases[basis])) {
        Transfer(sim, spec, pose);
        sim.Run(ramp, -1, ProfileKind::kLinear);
        ApplyBasis(sim, spec, basis);
        const StateVector& z = sim.state();
        sim.Run(VelocityRamp(Input(z(3), z(4)), Input::Zero(), spec), -1, ProfileKind::kLinear);
        break;
      }
      if (++rejected >= spec.max_rejections) ThrowInfeasible(spec, basis);
    }
  }
  return sim.Finish();
}

RawRecording RecordScript(const SamplingSpec& spec, const StateVector& x0,
                          const std::vector<Input>& script) {
  const int r = spec.SamplesPerStep();
  if (!(spec.dt > 0.0) || r < 1 || std::abs(spec.sensor_rate * spec.dt - r) > 1e-9 * r) {
    throw ConfigError("sensor_rate * dt must be a positive integer");
  }
  if (x0.size() != StateDim(spec.kind)) throw std::invalid_argument("initial state dimension");
  Simulator sim(spec, x0);
  size_t start = 0;
  while (start < script.size()) {
    size_t end = start;
    while (end + 1 < script.size() && script[end + 1] == script[start]) ++end;
    const std::vector<Input> run(script.begin() + static_cast<long>(start),
                                 script.begin() + static_cast<long>(end) + 1);
    const bool linear = spec.kind == ModelKind::kDynamic && !script[start].isZero();
    sim.Run(run, -1, linear ? ProfileKind::kLinear : ProfileKind::kConstant);
    start = end + 1;
  }
  return sim.Finish();
}

RawRecording Sample(const SamplingSpec& spec) {
  return spec.kind == ModelKind::kKinematic ? SampleKinematic(spec) : SampleDynamic(spec);
}

void WriteRecording(std::ostream& out, const RawRecording& rec,
                    const std::vector<std::string>& provenance) {
  out << "# kmpc-recording v1\n";
  for (const auto& line : provenance) out << "# " << line << "\n";
  out << std::setprecision(17);
  out << "# kind=" << ToString(rec.kind) << "\n"
      << "# seed=" << rec.seed << "\n"
      << "# dt=" << rec.dt << "\n"
      << "# sensor_rate=" << rec.sensor_rate << "\n"
      << "# position_noise=" << rec.position_noise << "\n"
      << "# heading_noise=" << rec.heading_noise << "\n";
  for (size_t i = 0; i < rec.bases.size(); ++i) {
    out << "# basis" << i << "=" << rec.bases[i](0) << "," << rec.bases[i](1) << "\n";
  }
  out << "stream,t,f1,f2,f3\n";
  // Rows are merged in time order; annotations follow the pose closing them.
  size_t ii = 0;
  size_t si = 0;
  std::vector<size_t> order(rec.segments.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return rec.segments[a].last < rec.segments[b].last;
  });
  for (size_t p = 0; p < rec.poses.size(); ++p) {
    while (ii < rec.inputs.size() && rec.inputs[ii].t <= rec.poses[p].t) {
      const auto& in = rec.inputs[ii++];
      out << "input," << in.t << "," << in.value(0) << "," << in.value(1) << ","
          << static_cast<int>(in.value(2)) << "\n";
    }
    const auto& ps = rec.poses[p];
    out << "pose," << ps.t << "," << ps.value(0) << "," << ps.value(1) << "," << ps.value(2)
        << "\n";
    while (si < order.size() && rec.segments[order[si]].last == static_cast<long>(p)) {
      const auto& s = rec.segments[order[si++]];
      // t = segment start, f1 = segment end, f2 = basis, f3 = profile.
      out << "annot," << rec.PoseTime(s.first) << "," << rec.PoseTime(s.last) << "," << s.basis
          << "," << (s.profile == ProfileKind::kLinear ? 1 : 0) << "\n";
    }
  }
}

namespace {

double ParseDouble(const std::string& s, long line) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError("line " + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

std::vector<std::string> SplitComma(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

RawRecording ReadRecording(std::istream& in) {
  RawRecording rec;
  std::string line;
  long lineno = 0;
  bool magic = false;
  bool header_row = false;
  std::vector<std::pair<int, Input>> bases;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line == "# kmpc-recording v1") magic = true;
      const auto eq = line.find('=');
      if (eq == std::string::npos || line.size() < 3) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      if (key == "kind") {
        try {
          rec.kind = ParseModelKind(value);
        } catch (const ConfigError& e) {
          throw IoError(e.what());
        }
      } else if (key == "seed") {
        rec.seed = std::stoull(value);
      } else if (key == "dt") {
        rec.dt = ParseDouble(value, lineno);
      } else if (key == "sensor_rate") {
        rec.sensor_rate = ParseDouble(value, lineno);
      } else if (key == "position_noise") {
        rec.position_noise = ParseDouble(value, lineno);
      } else if (key == "heading_noise") {
        rec.heading_noise = ParseDouble(value, lineno);
      } else if (key.rfind("basis", 0) == 0 && key.size() > 5) {
        const auto parts = SplitComma(value);
        if (parts.size() != 2) throw IoError("line " + std::to_string(lineno) + ": bad basis");
        bases.emplace_back(std::stoi(key.substr(5)),
                           Input(ParseDouble(parts[0], lineno), ParseDouble(parts[1], lineno)));
      }
      continue;
    }
    if (!magic) throw IoError("not a kmpc recording (missing magic line)");
    if (!header_row) {
      if (line != "stream,t,f1,f2,f3") throw IoError("unexpected column header: " + line);
      header_row = true;
      continue;
    }
    const auto f = SplitComma(line);
    if (f.size() != 5) throw IoError("line " + std::to_string(lineno) + ": expected 5 fields");
    TimedSample s;
    s.t = ParseDouble(f[1], lineno);
    s.value << ParseDouble(f[2], lineno), ParseDouble(f[3], lineno), ParseDouble(f[4], lineno);
    if (f[0] == "pose") {
      rec.poses.push_back(s);
    } else if (f[0] == "input") {
      rec.inputs.push_back(s);
    } else if (f[0] == "annot") {
      if (!(rec.sensor_rate > 0.0)) throw IoError("annotation before sensor_rate header");
      SegmentAnnotation a;
      a.first = std::lround(s.t * rec.sensor_rate);
      a.last = std::lround(s.value(0) * rec.sensor_rate);
      a.basis = static_cast<int>(std::lround(s.value(1)));
      a.profile = s.value(2) != 0.0 ? ProfileKind::kLinear : ProfileKind::kConstant;
      rec.segments.push_back(a);
    } else {
      throw IoError("line " + std::to_string(lineno) + ": unknown stream '" + f[0] + "'");
    }
  }
  if (!magic || !header_row) throw IoError("truncated or empty recording");
  std::sort(bases.begin(), bases.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (size_t i = 0; i < bases.size(); ++i) {
    if (bases[i].first != static_cast<int>(i)) throw IoError("basis indices are not contiguous");
    rec.bases.push_back(bases[i].second);
  }
  std::sort(rec.segments.begin(), rec.segments.end(),
            [](const SegmentAnnotation& a, const SegmentAnnotation& b) { return a.first < b.first; });
  try {
    rec.Validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(e.what());
  }
  return rec;
}

}  // namespace kmpc
