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


#include "kmpc/config.h"

#include <charconv>
#include <cstdio>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <system_error>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "kmpc/dictionary.h"

namespace kmpc {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> Split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string Fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

std::string FmtList(std::initializer_list<double> xs) {
  std::string out;
  for (double x : xs) {
    if (!out.empty()) out += ",";
    out += Fmt(x);
  }
  return out;
}

std::string FmtVec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += Fmt(v(i));
  }
  return out;
}

double ToDouble(const std::string& key, const std::string& text) {
  const std::string t = Trim(text);
  double x = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(x)) {
    throw ConfigError(key + ": '" + text + "' is not a finite number");
  }
  return x;
}

long ToInt(const std::string& key, const std::string& text) {
  const std::string t = Trim(text);
  long x = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) {
    throw ConfigError(key + ": '" + text + "' is not an integer");
  }
  return x;
}

Eigen::VectorXd ToVec(const std::string& key, const std::string& text, int n) {
  std::vector<double> xs;
  try {
    xs = ParseDoubleList(text);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
  if (n >= 0 && static_cast<int>(xs.size()) != n) {
    throw ConfigError(key + ": expected " + std::to_string(n) + " values, got " +
                      std::to_string(xs.size()));
  }
  return Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

std::string DefaultOutputDir() {
  const char* root = std::getenv(kOutputRootEnv);
  return root && *root ? std::string(root) : std::string("kmpc-out");
}

std::map<std::string, std::string> DefaultValues(ModelKind kind) {
  const bool kin = kind == ModelKind::kKinematic;
  SamplingSpec s = kin ? DefaultKinematicSpec() : DefaultDynamicSpec();
  const double dt = kin ? 0.1 : 0.05;
  const MonteCarloOptions mc = DefaultMonteCarlo(kind);
  std::string bases;
  for (const auto& b : s.bases) {
    if (!bases.empty()) bases += ";";
    bases += FmtVec(b);
  }
  return {
      {"general.kind", ToString(kind)},
      {"general.seed", "1"},
      {"general.dt", Fmt(dt)},
      {"general.jobs", "1"},
      {"general.output_dir", DefaultOutputDir()},
      {"general.dictionary", kin ? "D5t" : "D8Eul"},

      {"sampling.sensor_rate", "auto"},
      {"sampling.pose_lower", FmtVec(s.pose_lower)},
      {"sampling.pose_upper", FmtVec(s.pose_upper)},
      {"sampling.velocity_lower", FmtVec(s.velocity_lower)},
      {"sampling.velocity_upper", FmtVec(s.velocity_upper)},
      {"sampling.bases", bases},
      {"sampling.segments_per_basis", std::to_string(s.segments_per_basis)},
      {"sampling.min_segment_steps", std::to_string(s.min_segment_steps)},
      {"sampling.max_segment_steps", std::to_string(s.max_segment_steps)},
      {"sampling.position_noise", Fmt(s.position_noise)},
      {"sampling.heading_noise_deg", "0.1"},
      {"sampling.cruise_speed", Fmt(s.cruise_speed)},
      {"sampling.cruise_accel", Fmt(s.cruise_accel)},
      {"sampling.turn_rate", Fmt(s.turn_rate)},
      {"sampling.turn_accel", Fmt(s.turn_accel)},
      {"sampling.max_rejections", std::to_string(s.max_rejections)},

      {"postprocess.window", kin ? "1" : "40"},

      {"fit.ridge", Fmt(RegressionOptions{}.ridge)},
      {"fit.condition_warn", Fmt(RegressionOptions{}.condition_warn)},
      {"fit.per_basis", "0"},
      {"fit.selection", "random"},

      {"ocp.horizon", std::to_string(mc.horizon)},
      {"ocp.cost", "me"},
      {"ocp.mode", "proj"},
      {"ocp.input_lower", FmtVec(mc.box.lower)},
      {"ocp.input_upper", FmtVec(mc.box.upper)},
      {"ocp.q", ""},
      {"ocp.r", ""},
      {"ocp.solver", "pg"},
      {"ocp.max_iterations", std::to_string(mc.solver.max_iterations)},
      {"ocp.tolerance", Fmt(mc.solver.gradient_tolerance)},

      {"closedloop.x0", kin ? FmtList({-1.0, -0.5, -0.5236}) : FmtList({1.0, 0.5, 0.0, 0.0, 0.0})},
      {"closedloop.duration", Fmt(mc.eval_time)},
      {"closedloop.goal", "0,0,0"},

      {"experiments.draws", std::to_string(mc.draws)},
      {"experiments.eval_time", Fmt(mc.eval_time)},
      {"experiments.configs", kin ? "me-proj,ce-proj,ds-proj" : "me-proj,ce-proj,ds-proj,me-noproj"},
      {"experiments.pose_lower", FmtVec(mc.pose_lower)},
      {"experiments.pose_upper", FmtVec(mc.pose_upper)},
      {"experiments.shapes", "infinity,square"},
      {"experiments.reference_runs", "20"},
      {"experiments.openloop_horizon", "20"},
      {"experiments.dictionaries", kin ? "D5t" : "D8Eul,D10m,D13t,D12f"},
      {"experiments.windows", kin ? "1" : "40"},
      {"experiments.sweep_sizes", kin ? "5,10,20,50" : "25,50,100,200"},
  };
}

// Keys that cannot change any result stay out of the hash.
bool IsSemantic(const std::string& key) {
  return key != "general.output_dir" && key != "general.jobs";
}

std::pair<std::string, std::string> SplitOverride(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + text + "' is not section.key=value");
  const std::string key = Trim(text.substr(0, eq));
  if (key.find('.') == std::string::npos) {
    throw ConfigError("override key '" + key + "' is not section.key");
  }
  return {key, Trim(text.substr(eq + 1))};
}

RunConfig Build(const std::vector<std::pair<std::string, std::string>>& entries) {
  ModelKind kind = ModelKind::kDynamic;
  for (const auto& [k, v] : entries) {
    if (k == "general.kind") kind = ParseModelKind(v);
  }
  RunConfig cfg = RunConfig::Defaults(kind);
  const auto& known = cfg.values();
  std::map<std::string, std::string> merged = known;
  for (const auto& [k, v] : entries) {
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
    merged[k] = v;
  }
  for (const auto& [k, v] : merged) {
    if (k != "general.kind") cfg.Set(k, v);
  }
  cfg.Validate();
  return cfg;
}

}  // namespace

std::vector<double> ParseDoubleList(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (item.empty()) throw ConfigError("empty entry in list '" + text + "'");
    out.push_back(ToDouble("list", item));
  }
  return out;
}

RunConfig RunConfig::Defaults(ModelKind kind) {
  RunConfig cfg;
  cfg.values_ = DefaultValues(kind);
  return cfg;
}

RunConfig RunConfig::Parse(std::istream& in, const std::vector<std::string>& overrides) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message() + " at line " +
                      std::to_string(e.line()));
  }
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' is outside any section");
    for (const auto& [key, value] : body) {
      entries.emplace_back(section + "." + key, Trim(value.data()));
    }
  }
  for (const auto& o : overrides) entries.push_back(SplitOverride(o));
  return Build(entries);
}

RunConfig RunConfig::Load(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return Parse(in, overrides);
}

RunConfig RunConfig::FromOverrides(const std::vector<std::string>& overrides) {
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& o : overrides) entries.push_back(SplitOverride(o));
  return Build(entries);
}

void RunConfig::Set(const std::string& dotted_key, const std::string& value) {
  auto it = values_.find(dotted_key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + dotted_key + "'");
  if (dotted_key == "general.kind" && value != it->second) {
    throw ConfigError("general.kind cannot change after defaults are chosen");
  }
  it->second = Trim(value);
}

std::string RunConfig::Get(const std::string& dotted_key) const {
  auto it = values_.find(dotted_key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + dotted_key + "'");
  return it->second;
}

ModelKind RunConfig::kind() const { return ParseModelKind(Get("general.kind")); }

uint64_t RunConfig::seed() const {
  const std::string t = Get("general.seed");
  uint64_t x = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) {
    throw ConfigError("general.seed: '" + t + "' is not an unsigned integer");
  }
  return x;
}

double RunConfig::dt() const { return ToDouble("general.dt", Get("general.dt")); }
int RunConfig::jobs() const { return static_cast<int>(ToInt("general.jobs", Get("general.jobs"))); }
std::string RunConfig::output_dir() const { return Get("general.output_dir"); }
std::string RunConfig::dictionary() const { return Get("general.dictionary"); }

double RunConfig::SensorRate() const {
  const std::string r = Get("sampling.sensor_rate");
  if (r != "auto") return ToDouble("sampling.sensor_rate", r);
  return kind() == ModelKind::kKinematic ? 1.0 / dt() : DefaultDynamicSpec().sensor_rate;
}

SamplingSpec RunConfig::Sampling() const {
  SamplingSpec s;
  s.kind = kind();
  s.dt = dt();
  s.seed = seed();
  s.sensor_rate = SensorRate();
  s.pose_lower = ToVec("sampling.pose_lower", Get("sampling.pose_lower"), 3);
  s.pose_upper = ToVec("sampling.pose_upper", Get("sampling.pose_upper"), 3);
  s.velocity_lower = ToVec("sampling.velocity_lower", Get("sampling.velocity_lower"), 2);
  s.velocity_upper = ToVec("sampling.velocity_upper", Get("sampling.velocity_upper"), 2);
  s.bases.clear();
  for (const auto& b : Split(Get("sampling.bases"), ';')) {
    s.bases.push_back(ToVec("sampling.bases", b, 2));
  }
  auto i = [&](const char* key) { return static_cast<int>(ToInt(key, Get(key))); };
  auto d = [&](const char* key) { return ToDouble(key, Get(key)); };
  s.segments_per_basis = i("sampling.segments_per_basis");
  s.min_segment_steps = i("sampling.min_segment_steps");
  s.max_segment_steps = i("sampling.max_segment_steps");
  s.max_rejections = i("sampling.max_rejections");
  s.position_noise = d("sampling.position_noise");
  s.heading_noise = d("sampling.heading_noise_deg") * kPi / 180.0;
  s.cruise_speed = d("sampling.cruise_speed");
  s.cruise_accel = d("sampling.cruise_accel");
  s.turn_rate = d("sampling.turn_rate");
  s.turn_accel = d("sampling.turn_accel");
  return s;
}

PostprocessSpec RunConfig::Postprocess() const {
  PostprocessSpec p;
  p.window = static_cast<int>(ToInt("postprocess.window", Get("postprocess.window")));
  p.dt = dt();
  p.sensor_rate = SensorRate();
  return p;
}

RegressionOptions RunConfig::Regression() const {
  RegressionOptions r;
  r.ridge = ToDouble("fit.ridge", Get("fit.ridge"));
  r.condition_warn = ToDouble("fit.condition_warn", Get("fit.condition_warn"));
  return r;
}

size_t RunConfig::PerBasis() const {
  const long n = ToInt("fit.per_basis", Get("fit.per_basis"));
  if (n < 0) throw ConfigError("fit.per_basis must be nonnegative");
  return static_cast<size_t>(n);
}

std::string RunConfig::Selection() const {
  const std::string s = Get("fit.selection");
  if (s != "random" && s != "first") throw ConfigError("fit.selection must be random|first");
  return s;
}

McConfig RunConfig::Controller() const {
  return ParseMcConfig(Get("ocp.cost") + "-" + Get("ocp.mode"));
}

MonteCarloOptions RunConfig::MonteCarlo() const {
  const ModelKind k = kind();
  MonteCarloOptions o = DefaultMonteCarlo(k);
  o.draws = static_cast<int>(ToInt("experiments.draws", Get("experiments.draws")));
  o.eval_time = ToDouble("experiments.eval_time", Get("experiments.eval_time"));
  o.seed = seed();
  o.jobs = jobs();
  o.horizon = static_cast<int>(ToInt("ocp.horizon", Get("ocp.horizon")));
  o.dt = dt();
  o.box.lower = ToVec("ocp.input_lower", Get("ocp.input_lower"), 2);
  o.box.upper = ToVec("ocp.input_upper", Get("ocp.input_upper"), 2);
  o.pose_lower = ToVec("experiments.pose_lower", Get("experiments.pose_lower"), 3);
  o.pose_upper = ToVec("experiments.pose_upper", Get("experiments.pose_upper"), 3);
  const std::string solver = Get("ocp.solver");
  if (solver == "pg") {
    o.solver.kind = SolverKind::kProjectedGradient;
  } else if (solver == "lbfgs") {
    o.solver.kind = SolverKind::kProjectedLbfgs;
  } else {
    throw ConfigError("ocp.solver must be pg|lbfgs");
  }
  o.solver.max_iterations =
      static_cast<int>(ToInt("ocp.max_iterations", Get("ocp.max_iterations")));
  o.solver.gradient_tolerance = ToDouble("ocp.tolerance", Get("ocp.tolerance"));
  if (o.solver.max_iterations < 1) throw ConfigError("ocp.max_iterations must be positive");
  if (!(o.solver.gradient_tolerance > 0.0)) throw ConfigError("ocp.tolerance must be positive");
  if (!Get("ocp.q").empty()) o.me_q = ToVec("ocp.q", Get("ocp.q"), StateDim(k));
  if (!Get("ocp.r").empty()) o.me_r = Eigen::Vector2d(ToVec("ocp.r", Get("ocp.r"), 2));
  if (o.me_q && (o.me_q->array() <= 0.0).any()) throw ConfigError("ocp.q must be positive");
  if (o.me_r && (o.me_r->array() <= 0.0).any()) throw ConfigError("ocp.r must be positive");
  return o;
}

OcpSpec RunConfig::Ocp(std::shared_ptr<const KoopmanSurrogate> surrogate) const {
  return MakeOcp(MonteCarlo(), std::move(surrogate), Controller());
}

StateVector RunConfig::InitialState() const {
  return ToVec("closedloop.x0", Get("closedloop.x0"), StateDim(kind()));
}

PoseState RunConfig::Goal() const {
  const Eigen::VectorXd g = ToVec("closedloop.goal", Get("closedloop.goal"), 3);
  return {g(0), g(1), g(2)};
}

double RunConfig::Duration() const {
  return ToDouble("closedloop.duration", Get("closedloop.duration"));
}

std::vector<McConfig> RunConfig::Configs() const {
  return ParseMcConfigs(Get("experiments.configs"));
}

std::vector<ReferenceShape> RunConfig::Shapes() const {
  std::vector<ReferenceShape> out;
  for (const auto& s : Split(Get("experiments.shapes"), ',')) out.push_back(ParseReferenceShape(s));
  if (out.empty()) throw ConfigError("experiments.shapes is empty");
  return out;
}

ReferenceOptions RunConfig::Reference() const {
  const SamplingSpec s = Sampling();
  ReferenceOptions r;
  r.dt = s.dt;
  r.sensor_rate = s.sensor_rate;
  r.position_noise = s.position_noise;
  r.heading_noise = s.heading_noise;
  // Reference noise must not replay the training recording's noise.
  r.seed = s.seed + 0x9e3779b97f4a7c15ULL;
  return r;
}

int RunConfig::ReferenceCount() const {
  return static_cast<int>(ToInt("experiments.reference_runs", Get("experiments.reference_runs")));
}

int RunConfig::OpenLoopHorizon() const {
  return static_cast<int>(
      ToInt("experiments.openloop_horizon", Get("experiments.openloop_horizon")));
}

std::vector<std::string> RunConfig::Dictionaries() const {
  return Split(Get("experiments.dictionaries"), ',');
}

std::vector<int> RunConfig::Windows() const {
  std::vector<int> out;
  for (const auto& w : Split(Get("experiments.windows"), ',')) {
    out.push_back(static_cast<int>(ToInt("experiments.windows", w)));
  }
  return out;
}

std::vector<size_t> RunConfig::SweepSizes() const {
  std::vector<size_t> out;
  for (const auto& w : Split(Get("experiments.sweep_sizes"), ',')) {
    const long n = ToInt("experiments.sweep_sizes", w);
    if (n < 1) throw ConfigError("experiments.sweep_sizes must be positive");
    out.push_back(static_cast<size_t>(n));
  }
  return out;
}

void RunConfig::Validate() const {
  const ModelKind k = kind();
  const int n = StateDim(k);
  seed();
  if (!(dt() > 0.0)) throw ConfigError("general.dt must be positive");
  if (jobs() < 1) throw ConfigError("general.jobs must be positive");
  if (output_dir().empty()) throw ConfigError("general.output_dir is empty");
  if (FindDictionary(dictionary()).arity() != n) {
    throw ConfigError("dictionary " + dictionary() + " does not fit the " + ToString(k) + " robot");
  }

  Sampling().Validate();
  const PostprocessSpec pp = Postprocess();
  pp.Validate();
  if (pp.window < 1) throw ConfigError("postprocess.window must be positive");
  const RegressionOptions reg = Regression();
  if (!(reg.ridge >= 0.0)) throw ConfigError("fit.ridge must be nonnegative");
  PerBasis();
  Selection();

  const MonteCarloOptions mc = MonteCarlo();
  mc.Validate();
  Controller();
  if (InitialState().size() != n) throw ConfigError("closedloop.x0 has wrong length");
  Goal();
  const double ratio = Duration() / dt();
  if (!(Duration() >= 0.0) || std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("closedloop.duration must be a nonnegative multiple of general.dt");
  }

  Configs();
  Shapes();
  if (ReferenceCount() < 1) throw ConfigError("experiments.reference_runs must be positive");
  if (OpenLoopHorizon() < 1) throw ConfigError("experiments.openloop_horizon must be positive");
  const auto dicts = Dictionaries();
  if (dicts.empty()) throw ConfigError("experiments.dictionaries is empty");
  for (const auto& d : dicts) {
    if (FindDictionary(d).arity() != n) {
      throw ConfigError("dictionary " + d + " does not fit the " + ToString(k) + " robot");
    }
  }
  const auto windows = Windows();
  if (windows.empty()) throw ConfigError("experiments.windows is empty");
  for (int w : windows) {
    if (w < 1) throw ConfigError("experiments.windows must be positive");
  }
  SweepSizes();
}

std::string RunConfig::Canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (!IsSemantic(k)) continue;
    out += k + "=" + v + "\n";
  }
  return out;
}

uint64_t RunConfig::Hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : Canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string RunConfig::HashHex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(Hash()));
  return buf;
}

std::vector<std::string> RunConfig::Provenance() const {
  std::vector<std::string> out = {std::string("kmpc ") + kVersion, "config_hash=" + HashHex(),
                                  "seed=" + Get("general.seed")};
  for (const auto& [k, v] : values_) {
    if (IsSemantic(k)) out.push_back("config " + k + "=" + v);
  }
  return out;
}

void RunConfig::Write(std::ostream& out) const {
  std::string section;
  for (const auto& [k, v] : values_) {
    const auto dot = k.find('.');
    const std::string s = k.substr(0, dot);
    if (s != section) {
      if (!section.empty()) out << "\n";
      out << "[" << s << "]\n";
      section = s;
    }
    out << k.substr(dot + 1) << " = " << v << "\n";
  }
}

}  // namespace kmpc
