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


// kmpc: sample, fit and evaluate bilinear Koopman surrogates of
// differential-drive robots.
//
//   kmpc sample     [--config FILE] [--set section.key=value ...]
//   kmpc fit        [--recording FILE] [--per-basis N]
//   kmpc openloop   [--recording FILE]
//   kmpc closedloop [--model FILE] [--x0 a,b,c] [--H N] [--dt S] [--cost me]
//   kmpc montecarlo [--model FILE] [--configs me-proj,ce-proj]
//   kmpc sweep      [--recording FILE]
//
// Exit codes: 0 ok, 2 config, 3 infeasible sampling, 4 regression failure,
// 5 I/O.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "kmpc/config.h"
#include "kmpc/dictionary.h"
#include "kmpc/edmd.h"
#include "kmpc/experiments.h"
#include "kmpc/mpc.h"
#include "kmpc/postprocess.h"
#include "kmpc/sampler.h"

namespace kmpc {
namespace {

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  std::string recording;
  std::string model;
  // Shortcuts for frequently changed keys.
  std::string kind, seed, dt, jobs, out, dict, horizon, x0, cost, mode, configs, per_basis,
      draws, weights;
};

RunConfig LoadConfig(const Flags& f) {
  std::vector<std::string> sets;
  auto shortcut = [&](const std::string& value, const char* key) {
    if (!value.empty()) sets.push_back(std::string(key) + "=" + value);
  };
  shortcut(f.kind, "general.kind");
  shortcut(f.seed, "general.seed");
  shortcut(f.dt, "general.dt");
  shortcut(f.jobs, "general.jobs");
  shortcut(f.out, "general.output_dir");
  shortcut(f.dict, "general.dictionary");
  shortcut(f.horizon, "ocp.horizon");
  shortcut(f.x0, "closedloop.x0");
  shortcut(f.cost, "ocp.cost");
  shortcut(f.mode, "ocp.mode");
  shortcut(f.configs, "experiments.configs");
  shortcut(f.per_basis, "fit.per_basis");
  shortcut(f.draws, "experiments.draws");
  if (!f.weights.empty()) {
    // State weights followed by the two input weights.
    const size_t count = ParseDoubleList(f.weights).size();
    if (count < 3) throw ConfigError("--weights needs state weights and two input weights");
    std::string q, r;
    std::istringstream in(f.weights);
    std::string item;
    for (size_t i = 0; std::getline(in, item, ','); ++i) {
      std::string& dst = i + 2 < count ? q : r;
      if (!dst.empty()) dst += ",";
      dst += item;
    }
    sets.push_back("ocp.q=" + q);
    sets.push_back("ocp.r=" + r);
  }
  sets.insert(sets.end(), f.sets.begin(), f.sets.end());
  return f.config.empty() ? RunConfig::FromOverrides(sets) : RunConfig::Load(f.config, sets);
}

std::filesystem::path OutputDir(const RunConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir());
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

std::ofstream OpenOut(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void Close(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
  std::cout << "wrote " << path.string() << "\n";
}

uint64_t Fnv1a(const std::string& text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct LoadedRecording {
  RawRecording recording;
  std::string hash;
};

LoadedRecording ObtainRecording(const RunConfig& cfg, const std::string& path) {
  LoadedRecording out;
  std::ostringstream text;
  if (path.empty()) {
    out.recording = Sample(cfg.Sampling());
    WriteRecording(text, out.recording);
  } else {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open recording '" + path + "'");
    text << in.rdbuf();
    std::istringstream parse(text.str());
    out.recording = ReadRecording(parse);
  }
  const RawRecording& r = out.recording;
  if (r.kind != cfg.kind()) {
    throw ConfigError("recording is " + ToString(r.kind) + " but the config is " +
                      ToString(cfg.kind()));
  }
  const PostprocessSpec pp = cfg.Postprocess();
  if (std::abs(r.dt - pp.dt) > 1e-12 || r.SamplesPerStep() != pp.Offset()) {
    throw ConfigError("recording rates (dt " + std::to_string(r.dt) + ", " +
                      std::to_string(r.sensor_rate) + " Hz) differ from the config");
  }
  out.hash = Hex(Fnv1a(text.str()));
  return out;
}

LabeledDataset Select(const RunConfig& cfg, const LabeledDataset& data) {
  const size_t d = cfg.PerBasis();
  if (d == 0) return data;
  for (const auto& p : data.partitions) {
    if (p.x.size() < d) {
      throw ConfigError("fit.per_basis = " + std::to_string(d) + " exceeds the " +
                        std::to_string(p.x.size()) + " available pairs");
    }
  }
  return cfg.Selection() == "first" ? data.Truncated(d) : data.Subsampled(d, cfg.seed() + d);
}

struct FittedModel {
  std::shared_ptr<const KoopmanSurrogate> surrogate;
  std::vector<std::string> provenance;
};

FittedModel Fit(const RunConfig& cfg, const LoadedRecording& rec) {
  const LabeledDataset data = Select(cfg, BuildDataset(rec.recording, cfg.Postprocess(), cfg.kind()));
  FittedModel out;
  out.surrogate = std::make_shared<const KoopmanSurrogate>(FitSurrogate(
      FindDictionary(cfg.dictionary()), data, cfg.Regression(), cfg.kind() == ModelKind::kDynamic));
  out.provenance = cfg.Provenance();
  out.provenance.push_back("dataset_hash=" + rec.hash);
  out.provenance.push_back("window=" + cfg.Get("postprocess.window"));
  out.provenance.push_back("ridge=" + cfg.Get("fit.ridge"));
  out.provenance.push_back("pairs=" + std::to_string(data.TotalPairs()));
  return out;
}

std::shared_ptr<const KoopmanSurrogate> ObtainModel(const RunConfig& cfg, const Flags& f) {
  if (f.model.empty()) return Fit(cfg, ObtainRecording(cfg, f.recording)).surrogate;
  std::ifstream in(f.model);
  if (!in) throw IoError("cannot open model '" + f.model + "'");
  auto model = std::make_shared<const KoopmanSurrogate>(KoopmanSurrogate::Load(in));
  if (model->kind() != cfg.kind()) throw ConfigError("model does not fit the configured robot");
  if (std::abs(model->dt() - cfg.dt()) > 1e-12) {
    throw ConfigError("model dt " + std::to_string(model->dt()) + " differs from general.dt");
  }
  return model;
}

int CmdSample(const RunConfig& cfg, const Flags&) {
  const SamplingSpec spec = cfg.Sampling();
  const auto dir = OutputDir(cfg);
  const RawRecording rec = Sample(spec);
  const auto path = dir / "recording.csv";
  auto out = OpenOut(path);
  WriteRecording(out, rec, cfg.Provenance());
  Close(out, path);
  const auto segments = rec.SegmentsPerBasis();
  const auto steps = rec.StepsPerBasis();
  for (size_t i = 0; i < segments.size(); ++i) {
    std::cout << "basis " << i << " (" << rec.bases[i](0) << ", " << rec.bases[i](1)
              << "): " << segments[i] << " segments, ~" << steps[i] << " pairs\n";
  }
  return 0;
}

int CmdFit(const RunConfig& cfg, const Flags& f) {
  const auto dir = OutputDir(cfg);
  const FittedModel m = Fit(cfg, ObtainRecording(cfg, f.recording));
  const auto path = dir / "model.txt";
  auto out = OpenOut(path);
  m.surrogate->Save(out, m.provenance);
  Close(out, path);
  const auto& mats = m.surrogate->matrices();
  std::cout << cfg.dictionary() << ": " << mats.size() << " matrices of size " << mats[0].rows()
            << "x" << mats[0].cols() << "\n";
  for (size_t i = 0; i < m.surrogate->diagnostics().size(); ++i) {
    const auto& d = m.surrogate->diagnostics()[i];
    std::cout << "basis " << i << ": " << d.samples << " pairs, cond " << d.condition
              << (d.ill_conditioned ? " (ill-conditioned)" : "") << "\n";
  }
  return 0;
}

int CmdOpenLoop(const RunConfig& cfg, const Flags& f) {
  if (cfg.kind() != ModelKind::kDynamic) {
    throw ConfigError("open-loop reference runs exist for the dynamic robot only");
  }
  const auto dir = OutputDir(cfg);
  const LoadedRecording training = ObtainRecording(cfg, f.recording);
  const auto candidates =
      FitCandidates(training.recording, cfg.Dictionaries(), cfg.Windows(), cfg.Regression());
  const int horizon = cfg.OpenLoopHorizon();
  for (const ReferenceShape shape : cfg.Shapes()) {
    const auto runs = ReferenceRuns(shape, cfg.ReferenceCount(), cfg.Reference());
    const OpenLoopReport report = OpenLoopStudy(runs, candidates, horizon);
    const auto path = dir / ("openloop_" + ToString(shape) + ".csv");
    auto out = OpenOut(path);
    auto provenance = cfg.Provenance();
    provenance.push_back("dataset_hash=" + training.hash);
    WriteOpenLoopCsv(out, report, provenance);
    Close(out, path);
    for (const auto& e : report.entries) {
      std::printf("%-8s %-8s w=%-3d %-8s worst %d-step: %.4f m, %.2f deg\n",
                  ToString(shape).c_str(), e.dictionary.empty() ? "nominal" : e.dictionary.c_str(),
                  e.window, ToString(e.variant).c_str(), horizon, e.table.WorstPosition(horizon),
                  e.table.WorstRotation(horizon) * 180.0 / kPi);
    }
  }
  return 0;
}

int CmdClosedLoop(const RunConfig& cfg, const Flags& f) {
  const auto dir = OutputDir(cfg);
  const OcpSpec spec = cfg.Ocp(ObtainModel(cfg, f));
  const ClosedLoopResult result =
      ClosedLoop(spec, cfg.kind(), cfg.InitialState(), cfg.Duration(), cfg.Goal());
  const auto path = dir / "closedloop.csv";
  auto out = OpenOut(path);
  WriteTrajectoryCsv(out, result, cfg.Provenance());
  Close(out, path);
  const StateVector& xf = result.states.back();
  std::printf("final state:");
  for (Eigen::Index i = 0; i < xf.size(); ++i) std::printf(" %.6g", xf(i));
  std::printf("\n|x2(%g s)| = %.3e m\n", result.times.back(), std::abs(xf(1)));
  if (result.failed) std::cout << "run failed at step " << result.failure_step << ": " << result.failure << "\n";
  return 0;
}

void WriteReports(const RunConfig& cfg, const std::filesystem::path& dir,
                  const std::vector<EcdfReport>& reports, const std::string& suffix) {
  for (const auto& r : reports) {
    const auto path = dir / ("ecdf_" + r.label + suffix + ".csv");
    auto out = OpenOut(path);
    WriteEcdfCsv(out, r, cfg.Provenance());
    Close(out, path);
  }
}

int CmdMonteCarlo(const RunConfig& cfg, const Flags& f) {
  const auto dir = OutputDir(cfg);
  const auto model = ObtainModel(cfg, f);
  const auto reports = MonteCarloClosedLoop(cfg.MonteCarlo(), model, cfg.Configs());
  WriteReports(cfg, dir, reports, "");
  const auto path = dir / "ecdf_summary.txt";
  auto out = OpenOut(path);
  for (const auto& line : cfg.Provenance()) out << "# " << line << "\n";
  WriteEcdfSummary(out, reports);
  Close(out, path);
  WriteEcdfSummary(std::cout, reports);
  return 0;
}

int CmdSweep(const RunConfig& cfg, const Flags& f) {
  const auto dir = OutputDir(cfg);
  const LoadedRecording rec = ObtainRecording(cfg, f.recording);
  const LabeledDataset data = BuildDataset(rec.recording, cfg.Postprocess(), cfg.kind());
  const auto points =
      DataEfficiencySweep(data, cfg.dictionary(), cfg.Regression(),
                          cfg.kind() == ModelKind::kDynamic, cfg.SweepSizes(), cfg.MonteCarlo(),
                          cfg.Controller());
  std::vector<EcdfReport> reports;
  for (const auto& p : points) reports.push_back(p.report);
  WriteReports(cfg, dir, reports, "");
  const auto path = dir / "sweep_summary.txt";
  auto out = OpenOut(path);
  for (const auto& line : cfg.Provenance()) out << "# " << line << "\n";
  out << "# dataset_hash=" << rec.hash << "\n";
  WriteEcdfSummary(out, reports);
  Close(out, path);
  WriteEcdfSummary(std::cout, reports);
  return 0;
}

int Run(int argc, char** argv) {
  CLI::App app("Bilinear Koopman surrogates and MPC for differential-drive robots", "kmpc");
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "INI config file");
  app.add_option("--set", f.sets, "Override section.key=value (repeatable)");
  app.add_option("--kind", f.kind, "kinematic|dynamic");
  app.add_option("--seed", f.seed, "general.seed");
  app.add_option("--dt", f.dt, "Sampling period shared by all stages [s]");
  app.add_option("--jobs", f.jobs, "Worker thread cap");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--dict", f.dict, "D5t|D8Eul|D10m|D13t|D12f");
  app.add_option("--H", f.horizon, "Prediction horizon [steps]");
  app.add_option("--x0", f.x0, "Initial state, comma separated");
  app.add_option("--cost", f.cost, "me|ce|ds");
  app.add_option("--mode", f.mode, "proj|noproj|nominal");
  app.add_option("--weights", f.weights, "me cost weights q1..qn,r1,r2");
  app.add_option("--configs", f.configs, "Monte-Carlo configurations, e.g. me-proj,ce-proj");
  app.add_option("--per-basis", f.per_basis, "Pairs per basis used for fitting (0 = all)");
  app.add_option("--draws", f.draws, "Monte-Carlo draws");
  app.add_option("--recording", f.recording, "Recording CSV (sampled afresh if omitted)");
  app.add_option("--model", f.model, "Model file (fitted afresh if omitted)");

  using Command = int (*)(const RunConfig&, const Flags&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands = {
      {"sample", "Generate a training recording", CmdSample},
      {"fit", "Fit a surrogate from a recording", CmdFit},
      {"openloop", "Open-loop prediction errors on reference runs", CmdOpenLoop},
      {"closedloop", "Run one receding-horizon closed loop", CmdClosedLoop},
      {"montecarlo", "Closed-loop ECDFs over random initial poses", CmdMonteCarlo},
      {"sweep", "Data-efficiency sweep over pairs per basis", CmdSweep},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help, cmd] : commands) subs.push_back(app.add_subcommand(name, help));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const RunConfig cfg = LoadConfig(f);
    for (size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) return std::get<2>(commands[i])(cfg, f);
    }
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InfeasibleSpecError& e) {
    std::cerr << "infeasible sampling spec: " << e.what() << "\n";
    return 3;
  } catch (const RegressionError& e) {
    std::cerr << "regression failed: " << e.what() << "\n";
    return 4;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 5;
  }
}

}  // namespace
}  // namespace kmpc

int main(int argc, char** argv) { return kmpc::Run(argc, argv); }
