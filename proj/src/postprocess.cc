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

#include "kmpc/postprocess.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "kmpc/vehicle.h"

namespace kmpc {

namespace {

std::vector<double> MovingAverage(std::span<const double> x, int window) {
  const long n = static_cast<long>(x.size());
  const long half = window / 2;
  std::vector<double> out(x.size());
  // Prefix sums keep wide windows cheap.
  std::vector<double> prefix(x.size() + 1, 0.0);
  for (long i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  for (long i = 0; i < n; ++i) {
    const long h = std::min({half, i, n - 1 - i});
    if (h == 0) {
      out[i] = x[i];
      continue;
    }
    out[i] = (prefix[i + h + 1] - prefix[i - h]) / static_cast<double>(2 * h + 1);
  }
  return out;
}

struct Track {
  std::vector<double> t;
  std::vector<double> x1;
  std::vector<double> x2;
  std::vector<double> theta;  // continued
  std::vector<double> v;
  std::vector<double> omega;
};

// Velocity estimates for the samples [first, last] of a track, smoothed
// over that range only.
void EstimateVelocities(const Track& track, size_t first, size_t last, int window,
                        std::vector<double>& v, std::vector<double>& omega) {
  const std::span<const double> t(track.t);
  const auto d1 = CentralDiff(t, track.x1);
  const auto d2 = CentralDiff(t, track.x2);
  const auto dth = CentralDiff(t, track.theta);
  std::vector<double> vb(last - first + 1);
  std::vector<double> wb(last - first + 1);
  for (size_t i = first; i <= last; ++i) {
    vb[i - first] = ToBodyFrame({d1[i], d2[i]}, track.theta[i])(0);
    wb[i - first] = dth[i];
  }
  v = MovingAverage(vb, window);
  omega = MovingAverage(wb, window);
}

void EmitPairs(const Track& track, size_t first, size_t last, int offset, ModelKind kind,
               const std::vector<double>& v, const std::vector<double>& omega,
               BasisPartition& part) {
  const int n = StateDim(kind);
  for (size_t i = first; i + offset <= last; ++i) {
    const size_t j = i + offset;
    StateVector x(n);
    StateVector y(n);
    const double shift = NormalizeAngle(track.theta[i]) - track.theta[i];
    x(0) = track.x1[i];
    x(1) = track.x2[i];
    x(2) = track.theta[i] + shift;
    y(0) = track.x1[j];
    y(1) = track.x2[j];
    y(2) = track.theta[j] + shift;
    if (kind == ModelKind::kDynamic) {
      x(3) = v[i - first];
      x(4) = omega[i - first];
      y(3) = v[j - first];
      y(4) = omega[j - first];
    }
    part.x.push_back(x);
    part.y.push_back(y);
  }
}

}  // namespace

int PostprocessSpec::Offset() const { return static_cast<int>(std::lround(sensor_rate * dt)); }

void PostprocessSpec::Validate() const {
  if (window < 1) throw ConfigError("smoothing window must be at least 1");
  if (!(dt > 0.0) || !(sensor_rate > 0.0)) throw ConfigError("dt and sensor rate must be positive");
  const double r = sensor_rate * dt;
  if (std::lround(r) < 1 || std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r)) {
    throw ConfigError("sensor_rate * dt must be a positive integer");
  }
}

std::vector<double> CentralDiff(std::span<const double> t, std::span<const double> x) {
  const size_t n = t.size();
  if (n != x.size()) throw std::invalid_argument("time and value series differ in length");
  if (n < 3) throw std::invalid_argument("central differences need at least 3 samples");
  for (size_t i = 1; i < n; ++i) {
    if (!(t[i] > t[i - 1])) throw std::invalid_argument("timestamps must strictly increase");
  }
  std::vector<double> d(n);
  d[0] = (x[1] - x[0]) / (t[1] - t[0]);
  for (size_t i = 1; i + 1 < n; ++i) d[i] = (x[i + 1] - x[i - 1]) / (t[i + 1] - t[i - 1]);
  d[n - 1] = (x[n - 1] - x[n - 2]) / (t[n - 1] - t[n - 2]);
  return d;
}

Eigen::Vector2d ToBodyFrame(const Eigen::Vector2d& inertial_velocity, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * inertial_velocity(0) + s * inertial_velocity(1),
          -s * inertial_velocity(0) + c * inertial_velocity(1)};
}

std::vector<double> SmoothSegments(std::span<const double> series,
                                   const std::vector<std::pair<size_t, size_t>>& segments,
                                   int window) {
  if (window < 1) throw std::invalid_argument("smoothing window must be at least 1");
  std::vector<double> out(series.begin(), series.end());
  for (const auto& [first, last] : segments) {
    if (last < first || last >= series.size()) {
      throw std::invalid_argument("segment is empty or out of range");
    }
    const auto smoothed = MovingAverage(series.subspan(first, last - first + 1), window);
    std::copy(smoothed.begin(), smoothed.end(), out.begin() + static_cast<long>(first));
  }
  return out;
}

std::vector<double> ContinueAngles(std::span<const double> theta) {
  std::vector<double> out(theta.begin(), theta.end());
  for (size_t i = 1; i < out.size(); ++i) {
    out[i] = out[i - 1] + NormalizeAngle(theta[i] - theta[i - 1]);
  }
  return out;
}

LabeledDataset BuildDataset(const RawRecording& recording, const PostprocessSpec& spec,
                            ModelKind kind) {
  spec.Validate();
  recording.Validate();
  if (recording.kind != kind) throw std::invalid_argument("recording and model kind differ");
  if (std::abs(recording.dt - spec.dt) > 1e-12 || recording.SamplesPerStep() != spec.Offset() ||
      std::abs(recording.sensor_rate - spec.sensor_rate) > 1e-9) {
    throw std::invalid_argument("recording rates do not match the postprocessing spec");
  }
  const bool any_basis = std::any_of(recording.segments.begin(), recording.segments.end(),
                                     [](const SegmentAnnotation& s) { return s.basis >= 0; });
  if (!any_basis) throw std::invalid_argument("recording has no basis annotations");

  Track track;
  const size_t n = recording.poses.size();
  track.t.resize(n);
  track.x1.resize(n);
  track.x2.resize(n);
  std::vector<double> raw_theta(n);
  for (size_t i = 0; i < n; ++i) {
    track.t[i] = recording.poses[i].t;
    track.x1[i] = recording.poses[i].value(0);
    track.x2[i] = recording.poses[i].value(1);
    raw_theta[i] = recording.poses[i].value(2);
  }
  track.theta = ContinueAngles(raw_theta);

  LabeledDataset data;
  data.kind = kind;
  data.dt = spec.dt;
  data.partitions.resize(recording.bases.size());
  for (size_t b = 0; b < recording.bases.size(); ++b) data.partitions[b].input = recording.bases[b];

  std::vector<double> d1, d2, dth;
  if (kind == ModelKind::kDynamic) {
    d1 = CentralDiff(track.t, track.x1);
    d2 = CentralDiff(track.t, track.x2);
    dth = CentralDiff(track.t, track.theta);
  }
  const int offset = spec.Offset();
  for (const auto& seg : recording.segments) {
    if (seg.basis < 0) continue;
    const auto first = static_cast<size_t>(seg.first);
    const auto last = static_cast<size_t>(seg.last);
    std::vector<double> v, omega;
    if (kind == ModelKind::kDynamic) {
      std::vector<double> vb(last - first + 1), wb(last - first + 1);
      for (size_t i = first; i <= last; ++i) {
        vb[i - first] = ToBodyFrame({d1[i], d2[i]}, track.theta[i])(0);
        wb[i - first] = dth[i];
      }
      v = MovingAverage(vb, spec.window);
      omega = MovingAverage(wb, spec.window);
    }
    EmitPairs(track, first, last, offset, kind, v, omega, data.partitions[seg.basis]);
  }
  return data;
}

std::vector<double> LateralVelocity(const RawRecording& recording) {
  const size_t n = recording.poses.size();
  std::vector<double> t(n), x1(n), x2(n), th(n);
  for (size_t i = 0; i < n; ++i) {
    t[i] = recording.poses[i].t;
    x1[i] = recording.poses[i].value(0);
    x2[i] = recording.poses[i].value(1);
    th[i] = recording.poses[i].value(2);
  }
  const auto d1 = CentralDiff(t, x1);
  const auto d2 = CentralDiff(t, x2);
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = ToBodyFrame({d1[i], d2[i]}, th[i])(1);
  return out;
}

LabeledDataset ReadExternalDataset(std::istream& in, const std::vector<Input>& bases,
                                   const PostprocessSpec& spec, ModelKind kind) {
  spec.Validate();
  std::string line;
  long lineno = 0;
  std::vector<std::string> columns;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) columns.push_back(c);
    break;
  }
  const bool with_velocity = columns.size() == 7;
  if (!(columns.size() == 5 || with_velocity) || columns[0] != "basis" || columns[1] != "t" ||
      columns[2] != "x1" || columns[3] != "x2" || columns[4] != "theta" ||
      (with_velocity && (columns[5] != "v" || columns[6] != "omega"))) {
    throw IoError("external dataset header must be basis,t,x1,x2,theta[,v,omega]");
  }
  struct Row {
    int basis;
    double f[6];
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string c;
    std::vector<std::string> f;
    while (std::getline(ss, c, ',')) f.push_back(c);
    if (f.size() != columns.size()) {
      throw IoError("line " + std::to_string(lineno) + ": wrong number of fields");
    }
    Row r{};
    try {
      r.basis = std::stoi(f[0]);
      for (size_t k = 1; k < f.size(); ++k) r.f[k - 1] = std::stod(f[k]);
    } catch (const std::exception&) {
      throw IoError("line " + std::to_string(lineno) + ": malformed number");
    }
    if (r.basis < 0 || r.basis >= static_cast<int>(bases.size())) {
      throw IoError("line " + std::to_string(lineno) + ": unknown basis index");
    }
    rows.push_back(r);
  }
  if (kind == ModelKind::kDynamic && !with_velocity && rows.size() < 3) {
    throw IoError("external dataset too short");
  }

  LabeledDataset data;
  data.kind = kind;
  data.dt = spec.dt;
  data.partitions.resize(bases.size());
  for (size_t b = 0; b < bases.size(); ++b) data.partitions[b].input = bases[b];
  const double step = 1.0 / spec.sensor_rate;
  const int offset = spec.Offset();
  size_t start = 0;
  while (start < rows.size()) {
    size_t end = start;
    while (end + 1 < rows.size() && rows[end + 1].basis == rows[start].basis &&
           std::abs(rows[end + 1].f[0] - rows[end].f[0] - step) < 0.25 * step) {
      ++end;
    }
    Track track;
    std::vector<double> raw_theta;
    for (size_t i = start; i <= end; ++i) {
      track.t.push_back(rows[i].f[0]);
      track.x1.push_back(rows[i].f[1]);
      track.x2.push_back(rows[i].f[2]);
      raw_theta.push_back(rows[i].f[3]);
      if (with_velocity) {
        track.v.push_back(rows[i].f[4]);
        track.omega.push_back(rows[i].f[5]);
      }
    }
    track.theta = ContinueAngles(raw_theta);
    const size_t last = end - start;
    std::vector<double> v = track.v;
    std::vector<double> omega = track.omega;
    if (kind == ModelKind::kDynamic && !with_velocity) {
      if (last + 1 < 3) {
        start = end + 1;
        continue;
      }
      EstimateVelocities(track, 0, last, spec.window, v, omega);
    }
    EmitPairs(track, 0, last, offset, kind, v, omega, data.partitions[rows[start].basis]);
    start = end + 1;
  }
  return data;
}

}  // namespace kmpc
