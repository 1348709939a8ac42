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


#include <cmath>
#include <iomanip>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "generators.h"
#include "kmpc/postprocess.h"
#include "kmpc/sampler.h"
#include "kmpc/vehicle.h"

namespace kmpc {
namespace {

std::vector<double> Times(int n, double rate) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = i / rate;
  return t;
}

SamplingSpec Noiseless(SamplingSpec s) {
  s.position_noise = 0.0;
  s.heading_noise = 0.0;
  return s;
}

TEST(CentralDiffTest, LinearSignal) {
  const auto t = Times(50, 240.0);
  const auto d = CentralDiff(t, t);
  for (double v : d) EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(CentralDiffTest, ConstantSignal) {
  const auto t = Times(10, 240.0);
  const std::vector<double> x(10, 0.7);
  for (double v : CentralDiff(t, x)) EXPECT_EQ(v, 0.0);
}

TEST(CentralDiffTest, ExactForQuadraticAtMidpoint) {
  const std::vector<double> t = {0.0, 1.0 / 240, 2.0 / 240};
  std::vector<double> x;
  for (double s : t) x.push_back(s * s);
  EXPECT_NEAR(CentralDiff(t, x)[1], 2.0 * t[1], 1e-15);
}

TEST(CentralDiffTest, RejectsBadTimestamps) {
  const std::vector<double> t = {0.0, 0.1, 0.1, 0.2};
  const std::vector<double> x(4, 0.0);
  EXPECT_THROW(CentralDiff(t, x), std::invalid_argument);
  EXPECT_THROW(CentralDiff(std::vector<double>{0.0, 0.1}, std::vector<double>{0.0, 0.0}),
               std::invalid_argument);
}

TEST(BodyFrameTest, Examples) {
  EXPECT_NEAR((ToBodyFrame({1, 0}, 0.0) - Eigen::Vector2d(1, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((ToBodyFrame({0, 1}, kPi / 2) - Eigen::Vector2d(1, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((ToBodyFrame({1, 1}, kPi / 4) - Eigen::Vector2d(std::sqrt(2.0), 0)).norm(), 0.0,
              1e-15);
}

TEST(SmoothSegmentsTest, ConstantUnchanged) {
  const std::vector<double> x(100, 2.5);
  const auto y = SmoothSegments(x, {{0, 99}}, 40);
  for (double v : y) EXPECT_NEAR(v, 2.5, 1e-15);
}

TEST(SmoothSegmentsTest, LinearRampUnchanged) {
  std::vector<double> x(100);
  for (int i = 0; i < 100; ++i) x[i] = 0.3 + 0.01 * i;
  const auto y = SmoothSegments(x, {{0, 99}}, 40);
  for (int i = 0; i < 100; ++i) EXPECT_NEAR(y[i], x[i], 1e-13) << i;
}

TEST(SmoothSegmentsTest, NoBleedAcrossSegments) {
  std::vector<double> x(100, 0.0);
  for (int i = 50; i < 100; ++i) x[i] = 1.0;
  const auto y = SmoothSegments(x, {{0, 49}, {50, 99}}, 40);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(y[i], 0.0);
  for (int i = 50; i < 100; ++i) EXPECT_NEAR(y[i], 1.0, 1e-15);
  // A single global window does bleed.
  const auto g = SmoothSegments(x, {{0, 99}}, 40);
  EXPECT_GT(g[49], 0.1);
  EXPECT_LT(g[50], 0.9);
}

TEST(SmoothSegmentsTest, RejectsBadSegments) {
  const std::vector<double> x(10, 0.0);
  EXPECT_THROW(SmoothSegments(x, {{5, 12}}, 3), std::invalid_argument);
  EXPECT_THROW(SmoothSegments(x, {{6, 5}}, 3), std::invalid_argument);
}

TEST(SmoothSegmentsPropertyTest, IdempotentOnRampsInRandomSegments) {
  testing::Gen gen(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = gen.Int(20, 300);
    std::vector<std::pair<size_t, size_t>> segs;
    std::vector<double> x(n);
    size_t start = 0;
    while (start < static_cast<size_t>(n)) {
      const size_t end = std::min<size_t>(n - 1, start + gen.Int(0, 80));
      const double a = gen.Uniform(-1, 1), b = gen.Uniform(-0.1, 0.1);
      for (size_t i = start; i <= end; ++i) x[i] = a + b * static_cast<double>(i - start);
      segs.emplace_back(start, end);
      start = end + 1;
    }
    const auto y = SmoothSegments(x, segs, gen.Int(1, 60));
    for (int i = 0; i < n; ++i) ASSERT_NEAR(y[i], x[i], 1e-12);
  }
}

TEST(ContinueAnglesTest, ShortestPathUnwrap) {
  const auto y = ContinueAngles(std::vector<double>{3.1, -3.1});
  EXPECT_DOUBLE_EQ(y[0], 3.1);
  EXPECT_NEAR(y[1], 3.1 + (2 * kPi - 6.2), 1e-15);
  EXPECT_NEAR(y[1], 3.18319, 1e-5);
}

TEST(ContinueAnglesTest, MonotoneSeriesUnchanged) {
  std::vector<double> x;
  for (int i = 0; i < 50; ++i) x.push_back(-3.0 + 0.12 * i);
  EXPECT_EQ(ContinueAngles(x), x);
}

TEST(ContinueAnglesTest, FullRevolution) {
  std::vector<double> x;
  for (int i = 0; i < 100; ++i) x.push_back(NormalizeAngle(0.5 + 2 * kPi * i / 99.0));
  const auto y = ContinueAngles(x);
  EXPECT_NEAR(y.back(), y.front() + 2 * kPi, 1e-12);
}

TEST(BuildDatasetTest, KinematicPairCountsAndExactness) {
  SamplingSpec spec = Noiseless(DefaultKinematicSpec());
  spec.dt = 0.1;
  spec.sensor_rate = 20.0;
  const RawRecording rec = SampleKinematic(spec);
  PostprocessSpec pp{1, 0.1, 20.0};
  const LabeledDataset data = BuildDataset(rec, pp, ModelKind::kKinematic);
  std::vector<long> expected(2, 0);
  for (const auto& s : rec.segments) {
    if (s.basis >= 0) expected[s.basis] += (s.last - s.first + 1) - pp.Offset();
  }
  for (int b = 0; b < 2; ++b) {
    const auto& p = data.partitions[b];
    EXPECT_EQ(static_cast<long>(p.x.size()), expected[b]);
    for (size_t j = 0; j < p.x.size(); ++j) {
      const StateVector want = ZohStep(ModelKind::kKinematic, p.x[j], p.input, 0.1);
      ASSERT_NEAR((p.y[j] - want).cwiseAbs().maxCoeff(), 0.0, 1e-9);
      ASSERT_GT(p.x[j](2), -kPi);
      ASSERT_LE(p.x[j](2), kPi);
    }
  }
}

TEST(BuildDatasetTest, SuccessorAngleKeepsShift) {
  RawRecording rec;
  rec.kind = ModelKind::kKinematic;
  rec.dt = 0.1;
  rec.sensor_rate = 10.0;
  rec.bases = {Input(0.2, 3.0), Input(0.2, -3.0)};
  PoseState p0{0.0, 0.0, 3.0};
  const PoseState p1 = KinematicZohStep(p0, {0.2, 3.0}, 0.1);
  const PoseState p2 = KinematicZohStep(p1, {0.2, -3.0}, 0.1);
  for (const PoseState& p : {p0, p1, p2}) {
    rec.poses.push_back({rec.PoseTime(static_cast<long>(rec.poses.size())),
                         Eigen::Vector3d(p.x1, p.x2, NormalizeAngle(p.theta))});
  }
  rec.inputs = {{0.0, Eigen::Vector3d(0.2, 3.0, 0)}, {0.1, Eigen::Vector3d(0.2, -3.0, 1)}};
  rec.segments = {{0, 0, 1, ProfileKind::kConstant}, {1, 1, 2, ProfileKind::kConstant}};
  const LabeledDataset data = BuildDataset(rec, {1, 0.1, 10.0}, ModelKind::kKinematic);
  ASSERT_EQ(data.partitions[0].x.size(), 1u);
  EXPECT_NEAR(data.partitions[0].x[0](2), 3.0, 1e-15);
  EXPECT_NEAR(data.partitions[0].y[0](2), 3.3, 1e-12);
}

TEST(BuildDatasetTest, MisalignedRatesRejected) {
  const RawRecording rec = SampleKinematic(DefaultKinematicSpec());
  EXPECT_ANY_THROW(BuildDataset(rec, {1, 0.1, 25.0}, ModelKind::kKinematic));
}

TEST(BuildDatasetTest, InteriorPairConsistencyWithoutSmoothing) {
  SamplingSpec spec = Noiseless(DefaultDynamicSpec());
  spec.segments_per_basis = 4;
  const RawRecording rec = SampleDynamic(spec);
  const LabeledDataset data = BuildDataset(rec, {1, 0.05, 240.0}, ModelKind::kDynamic);
  // Pairs whose velocity stencil straddles an input switch are excluded.
  for (const auto& p : data.partitions) {
    int straddling = 0;
    double worst = 0.0;
    for (size_t j = 0; j < p.x.size(); ++j) {
      const StateVector want = ZohStep(ModelKind::kDynamic, p.x[j], p.input, 0.05);
      const double e = (p.y[j] - want).cwiseAbs().maxCoeff();
      if (e > 1e-6) {
        ++straddling;
      } else {
        worst = std::max(worst, e);
      }
    }
    EXPECT_LE(straddling, 2 * spec.segments_per_basis);
    EXPECT_LE(worst, 1e-6);
  }
}

TEST(BuildDatasetTest, LateralVelocityIsSecondOrderSmall) {
  SamplingSpec spec = Noiseless(DefaultDynamicSpec());
  spec.segments_per_basis = 4;
  const RawRecording rec = SampleDynamic(spec);
  const auto lateral = LateralVelocity(rec);
  const double h = 1.0 / spec.sensor_rate;
  double worst = 0.0;
  for (size_t i = 1; i + 1 < lateral.size(); ++i) worst = std::max(worst, std::abs(lateral[i]));
  EXPECT_LE(worst, h * h);
}

TEST(BuildDatasetTest, FullScaleDynamicPairCounts) {
  const RawRecording rec = SampleDynamic(DefaultDynamicSpec());
  const LabeledDataset data = BuildDataset(rec, {40, 0.05, 240.0}, ModelKind::kDynamic);
  const double reference[3] = {108106, 13705, 24910};
  for (int b = 0; b < 3; ++b) {
    const double n = static_cast<double>(data.partitions[b].x.size());
    EXPECT_GE(n, reference[b] / 3.0) << b;
    EXPECT_LE(n, reference[b] * 3.0) << b;
  }
}

TEST(ExternalDatasetTest, ReadsPosesWithVelocities) {
  std::ostringstream csv;
  csv << "basis,t,x1,x2,theta,v,omega\n";
  StateVector z(5);
  z << 0.1, 0.2, 0.3, 0.2, 0.1;
  const Input u(0.2, 0.0);
  for (int i = 0; i < 30; ++i) {
    csv << 0 << "," << i / 240.0;
    for (int k = 0; k < 5; ++k) csv << "," << std::setprecision(17) << z(k);
    csv << "\n";
    z = ZohStep(ModelKind::kDynamic, z, u, 1.0 / 240.0);
  }
  std::istringstream in(csv.str());
  const LabeledDataset data = ReadExternalDataset(in, {Input(0.2, 0.0)}, {1, 0.05, 240.0},
                                                  ModelKind::kDynamic);
  ASSERT_EQ(data.partitions.size(), 1u);
  EXPECT_EQ(data.partitions[0].x.size(), 30u - 12u);
  const auto& p = data.partitions[0];
  const StateVector want = ZohStep(ModelKind::kDynamic, p.x[0], u, 0.05);
  EXPECT_LE((p.y[0] - want).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ExternalDatasetTest, BadHeaderThrows) {
  std::istringstream in("t,x1,x2\n");
  EXPECT_THROW(ReadExternalDataset(in, {Input(0.2, 0.0)}, {1, 0.05, 240.0}, ModelKind::kDynamic),
               IoError);
}

}  // namespace
}  // namespace kmpc
