// Copyright 2026 The MVD Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mvd/distillation.hpp"
#include "support/oracles.hpp"

namespace {

using mvd::Vector;

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

oracle::Vec ovec(const Vector& v) { return oracle::Vec(v.data(), v.data() + v.size()); }

mvd::Distribution<double> dist(std::initializer_list<double> probs) {
  mvd::Distribution<double> d;
  d.probs = vec(probs);
  d.log_probs = d.probs.array().log();
  return d;
}

mvd::ScoreMatrix grids(mvd::ScoreGrid student, mvd::ScoreGrid teacher) {
  mvd::ScoreMatrix sm;
  sm.student_scores = std::move(student);
  sm.teacher_scores = std::move(teacher);
  mvd::pool_grids(sm);
  return sm;
}

mvd::ScoreGrid random_grid(mvd::Rng& rng, const std::vector<std::size_t>& views) {
  mvd::ScoreGrid g;
  for (std::size_t n : views) {
    Vector row(static_cast<Eigen::Index>(n));
    for (Eigen::Index t = 0; t < row.size(); ++t) row(t) = rng.uniform(-3, 3);
    g.push_back(row);
  }
  return g;
}

TEST(Softmax, UniformOnEqualScores) {
  const auto d = mvd::softmax(vec({0, 0}));
  EXPECT_DOUBLE_EQ(d.probs(0), 0.5);
  EXPECT_DOUBLE_EQ(d.probs(1), 0.5);
}

TEST(Softmax, SpotValues) {
  const auto d = mvd::softmax(vec({1, 2, 3}));
  const auto o = oracle::softmax({1, 2, 3});
  const double expected[] = {0.09003057, 0.24472847, 0.66524096};
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(d.probs(i), expected[i], 1e-8);
    EXPECT_NEAR(d.probs(i), o[static_cast<std::size_t>(i)], 1e-15);
  }
}

TEST(Softmax, ShiftInvariantAndNormalized) {
  mvd::Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    Vector x(5);
    for (Eigen::Index i = 0; i < 5; ++i) x(i) = rng.uniform(-10, 10);
    const double c = rng.uniform(-50, 50);
    const auto a = mvd::softmax(x);
    const Vector shifted = (x.array() + c).matrix();
    const auto b = mvd::softmax(shifted);
    EXPECT_NEAR(a.probs.sum(), 1.0, 1e-12);
    EXPECT_LT((a.probs - b.probs).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Softmax, LargeScoresStayFinite) {
  const auto d = mvd::softmax(vec({1000, 1001}));
  EXPECT_TRUE(d.probs.allFinite());
  EXPECT_NEAR(d.probs(1), 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(Softmax, TemperatureDividesScores) {
  const auto a = mvd::softmax(vec({1, 2, 3}), 2.0);
  const auto b = mvd::softmax(vec({0.5, 1, 1.5}));
  EXPECT_LT((a.probs - b.probs).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Softmax, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(mvd::softmax(Vector()), mvd::ValidationError);
  EXPECT_THROW(mvd::softmax(vec({1, NAN})), mvd::NumericError);
}

TEST(Kl, IdentityIsZero) {
  const auto p = mvd::softmax(vec({0.3, -1, 2}));
  EXPECT_EQ(mvd::kl_divergence(p, p), 0.0);
}

TEST(Kl, SpotValue) {
  const double got = mvd::kl_divergence(dist({0.5, 0.5}), dist({0.9, 0.1}));
  EXPECT_NEAR(got, 0.51082562, 1e-8);
  EXPECT_NEAR(got, oracle::kl({0.5, 0.5}, {0.9, 0.1}), 1e-15);
}

TEST(Kl, NonNegativeOnRandomPairs) {
  mvd::Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    Vector a(4), b(4);
    for (Eigen::Index i = 0; i < 4; ++i) {
      a(i) = rng.uniform(-5, 5);
      b(i) = rng.uniform(-5, 5);
    }
    EXPECT_GE(mvd::kl_divergence(mvd::softmax(a), mvd::softmax(b)), -1e-12);
  }
}

TEST(Kl, LengthMismatchThrows) {
  EXPECT_THROW(mvd::kl_divergence(dist({1.0}), dist({0.5, 0.5})), mvd::ValidationError);
}

TEST(CrossAlignment, IdenticalGridsGiveZero) {
  mvd::Rng rng(1);
  const auto g = random_grid(rng, {3, 2, 1});
  EXPECT_NEAR(mvd::cross_alignment_loss(grids(g, g)), 0.0, 1e-12);
}

TEST(CrossAlignment, SpotValue) {
  const auto sm = grids({vec({1}), vec({2})}, {vec({2}), vec({1})});
  const double expected = oracle::kl(oracle::softmax({2, 1}), oracle::softmax({1, 2}));
  EXPECT_NEAR(mvd::cross_alignment_loss(sm), 0.462117, 1e-6);
  EXPECT_NEAR(mvd::cross_alignment_loss(sm), expected, 1e-12);
}

TEST(CrossAlignment, SharedShiftOfStudentScoresLeavesLossUnchanged) {
  mvd::Rng rng(2);
  const auto s = random_grid(rng, {2, 2, 2});
  const auto t = random_grid(rng, {2, 2, 2});
  auto shifted = s;
  for (auto& row : shifted) row.array() += 4.25;
  EXPECT_NEAR(mvd::cross_alignment_loss(grids(s, t)),
              mvd::cross_alignment_loss(grids(shifted, t)), 1e-12);
}

TEST(CrossAlignment, StudentReadAtTeacherView) {
  // The teacher prefers view 1 of candidate 0; the student's own maximum
  // there is view 0.
  const auto sm = grids({vec({5, 0}), vec({1, 1})}, {vec({0, 3}), vec({1, 0})});
  const double expected = oracle::kl(oracle::softmax({3, 1}), oracle::softmax({0, 1}));
  EXPECT_NEAR(mvd::cross_alignment_loss(sm, mvd::RelevantView::kTeacher), expected, 1e-12);
  const double own = oracle::kl(oracle::softmax({3, 1}), oracle::softmax({5, 1}));
  EXPECT_NEAR(mvd::cross_alignment_loss(sm, mvd::RelevantView::kStudent), own, 1e-12);
}

TEST(SelfAlignment, IdenticalGridsGiveZero) {
  mvd::Rng rng(3);
  const auto g = random_grid(rng, {3, 2, 4});
  EXPECT_NEAR(mvd::self_alignment_loss(grids(g, g)), 0.0, 1e-12);
}

TEST(SelfAlignment, SpotValue) {
  const auto sm = grids({vec({1, 0})}, {vec({0, 1})});
  EXPECT_NEAR(mvd::self_alignment_loss(sm), 0.462117, 1e-6);
}

TEST(SelfAlignment, ViewPermutationInvariant) {
  const auto a = grids({vec({0.1, 0.7, -0.3})}, {vec({1.2, -0.4, 0.5})});
  const auto b = grids({vec({-0.3, 0.1, 0.7})}, {vec({0.5, 1.2, -0.4})});
  EXPECT_NEAR(mvd::self_alignment_loss(a), mvd::self_alignment_loss(b), 1e-14);
}

TEST(SelfAlignment, SumsOverCandidates) {
  mvd::Rng rng(9);
  const auto s = random_grid(rng, {2, 3, 1});
  const auto t = random_grid(rng, {2, 3, 1});
  double expected = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    expected += oracle::kl(oracle::softmax(ovec(t[i])), oracle::softmax(ovec(s[i])));
  }
  const auto sm = grids(s, t);
  EXPECT_NEAR(mvd::self_alignment_loss(sm), expected, 1e-12);
  EXPECT_NEAR(mvd::self_alignment_loss(sm, 1.0, true, 1),
              oracle::kl(oracle::softmax(ovec(t[1])), oracle::softmax(ovec(s[1]))), 1e-12);
}

TEST(Supervised, UniformScores) {
  EXPECT_NEAR(mvd::supervised_loss(vec({0, 0}), 0), std::log(2.0), 1e-15);
}

TEST(Supervised, SaturatesTowardZero) {
  EXPECT_LT(mvd::supervised_loss(vec({30, 0, 0}), 0), 1e-12);
}

TEST(Supervised, SpotValue) {
  EXPECT_NEAR(mvd::supervised_loss(vec({1, 2, 3}), 2), 0.40760596, 1e-8);
  EXPECT_NEAR(mvd::supervised_loss(vec({1, 2, 3}), 2), oracle::supervised({1, 2, 3}, 2), 1e-14);
}

TEST(Supervised, GoldOutOfRangeThrows) {
  EXPECT_THROW(mvd::supervised_loss(vec({1, 2}), 2), mvd::ValidationError);
}

TEST(TotalLoss, ZeroWeightsReduceToSupervisedTerms) {
  mvd::Rng rng(5);
  const auto sm = grids(random_grid(rng, {2, 3, 2}), random_grid(rng, {2, 3, 2}));
  const auto l = mvd::total_loss(sm, 1, mvd::LossWeights{0.0, 0.0});
  EXPECT_EQ(l.total, l.de + l.ce);
}

TEST(TotalLoss, IdenticalGridsLeaveOnlySupervisedTerms) {
  mvd::Rng rng(6);
  const auto g = random_grid(rng, {3, 3});
  const auto l = mvd::total_loss(grids(g, g), 0, mvd::LossWeights{0.9, 2.0});
  EXPECT_NEAR(l.total, l.de + l.ce, 1e-12);
}

TEST(TotalLoss, RecomposesFromTermOracles) {
  mvd::Rng rng(7);
  const auto s = random_grid(rng, {3, 2, 2});
  const auto t = random_grid(rng, {3, 2, 2});
  const auto sm = grids(s, t);
  oracle::Vec de, ce, cross_s;
  double self = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto srow = ovec(s[i]);
    const auto trow = ovec(t[i]);
    const std::size_t arg_t = static_cast<std::size_t>(
        std::max_element(trow.begin(), trow.end()) - trow.begin());
    de.push_back(*std::max_element(srow.begin(), srow.end()));
    ce.push_back(trow[arg_t]);
    cross_s.push_back(srow[arg_t]);
    self += oracle::kl(oracle::softmax(trow), oracle::softmax(srow));
  }
  const double cross = oracle::kl(oracle::softmax(ce), oracle::softmax(cross_s));
  const double expected = oracle::supervised(de, 2) + oracle::supervised(ce, 2) +
                          0.3 * cross + 0.1 * self;
  const auto l = mvd::total_loss(sm, 2, mvd::LossWeights{0.3, 0.1});
  EXPECT_NEAR(l.total, expected, 1e-12);
  EXPECT_NEAR(l.cross, cross, 1e-12);
  EXPECT_NEAR(l.self, self, 1e-12);
}

TEST(TotalLoss, WithoutTeacherOnlyDe) {
  mvd::ScoreMatrix sm;
  sm.student_scores = {vec({1, 2}), vec({0.5})};
  mvd::pool_grids(sm);
  const auto l = mvd::total_loss(sm, 0, mvd::LossWeights{});
  EXPECT_EQ(l.total, l.de);
  EXPECT_EQ(l.ce, 0.0);
}

TEST(TotalLoss, FrozenTeacherGetsNoGradient) {
  mvd::Rng rng(8);
  const auto sm = grids(random_grid(rng, {2, 2}), random_grid(rng, {2, 2}));
  mvd::DistillOptions opts;
  opts.teacher_trainable = false;
  const auto lg = mvd::total_loss_with_gradients(sm, 0, opts);
  EXPECT_TRUE(lg.grads.teacher.empty());
  ASSERT_EQ(lg.grads.student.size(), 2u);
}

}  // namespace
