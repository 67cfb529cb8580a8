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

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "mvd/corpus.hpp"
#include "mvd/encoders.hpp"
#include "mvd/params.hpp"
#include "mvd/training.hpp"
#include "support/gradcheck.hpp"
#include "test_util.hpp"

namespace {

struct Fixture {
  mvd::Corpus corpus;
  mvd::TrainingSet data;
  mvd::EncoderConfig enc;
};

Fixture make_fixture(double noise = 0.1, std::uint64_t seed = 4) {
  Fixture f;
  f.corpus = mvd::generate_synthetic({12, 3, 3, 360, noise, seed});
  mvd::SegmentationConfig seg;
  seg.vocab_size = 500;
  f.data = mvd::prepare_training_set(f.corpus.entities, f.corpus.mentions, seg);
  f.enc.vocab_size = 500;
  f.enc.d_emb = 16;
  f.enc.d_hid = 16;
  f.enc.d_out = 8;
  f.enc.init_scale = 0.5;
  f.enc.embedding_init_scale = 0.2;
  f.enc.seed = 17;
  return f;
}

mvd::TrainConfig mvd_config() {
  auto cfg = mvd::default_config(mvd::Stage::kMvd);
  cfg.epochs = 2;
  cfg.negatives_K = 4;
  cfg.retrieve_N = 6;
  cfg.learning_rate = 0.05;
  cfg.max_grad_norm = 2.0;
  cfg.seed = 3;
  return cfg;
}

TEST(Sgd, ZeroLearningRateLeavesValues) {
  auto ps = mvd::make_student(make_fixture().enc);
  const auto before = ps;
  for (auto& t : ps.tensors()) t.grad.setConstant(1.0);
  mvd::sgd_update(ps, 0.0);
  EXPECT_TRUE(ps.same_values(before));
}

TEST(Sgd, ScalarArithmetic) {
  mvd::ParamStore ps;
  auto& p = ps.add("p", 1, 1, 1);
  p.value(0, 0) = 1.0;
  p.grad(0, 0) = 2.0;
  mvd::sgd_update(ps, 0.1);
  EXPECT_DOUBLE_EQ(ps.at("p").value(0, 0), 0.8);
  EXPECT_EQ(ps.at("p").grad(0, 0), 0.0);
}

TEST(Sgd, NonFiniteGradientThrowsBeforeUpdating) {
  mvd::ParamStore ps;
  ps.add("a", 1, 1, 1).grad(0, 0) = 1.0;
  ps.add("b", 1, 1, 1).grad(0, 0) = NAN;
  EXPECT_THROW(mvd::sgd_update(ps, 0.1), mvd::NumericError);
  EXPECT_EQ(ps.at("a").value(0, 0), 0.0);
}

TEST(Sgd, FirstOrderDecrease) {
  int checked = 0;
  for (std::uint64_t seed = 100; checked < 20; ++seed) {
    auto inst = gradcheck::random_instance(seed);
    // One candidate leaves every term at exactly zero.
    if (inst.candidates.size() < 2) continue;
    ++checked;
    const double before = gradcheck::loss(inst);
    const auto ptrs = inst.pointers();
    const auto g = mvd::forward_candidates(inst.student, &inst.teacher, inst.mention, ptrs,
                                           inst.forward);
    const auto lg = mvd::total_loss_with_gradients(mvd::score_matrix(g), inst.gold,
                                                   inst.distill);
    inst.student.zero_grad();
    inst.teacher.zero_grad();
    mvd::backprop(inst.student, &inst.teacher, g, lg.grads, lg.loss.total);
    mvd::sgd_update(inst.student, 1e-4);
    mvd::sgd_update(inst.teacher, 1e-4);
    EXPECT_LT(gradcheck::loss(inst), before) << "seed " << seed;
  }
}

TEST(ClipGradNorm, RescalesToMaxNorm) {
  mvd::ParamStore ps;
  auto& a = ps.add("a", 2, 1, 1);
  a.grad << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(mvd::grad_norm(ps), 5.0);
  EXPECT_DOUBLE_EQ(mvd::clip_grad_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(mvd::grad_norm(ps), 1.0, 1e-15);
  EXPECT_NEAR(ps.at("a").grad(0, 0), 0.6, 1e-15);
  mvd::clip_grad_norm(ps, 0.0);
  EXPECT_NEAR(mvd::grad_norm(ps), 1.0, 1e-15);
}

TEST(SampleNegatives, WholePoolWhenKEqualsN) {
  const std::vector<std::uint32_t> pool{4, 8, 15, 16};
  mvd::Rng rng(1);
  auto got = mvd::sample_negatives(pool, 4, rng);
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, pool);
}

TEST(SampleNegatives, InclusionRateMatchesHypergeometric) {
  std::vector<std::uint32_t> pool(100);
  for (std::uint32_t i = 0; i < 100; ++i) pool[i] = i;
  std::vector<int> hits(100, 0);
  mvd::Rng rng(2024);
  const int draws = 10000;
  for (int d = 0; d < draws; ++d) {
    const auto s = mvd::sample_negatives(pool, 15, rng);
    ASSERT_EQ(s.size(), 15u);
    ASSERT_EQ(std::set<std::uint32_t>(s.begin(), s.end()).size(), 15u);
    for (auto x : s) ++hits[x];
  }
  for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / draws, 0.15, 0.02);
}

TEST(SampleNegatives, GoldNeverReturned) {
  const std::vector<std::uint32_t> pool{1, 2, 3, 4, 5, 6};
  mvd::Rng rng(3);
  for (int d = 0; d < 500; ++d) {
    const auto s = mvd::sample_negatives(pool, 3, rng, 4u);
    EXPECT_EQ(std::count(s.begin(), s.end(), 4u), 0);
  }
}

TEST(SampleNegatives, SmallPoolWarns) {
  testing_util::WarningCapture warnings;
  const std::vector<std::uint32_t> pool{1, 2};
  mvd::Rng rng(3);
  EXPECT_EQ(mvd::sample_negatives(pool, 5, rng).size(), 2u);
  EXPECT_EQ(warnings.messages.size(), 1u);
}

TEST(NegativePool, ExcludesGoldAndHasN) {
  const auto f = make_fixture();
  const auto student = mvd::make_student(f.enc);
  const auto pool = mvd::build_negative_pool(student, f.data, 6, true);
  ASSERT_EQ(pool.per_mention.size(), f.data.num_mentions());
  for (std::size_t i = 0; i < pool.per_mention.size(); ++i) {
    EXPECT_EQ(pool.per_mention[i].size(), 6u);
    EXPECT_EQ(std::count(pool.per_mention[i].begin(), pool.per_mention[i].end(),
                         f.data.gold[i]),
              0);
  }
}

TEST(TrainConfig, Validation) {
  auto cfg = mvd_config();
  cfg.negatives_K = 10;
  cfg.retrieve_N = 5;
  EXPECT_THROW(mvd::validate(cfg), mvd::ValidationError);
  cfg = mvd_config();
  cfg.learning_rate = 0.0;
  EXPECT_THROW(mvd::validate(cfg), mvd::ValidationError);
  cfg = mvd_config();
  cfg.alpha = -1;
  EXPECT_THROW(mvd::validate(cfg), mvd::ValidationError);
  EXPECT_EQ(mvd::parse_stage("warmup_cross"), mvd::Stage::kWarmupCross);
  EXPECT_THROW(mvd::parse_stage("nope"), mvd::ValidationError);
}

// Facet corpus without noise at the acceptance scale and step size. A step
// counts as non-monotone when the epoch mean rises by more than 1%.
TEST(WarmupDual, SeparableCorpusLossDecreases) {
  const auto corpus = mvd::generate_synthetic({50, 4, 5, 2000, 0.0, 1});
  const auto data = mvd::prepare_training_set(corpus.entities, corpus.mentions, {});
  mvd::EncoderConfig enc;
  enc.d_out = 8;
  enc.init_scale = 0.5;
  enc.embedding_init_scale = 0.2;
  enc.seed = 1001;
  auto cfg = mvd::default_config(mvd::Stage::kWarmupDual);
  cfg.max_grad_norm = 2.0;
  cfg.seed = 78;
  const auto r = mvd::warmup_dual(data, mvd::make_student(enc), cfg);
  const auto& loss = r.history.epoch_loss;
  ASSERT_EQ(loss.size(), 40u);
  std::size_t rises = 0;
  for (std::size_t e = 1; e < loss.size(); ++e) {
    if (loss[e] > loss[e - 1] * 1.01) ++rises;
  }
  EXPECT_LE(static_cast<double>(rises), 0.05 * static_cast<double>(loss.size() - 1));
  EXPECT_LT(loss.back(), 0.05 * loss.front());
}

TEST(WarmupDual, BatchOfOneIsSkippedWithWarning) {
  const auto f = make_fixture();
  auto cfg = mvd::default_config(mvd::Stage::kWarmupDual);
  cfg.batch_size = 1;
  cfg.epochs = 1;
  testing_util::WarningCapture warnings;
  const auto init = mvd::make_student(f.enc);
  const auto r = mvd::warmup_dual(f.data, init, cfg);
  EXPECT_EQ(r.history.skipped_batches, f.data.num_mentions());
  EXPECT_FALSE(warnings.messages.empty());
  EXPECT_TRUE(r.student.same_values(init));
}

TEST(WarmupDual, SameSeedSameCheckpointBytes) {
  const auto f = make_fixture();
  auto cfg = mvd::default_config(mvd::Stage::kWarmupDual);
  cfg.epochs = 3;
  cfg.batch_size = 8;
  const auto a = mvd::warmup_dual(f.data, mvd::make_student(f.enc), cfg);
  const auto b = mvd::warmup_dual(f.data, mvd::make_student(f.enc), cfg);
  EXPECT_EQ(mvd::serialize_checkpoint(a.student), mvd::serialize_checkpoint(b.student));
}

TEST(WarmupCross, ZeroEpochsReturnsInitialization) {
  const auto f = make_fixture();
  auto cfg = mvd::default_config(mvd::Stage::kWarmupCross);
  cfg.epochs = 0;
  const auto teacher = mvd::make_teacher(f.enc);
  const auto r = mvd::warmup_cross(f.data, mvd::make_student(f.enc), teacher, cfg);
  EXPECT_TRUE(r.teacher.same_values(teacher));
}

TEST(WarmupCross, SameSeedSameCheckpointBytes) {
  const auto f = make_fixture();
  auto cfg = mvd::default_config(mvd::Stage::kWarmupCross);
  cfg.epochs = 1;
  cfg.negatives_K = 4;
  cfg.retrieve_N = 6;
  const auto student = mvd::make_student(f.enc);
  const auto a = mvd::warmup_cross(f.data, student, mvd::make_teacher(f.enc), cfg);
  const auto b = mvd::warmup_cross(f.data, student, mvd::make_teacher(f.enc), cfg);
  EXPECT_EQ(mvd::serialize_checkpoint(a.teacher), mvd::serialize_checkpoint(b.teacher));
}

// Held-out accuracy@1 against every other entity: the teacher's joint
// features separate facets the warmed-up dot product still confuses.
TEST(WarmupCross, TeacherBeatsWarmStudentOnHeldOutMentions) {
  const auto corpus = mvd::generate_synthetic({50, 4, 5, 2000, 0.1, 1});
  const auto [train, test] = mvd::split_holdout(corpus.mentions, 0.2, 1);
  const auto data = mvd::prepare_training_set(corpus.entities, train, {});
  const auto held = mvd::prepare_training_set(corpus.entities, test, {});
  mvd::EncoderConfig enc;
  enc.d_out = 8;
  enc.init_scale = 0.5;
  enc.embedding_init_scale = 0.2;
  enc.seed = 1001;
  auto dual_cfg = mvd::default_config(mvd::Stage::kWarmupDual);
  auto cross_cfg = mvd::default_config(mvd::Stage::kWarmupCross);
  for (auto* c : {&dual_cfg, &cross_cfg}) {
    c->max_grad_norm = 2.0;
    c->seed = 78;
  }
  const auto dual = mvd::warmup_dual(data, mvd::make_student(enc), dual_cfg);
  const auto cross = mvd::warmup_cross(data, dual.student, mvd::make_teacher(enc), cross_cfg);
  const auto pool = mvd::build_negative_pool(dual.student, held, 100, true);
  const std::size_t k = corpus.entities.size() - 1;
  const double student =
      mvd::candidate_accuracy(held, dual.student, nullptr, pool, k, 1, false);
  const double teacher =
      mvd::candidate_accuracy(held, dual.student, &cross.teacher, pool, k, 1, true);
  EXPECT_GT(teacher, student);
}

TEST(MvdTrain, CandidateSetsHonourContract) {
  const auto f = make_fixture();
  const auto cfg = mvd_config();
  std::size_t steps = 0;
  mvd::TrainObserver obs;
  obs.on_step = [&](const mvd::StepRecord& r) {
    ++steps;
    const std::uint32_t gold = f.data.gold[r.mention];
    ASSERT_EQ(r.candidates.size(), cfg.negatives_K + 1);
    EXPECT_EQ(r.candidates.front(), gold);
    EXPECT_EQ(std::count(r.candidates.begin(), r.candidates.end(), gold), 1);
    EXPECT_EQ(std::set<std::uint32_t>(r.candidates.begin(), r.candidates.end()).size(),
              r.candidates.size());
    for (std::size_t i = 1; i < r.candidates.size(); ++i) {
      EXPECT_NE(std::find(r.pool.begin(), r.pool.end(), r.candidates[i]), r.pool.end());
    }
  };
  const auto r = mvd::mvd_train(f.data, mvd::make_student(f.enc), mvd::make_teacher(f.enc),
                                cfg, {}, obs);
  EXPECT_EQ(steps, cfg.epochs * f.data.num_mentions());
  EXPECT_EQ(r.history.refreshes, cfg.epochs);
}

TEST(MvdTrain, NeverRefreshKeepsInitialPool) {
  const auto f = make_fixture();
  auto cfg = mvd_config();
  cfg.refresh_interval = mvd::kRefreshNever;
  std::vector<std::vector<std::uint32_t>> first;
  mvd::TrainObserver obs;
  std::size_t refreshes = 0;
  obs.on_refresh = [&](std::size_t, const mvd::NegativePool& pool) {
    ++refreshes;
    first = pool.per_mention;
  };
  obs.on_step = [&](const mvd::StepRecord& r) {
    EXPECT_TRUE(std::equal(r.pool.begin(), r.pool.end(), first[r.mention].begin(),
                           first[r.mention].end()));
  };
  mvd::mvd_train(f.data, mvd::make_student(f.enc), mvd::make_teacher(f.enc), cfg, {}, obs);
  EXPECT_EQ(refreshes, 1u);
}

TEST(MvdTrain, StepIntervalRefreshes) {
  const auto f = make_fixture();
  auto cfg = mvd_config();
  cfg.epochs = 1;
  cfg.refresh_interval = 10;
  const auto r = mvd::mvd_train(f.data, mvd::make_student(f.enc), mvd::make_teacher(f.enc), cfg);
  EXPECT_EQ(r.history.refreshes, (f.data.num_mentions() + 9) / 10);
}

TEST(MvdTrain, FrozenTeacherStaysBitIdentical) {
  const auto f = make_fixture();
  auto cfg = mvd_config();
  cfg.freeze_teacher = true;
  const auto teacher = mvd::make_teacher(f.enc);
  const auto r = mvd::mvd_train(f.data, mvd::make_student(f.enc), teacher, cfg);
  EXPECT_TRUE(r.teacher.same_values(teacher));
}

// With no alignment terms and a frozen teacher, the student sees only L_de
// on dynamic negatives, so the teacher's weights cannot matter.
TEST(MvdTrain, NoAlignmentAndFrozenTeacherIsSupervisedOnly) {
  const auto f = make_fixture();
  auto cfg = mvd_config();
  cfg.freeze_teacher = true;
  cfg.alpha = 0.0;
  cfg.beta = 0.0;
  auto other = f.enc;
  other.seed = 999;
  const auto a = mvd::mvd_train(f.data, mvd::make_student(f.enc), mvd::make_teacher(f.enc), cfg);
  const auto b = mvd::mvd_train(f.data, mvd::make_student(f.enc), mvd::make_teacher(other), cfg);
  EXPECT_TRUE(a.student.same_values(b.student));
}

TEST(MvdTrain, DeterministicAndLogged) {
  const auto f = make_fixture();
  const auto cfg = mvd_config();
  std::ostringstream log_a, log_b;
  mvd::TrainObserver oa, ob;
  oa.log = &log_a;
  ob.log = &log_b;
  const auto a = mvd::mvd_train(f.data, mvd::make_student(f.enc), mvd::make_teacher(f.enc), cfg, {}, oa);
  const auto b = mvd::mvd_train(f.data, mvd::make_student(f.enc), mvd::make_teacher(f.enc), cfg, {}, ob);
  EXPECT_EQ(mvd::serialize_checkpoint(a.student), mvd::serialize_checkpoint(b.student));
  EXPECT_EQ(mvd::serialize_checkpoint(a.teacher), mvd::serialize_checkpoint(b.teacher));
  EXPECT_EQ(log_a.str(), log_b.str());
  const auto text = log_a.str();
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')),
            cfg.epochs * f.data.num_mentions());
}

TEST(MvdTrain, ImprovesStudentCandidateAccuracy) {
  const auto f = make_fixture();
  auto dual = mvd::default_config(mvd::Stage::kWarmupDual);
  dual.batch_size = 16;
  dual.max_grad_norm = 2.0;
  const auto warm = mvd::warmup_dual(f.data, mvd::make_student(f.enc), dual);
  const auto pool = mvd::build_negative_pool(warm.student, f.data, 6, true);
  const double before = mvd::candidate_accuracy(f.data, warm.student, nullptr, pool, 4, 1, false);
  auto cfg = mvd_config();
  cfg.epochs = 3;
  const auto r = mvd::mvd_train(f.data, warm.student, mvd::make_teacher(f.enc), cfg);
  const auto pool2 = mvd::build_negative_pool(r.student, f.data, 6, true);
  const double after = mvd::candidate_accuracy(f.data, r.student, nullptr, pool2, 4, 1, false);
  EXPECT_GE(after, before);
}

}  // namespace
