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

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvd/corpus.hpp"
#include "mvd/distillation.hpp"
#include "mvd/encoders.hpp"
#include "mvd/scoring.hpp"
#include "mvd/views.hpp"

namespace mvd {

enum class Stage : std::uint8_t { kWarmupDual, kWarmupCross, kMvd };

const char* to_string(Stage stage);
Stage parse_stage(const std::string& name);

/// refresh_interval sentinels.
inline constexpr std::int64_t kRefreshPerEpoch = 0;
inline constexpr std::int64_t kRefreshNever = -1;

struct TrainConfig {
  Stage stage = Stage::kMvd;
  std::size_t epochs = 5;
  std::size_t batch_size = 1;
  double learning_rate = 0.05;
  std::size_t negatives_K = 15;
  std::size_t retrieve_N = 100;
  double alpha = 0.3;
  double beta = 0.1;
  /// Steps between negative-pool rebuilds; kRefreshPerEpoch rebuilds at each
  /// epoch start and kRefreshNever keeps the initial pool.
  std::int64_t refresh_interval = kRefreshPerEpoch;
  std::uint64_t seed = 1;
  bool freeze_teacher = false;
  bool exclude_gold_from_negatives = true;
  /// Rescales each model's gradient to this global L2 norm before the update
  /// when larger; 0 disables clipping.
  double max_grad_norm = 0.0;
};

/// Stage defaults: in-batch warmup with 64-mention batches, then
/// one-mention steps against 1 gold + 15 sampled negatives out of a top-100
/// pool.
TrainConfig default_config(Stage stage);
void validate(const TrainConfig& cfg);

/// Pre-tokenized training material: entity view sets in entity order and
/// mention sequences with their gold entity ordinals.
struct TrainingSet {
  std::vector<ViewSet> views;
  std::unordered_map<std::string, std::uint32_t> entity_ord;
  std::vector<std::string> mention_ids;
  std::vector<TokenSeq> mentions;
  std::vector<std::uint32_t> gold;
  SegmentationConfig seg;

  std::size_t num_mentions() const { return mentions.size(); }
};

TrainingSet prepare_training_set(std::span<const EntityRecord> entities,
                                 std::span<const MentionRecord> mentions,
                                 const SegmentationConfig& seg);

/// Per-mention top-N entity ordinals from the most recent refresh.
struct NegativePool {
  std::vector<std::vector<std::uint32_t>> per_mention;
  std::size_t retrieve_n = 0;
};

/// Embeds the selected views of every entity with the current student and
/// retrieves the top-N entities for every mention, dropping the gold entity
/// when exclude_gold is set.
NegativePool build_negative_pool(const ParamStore& student,
                                 const TrainingSet& data, std::size_t retrieve_n,
                                 bool exclude_gold,
                                 ViewSelection views = ViewSelection::kLocal);

/// Uniform sample of k entries without replacement. A given gold entry is
/// never returned. A pool smaller than k is returned whole with a warning.
std::vector<std::uint32_t> sample_negatives(
    std::span<const std::uint32_t> pool, std::size_t k, Rng& rng,
    std::optional<std::uint32_t> gold = std::nullopt);

/// p <- p - lr * g over every tensor, then zeroes the gradients. Throws
/// NumericError on a non-finite gradient before touching any value.
void sgd_update(ParamStore& params, double learning_rate);

/// Global L2 norm of all gradients (touched rows only for sparse tensors).
double grad_norm(const ParamStore& params);

/// Scales every gradient so the global norm is at most max_norm. Returns the
/// norm before scaling. max_norm = 0 leaves the gradients alone.
double clip_grad_norm(ParamStore& params, double max_norm);

/// Options that shape the MVD objective beyond TrainConfig; the defaults are
/// the full method.
struct MvdOptions {
  double temperature = 1.0;
  RelevantView cross_view = RelevantView::kTeacher;
  bool self_gold_only = false;
  ViewSelection student_views = ViewSelection::kLocal;
  ViewSelection teacher_views = ViewSelection::kLocal;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::size_t mention = 0;
  LossBreakdown loss;
  /// Candidate entity ordinals, gold first. Empty for in-batch steps.
  std::vector<std::uint32_t> candidates;
  /// Pool the negatives were drawn from.
  std::span<const std::uint32_t> pool;
};

struct TrainObserver {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(std::size_t step, const NegativePool&)> on_refresh;
  /// TSV lines: step, L_de, L_ce, L_cross, L_self, L_total.
  std::ostream* log = nullptr;
};

struct TrainHistory {
  std::vector<double> epoch_loss;  // mean L_total per epoch
  std::size_t steps = 0;
  std::size_t skipped_batches = 0;
  std::size_t refreshes = 0;
};

struct StudentResult {
  ParamStore student;
  TrainHistory history;
};

struct TeacherResult {
  ParamStore teacher;
  TrainHistory history;
};

struct MvdResult {
  ParamStore student;
  ParamStore teacher;
  TrainHistory history;
};

/// Dual-encoder warmup: each batch's gold entities are the candidate set for
/// every mention in it (duplicates collapse to one candidate) and only L_de
/// is optimized.
StudentResult warmup_dual(const TrainingSet& data, ParamStore student,
                          const TrainConfig& cfg,
                          ViewSelection views = ViewSelection::kLocal,
                          const TrainObserver& observer = {});

/// Teacher warmup on static negatives mined once from the student.
TeacherResult warmup_cross(const TrainingSet& data, const ParamStore& student,
                           ParamStore teacher, const TrainConfig& cfg,
                           ViewSelection views = ViewSelection::kLocal,
                           const TrainObserver& observer = {});

/// Joint distillation with dynamic hard negatives.
MvdResult mvd_train(const TrainingSet& data, ParamStore student,
                    ParamStore teacher, const TrainConfig& cfg,
                    const MvdOptions& opts = {},
                    const TrainObserver& observer = {});

/// Fraction of mentions whose gold entity outscores every sampled candidate
/// under the teacher (use_teacher) or the student, on candidate sets drawn
/// from the given pool.
double candidate_accuracy(const TrainingSet& data, const ParamStore& student,
                          const ParamStore* teacher, const NegativePool& pool,
                          std::size_t negatives_k, std::uint64_t seed,
                          bool use_teacher);

}  // namespace mvd
