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
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mvd/config.hpp"
#include "mvd/corpus.hpp"
#include "mvd/index.hpp"
#include "mvd/params.hpp"
#include "mvd/training.hpp"

namespace mvd {

struct PhaseTiming {
  std::string phase;
  double seconds = 0.0;
};

struct EvalReport {
  std::vector<std::size_t> k_values;
  std::vector<double> recall;  // parallel to k_values
  std::size_t num_mentions = 0;
  std::string config_fingerprint;
  std::vector<PhaseTiming> timings;

  /// Recall at a K listed in k_values.
  double recall_at(std::size_t k) const;

  /// Compares everything except wall-clock timings.
  bool same_metrics(const EvalReport& other) const;
};

struct MentionResult {
  std::string mention_id;
  SearchResult result;
};

/// R@K over mentions, keyed by mention id. Every gold mention needs exactly one
/// result and every result needs a gold label.
EvalReport recall_at_k(std::span<const MentionResult> results,
                       const std::unordered_map<std::string, std::string>& gold,
                       std::span<const std::size_t> k_values);

/// Retrieves the top max(k_values) entities for every mention.
std::vector<MentionResult> retrieve(const ViewIndex& index, const ParamStore& student,
                                    std::span<const MentionRecord> mentions,
                                    const SegmentationConfig& seg, std::size_t k);

EvalReport evaluate(const ViewIndex& index, const ParamStore& student,
                    std::span<const MentionRecord> mentions,
                    const SegmentationConfig& seg,
                    std::span<const std::size_t> k_values);

/// metric<TAB>value rows: R@K lines, then mentions, fingerprint and timings.
void write_tsv(std::ostream& out, const EvalReport& report, bool with_timings = true);
nlohmann::json to_json(const EvalReport& report, bool with_timings = true);

enum class Toggle : std::uint8_t {
  kNoMultiviewTeacher,
  kNoRelevantViewAlignment,
  kNoSelfAlignment,
  kNoCrossAlignment,
  kEntityLevelOnly,
  kFreezeTeacher,
  kStaticNegatives,
  kViewsGlobalOnly,
  kViewsLocalOnly,
  kViewsGlobalPlusLocal,
};
using ToggleSet = std::set<Toggle>;

const char* to_string(Toggle t);
Toggle parse_toggle(const std::string& name);
/// Toggle names joined by '+', or "full" for the empty set.
std::string toggle_label(const ToggleSet& toggles);

/// The config one toggle combination runs with.
PipelineConfig apply_toggles(PipelineConfig cfg, const ToggleSet& toggles);

struct PipelineResult {
  ParamStore student;
  ParamStore teacher;
  ViewIndex index;
  EvalReport report;
  TrainHistory dual_history;
  TrainHistory cross_history;
  TrainHistory mvd_history;
};

/// Warmed-up models to resume from, skipping both warmup stages.
struct WarmStart {
  ParamStore student;
  ParamStore teacher;
};

/// warmup_dual -> warmup_cross -> mvd_train -> index -> R@K on test.
PipelineResult run_pipeline(std::span<const EntityRecord> entities,
                            std::span<const MentionRecord> train,
                            std::span<const MentionRecord> test,
                            const PipelineConfig& cfg,
                            const WarmStart* warm = nullptr,
                            const TrainObserver& mvd_observer = {});

struct AblationRow {
  std::string label;
  ToggleSet toggles;
  EvalReport report;
};

/// One pipeline run per toggle set, all from the same seeds. Runs whose
/// warmup inputs coincide share the warmed-up models; the first row needing a
/// warmup carries its timing.
std::vector<AblationRow> run_ablation(std::span<const EntityRecord> entities,
                                      std::span<const MentionRecord> train,
                                      std::span<const MentionRecord> test,
                                      const PipelineConfig& base,
                                      std::span<const ToggleSet> runs);

/// label, then one column per K.
void write_ablation_tsv(std::ostream& out, std::span<const AblationRow> rows);
nlohmann::json to_json(std::span<const AblationRow> rows);

}  // namespace mvd
