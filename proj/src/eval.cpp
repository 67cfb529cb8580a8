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

#include "mvd/eval.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "mvd/common.hpp"

namespace mvd {
namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::string format_value(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed << v;
  return os.str();
}

}  // namespace

double EvalReport::recall_at(std::size_t k) const {
  for (std::size_t i = 0; i < k_values.size(); ++i) {
    if (k_values[i] == k) return recall[i];
  }
  throw ValidationError("report has no R@" + std::to_string(k));
}

bool EvalReport::same_metrics(const EvalReport& other) const {
  return k_values == other.k_values && recall == other.recall &&
         num_mentions == other.num_mentions &&
         config_fingerprint == other.config_fingerprint;
}

EvalReport recall_at_k(std::span<const MentionResult> results,
                       const std::unordered_map<std::string, std::string>& gold,
                       std::span<const std::size_t> k_values) {
  if (k_values.empty()) throw ValidationError("recall_at_k: no K values");
  for (std::size_t i = 0; i < k_values.size(); ++i) {
    if (k_values[i] < 1 || (i > 0 && k_values[i] <= k_values[i - 1])) {
      throw ValidationError("recall_at_k: K values must be strictly increasing and >= 1");
    }
  }
  std::unordered_map<std::string, std::size_t> seen;
  std::vector<std::size_t> hits(k_values.size(), 0);
  for (const auto& mr : results) {
    auto g = gold.find(mr.mention_id);
    if (g == gold.end()) {
      throw ValidationError("recall_at_k: no gold label for mention '" +
                            mr.mention_id + "'");
    }
    if (!seen.emplace(mr.mention_id, 0).second) {
      throw ValidationError("recall_at_k: mention '" + mr.mention_id +
                            "' has more than one result");
    }
    std::optional<std::size_t> rank;
    for (std::size_t r = 0; r < mr.result.hits.size(); ++r) {
      if (mr.result.hits[r].entity_id == g->second) {
        rank = r + 1;
        break;
      }
    }
    if (!rank) continue;
    for (std::size_t i = 0; i < k_values.size(); ++i) {
      if (*rank <= k_values[i]) ++hits[i];
    }
  }
  if (seen.size() != gold.size()) {
    for (const auto& [id, _] : gold) {
      if (!seen.count(id)) {
        throw ValidationError("recall_at_k: mention '" + id + "' has no result");
      }
    }
  }
  EvalReport report;
  report.k_values.assign(k_values.begin(), k_values.end());
  report.num_mentions = results.size();
  for (auto h : hits) {
    report.recall.push_back(results.empty() ? 0.0
                                            : static_cast<double>(h) /
                                                  static_cast<double>(results.size()));
  }
  return report;
}

std::vector<MentionResult> retrieve(const ViewIndex& index, const ParamStore& student,
                                    std::span<const MentionRecord> mentions,
                                    const SegmentationConfig& seg, std::size_t k) {
  std::vector<MentionResult> out;
  out.reserve(mentions.size());
  for (const auto& m : mentions) {
    const Vector q = encode_mention(student, make_mention_seq(m, seg));
    out.push_back({m.id, index.search(q, k)});
  }
  return out;
}

EvalReport evaluate(const ViewIndex& index, const ParamStore& student,
                    std::span<const MentionRecord> mentions,
                    const SegmentationConfig& seg,
                    std::span<const std::size_t> k_values) {
  if (k_values.empty()) throw ValidationError("evaluate: no K values");
  std::unordered_map<std::string, std::string> gold;
  for (const auto& m : mentions) gold.emplace(m.id, m.gold_entity_id);
  if (gold.size() != mentions.size()) {
    throw ValidationError("evaluate: duplicate mention ids");
  }
  const auto results = retrieve(index, student, mentions, seg, k_values.back());
  return recall_at_k(results, gold, k_values);
}

void write_tsv(std::ostream& out, const EvalReport& report, bool with_timings) {
  out << "metric\tvalue\n";
  for (std::size_t i = 0; i < report.k_values.size(); ++i) {
    out << "R@" << report.k_values[i] << '\t' << format_value(report.recall[i]) << '\n';
  }
  out << "mentions\t" << report.num_mentions << '\n';
  if (!report.config_fingerprint.empty()) {
    out << "config_fingerprint\t" << report.config_fingerprint << '\n';
  }
  if (with_timings) {
    for (const auto& t : report.timings) {
      out << "seconds." << t.phase << '\t' << format_value(t.seconds) << '\n';
    }
  }
}

nlohmann::json to_json(const EvalReport& report, bool with_timings) {
  nlohmann::json recall = nlohmann::json::object();
  for (std::size_t i = 0; i < report.k_values.size(); ++i) {
    recall["R@" + std::to_string(report.k_values[i])] = report.recall[i];
  }
  nlohmann::json j = {{"k_values", report.k_values},
                      {"recall", recall},
                      {"mentions", report.num_mentions},
                      {"config_fingerprint", report.config_fingerprint}};
  if (with_timings) {
    nlohmann::json t = nlohmann::json::object();
    for (const auto& p : report.timings) t[p.phase] = p.seconds;
    j["seconds"] = t;
  }
  return j;
}

namespace {

constexpr std::pair<Toggle, const char*> kToggleNames[] = {
    {Toggle::kNoMultiviewTeacher, "no_multiview_teacher"},
    {Toggle::kNoRelevantViewAlignment, "no_relevant_view_alignment"},
    {Toggle::kNoSelfAlignment, "no_self_alignment"},
    {Toggle::kNoCrossAlignment, "no_cross_alignment"},
    {Toggle::kEntityLevelOnly, "entity_level_only"},
    {Toggle::kFreezeTeacher, "freeze_teacher"},
    {Toggle::kStaticNegatives, "static_negatives"},
    {Toggle::kViewsGlobalOnly, "views_global_only"},
    {Toggle::kViewsLocalOnly, "views_local_only"},
    {Toggle::kViewsGlobalPlusLocal, "views_global_plus_local"},
};

}  // namespace

const char* to_string(Toggle t) {
  for (const auto& [toggle, name] : kToggleNames) {
    if (toggle == t) return name;
  }
  return "?";
}

Toggle parse_toggle(const std::string& name) {
  for (const auto& [toggle, n] : kToggleNames) {
    if (name == n) return toggle;
  }
  throw ValidationError("unknown ablation toggle '" + name + "'");
}

std::string toggle_label(const ToggleSet& toggles) {
  if (toggles.empty()) return "full";
  std::string label;
  for (auto t : toggles) {
    if (!label.empty()) label += '+';
    label += to_string(t);
  }
  return label;
}

PipelineConfig apply_toggles(PipelineConfig cfg, const ToggleSet& toggles) {
  const int view_toggles = static_cast<int>(toggles.count(Toggle::kViewsGlobalOnly)) +
                           static_cast<int>(toggles.count(Toggle::kViewsLocalOnly)) +
                           static_cast<int>(toggles.count(Toggle::kViewsGlobalPlusLocal));
  if (view_toggles > 1) {
    throw ValidationError("at most one views_* toggle per run");
  }
  for (auto t : toggles) {
    switch (t) {
      case Toggle::kNoMultiviewTeacher:
        cfg.distill.teacher_views = ViewSelection::kGlobal;
        cfg.distill.cross_view = RelevantView::kStudent;
        break;
      case Toggle::kNoRelevantViewAlignment:
        cfg.distill.cross_view = RelevantView::kStudent;
        break;
      case Toggle::kNoSelfAlignment:
        cfg.mvd.beta = 0.0;
        break;
      case Toggle::kNoCrossAlignment:
        cfg.mvd.alpha = 0.0;
        break;
      case Toggle::kEntityLevelOnly:
        cfg.distill.student_views = ViewSelection::kGlobal;
        cfg.distill.teacher_views = ViewSelection::kGlobal;
        if (view_toggles == 0) cfg.index.views = ViewSelection::kGlobal;
        break;
      case Toggle::kFreezeTeacher:
        cfg.mvd.freeze_teacher = true;
        break;
      case Toggle::kStaticNegatives:
        cfg.mvd.refresh_interval = kRefreshNever;
        break;
      case Toggle::kViewsGlobalOnly:
        cfg.index.views = ViewSelection::kGlobal;
        break;
      case Toggle::kViewsLocalOnly:
        cfg.index.views = ViewSelection::kLocal;
        break;
      case Toggle::kViewsGlobalPlusLocal:
        cfg.index.views = ViewSelection::kLocalAndGlobal;
        break;
    }
  }
  validate(cfg);
  return cfg;
}

PipelineResult run_pipeline(std::span<const EntityRecord> entities,
                            std::span<const MentionRecord> train,
                            std::span<const MentionRecord> test,
                            const PipelineConfig& cfg, const WarmStart* warm,
                            const TrainObserver& mvd_observer) {
  validate(cfg);
  Stopwatch clock;
  std::vector<PhaseTiming> timings;
  const TrainingSet data = prepare_training_set(entities, train, cfg.segmentation);
  timings.push_back({"prepare", clock.lap()});

  ParamStore student;
  ParamStore teacher;
  TrainHistory dual_history;
  TrainHistory cross_history;
  if (warm) {
    student = warm->student;
    teacher = warm->teacher;
  } else {
    auto dual = warmup_dual(data, make_student(cfg.encoder), cfg.warmup_dual,
                            cfg.distill.student_views);
    timings.push_back({"warmup_dual", clock.lap()});
    auto cross = warmup_cross(data, dual.student, make_teacher(cfg.encoder),
                              cfg.warmup_cross, cfg.distill.teacher_views);
    timings.push_back({"warmup_cross", clock.lap()});
    student = std::move(dual.student);
    teacher = std::move(cross.teacher);
    dual_history = std::move(dual.history);
    cross_history = std::move(cross.history);
  }

  auto trained = mvd_train(data, std::move(student), std::move(teacher), cfg.mvd,
                           cfg.distill, mvd_observer);
  timings.push_back({"mvd", clock.lap()});

  ViewIndex index = build_index(trained.student, data.views, cfg.index.views,
                                cfg.index.backend, cfg.index.graph);
  timings.push_back({"index_build", clock.lap()});

  EvalReport report = evaluate(index, trained.student, test, cfg.segmentation, cfg.k_values);
  timings.push_back({"eval", clock.lap()});
  report.config_fingerprint = fingerprint(cfg);
  report.timings = std::move(timings);

  return {std::move(trained.student), std::move(trained.teacher), std::move(index),
          std::move(report),          std::move(dual_history),   std::move(cross_history),
          std::move(trained.history)};
}

std::vector<AblationRow> run_ablation(std::span<const EntityRecord> entities,
                                      std::span<const MentionRecord> train,
                                      std::span<const MentionRecord> test,
                                      const PipelineConfig& base,
                                      std::span<const ToggleSet> runs) {
  const TrainingSet data = prepare_training_set(entities, train, base.segmentation);
  std::map<ViewSelection, ParamStore> students;
  std::map<std::pair<ViewSelection, ViewSelection>, ParamStore> teachers;
  std::vector<AblationRow> rows;
  for (const auto& toggles : runs) {
    const PipelineConfig cfg = apply_toggles(base, toggles);
    const ViewSelection sv = cfg.distill.student_views;
    const ViewSelection tv = cfg.distill.teacher_views;
    std::vector<PhaseTiming> warm_timings;
    Stopwatch clock;
    auto s = students.find(sv);
    if (s == students.end()) {
      s = students
              .emplace(sv, warmup_dual(data, make_student(cfg.encoder),
                                       cfg.warmup_dual, sv)
                               .student)
              .first;
      warm_timings.push_back({"warmup_dual", clock.lap()});
    }
    auto t = teachers.find({sv, tv});
    if (t == teachers.end()) {
      t = teachers
              .emplace(std::pair(sv, tv),
                       warmup_cross(data, s->second, make_teacher(cfg.encoder),
                                    cfg.warmup_cross, tv)
                           .teacher)
              .first;
      warm_timings.push_back({"warmup_cross", clock.lap()});
    }
    const WarmStart warm{s->second, t->second};
    auto result = run_pipeline(entities, train, test, cfg, &warm);
    // The row that trained a warmup carries its cost.
    auto& timings = result.report.timings;
    timings.insert(timings.begin() + 1, warm_timings.begin(), warm_timings.end());
    rows.push_back({toggle_label(toggles), toggles, std::move(result.report)});
  }
  return rows;
}

void write_ablation_tsv(std::ostream& out, std::span<const AblationRow> rows) {
  out << "run";
  if (!rows.empty()) {
    for (auto k : rows.front().report.k_values) out << "\tR@" << k;
  }
  out << '\n';
  for (const auto& row : rows) {
    out << row.label;
    for (double r : row.report.recall) out << '\t' << format_value(r);
    out << '\n';
  }
}

nlohmann::json to_json(std::span<const AblationRow> rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& row : rows) {
    j.push_back({{"run", row.label}, {"report", to_json(row.report, false)}});
  }
  return j;
}

}  // namespace mvd
