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

#include "mvd/scoring.hpp"

namespace mvd {

PooledScore pool_entity(std::span<const double> scores) {
  return pool_entity(Eigen::Map<const Vector>(
      scores.data(), static_cast<Eigen::Index>(scores.size())));
}

void pool_grids(ScoreMatrix& sm) {
  const std::size_t k = sm.student_scores.size();
  sm.i_de.assign(k, 0);
  sm.entity_scores_de.resize(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    const auto p = pool_entity(sm.student_scores[i]);
    sm.i_de[i] = p.index;
    sm.entity_scores_de(static_cast<Eigen::Index>(i)) = p.score;
  }
  sm.i_ce.clear();
  sm.entity_scores_ce.resize(0);
  if (!sm.has_teacher()) return;
  sm.i_ce.assign(k, 0);
  sm.entity_scores_ce.resize(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    const auto p = pool_entity(sm.teacher_scores[i]);
    sm.i_ce[i] = p.index;
    sm.entity_scores_ce(static_cast<Eigen::Index>(i)) = p.score;
  }
}

std::vector<const TokenSeq*> selected_views(const ViewSet& vs,
                                            ViewSelection selection) {
  std::vector<const TokenSeq*> out;
  if (selection != ViewSelection::kGlobal) {
    if (vs.local_views.empty()) {
      throw ValidationError("entity '" + vs.entity_id + "' has no local view");
    }
    for (const auto& v : vs.local_views) out.push_back(&v);
  }
  if (selection != ViewSelection::kLocal) out.push_back(&vs.global_view);
  return out;
}

ForwardGraph forward_candidates(const ParamStore& student,
                                const ParamStore* teacher,
                                const TokenSeq& mention,
                                std::span<const ViewSet* const> candidates,
                                const ForwardOptions& opts) {
  if (candidates.empty()) {
    throw ValidationError("score_candidates: empty candidate list");
  }
  if (opts.use_teacher && teacher == nullptr) {
    throw ValidationError("score_candidates: teacher requested but not given");
  }
  if (opts.use_teacher && opts.teacher_views == ViewSelection::kLocalAndGlobal) {
    throw ValidationError("the teacher scores either local or global views");
  }
  ForwardGraph g;
  g.mention = trace_mention(student, mention);
  g.student_views.reserve(candidates.size());
  for (const ViewSet* vs : candidates) {
    auto& row = g.student_views.emplace_back();
    for (const TokenSeq* v : selected_views(*vs, opts.student_views)) {
      row.push_back(trace_view(student, *v));
    }
  }
  if (opts.use_teacher) {
    g.teacher_views.reserve(candidates.size());
    for (const ViewSet* vs : candidates) {
      auto& row = g.teacher_views.emplace_back();
      for (const TokenSeq* v : selected_views(*vs, opts.teacher_views)) {
        row.push_back(
            trace_teacher(*teacher, mention, *v, opts.max_cross_length));
      }
    }
  }
  return g;
}

ScoreMatrix score_matrix(const ForwardGraph& graph) {
  ScoreMatrix sm;
  for (const auto& row : graph.student_views) {
    Vector s(static_cast<Eigen::Index>(row.size()));
    for (std::size_t t = 0; t < row.size(); ++t) {
      s(static_cast<Eigen::Index>(t)) = student_score(graph.mention.out, row[t].out);
    }
    sm.student_scores.push_back(std::move(s));
  }
  for (const auto& row : graph.teacher_views) {
    Vector s(static_cast<Eigen::Index>(row.size()));
    for (std::size_t t = 0; t < row.size(); ++t) {
      s(static_cast<Eigen::Index>(t)) = row[t].score;
    }
    sm.teacher_scores.push_back(std::move(s));
  }
  pool_grids(sm);
  return sm;
}

ScoreMatrix score_candidates(const ParamStore& student,
                             const ParamStore* teacher, const TokenSeq& mention,
                             std::span<const ViewSet* const> candidates,
                             bool use_teacher, bool include_global,
                             std::size_t max_cross_length) {
  ForwardOptions opts;
  opts.student_views =
      include_global ? ViewSelection::kLocalAndGlobal : ViewSelection::kLocal;
  opts.use_teacher = use_teacher;
  opts.teacher_views = ViewSelection::kLocal;
  opts.max_cross_length = max_cross_length;
  return score_matrix(
      forward_candidates(student, teacher, mention, candidates, opts));
}

}  // namespace mvd
