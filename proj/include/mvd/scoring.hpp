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

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mvd/common.hpp"
#include "mvd/encoders.hpp"

namespace mvd {

/// Student dot-product relevance.
template <typename DerivedA, typename DerivedB>
double student_score(const Eigen::MatrixBase<DerivedA>& mention_emb,
                     const Eigen::MatrixBase<DerivedB>& view_emb) {
  if (mention_emb.size() != view_emb.size()) {
    throw ValidationError("student_score: dimension mismatch (" +
                          std::to_string(mention_emb.size()) + " vs " +
                          std::to_string(view_emb.size()) + ")");
  }
  return mention_emb.dot(view_emb);
}

struct PooledScore {
  double score = 0.0;
  std::size_t index = 0;
};

/// Max over views; ties resolve to the smallest index.
template <typename Derived>
PooledScore pool_entity(const Eigen::DenseBase<Derived>& scores) {
  if (scores.size() == 0) throw ValidationError("pool_entity: empty score list");
  PooledScore best{scores(0), 0};
  for (Eigen::Index t = 1; t < scores.size(); ++t) {
    if (scores(t) > best.score) best = {scores(t), static_cast<std::size_t>(t)};
  }
  return best;
}

PooledScore pool_entity(std::span<const double> scores);

/// Student and teacher view-score grids for one mention against K candidates
/// with the derived max-pool indices.
struct ScoreMatrix {
  ScoreGrid student_scores;
  ScoreGrid teacher_scores;  // empty when no teacher was run
  std::vector<std::size_t> i_de;
  std::vector<std::size_t> i_ce;
  Vector entity_scores_de;
  Vector entity_scores_ce;

  std::size_t num_candidates() const { return student_scores.size(); }
  bool has_teacher() const { return !teacher_scores.empty(); }
};

/// Fills i_de/i_ce and entity scores from the grids.
void pool_grids(ScoreMatrix& sm);

struct ForwardOptions {
  ViewSelection student_views = ViewSelection::kLocal;
  bool use_teacher = false;
  /// kLocal or kGlobal; the teacher never sees the global view alongside
  /// local views.
  ViewSelection teacher_views = ViewSelection::kLocal;
  std::size_t max_cross_length = 168;
};

/// The view sequences a selection exposes, local views first.
std::vector<const TokenSeq*> selected_views(const ViewSet& vs,
                                            ViewSelection selection);

/// Traced forward pass of one mention against a candidate list.
ForwardGraph forward_candidates(const ParamStore& student,
                                const ParamStore* teacher,
                                const TokenSeq& mention,
                                std::span<const ViewSet* const> candidates,
                                const ForwardOptions& opts);

ScoreMatrix score_matrix(const ForwardGraph& graph);

ScoreMatrix score_candidates(const ParamStore& student,
                             const ParamStore* teacher, const TokenSeq& mention,
                             std::span<const ViewSet* const> candidates,
                             bool use_teacher, bool include_global,
                             std::size_t max_cross_length = 168);

}  // namespace mvd
