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

#include "mvd/distillation.hpp"

namespace mvd {
namespace {

// Entity-level logits for the cross term: both models are read at the same
// per-candidate view index.
struct CrossLogits {
  Vector student;
  Vector teacher;
  std::vector<std::size_t> student_view;
};

CrossLogits cross_logits(const ScoreMatrix& sm, RelevantView view) {
  if (!sm.has_teacher()) {
    throw ValidationError("cross-alignment needs a teacher grid");
  }
  const std::size_t k = sm.num_candidates();
  CrossLogits out;
  out.student.resize(static_cast<Eigen::Index>(k));
  out.teacher = sm.entity_scores_ce;
  out.student_view.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t idx = sm.i_de[j];
    if (view == RelevantView::kTeacher) {
      if (sm.teacher_scores[j].size() != sm.student_scores[j].size()) {
        throw ValidationError(
            "teacher-selected view alignment needs matching view grids");
      }
      idx = sm.i_ce[j];
    }
    out.student_view[j] = idx;
    out.student(static_cast<Eigen::Index>(j)) =
        sm.student_scores[j](static_cast<Eigen::Index>(idx));
  }
  return out;
}

// d KL(p||q) / d(teacher logits) for p = softmax(teacher / T).
Vector kl_teacher_grad(const Distribution<double>& p,
                       const Distribution<double>& q, double kl, double t) {
  Vector g(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    g(i) = p.probs(i) > 0
               ? p.probs(i) * ((p.log_probs(i) - q.log_probs(i)) - kl) / t
               : 0.0;
  }
  return g;
}

bool self_applies(const ScoreMatrix& sm, std::size_t i) {
  return sm.teacher_scores[i].size() == sm.student_scores[i].size() &&
         sm.student_scores[i].size() >= 2;
}

void check_gold(const ScoreMatrix& sm, std::size_t gold_index) {
  if (gold_index >= sm.num_candidates()) {
    throw ValidationError("gold index " + std::to_string(gold_index) +
                          " out of range for " +
                          std::to_string(sm.num_candidates()) + " candidates");
  }
}

}  // namespace

double supervised_loss(const Vector& entity_scores, std::size_t gold_index) {
  if (gold_index >= static_cast<std::size_t>(entity_scores.size())) {
    throw ValidationError("supervised_loss: gold index " +
                          std::to_string(gold_index) + " out of range for " +
                          std::to_string(entity_scores.size()) + " scores");
  }
  return log_sum_exp(entity_scores) -
         entity_scores(static_cast<Eigen::Index>(gold_index));
}

double cross_alignment_loss(const ScoreMatrix& sm, RelevantView view,
                            double temperature) {
  if (sm.num_candidates() < 2) return 0.0;
  const auto logits = cross_logits(sm, view);
  return kl_divergence(softmax(logits.teacher, temperature),
                       softmax(logits.student, temperature));
}

double self_alignment_loss(const ScoreMatrix& sm, double temperature,
                           bool gold_only, std::size_t gold_index) {
  if (!sm.has_teacher()) {
    throw ValidationError("self-alignment needs a teacher grid");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < sm.num_candidates(); ++i) {
    if (gold_only && i != gold_index) continue;
    if (!self_applies(sm, i)) continue;
    total += kl_divergence(softmax(sm.teacher_scores[i], temperature),
                           softmax(sm.student_scores[i], temperature));
  }
  return total;
}

LossBreakdown total_loss(const ScoreMatrix& sm, std::size_t gold_index,
                         const LossWeights& w) {
  DistillOptions opts;
  opts.weights = w;
  return total_loss(sm, gold_index, opts);
}

LossBreakdown total_loss(const ScoreMatrix& sm, std::size_t gold_index,
                         const DistillOptions& opts) {
  check_gold(sm, gold_index);
  LossBreakdown l;
  l.de = supervised_loss(sm.entity_scores_de, gold_index);
  if (sm.has_teacher()) {
    l.ce = supervised_loss(sm.entity_scores_ce, gold_index);
    l.cross = cross_alignment_loss(sm, opts.cross_view, opts.temperature);
    l.self = self_alignment_loss(sm, opts.temperature, opts.self_gold_only,
                                 gold_index);
  }
  l.total = l.de + l.ce + opts.weights.alpha * l.cross +
            opts.weights.beta * l.self;
  return l;
}

LossWithGradients total_loss_with_gradients(const ScoreMatrix& sm,
                                            std::size_t gold_index,
                                            const DistillOptions& opts) {
  check_gold(sm, gold_index);
  const std::size_t k = sm.num_candidates();
  const double temp = opts.temperature;
  const double alpha = opts.weights.alpha;
  const double beta = opts.weights.beta;
  const bool teacher_grads = sm.has_teacher() && opts.teacher_trainable;

  LossWithGradients out;
  auto& g = out.grads;
  for (const auto& row : sm.student_scores) g.student.push_back(Vector::Zero(row.size()));
  if (teacher_grads) {
    for (const auto& row : sm.teacher_scores) g.teacher.push_back(Vector::Zero(row.size()));
  }
  auto at = [](Vector& v, std::size_t i) -> double& {
    return v(static_cast<Eigen::Index>(i));
  };

  // Supervised terms.
  {
    const auto p = softmax(sm.entity_scores_de);
    for (std::size_t j = 0; j < k; ++j) {
      at(g.student[j], sm.i_de[j]) +=
          p.probs(static_cast<Eigen::Index>(j)) - (j == gold_index ? 1.0 : 0.0);
    }
    out.loss.de = supervised_loss(sm.entity_scores_de, gold_index);
  }
  if (sm.has_teacher()) {
    out.loss.ce = supervised_loss(sm.entity_scores_ce, gold_index);
    if (teacher_grads) {
      const auto p = softmax(sm.entity_scores_ce);
      for (std::size_t j = 0; j < k; ++j) {
        at(g.teacher[j], sm.i_ce[j]) +=
            p.probs(static_cast<Eigen::Index>(j)) - (j == gold_index ? 1.0 : 0.0);
      }
    }

    if (k >= 2) {
      const auto logits = cross_logits(sm, opts.cross_view);
      const auto p = softmax(logits.teacher, temp);
      const auto q = softmax(logits.student, temp);
      const double kl = kl_divergence(p, q);
      out.loss.cross = kl;
      if (alpha != 0.0) {
        for (std::size_t j = 0; j < k; ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          at(g.student[j], logits.student_view[j]) +=
              alpha * (q.probs(jj) - p.probs(jj)) / temp;
        }
        if (teacher_grads) {
          const Vector gt = kl_teacher_grad(p, q, kl, temp);
          for (std::size_t j = 0; j < k; ++j) {
            at(g.teacher[j], sm.i_ce[j]) += alpha * gt(static_cast<Eigen::Index>(j));
          }
        }
      }
    }

    for (std::size_t i = 0; i < k; ++i) {
      if (opts.self_gold_only && i != gold_index) continue;
      if (!self_applies(sm, i)) continue;
      const auto p = softmax(sm.teacher_scores[i], temp);
      const auto q = softmax(sm.student_scores[i], temp);
      const double kl = kl_divergence(p, q);
      out.loss.self += kl;
      if (beta == 0.0) continue;
      g.student[i] += beta * (q.probs - p.probs) / temp;
      if (teacher_grads) g.teacher[i] += beta * kl_teacher_grad(p, q, kl, temp);
    }
  }
  out.loss.total = out.loss.de + out.loss.ce + alpha * out.loss.cross +
                   beta * out.loss.self;
  return out;
}

}  // namespace mvd
