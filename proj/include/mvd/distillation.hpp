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

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "mvd/common.hpp"
#include "mvd/scoring.hpp"

namespace mvd {

template <typename Scalar>
using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Probabilities kept together with their logarithms.
template <typename Scalar>
struct Distribution {
  ColVector<Scalar> probs;
  ColVector<Scalar> log_probs;

  Eigen::Index size() const { return probs.size(); }
};

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.size() == 0) {
    throw ValidationError("log_sum_exp of an empty vector");
  }
  const Scalar m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum());
}

/// Max-subtracted softmax of scores / temperature.
template <typename Derived>
Distribution<typename Derived::Scalar> softmax(
    const Eigen::MatrixBase<Derived>& scores,
    typename Derived::Scalar temperature = 1) {
  using Scalar = typename Derived::Scalar;
  if (scores.size() == 0) throw ValidationError("softmax of an empty vector");
  if (!scores.allFinite()) throw NumericError("softmax: non-finite score");
  const ColVector<Scalar> z = scores / temperature;
  const Scalar lse = log_sum_exp(z);
  Distribution<Scalar> d;
  d.log_probs = z.array() - lse;
  d.probs = d.log_probs.array().exp();
  return d;
}

/// KL(p || q) = sum_i p_i (log p_i - log q_i); zero-probability terms of p
/// contribute nothing.
template <typename Scalar>
Scalar kl_divergence(const Distribution<Scalar>& p, const Distribution<Scalar>& q) {
  if (p.size() != q.size()) {
    throw ValidationError("kl_divergence: length mismatch (" +
                          std::to_string(p.size()) + " vs " +
                          std::to_string(q.size()) + ")");
  }
  Scalar kl = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p.probs(i) > 0) kl += p.probs(i) * (p.log_probs(i) - q.log_probs(i));
  }
  return kl;
}

struct LossWeights {
  double alpha = 0.3;
  double beta = 0.1;
};

/// Which max-pool index represents each candidate in the cross-alignment
/// distributions.
enum class RelevantView : std::uint8_t { kTeacher, kStudent };

struct DistillOptions {
  LossWeights weights;
  double temperature = 1.0;
  RelevantView cross_view = RelevantView::kTeacher;
  /// Sum self-alignment over the gold candidate only.
  bool self_gold_only = false;
  /// When false the teacher grid receives no gradient from any term.
  bool teacher_trainable = true;
};

struct LossBreakdown {
  double de = 0.0;
  double ce = 0.0;
  double cross = 0.0;
  double self = 0.0;
  double total = 0.0;
};

/// Softmax cross-entropy -s_gold + log sum_j exp(s_j).
double supervised_loss(const Vector& entity_scores, std::size_t gold_index);

double cross_alignment_loss(const ScoreMatrix& sm,
                            RelevantView view = RelevantView::kTeacher,
                            double temperature = 1.0);

double self_alignment_loss(const ScoreMatrix& sm, double temperature = 1.0,
                           bool gold_only = false, std::size_t gold_index = 0);

/// L_de + L_ce + alpha * L_cross + beta * L_self. Without a teacher grid only
/// L_de is nonzero.
LossBreakdown total_loss(const ScoreMatrix& sm, std::size_t gold_index,
                         const LossWeights& w);
LossBreakdown total_loss(const ScoreMatrix& sm, std::size_t gold_index,
                         const DistillOptions& opts);

struct LossWithGradients {
  LossBreakdown loss;
  ScoreGradients grads;
};

/// Loss and its gradient with respect to every score-grid cell, treating the
/// max-pool indices as constants.
LossWithGradients total_loss_with_gradients(const ScoreMatrix& sm,
                                            std::size_t gold_index,
                                            const DistillOptions& opts);

}  // namespace mvd
