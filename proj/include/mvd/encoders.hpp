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
#include <span>
#include <string>
#include <vector>

#include "mvd/params.hpp"
#include "mvd/views.hpp"

namespace mvd {

/// Shapes and initialization of the reference encoders. Each student tower is
/// embedding (vocab x d_emb) -> mean pool -> tanh(W1 x + b1) -> W2 h + b2.
/// The teacher embeds both sides with one table and scores the joint feature
/// [mu_m; mu_v; mu_m * mu_v; |mu_m - mu_v|] with a tanh MLP to a scalar.
struct EncoderConfig {
  std::size_t vocab_size = 16384;
  std::size_t d_emb = 32;
  std::size_t d_hid = 32;
  std::size_t d_out = 16;
  /// Half-width of the uniform init of MLP weights; biases start at zero.
  double init_scale = 0.1;
  /// Half-width of the uniform init of every embedding table.
  double embedding_init_scale = 0.1;
  std::uint64_t seed = 42;
};

void validate(const EncoderConfig& cfg);

enum class Tower : std::uint8_t { kMention, kEntity };

const char* tower_prefix(Tower tower);

ParamStore make_student(const EncoderConfig& cfg);
ParamStore make_teacher(const EncoderConfig& cfg);

/// Recovers the encoder shapes from a student or teacher store.
EncoderConfig infer_config(const ParamStore& params);

/// Activations of one student tower pass, enough to run it backwards.
struct TowerTrace {
  Tower tower = Tower::kMention;
  std::vector<TokenId> tokens;
  Vector mean;
  Vector hidden;
  Vector out;
};

struct TeacherTrace {
  std::vector<TokenId> mention_tokens;
  std::vector<TokenId> view_tokens;
  Vector mu_m;
  Vector mu_v;
  Vector features;
  Vector hidden;
  double score = 0.0;
};

TowerTrace trace_tower(const ParamStore& student, Tower tower,
                       std::span<const TokenId> tokens);
TowerTrace trace_mention(const ParamStore& student, const TokenSeq& seq);
TowerTrace trace_view(const ParamStore& student, const TokenSeq& seq);

Vector encode_mention(const ParamStore& student, const TokenSeq& seq);
Vector encode_view(const ParamStore& student, const TokenSeq& seq);

TeacherTrace trace_teacher(const ParamStore& teacher, const TokenSeq& mention_seq,
                           const TokenSeq& view_seq,
                           std::size_t max_cross_length);
double teacher_score(const ParamStore& teacher, const TokenSeq& mention_seq,
                     const TokenSeq& view_seq, std::size_t max_cross_length);

/// Adds d(loss)/d(params) for one tower pass given d(loss)/d(out).
void backprop_tower(ParamStore& student, const TowerTrace& trace,
                    const Vector& d_out);
/// Adds d(loss)/d(params) for one teacher pass given d(loss)/d(score).
void backprop_teacher(ParamStore& teacher, const TeacherTrace& trace,
                      double d_score);

/// Ragged per-candidate grid, one entry per view.
using ScoreGrid = std::vector<Vector>;

/// Forward trace of a mention against a candidate list.
struct ForwardGraph {
  TowerTrace mention;
  std::vector<std::vector<TowerTrace>> student_views;
  std::vector<std::vector<TeacherTrace>> teacher_views;  // empty without teacher
};

/// d(loss)/d(score) for each grid cell; an empty teacher grid means the
/// teacher receives no gradient.
struct ScoreGradients {
  ScoreGrid student;
  ScoreGrid teacher;
};

struct BackpropOptions {
  bool accumulate = false;  // keep existing gradient slots
};

/// Reverse pass from score gradients into both parameter stores. Throws
/// NumericError naming the first non-finite intermediate if the loss or any
/// recorded activation is non-finite.
void backprop(ParamStore& student, ParamStore* teacher,
              const ForwardGraph& graph, const ScoreGradients& grads,
              double loss, BackpropOptions opts = {});

}  // namespace mvd
