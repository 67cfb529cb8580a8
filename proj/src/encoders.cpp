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

#include "mvd/encoders.hpp"

#include <cmath>

#include "mvd/common.hpp"

namespace mvd {
namespace {

void fill_uniform(Matrix& m, Rng& rng, double scale) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.uniform(-scale, scale);
  }
}

Vector mean_embedding(const Matrix& table, std::span<const TokenId> tokens) {
  Vector mean = Vector::Zero(table.cols());
  if (tokens.empty()) return mean;
  for (TokenId t : tokens) mean += table.row(t).transpose();
  return mean / static_cast<double>(tokens.size());
}

void scatter_mean_grad(Tensor& table, std::span<const TokenId> tokens,
                       const Vector& d_mean) {
  if (tokens.empty()) return;
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (TokenId t : tokens) {
    table.grad.row(t) += inv * d_mean.transpose();
    table.mark_row(t);
  }
}

void check_tokens(std::span<const TokenId> tokens, Eigen::Index vocab) {
  for (TokenId t : tokens) {
    if (static_cast<Eigen::Index>(t) >= vocab) {
      throw ValidationError("token id " + std::to_string(t) +
                            " outside encoder vocabulary of " +
                            std::to_string(vocab));
    }
  }
}

std::string tname(Tower tower, const char* leaf) {
  return std::string(tower_prefix(tower)) + "." + leaf;
}

bool finite(const Vector& v) { return v.allFinite(); }

}  // namespace

void validate(const EncoderConfig& cfg) {
  if (cfg.vocab_size <= kFirstWordId || cfg.d_emb < 1 || cfg.d_hid < 1 ||
      cfg.d_out < 1) {
    throw ValidationError("encoder dimensions must be >= 1 and vocab > 5");
  }
  for (double scale : {cfg.init_scale, cfg.embedding_init_scale}) {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
      throw ValidationError("init_scale and embedding_init_scale must be positive");
    }
  }
}

const char* tower_prefix(Tower tower) {
  return tower == Tower::kMention ? "mention" : "entity";
}

ParamStore make_student(const EncoderConfig& cfg) {
  validate(cfg);
  const auto v = static_cast<Eigen::Index>(cfg.vocab_size);
  const auto e = static_cast<Eigen::Index>(cfg.d_emb);
  const auto h = static_cast<Eigen::Index>(cfg.d_hid);
  const auto o = static_cast<Eigen::Index>(cfg.d_out);
  ParamStore ps;
  Rng rng(cfg.seed);
  for (Tower tower : {Tower::kMention, Tower::kEntity}) {
    fill_uniform(ps.add(tname(tower, "embedding"), v, e, 2, true).value, rng,
                 cfg.embedding_init_scale);
    fill_uniform(ps.add(tname(tower, "w1"), h, e, 2).value, rng,
                 cfg.init_scale);
    ps.add(tname(tower, "b1"), h, 1, 1);
    fill_uniform(ps.add(tname(tower, "w2"), o, h, 2).value, rng,
                 cfg.init_scale);
    ps.add(tname(tower, "b2"), o, 1, 1);
  }
  return ps;
}

ParamStore make_teacher(const EncoderConfig& cfg) {
  validate(cfg);
  const auto v = static_cast<Eigen::Index>(cfg.vocab_size);
  const auto e = static_cast<Eigen::Index>(cfg.d_emb);
  const auto h = static_cast<Eigen::Index>(cfg.d_hid);
  ParamStore ps;
  Rng rng(cfg.seed ^ 0x7EAC4E57ULL);
  fill_uniform(ps.add("teacher.embedding", v, e, 2, true).value, rng,
               cfg.embedding_init_scale);
  fill_uniform(ps.add("teacher.w1", h, 4 * e, 2).value, rng, cfg.init_scale);
  ps.add("teacher.b1", h, 1, 1);
  fill_uniform(ps.add("teacher.w2", 1, h, 2).value, rng, cfg.init_scale);
  ps.add("teacher.b2", 1, 1, 1);
  return ps;
}

EncoderConfig infer_config(const ParamStore& params) {
  EncoderConfig cfg;
  if (const Tensor* emb = params.find("mention.embedding")) {
    cfg.vocab_size = static_cast<std::size_t>(emb->value.rows());
    cfg.d_emb = static_cast<std::size_t>(emb->value.cols());
    cfg.d_hid = static_cast<std::size_t>(params.at("mention.w1").value.rows());
    cfg.d_out = static_cast<std::size_t>(params.at("mention.w2").value.rows());
  } else if (const Tensor* temb = params.find("teacher.embedding")) {
    cfg.vocab_size = static_cast<std::size_t>(temb->value.rows());
    cfg.d_emb = static_cast<std::size_t>(temb->value.cols());
    cfg.d_hid = static_cast<std::size_t>(params.at("teacher.w1").value.rows());
    cfg.d_out = 1;
  } else {
    throw ValidationError("parameter store holds neither a student nor a teacher");
  }
  return cfg;
}

TowerTrace trace_tower(const ParamStore& student, Tower tower,
                       std::span<const TokenId> tokens) {
  const Matrix& emb = student.at(tname(tower, "embedding")).value;
  check_tokens(tokens, emb.rows());
  TowerTrace tr;
  tr.tower = tower;
  tr.tokens.assign(tokens.begin(), tokens.end());
  tr.mean = mean_embedding(emb, tokens);
  tr.hidden = (student.at(tname(tower, "w1")).value * tr.mean +
               student.at(tname(tower, "b1")).value.col(0))
                  .array()
                  .tanh()
                  .matrix();
  tr.out = student.at(tname(tower, "w2")).value * tr.hidden +
           student.at(tname(tower, "b2")).value.col(0);
  return tr;
}

TowerTrace trace_mention(const ParamStore& student, const TokenSeq& seq) {
  return trace_tower(student, Tower::kMention, seq.tokens);
}

TowerTrace trace_view(const ParamStore& student, const TokenSeq& seq) {
  return trace_tower(student, Tower::kEntity, seq.tokens);
}

Vector encode_mention(const ParamStore& student, const TokenSeq& seq) {
  if (seq.kind != SeqKind::kMention) {
    throw ValidationError("encode_mention expects a mention sequence");
  }
  return trace_mention(student, seq).out;
}

Vector encode_view(const ParamStore& student, const TokenSeq& seq) {
  if (seq.kind != SeqKind::kView) {
    throw ValidationError("encode_view expects a view sequence");
  }
  return trace_view(student, seq).out;
}

TeacherTrace trace_teacher(const ParamStore& teacher, const TokenSeq& mention_seq,
                           const TokenSeq& view_seq,
                           std::size_t max_cross_length) {
  const Matrix& emb = teacher.at("teacher.embedding").value;
  const TokenSeq joint = make_joint_seq(mention_seq, view_seq, max_cross_length);
  const auto seg = split_joint(joint);
  check_tokens(joint.tokens, emb.rows());

  TeacherTrace tr;
  tr.mention_tokens.assign(seg.mention_body.begin(), seg.mention_body.end());
  tr.view_tokens.assign(seg.view_body.begin(), seg.view_body.end());
  tr.mu_m = mean_embedding(emb, seg.mention_body);
  tr.mu_v = mean_embedding(emb, seg.view_body);
  const Eigen::Index d = emb.cols();
  tr.features.resize(4 * d);
  tr.features << tr.mu_m, tr.mu_v, tr.mu_m.cwiseProduct(tr.mu_v),
      (tr.mu_m - tr.mu_v).cwiseAbs();
  tr.hidden = (teacher.at("teacher.w1").value * tr.features +
               teacher.at("teacher.b1").value.col(0))
                  .array()
                  .tanh()
                  .matrix();
  tr.score = teacher.at("teacher.w2").value.row(0).dot(tr.hidden) +
             teacher.at("teacher.b2").value(0, 0);
  return tr;
}

double teacher_score(const ParamStore& teacher, const TokenSeq& mention_seq,
                     const TokenSeq& view_seq, std::size_t max_cross_length) {
  return trace_teacher(teacher, mention_seq, view_seq, max_cross_length).score;
}

void backprop_tower(ParamStore& student, const TowerTrace& trace,
                    const Vector& d_out) {
  const Tower tower = trace.tower;
  Tensor& w1 = student.at(tname(tower, "w1"));
  Tensor& w2 = student.at(tname(tower, "w2"));
  student.at(tname(tower, "b2")).grad.col(0) += d_out;
  w2.grad.noalias() += d_out * trace.hidden.transpose();
  const Vector d_pre =
      (w2.value.transpose() * d_out).cwiseProduct(
          (1.0 - trace.hidden.array().square()).matrix());
  student.at(tname(tower, "b1")).grad.col(0) += d_pre;
  w1.grad.noalias() += d_pre * trace.mean.transpose();
  const Vector d_mean = w1.value.transpose() * d_pre;
  scatter_mean_grad(student.at(tname(tower, "embedding")), trace.tokens, d_mean);
}

void backprop_teacher(ParamStore& teacher, const TeacherTrace& trace,
                      double d_score) {
  Tensor& w1 = teacher.at("teacher.w1");
  Tensor& w2 = teacher.at("teacher.w2");
  teacher.at("teacher.b2").grad(0, 0) += d_score;
  w2.grad.row(0) += d_score * trace.hidden.transpose();
  const Vector d_pre = (d_score * w2.value.row(0).transpose())
                           .cwiseProduct(
                               (1.0 - trace.hidden.array().square()).matrix());
  teacher.at("teacher.b1").grad.col(0) += d_pre;
  w1.grad.noalias() += d_pre * trace.features.transpose();
  const Vector d_feat = w1.value.transpose() * d_pre;

  const Eigen::Index d = trace.mu_m.size();
  const Vector sign = (trace.mu_m - trace.mu_v)
                          .unaryExpr([](double x) {
                            return static_cast<double>((x > 0) - (x < 0));
                          });
  const Vector d_abs = d_feat.segment(3 * d, d).cwiseProduct(sign);
  const Vector d_prod = d_feat.segment(2 * d, d);
  const Vector d_mu_m =
      d_feat.segment(0, d) + d_prod.cwiseProduct(trace.mu_v) + d_abs;
  const Vector d_mu_v =
      d_feat.segment(d, d) + d_prod.cwiseProduct(trace.mu_m) - d_abs;
  Tensor& emb = teacher.at("teacher.embedding");
  scatter_mean_grad(emb, trace.mention_tokens, d_mu_m);
  scatter_mean_grad(emb, trace.view_tokens, d_mu_v);
}

namespace {

void require_finite(const ForwardGraph& g, double loss) {
  auto fail = [](const std::string& what) {
    throw NumericError("non-finite value in " + what);
  };
  auto check_tower = [&](const TowerTrace& t, const std::string& where) {
    if (!finite(t.mean)) fail(where + ".mean");
    if (!finite(t.hidden)) fail(where + ".hidden");
    if (!finite(t.out)) fail(where + ".out");
  };
  check_tower(g.mention, "mention");
  for (std::size_t i = 0; i < g.student_views.size(); ++i) {
    for (std::size_t t = 0; t < g.student_views[i].size(); ++t) {
      check_tower(g.student_views[i][t], "candidate[" + std::to_string(i) +
                                             "].view[" + std::to_string(t) +
                                             "]");
    }
  }
  for (std::size_t i = 0; i < g.teacher_views.size(); ++i) {
    for (std::size_t t = 0; t < g.teacher_views[i].size(); ++t) {
      const auto& tt = g.teacher_views[i][t];
      const std::string where = "teacher.candidate[" + std::to_string(i) +
                                "].view[" + std::to_string(t) + "]";
      if (!finite(tt.features)) fail(where + ".features");
      if (!finite(tt.hidden)) fail(where + ".hidden");
      if (!std::isfinite(tt.score)) fail(where + ".score");
    }
  }
  if (!std::isfinite(loss)) fail("loss");
}

}  // namespace

void backprop(ParamStore& student, ParamStore* teacher,
              const ForwardGraph& graph, const ScoreGradients& grads,
              double loss, BackpropOptions opts) {
  require_finite(graph, loss);
  if (!opts.accumulate) {
    student.zero_grad();
    if (teacher) teacher->zero_grad();
  }
  Vector d_mention = Vector::Zero(graph.mention.out.size());
  for (std::size_t i = 0; i < graph.student_views.size(); ++i) {
    for (std::size_t t = 0; t < graph.student_views[i].size(); ++t) {
      const double g = grads.student[i](static_cast<Eigen::Index>(t));
      if (g == 0.0) continue;
      const auto& view = graph.student_views[i][t];
      d_mention += g * view.out;
      backprop_tower(student, view, g * graph.mention.out);
    }
  }
  backprop_tower(student, graph.mention, d_mention);

  if (teacher == nullptr || grads.teacher.empty()) return;
  for (std::size_t i = 0; i < graph.teacher_views.size(); ++i) {
    for (std::size_t t = 0; t < graph.teacher_views[i].size(); ++t) {
      const double g = grads.teacher[i](static_cast<Eigen::Index>(t));
      if (g != 0.0) backprop_teacher(*teacher, graph.teacher_views[i][t], g);
    }
  }
}

}  // namespace mvd
