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

#include "mvd/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "mvd/index.hpp"

namespace mvd {
namespace {

void log_step(const TrainObserver& obs, std::size_t step, const LossBreakdown& l) {
  if (!obs.log) return;
  *obs.log << step << '\t' << l.de << '\t' << l.ce << '\t' << l.cross << '\t'
           << l.self << '\t' << l.total << '\n';
}

void require_stage(const TrainConfig& cfg, Stage stage) {
  validate(cfg);
  if (cfg.stage != stage) {
    throw ValidationError(std::string("expected a ") + to_string(stage) +
                          " config, got " + to_string(cfg.stage));
  }
}

std::vector<std::size_t> epoch_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  return order;
}

std::vector<const ViewSet*> candidate_ptrs(const TrainingSet& data,
                                           std::span<const std::uint32_t> ords) {
  std::vector<const ViewSet*> out;
  out.reserve(ords.size());
  for (auto e : ords) out.push_back(&data.views[e]);
  return out;
}

std::vector<std::uint32_t> assemble_candidates(
    const TrainingSet& data, const NegativePool& pool, std::size_t mention,
    std::size_t k, bool exclude_gold, Rng& rng) {
  const std::uint32_t gold = data.gold[mention];
  auto negatives =
      sample_negatives(pool.per_mention[mention], k, rng,
                       exclude_gold ? std::optional(gold) : std::nullopt);
  std::vector<std::uint32_t> cands;
  cands.reserve(negatives.size() + 1);
  cands.push_back(gold);
  cands.insert(cands.end(), negatives.begin(), negatives.end());
  return cands;
}

void check_candidate_contract(const std::vector<std::uint32_t>& cands,
                              std::size_t expected, bool exclude_gold) {
  if (cands.size() != expected) {
    throw std::logic_error("candidate set has " + std::to_string(cands.size()) +
                           " entries, expected " + std::to_string(expected));
  }
  if (!exclude_gold) return;
  auto sorted = cands;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::logic_error("candidate set contains a repeated entity");
  }
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::kWarmupDual: return "warmup_dual";
    case Stage::kWarmupCross: return "warmup_cross";
    case Stage::kMvd: return "mvd";
  }
  return "?";
}

Stage parse_stage(const std::string& name) {
  if (name == "warmup_dual") return Stage::kWarmupDual;
  if (name == "warmup_cross") return Stage::kWarmupCross;
  if (name == "mvd") return Stage::kMvd;
  throw ValidationError("unknown stage '" + name + "'");
}

TrainConfig default_config(Stage stage) {
  TrainConfig cfg;
  cfg.stage = stage;
  switch (stage) {
    case Stage::kWarmupDual:
      cfg.epochs = 40;
      cfg.batch_size = 64;
      cfg.negatives_K = 63;
      cfg.learning_rate = 0.5;
      break;
    case Stage::kWarmupCross:
      cfg.epochs = 3;
      cfg.batch_size = 1;
      cfg.negatives_K = 15;
      cfg.learning_rate = 0.05;
      break;
    case Stage::kMvd:
      cfg.epochs = 5;
      cfg.batch_size = 1;
      cfg.negatives_K = 15;
      cfg.learning_rate = 0.05;
      break;
  }
  return cfg;
}

void validate(const TrainConfig& cfg) {
  if (cfg.negatives_K < 1 || cfg.retrieve_N < cfg.negatives_K) {
    throw ValidationError("require retrieve_N >= negatives_K >= 1");
  }
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ValidationError("learning_rate must be positive");
  }
  if (cfg.batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(cfg.max_grad_norm >= 0.0) || !std::isfinite(cfg.max_grad_norm)) {
    throw ValidationError("max_grad_norm must be finite and >= 0");
  }
  if (!(cfg.alpha >= 0.0) || !(cfg.beta >= 0.0) || !std::isfinite(cfg.alpha) ||
      !std::isfinite(cfg.beta)) {
    throw ValidationError("alpha and beta must be finite and >= 0");
  }
}

TrainingSet prepare_training_set(std::span<const EntityRecord> entities,
                                 std::span<const MentionRecord> mentions,
                                 const SegmentationConfig& seg) {
  validate(seg);
  TrainingSet data;
  data.seg = seg;
  data.views = make_all_views(entities, seg);
  for (std::uint32_t e = 0; e < entities.size(); ++e) {
    if (!data.entity_ord.emplace(entities[e].id, e).second) {
      throw ValidationError("duplicate entity id '" + entities[e].id + "'");
    }
  }
  for (const auto& m : mentions) {
    auto it = data.entity_ord.find(m.gold_entity_id);
    if (it == data.entity_ord.end()) {
      throw ValidationError("mention '" + m.id + "' refers to unknown entity '" +
                            m.gold_entity_id + "'");
    }
    data.mention_ids.push_back(m.id);
    data.mentions.push_back(make_mention_seq(m, seg));
    data.gold.push_back(it->second);
  }
  return data;
}

NegativePool build_negative_pool(const ParamStore& student,
                                 const TrainingSet& data, std::size_t retrieve_n,
                                 bool exclude_gold, ViewSelection views) {
  const ViewIndex index = build_index(student, data.views, views);
  NegativePool pool;
  pool.retrieve_n = retrieve_n;
  pool.per_mention.resize(data.num_mentions());
  for (std::size_t i = 0; i < data.num_mentions(); ++i) {
    const Vector q = encode_mention(student, data.mentions[i]);
    const auto result =
        index.search_exact(q, retrieve_n + (exclude_gold ? 1 : 0));
    auto& out = pool.per_mention[i];
    for (const auto& hit : result.hits) {
      if (exclude_gold && hit.entity_ord == data.gold[i]) continue;
      if (out.size() == retrieve_n) break;
      out.push_back(hit.entity_ord);
    }
  }
  return pool;
}

std::vector<std::uint32_t> sample_negatives(std::span<const std::uint32_t> pool,
                                            std::size_t k, Rng& rng,
                                            std::optional<std::uint32_t> gold) {
  std::vector<std::uint32_t> items;
  items.reserve(pool.size());
  for (auto e : pool) {
    if (!gold || e != *gold) items.push_back(e);
  }
  if (items.size() <= k) {
    if (items.size() < k) {
      warn("negative pool holds " + std::to_string(items.size()) +
           " entities, fewer than K=" + std::to_string(k) +
           "; using the whole pool");
    }
    return items;
  }
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(items.size() - i));
    std::swap(items[i], items[j]);
  }
  items.resize(k);
  return items;
}

void sgd_update(ParamStore& params, double learning_rate) {
  for (const auto& t : params.tensors()) {
    bool ok = true;
    if (t.row_sparse) {
      for (auto r : t.touched_rows) ok = ok && t.grad.row(r).allFinite();
    } else {
      ok = t.grad.allFinite();
    }
    if (!ok) throw NumericError("non-finite gradient in tensor '" + t.name + "'");
  }
  for (auto& t : params.tensors()) {
    if (t.row_sparse) {
      for (auto r : t.touched_rows) t.value.row(r) -= learning_rate * t.grad.row(r);
    } else {
      t.value -= learning_rate * t.grad;
    }
  }
  params.zero_grad();
}

double grad_norm(const ParamStore& params) {
  double sq = 0.0;
  for (const auto& t : params.tensors()) {
    if (t.row_sparse) {
      for (auto r : t.touched_rows) sq += t.grad.row(r).squaredNorm();
    } else {
      sq += t.grad.squaredNorm();
    }
  }
  return std::sqrt(sq);
}

double clip_grad_norm(ParamStore& params, double max_norm) {
  const double norm = grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& t : params.tensors()) {
      if (t.row_sparse) {
        for (auto r : t.touched_rows) t.grad.row(r) *= scale;
      } else {
        t.grad *= scale;
      }
    }
  }
  return norm;
}

StudentResult warmup_dual(const TrainingSet& data, ParamStore student,
                          const TrainConfig& cfg, ViewSelection views,
                          const TrainObserver& observer) {
  require_stage(cfg, Stage::kWarmupDual);
  StudentResult result;
  Rng rng(cfg.seed);
  student.zero_grad();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng = rng.fork(epoch);
    const auto order = epoch_order(data.num_mentions(), erng);
    std::vector<double> losses;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::uint32_t> cands;
      std::vector<std::size_t> gold_pos;
      for (std::size_t b = start; b < end; ++b) {
        const auto g = data.gold[order[b]];
        auto it = std::find(cands.begin(), cands.end(), g);
        gold_pos.push_back(static_cast<std::size_t>(it - cands.begin()));
        if (it == cands.end()) cands.push_back(g);
      }
      if (cands.size() < 2) {
        warn("in-batch step with a single candidate entity carries no "
             "training signal; skipped");
        ++result.history.skipped_batches;
        continue;
      }

      std::vector<std::vector<TowerTrace>> view_traces;
      std::vector<std::vector<Vector>> d_view;
      for (auto e : cands) {
        auto& row = view_traces.emplace_back();
        auto& drow = d_view.emplace_back();
        for (const TokenSeq* v : selected_views(data.views[e], views)) {
          row.push_back(trace_view(student, *v));
          drow.push_back(Vector::Zero(row.back().out.size()));
        }
      }

      const double scale = 1.0 / static_cast<double>(end - start);
      LossBreakdown batch_loss;
      for (std::size_t b = start; b < end; ++b) {
        const TowerTrace mention = trace_mention(student, data.mentions[order[b]]);
        ScoreMatrix sm;
        for (const auto& row : view_traces) {
          Vector s(static_cast<Eigen::Index>(row.size()));
          for (std::size_t t = 0; t < row.size(); ++t) {
            s(static_cast<Eigen::Index>(t)) = student_score(mention.out, row[t].out);
          }
          sm.student_scores.push_back(std::move(s));
        }
        pool_grids(sm);
        const auto lg = total_loss_with_gradients(sm, gold_pos[b - start], {});
        if (!std::isfinite(lg.loss.total)) {
          throw NumericError("non-finite L_de for mention '" +
                             data.mention_ids[order[b]] + "'");
        }
        Vector d_mention = Vector::Zero(mention.out.size());
        for (std::size_t j = 0; j < view_traces.size(); ++j) {
          for (std::size_t t = 0; t < view_traces[j].size(); ++t) {
            const double g = scale * lg.grads.student[j](static_cast<Eigen::Index>(t));
            if (g == 0.0) continue;
            d_mention += g * view_traces[j][t].out;
            d_view[j][t] += g * mention.out;
          }
        }
        backprop_tower(student, mention, d_mention);
        batch_loss.de += scale * lg.loss.de;
      }
      for (std::size_t j = 0; j < view_traces.size(); ++j) {
        for (std::size_t t = 0; t < view_traces[j].size(); ++t) {
          backprop_tower(student, view_traces[j][t], d_view[j][t]);
        }
      }
      clip_grad_norm(student, cfg.max_grad_norm);
      sgd_update(student, cfg.learning_rate);
      batch_loss.total = batch_loss.de;
      losses.push_back(batch_loss.total);
      log_step(observer, result.history.steps, batch_loss);
      if (observer.on_step) {
        observer.on_step({result.history.steps, epoch, order[start], batch_loss, {}, {}});
      }
      ++result.history.steps;
    }
    result.history.epoch_loss.push_back(mean(losses));
  }
  result.student = std::move(student);
  return result;
}

TeacherResult warmup_cross(const TrainingSet& data, const ParamStore& student,
                           ParamStore teacher, const TrainConfig& cfg,
                           ViewSelection views, const TrainObserver& observer) {
  require_stage(cfg, Stage::kWarmupCross);
  TeacherResult result;
  if (cfg.epochs == 0) {
    result.teacher = std::move(teacher);
    return result;
  }
  const NegativePool pool = build_negative_pool(
      student, data, cfg.retrieve_N, cfg.exclude_gold_from_negatives, views);
  ++result.history.refreshes;
  if (observer.on_refresh) observer.on_refresh(0, pool);
  Rng rng(cfg.seed);
  teacher.zero_grad();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng = rng.fork(epoch);
    const auto order = epoch_order(data.num_mentions(), erng);
    std::vector<double> losses;
    for (std::size_t i : order) {
      const auto cands = assemble_candidates(data, pool, i, cfg.negatives_K,
                                             cfg.exclude_gold_from_negatives, erng);
      std::vector<std::vector<TeacherTrace>> traces;
      ScoreMatrix sm;
      for (auto e : cands) {
        auto& row = traces.emplace_back();
        for (const TokenSeq* v : selected_views(data.views[e], views)) {
          row.push_back(trace_teacher(teacher, data.mentions[i], *v,
                                      data.seg.max_cross_length));
        }
        Vector s(static_cast<Eigen::Index>(row.size()));
        for (std::size_t t = 0; t < row.size(); ++t) {
          s(static_cast<Eigen::Index>(t)) = row[t].score;
        }
        sm.student_scores.push_back(s);
        sm.teacher_scores.push_back(std::move(s));
      }
      pool_grids(sm);
      LossBreakdown l;
      l.ce = supervised_loss(sm.entity_scores_ce, 0);
      l.total = l.ce;
      if (!std::isfinite(l.total)) {
        throw NumericError("non-finite L_ce for mention '" + data.mention_ids[i] + "'");
      }
      const auto p = softmax(sm.entity_scores_ce);
      for (std::size_t j = 0; j < cands.size(); ++j) {
        const double g = p.probs(static_cast<Eigen::Index>(j)) - (j == 0 ? 1.0 : 0.0);
        backprop_teacher(teacher, traces[j][sm.i_ce[j]], g);
      }
      clip_grad_norm(teacher, cfg.max_grad_norm);
      sgd_update(teacher, cfg.learning_rate);
      losses.push_back(l.total);
      log_step(observer, result.history.steps, l);
      if (observer.on_step) {
        observer.on_step({result.history.steps, epoch, i, l, cands, pool.per_mention[i]});
      }
      ++result.history.steps;
    }
    result.history.epoch_loss.push_back(mean(losses));
  }
  result.teacher = std::move(teacher);
  return result;
}

MvdResult mvd_train(const TrainingSet& data, ParamStore student,
                    ParamStore teacher, const TrainConfig& cfg,
                    const MvdOptions& opts, const TrainObserver& observer) {
  require_stage(cfg, Stage::kMvd);
  MvdResult result;
  ForwardOptions fwd;
  fwd.student_views = opts.student_views;
  fwd.use_teacher = true;
  fwd.teacher_views = opts.teacher_views;
  fwd.max_cross_length = data.seg.max_cross_length;

  DistillOptions distill;
  distill.weights = {cfg.alpha, cfg.beta};
  distill.temperature = opts.temperature;
  distill.cross_view = opts.cross_view;
  distill.self_gold_only = opts.self_gold_only;
  distill.teacher_trainable = !cfg.freeze_teacher;

  NegativePool pool;
  auto refresh = [&](std::size_t step) {
    pool = build_negative_pool(student, data, cfg.retrieve_N,
                               cfg.exclude_gold_from_negatives, opts.student_views);
    ++result.history.refreshes;
    if (observer.on_refresh) observer.on_refresh(step, pool);
  };

  Rng rng(cfg.seed);
  student.zero_grad();
  teacher.zero_grad();
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng = rng.fork(epoch);
    const auto order = epoch_order(data.num_mentions(), erng);
    if (epoch == 0 || cfg.refresh_interval == kRefreshPerEpoch) refresh(step);
    std::vector<double> losses;
    for (std::size_t i : order) {
      if (cfg.refresh_interval > 0 && step > 0 &&
          step % static_cast<std::size_t>(cfg.refresh_interval) == 0) {
        refresh(step);
      }
      const auto cands = assemble_candidates(data, pool, i, cfg.negatives_K,
                                             cfg.exclude_gold_from_negatives, erng);
      const std::size_t available =
          std::min<std::size_t>(cfg.negatives_K, pool.per_mention[i].size());
      check_candidate_contract(cands, available + 1, cfg.exclude_gold_from_negatives);

      const auto ptrs = candidate_ptrs(data, cands);
      const ForwardGraph graph =
          forward_candidates(student, &teacher, data.mentions[i], ptrs, fwd);
      const ScoreMatrix sm = score_matrix(graph);
      const auto lg = total_loss_with_gradients(sm, 0, distill);
      backprop(student, cfg.freeze_teacher ? nullptr : &teacher, graph, lg.grads,
               lg.loss.total);
      clip_grad_norm(student, cfg.max_grad_norm);
      sgd_update(student, cfg.learning_rate);
      if (!cfg.freeze_teacher) {
        clip_grad_norm(teacher, cfg.max_grad_norm);
        sgd_update(teacher, cfg.learning_rate);
      }

      losses.push_back(lg.loss.total);
      log_step(observer, step, lg.loss);
      if (observer.on_step) {
        observer.on_step({step, epoch, i, lg.loss, cands, pool.per_mention[i]});
      }
      ++step;
    }
    result.history.epoch_loss.push_back(mean(losses));
  }
  result.history.steps = step;
  result.student = std::move(student);
  result.teacher = std::move(teacher);
  return result;
}

double candidate_accuracy(const TrainingSet& data, const ParamStore& student,
                          const ParamStore* teacher, const NegativePool& pool,
                          std::size_t negatives_k, std::uint64_t seed,
                          bool use_teacher) {
  if (data.num_mentions() == 0) return 0.0;
  Rng rng(seed);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.num_mentions(); ++i) {
    const auto cands = assemble_candidates(data, pool, i, negatives_k, true, rng);
    const auto ptrs = candidate_ptrs(data, cands);
    const ScoreMatrix sm = score_candidates(student, teacher, data.mentions[i], ptrs,
                                            use_teacher, false,
                                            data.seg.max_cross_length);
    const Vector& s = use_teacher ? sm.entity_scores_ce : sm.entity_scores_de;
    bool best = true;
    for (Eigen::Index j = 1; j < s.size(); ++j) best = best && s(0) > s(j);
    correct += best ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.num_mentions());
}

}  // namespace mvd
