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

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mvd/common.hpp"
#include "mvd/config.hpp"
#include "mvd/corpus.hpp"
#include "mvd/eval.hpp"
#include "mvd/index.hpp"
#include "mvd/params.hpp"
#include "mvd/training.hpp"
#include "mvd/views.hpp"

namespace {

using mvd::PipelineConfig;
namespace fs = std::filesystem;

struct ConfigFlags {
  std::string path;
  std::vector<std::string> sets;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.path, "JSON config file");
  cmd->add_option("--set", flags.sets, "override, e.g. --set mvd.alpha=0.5")
      ->allow_extra_args(false);
}

nlohmann::json config_document(const ConfigFlags& flags) {
  nlohmann::json doc = nlohmann::json::object();
  if (!flags.path.empty()) {
    std::ifstream in(flags.path);
    if (!in) throw mvd::ValidationError("cannot open config '" + flags.path + "'");
    doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
      throw mvd::ValidationError("config '" + flags.path + "' is not valid JSON");
    }
  }
  for (const auto& s : flags.sets) mvd::apply_override(doc, s);
  return doc;
}

PipelineConfig load_config(const ConfigFlags& flags) {
  return mvd::pipeline_config_from_json(config_document(flags));
}

std::vector<mvd::MentionRecord> load_checked_mentions(
    const std::vector<mvd::EntityRecord>& entities, const std::string& path) {
  auto mentions = mvd::load_mentions(path);
  mvd::check_gold_coverage(entities, mentions);
  return mentions;
}

/// Opens a log stream when a path was given.
std::optional<std::ofstream> open_log(const std::string& path) {
  if (path.empty()) return std::nullopt;
  std::optional<std::ofstream> out(std::in_place, path);
  if (!*out) throw mvd::FormatError("cannot write log '" + path + "'");
  *out << "step\tL_de\tL_ce\tL_cross\tL_self\tL_total\n";
  return out;
}

void write_vector(std::ostream& out, const mvd::Vector& v) {
  out << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out << ',';
    out << nlohmann::json(v(i)).dump();
  }
  out << ']';
}

std::vector<mvd::ToggleSet> parse_runs(const std::vector<std::string>& specs) {
  std::vector<mvd::ToggleSet> runs;
  for (const auto& spec : specs) {
    mvd::ToggleSet set;
    if (spec != "full" && !spec.empty()) {
      std::stringstream ss(spec);
      std::string name;
      while (std::getline(ss, name, ',')) {
        if (!name.empty()) set.insert(mvd::parse_toggle(name));
      }
    }
    runs.push_back(std::move(set));
  }
  if (runs.empty()) runs.emplace_back();
  return runs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view entity retrieval with cross-encoder distillation"};
  app.require_subcommand(1);

  // synth
  ConfigFlags synth_cfg;
  std::optional<std::size_t> n_entities, n_facets, n_mentions, vocab;
  std::optional<double> noise, test_fraction;
  std::optional<std::uint64_t> synth_seed;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a synthetic facet corpus");
  add_config_flags(synth, synth_cfg);
  synth->add_option("--entities", n_entities, "number of entities");
  synth->add_option("--facets", n_facets, "facets per entity");
  synth->add_option("--mentions-per-facet", n_mentions, "mentions per facet");
  synth->add_option("--vocab", vocab, "vocabulary size");
  synth->add_option("--noise", noise, "token noise rate");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--test-fraction", test_fraction,
                    "also write train.jsonl and test.jsonl with this held-out share");
  synth->add_option("--out", synth_out, "output directory")->required();

  // segment
  ConfigFlags seg_cfg;
  std::string seg_entities, seg_out;
  auto* segment = app.add_subcommand("segment", "split entities into views");
  add_config_flags(segment, seg_cfg);
  segment->add_option("--entities", seg_entities, "entities.jsonl")->required();
  segment->add_option("--out", seg_out, "views.jsonl")->required();

  // warmup-dual
  ConfigFlags wd_cfg;
  std::string wd_entities, wd_mentions, wd_out, wd_log;
  auto* wdual = app.add_subcommand("warmup-dual", "in-batch dual-encoder warmup");
  add_config_flags(wdual, wd_cfg);
  wdual->add_option("--entities", wd_entities, "entities.jsonl")->required();
  wdual->add_option("--mentions", wd_mentions, "training mentions.jsonl")->required();
  wdual->add_option("--out", wd_out, "student checkpoint")->required();
  wdual->add_option("--log", wd_log, "per-step TSV loss log");

  // warmup-cross
  ConfigFlags wc_cfg;
  std::string wc_entities, wc_mentions, wc_student, wc_out, wc_log;
  auto* wcross = app.add_subcommand("warmup-cross", "static-negative teacher warmup");
  add_config_flags(wcross, wc_cfg);
  wcross->add_option("--entities", wc_entities, "entities.jsonl")->required();
  wcross->add_option("--mentions", wc_mentions, "training mentions.jsonl")->required();
  wcross->add_option("--student", wc_student, "warmed-up student checkpoint")->required();
  wcross->add_option("--out", wc_out, "teacher checkpoint")->required();
  wcross->add_option("--log", wc_log, "per-step TSV loss log");

  // distill
  ConfigFlags ds_cfg;
  std::string ds_entities, ds_mentions, ds_student, ds_teacher, ds_out_student,
      ds_out_teacher, ds_log;
  auto* distill = app.add_subcommand("distill", "joint multi-view distillation");
  add_config_flags(distill, ds_cfg);
  distill->add_option("--entities", ds_entities, "entities.jsonl")->required();
  distill->add_option("--mentions", ds_mentions, "training mentions.jsonl")->required();
  distill->add_option("--student", ds_student, "student checkpoint")->required();
  distill->add_option("--teacher", ds_teacher, "teacher checkpoint")->required();
  distill->add_option("--out-student", ds_out_student, "trained student")->required();
  distill->add_option("--out-teacher", ds_out_teacher, "trained teacher")->required();
  distill->add_option("--log", ds_log, "per-step TSV loss log");

  // embed
  ConfigFlags em_cfg;
  std::string em_checkpoint, em_entities, em_mentions, em_out;
  auto* embed = app.add_subcommand("embed", "write view or mention embeddings as JSONL");
  add_config_flags(embed, em_cfg);
  embed->add_option("--checkpoint", em_checkpoint, "student checkpoint")->required();
  auto* em_ent = embed->add_option("--entities", em_entities, "entities.jsonl");
  auto* em_men = embed->add_option("--mentions", em_mentions, "mentions.jsonl");
  em_ent->excludes(em_men);
  embed->add_option("--out", em_out, "output JSONL")->required();

  // index-build
  ConfigFlags ib_cfg;
  std::string ib_checkpoint, ib_entities, ib_out;
  auto* ibuild = app.add_subcommand("index-build", "embed views and write an index");
  add_config_flags(ibuild, ib_cfg);
  ibuild->add_option("--checkpoint", ib_checkpoint, "student checkpoint")->required();
  ibuild->add_option("--entities", ib_entities, "entities.jsonl")->required();
  ibuild->add_option("--out", ib_out, "index file")->required();

  // search
  ConfigFlags se_cfg;
  std::string se_index, se_checkpoint, se_query, se_mentions;
  std::size_t se_k = 10;
  auto* search = app.add_subcommand("search", "top-k entities for a query or a batch");
  add_config_flags(search, se_cfg);
  search->add_option("--index", se_index, "index file")->required();
  search->add_option("--checkpoint", se_checkpoint, "student checkpoint")->required();
  auto* se_q = search->add_option("--query", se_query, "mention text");
  auto* se_m = search->add_option("--mentions", se_mentions, "mentions.jsonl batch");
  se_q->excludes(se_m);
  search->add_option("--k", se_k, "results per query")->check(CLI::PositiveNumber);

  // eval
  ConfigFlags ev_cfg;
  std::string ev_index, ev_checkpoint, ev_mentions;
  bool ev_json = false;
  auto* eval = app.add_subcommand("eval", "recall@K of a checkpoint and index");
  add_config_flags(eval, ev_cfg);
  eval->add_option("--index", ev_index, "index file")->required();
  eval->add_option("--checkpoint", ev_checkpoint, "student checkpoint")->required();
  eval->add_option("--mentions", ev_mentions, "labelled mentions.jsonl")->required();
  eval->add_flag("--json", ev_json, "emit JSON instead of TSV");

  // ablate
  ConfigFlags ab_cfg;
  std::string ab_entities, ab_train, ab_test;
  std::vector<std::string> ab_runs;
  bool ab_json = false;
  auto* ablate = app.add_subcommand("ablate", "run the pipeline per toggle set");
  add_config_flags(ablate, ab_cfg);
  ablate->add_option("--entities", ab_entities, "entities.jsonl")->required();
  ablate->add_option("--train", ab_train, "training mentions.jsonl")->required();
  ablate->add_option("--test", ab_test, "held-out mentions.jsonl")->required();
  ablate->add_option("--run", ab_runs,
                     "comma-separated toggles for one run; 'full' for none");
  ablate->add_flag("--json", ab_json, "emit JSON instead of TSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth->parsed()) {
      auto doc = config_document(synth_cfg);
      PipelineConfig cfg = mvd::pipeline_config_from_json(doc);
      auto& s = cfg.synth;
      if (n_entities) s.n_entities = *n_entities;
      if (n_facets) s.facets_per_entity = *n_facets;
      if (n_mentions) s.mentions_per_facet = *n_mentions;
      if (vocab) s.vocab_size = *vocab;
      if (noise) s.noise_rate = *noise;
      if (synth_seed) s.seed = *synth_seed;
      const auto corpus = mvd::generate_synthetic(s);
      fs::create_directories(synth_out);
      mvd::save_entities(fs::path(synth_out) / "entities.jsonl", corpus.entities);
      mvd::save_mentions(fs::path(synth_out) / "mentions.jsonl", corpus.mentions);
      if (test_fraction) {
        auto [train, test] = mvd::split_holdout(corpus.mentions, *test_fraction, s.seed);
        mvd::save_mentions(fs::path(synth_out) / "train.jsonl", train);
        mvd::save_mentions(fs::path(synth_out) / "test.jsonl", test);
      }
      std::cout << corpus.entities.size() << " entities, " << corpus.mentions.size()
                << " mentions -> " << synth_out << '\n';
    } else if (segment->parsed()) {
      const PipelineConfig cfg = load_config(seg_cfg);
      const auto entities = mvd::load_entities(seg_entities);
      mvd::save_views_jsonl(seg_out, mvd::make_all_views(entities, cfg.segmentation));
    } else if (wdual->parsed()) {
      const PipelineConfig cfg = load_config(wd_cfg);
      const auto entities = mvd::load_entities(wd_entities);
      const auto mentions = load_checked_mentions(entities, wd_mentions);
      const auto data = mvd::prepare_training_set(entities, mentions, cfg.segmentation);
      auto log = open_log(wd_log);
      mvd::TrainObserver obs;
      if (log) obs.log = &*log;
      auto result = mvd::warmup_dual(data, mvd::make_student(cfg.encoder),
                                     cfg.warmup_dual, cfg.distill.student_views, obs);
      mvd::save_checkpoint(wd_out, result.student);
    } else if (wcross->parsed()) {
      const PipelineConfig cfg = load_config(wc_cfg);
      const auto entities = mvd::load_entities(wc_entities);
      const auto mentions = load_checked_mentions(entities, wc_mentions);
      const auto data = mvd::prepare_training_set(entities, mentions, cfg.segmentation);
      const auto student = mvd::load_checkpoint(wc_student);
      auto log = open_log(wc_log);
      mvd::TrainObserver obs;
      if (log) obs.log = &*log;
      auto result = mvd::warmup_cross(data, student, mvd::make_teacher(cfg.encoder),
                                      cfg.warmup_cross, cfg.distill.teacher_views, obs);
      mvd::save_checkpoint(wc_out, result.teacher);
    } else if (distill->parsed()) {
      const PipelineConfig cfg = load_config(ds_cfg);
      const auto entities = mvd::load_entities(ds_entities);
      const auto mentions = load_checked_mentions(entities, ds_mentions);
      const auto data = mvd::prepare_training_set(entities, mentions, cfg.segmentation);
      auto log = open_log(ds_log);
      mvd::TrainObserver obs;
      if (log) obs.log = &*log;
      auto result = mvd::mvd_train(data, mvd::load_checkpoint(ds_student),
                                   mvd::load_checkpoint(ds_teacher), cfg.mvd,
                                   cfg.distill, obs);
      mvd::save_checkpoint(ds_out_student, result.student);
      mvd::save_checkpoint(ds_out_teacher, result.teacher);
    } else if (embed->parsed()) {
      const PipelineConfig cfg = load_config(em_cfg);
      const auto student = mvd::load_checkpoint(em_checkpoint);
      std::ofstream out(em_out);
      if (!out) throw mvd::FormatError("cannot write '" + em_out + "'");
      if (!em_entities.empty()) {
        const auto entities = mvd::load_entities(em_entities);
        for (const auto& vs : mvd::make_all_views(entities, cfg.segmentation)) {
          auto row = [&](std::size_t ord, const char* kind, const mvd::TokenSeq& seq) {
            out << "{\"entity_id\":" << nlohmann::json(vs.entity_id).dump()
                << ",\"view_ord\":" << ord << ",\"kind\":\"" << kind << "\",\"vector\":";
            write_vector(out, mvd::encode_view(student, seq));
            out << "}\n";
          };
          for (std::size_t t = 0; t < vs.local_views.size(); ++t) {
            row(t, "local", vs.local_views[t]);
          }
          row(0, "global", vs.global_view);
        }
      } else if (!em_mentions.empty()) {
        for (const auto& m : mvd::load_mentions(em_mentions)) {
          out << "{\"mention_id\":" << nlohmann::json(m.id).dump() << ",\"vector\":";
          write_vector(out,
                       mvd::encode_mention(student, mvd::make_mention_seq(m, cfg.segmentation)));
          out << "}\n";
        }
      } else {
        throw mvd::ValidationError("embed needs --entities or --mentions");
      }
    } else if (ibuild->parsed()) {
      const PipelineConfig cfg = load_config(ib_cfg);
      const auto student = mvd::load_checkpoint(ib_checkpoint);
      const auto entities = mvd::load_entities(ib_entities);
      const auto views = mvd::make_all_views(entities, cfg.segmentation);
      const auto index = mvd::build_index(student, views, cfg.index.views,
                                          mvd::SearchBackend::kExact, cfg.index.graph);
      mvd::save_index(index, ib_out);
      std::cout << index.size() << " view records, " << index.num_entities()
                << " entities -> " << ib_out << '\n';
    } else if (search->parsed()) {
      const PipelineConfig cfg = load_config(se_cfg);
      const auto student = mvd::load_checkpoint(se_checkpoint);
      const auto index = mvd::load_index(se_index, cfg.index.backend, cfg.index.graph);
      std::vector<mvd::MentionRecord> queries;
      if (!se_mentions.empty()) {
        queries = mvd::load_mentions(se_mentions);
      } else if (!se_query.empty()) {
        queries.push_back({"query", "", se_query, "", ""});
      } else {
        throw mvd::ValidationError("search needs --query or --mentions");
      }
      std::cout << "mention_id\trank\tentity_id\tscore\tview_kind\tview_ord\n";
      for (const auto& r : mvd::retrieve(index, student, queries, cfg.segmentation, se_k)) {
        for (std::size_t i = 0; i < r.result.hits.size(); ++i) {
          const auto& h = r.result.hits[i];
          std::cout << r.mention_id << '\t' << i + 1 << '\t' << h.entity_id << '\t'
                    << h.score << '\t' << mvd::to_string(h.best_view_kind) << '\t'
                    << h.best_view_ord << '\n';
        }
      }
    } else if (eval->parsed()) {
      const PipelineConfig cfg = load_config(ev_cfg);
      const auto student = mvd::load_checkpoint(ev_checkpoint);
      const auto index = mvd::load_index(ev_index, cfg.index.backend, cfg.index.graph);
      const auto mentions = mvd::load_mentions(ev_mentions);
      auto report = mvd::evaluate(index, student, mentions, cfg.segmentation, cfg.k_values);
      report.config_fingerprint = mvd::fingerprint(cfg);
      if (ev_json) {
        std::cout << mvd::to_json(report).dump(2) << '\n';
      } else {
        mvd::write_tsv(std::cout, report);
      }
    } else if (ablate->parsed()) {
      const PipelineConfig cfg = load_config(ab_cfg);
      const auto entities = mvd::load_entities(ab_entities);
      const auto train = load_checked_mentions(entities, ab_train);
      const auto test = load_checked_mentions(entities, ab_test);
      const auto runs = parse_runs(ab_runs);
      const auto rows = mvd::run_ablation(entities, train, test, cfg, runs);
      if (ab_json) {
        std::cout << mvd::to_json(rows).dump(2) << '\n';
      } else {
        mvd::write_ablation_tsv(std::cout, rows);
      }
    }
  } catch (const mvd::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
