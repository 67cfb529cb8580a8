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

#include "mvd/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "mvd/common.hpp"

namespace mvd {
namespace {

using nlohmann::json;

class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (!doc.is_object()) throw ValidationError("config: '" + name_ + "' must be an object");
    doc_ = &doc;
  }

  /// Throws on any key that was never read.
  void finish() const {
    for (const auto& [key, value] : doc_->items()) {
      if (!seen_.count(key)) {
        throw ValidationError("config: unknown key '" + name_ + "." + key + "'");
      }
    }
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = doc_->find(key);
    return it == doc_->end() ? nullptr : &*it;
  }

  void count(const std::string& key, std::size_t& out) {
    if (const json* v = get(key)) {
      out = non_negative(key, *v);
    }
  }

  void u64(const std::string& key, std::uint64_t& out) {
    if (const json* v = get(key)) {
      out = non_negative(key, *v);
    }
  }

  void real(const std::string& key, double& out) {
    if (const json* v = get(key)) {
      if (!v->is_number()) throw bad_type(key, "a number");
      out = v->get<double>();
    }
  }

  void flag(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) throw bad_type(key, "a boolean");
      out = v->get<bool>();
    }
  }

  template <typename Enum, typename Parse>
  void choice(const std::string& key, Enum& out, Parse parse) {
    if (const json* v = get(key)) {
      if (!v->is_string()) throw bad_type(key, "a string");
      out = parse(v->get<std::string>());
    }
  }

  std::uint64_t non_negative(const std::string& key, const json& v) const {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw bad_type(key, "a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  ValidationError bad_type(const std::string& key, const std::string& expected) const {
    return ValidationError("config: '" + name_ + "." + key + "' must be " + expected);
  }

 private:
  const json* doc_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

json train_to_json(const TrainConfig& c) {
  json refresh;
  if (c.refresh_interval == kRefreshPerEpoch) {
    refresh = "epoch";
  } else if (c.refresh_interval == kRefreshNever) {
    refresh = "never";
  } else {
    refresh = c.refresh_interval;
  }
  return {{"stage", to_string(c.stage)},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"negatives_K", c.negatives_K},
          {"retrieve_N", c.retrieve_N},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"refresh_interval", refresh},
          {"seed", c.seed},
          {"freeze_teacher", c.freeze_teacher},
          {"exclude_gold_from_negatives", c.exclude_gold_from_negatives},
          {"max_grad_norm", c.max_grad_norm}};
}

void train_from_json(const json& j, const std::string& name, Stage stage,
                     TrainConfig& c) {
  Section s(j, name);
  if (const json* v = s.get("stage")) {
    if (!v->is_string() || parse_stage(v->get<std::string>()) != stage) {
      throw ValidationError("config: '" + name + ".stage' must be \"" +
                            to_string(stage) + "\"");
    }
  }
  s.count("epochs", c.epochs);
  s.count("batch_size", c.batch_size);
  s.real("learning_rate", c.learning_rate);
  s.count("negatives_K", c.negatives_K);
  s.count("retrieve_N", c.retrieve_N);
  s.real("alpha", c.alpha);
  s.real("beta", c.beta);
  if (const json* v = s.get("refresh_interval")) {
    if (v->is_string() && *v == "epoch") {
      c.refresh_interval = kRefreshPerEpoch;
    } else if (v->is_string() && *v == "never") {
      c.refresh_interval = kRefreshNever;
    } else if (v->is_number_integer() && v->get<std::int64_t>() > 0) {
      c.refresh_interval = v->get<std::int64_t>();
    } else {
      throw s.bad_type("refresh_interval", "a positive step count, \"epoch\" or \"never\"");
    }
  }
  s.u64("seed", c.seed);
  s.flag("freeze_teacher", c.freeze_teacher);
  s.flag("exclude_gold_from_negatives", c.exclude_gold_from_negatives);
  s.real("max_grad_norm", c.max_grad_norm);
  s.finish();
}

}  // namespace

const char* to_string(ViewSelection v) {
  switch (v) {
    case ViewSelection::kLocal: return "local";
    case ViewSelection::kGlobal: return "global";
    case ViewSelection::kLocalAndGlobal: return "local_and_global";
  }
  return "?";
}

ViewSelection parse_view_selection(const std::string& s) {
  if (s == "local") return ViewSelection::kLocal;
  if (s == "global") return ViewSelection::kGlobal;
  if (s == "local_and_global") return ViewSelection::kLocalAndGlobal;
  throw ValidationError("unknown view selection '" + s +
                        "' (local, global, local_and_global)");
}

const char* to_string(SearchBackend b) {
  return b == SearchBackend::kExact ? "exact" : "approximate";
}

SearchBackend parse_backend(const std::string& s) {
  if (s == "exact") return SearchBackend::kExact;
  if (s == "approximate") return SearchBackend::kApproximate;
  throw ValidationError("unknown search backend '" + s + "' (exact, approximate)");
}

const char* to_string(RelevantView v) {
  return v == RelevantView::kTeacher ? "teacher" : "student";
}

RelevantView parse_relevant_view(const std::string& s) {
  if (s == "teacher") return RelevantView::kTeacher;
  if (s == "student") return RelevantView::kStudent;
  throw ValidationError("unknown relevant view '" + s + "' (teacher, student)");
}

void validate(const PipelineConfig& cfg) {
  validate(cfg.synth);
  validate(cfg.segmentation);
  validate(cfg.encoder);
  validate(cfg.warmup_dual);
  validate(cfg.warmup_cross);
  validate(cfg.mvd);
  if (cfg.encoder.vocab_size != cfg.segmentation.vocab_size) {
    throw ValidationError("encoder.vocab_size must equal segmentation.vocab_size");
  }
  if (!(cfg.distill.temperature > 0.0)) {
    throw ValidationError("distill.temperature must be positive");
  }
  if (cfg.distill.teacher_views == ViewSelection::kLocalAndGlobal) {
    throw ValidationError("distill.teacher_views must be local or global");
  }
  if (cfg.distill.student_views == ViewSelection::kLocalAndGlobal) {
    throw ValidationError("distill.student_views must be local or global");
  }
  if (cfg.index.graph.max_degree < 2) {
    throw ValidationError("index.max_degree must be >= 2");
  }
  if (cfg.k_values.empty()) throw ValidationError("eval.k_values must not be empty");
  for (std::size_t i = 0; i < cfg.k_values.size(); ++i) {
    if (cfg.k_values[i] < 1 || (i > 0 && cfg.k_values[i] <= cfg.k_values[i - 1])) {
      throw ValidationError("eval.k_values must be strictly increasing and >= 1");
    }
  }
}

nlohmann::json to_json(const PipelineConfig& cfg) {
  const auto& sy = cfg.synth;
  const auto& sg = cfg.segmentation;
  const auto& e = cfg.encoder;
  const auto& d = cfg.distill;
  const auto& ix = cfg.index;
  return {
      {"synth",
       {{"n_entities", sy.n_entities},
        {"facets_per_entity", sy.facets_per_entity},
        {"mentions_per_facet", sy.mentions_per_facet},
        {"vocab_size", sy.vocab_size},
        {"noise_rate", sy.noise_rate},
        {"seed", sy.seed}}},
      {"segmentation",
       {{"vocab_size", sg.vocab_size},
        {"max_mention_length", sg.max_mention_length},
        {"max_view_num", sg.max_view_num},
        {"max_view_length", sg.max_view_length},
        {"global_view_length", sg.global_view_length},
        {"max_cross_length", sg.max_cross_length}}},
      {"encoder",
       {{"vocab_size", e.vocab_size},
        {"d_emb", e.d_emb},
        {"d_hid", e.d_hid},
        {"d_out", e.d_out},
        {"init_scale", e.init_scale},
        {"embedding_init_scale", e.embedding_init_scale},
        {"seed", e.seed}}},
      {"warmup_dual", train_to_json(cfg.warmup_dual)},
      {"warmup_cross", train_to_json(cfg.warmup_cross)},
      {"mvd", train_to_json(cfg.mvd)},
      {"distill",
       {{"temperature", d.temperature},
        {"cross_view", to_string(d.cross_view)},
        {"self_gold_only", d.self_gold_only},
        {"student_views", to_string(d.student_views)},
        {"teacher_views", to_string(d.teacher_views)}}},
      {"index",
       {{"views", to_string(ix.views)},
        {"backend", to_string(ix.backend)},
        {"max_degree", ix.graph.max_degree},
        {"ef_construction", ix.graph.ef_construction},
        {"ef_search", ix.graph.ef_search},
        {"seed", ix.graph.seed}}},
      {"eval", {{"k_values", cfg.k_values}}},
  };
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  Section root(j, "<root>");
  if (const json* v = root.get("synth")) {
    Section s(*v, "synth");
    auto& c = cfg.synth;
    s.count("n_entities", c.n_entities);
    s.count("facets_per_entity", c.facets_per_entity);
    s.count("mentions_per_facet", c.mentions_per_facet);
    s.count("vocab_size", c.vocab_size);
    s.real("noise_rate", c.noise_rate);
    s.u64("seed", c.seed);
    s.finish();
  }
  if (const json* v = root.get("segmentation")) {
    Section s(*v, "segmentation");
    auto& c = cfg.segmentation;
    s.count("vocab_size", c.vocab_size);
    s.count("max_mention_length", c.max_mention_length);
    s.count("max_view_num", c.max_view_num);
    s.count("max_view_length", c.max_view_length);
    s.count("global_view_length", c.global_view_length);
    s.count("max_cross_length", c.max_cross_length);
    s.finish();
  }
  if (const json* v = root.get("encoder")) {
    Section s(*v, "encoder");
    auto& c = cfg.encoder;
    s.count("vocab_size", c.vocab_size);
    s.count("d_emb", c.d_emb);
    s.count("d_hid", c.d_hid);
    s.count("d_out", c.d_out);
    s.real("init_scale", c.init_scale);
    s.real("embedding_init_scale", c.embedding_init_scale);
    s.u64("seed", c.seed);
    s.finish();
  }
  if (const json* v = root.get("warmup_dual")) {
    train_from_json(*v, "warmup_dual", Stage::kWarmupDual, cfg.warmup_dual);
  }
  if (const json* v = root.get("warmup_cross")) {
    train_from_json(*v, "warmup_cross", Stage::kWarmupCross, cfg.warmup_cross);
  }
  if (const json* v = root.get("mvd")) {
    train_from_json(*v, "mvd", Stage::kMvd, cfg.mvd);
  }
  if (const json* v = root.get("distill")) {
    Section s(*v, "distill");
    auto& c = cfg.distill;
    s.real("temperature", c.temperature);
    s.choice("cross_view", c.cross_view, parse_relevant_view);
    s.flag("self_gold_only", c.self_gold_only);
    s.choice("student_views", c.student_views, parse_view_selection);
    s.choice("teacher_views", c.teacher_views, parse_view_selection);
    s.finish();
  }
  if (const json* v = root.get("index")) {
    Section s(*v, "index");
    auto& c = cfg.index;
    s.choice("views", c.views, parse_view_selection);
    s.choice("backend", c.backend, parse_backend);
    s.count("max_degree", c.graph.max_degree);
    s.count("ef_construction", c.graph.ef_construction);
    s.count("ef_search", c.graph.ef_search);
    s.u64("seed", c.graph.seed);
    s.finish();
  }
  if (const json* v = root.get("eval")) {
    Section s(*v, "eval");
    if (const json* ks = s.get("k_values")) {
      if (!ks->is_array()) throw s.bad_type("k_values", "an array of integers");
      cfg.k_values.clear();
      for (const auto& k : *ks) {
        cfg.k_values.push_back(s.non_negative("k_values", k));
      }
    }
    s.finish();
  }
  root.finish();
  validate(cfg);
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + path.string() + "': " + e.what());
  }
  return pipeline_config_from_json(j);
}

void apply_override(nlohmann::json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ValidationError("--set expects key=value, got '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ValidationError("--set: malformed key '" + key + "'");
    if (!node->is_object()) {
      throw ValidationError("--set: '" + key + "' walks into a non-object");
    }
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

std::string fingerprint(const PipelineConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json(cfg).dump())));
  return buf;
}

}  // namespace mvd
