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

#include "mvd/corpus.hpp"

#include <cctype>
#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "mvd/common.hpp"

namespace mvd {
namespace {

using nlohmann::json;

std::string where(std::size_t line_no) {
  return "line " + std::to_string(line_no) + ": ";
}

json parse_object(const std::string& line, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(where(line_no) + "parse error: " + e.what());
  }
  if (!obj.is_object()) {
    throw FormatError(where(line_no) + "expected a JSON object");
  }
  return obj;
}

std::string required_string(const json& obj, const char* key,
                            std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw FormatError(where(line_no) + "missing key '" + key + "'");
  }
  if (!it->is_string()) {
    throw FormatError(where(line_no) + "key '" + key + "' is not a string");
  }
  return it->get<std::string>();
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

template <typename Record, typename Parse>
std::vector<Record> load_jsonl(const std::filesystem::path& path,
                               Parse parse) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<Record> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    Record rec = parse(line, line_no);
    if (!seen.insert(rec.id).second) {
      throw ValidationError(where(line_no) + "duplicate id '" + rec.id + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

template <typename Record, typename ToJson>
void save_jsonl(const std::filesystem::path& path,
                const std::vector<Record>& records, ToJson to_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw FormatError("write failed: " + path.string());
}

}  // namespace

EntityRecord parse_entity_line(const std::string& line, std::size_t line_no) {
  const json obj = parse_object(line, line_no);
  EntityRecord rec{required_string(obj, "id", line_no),
                   required_string(obj, "title", line_no),
                   required_string(obj, "description", line_no)};
  if (rec.id.empty()) throw ValidationError(where(line_no) + "empty entity id");
  if (rec.title.empty()) {
    throw ValidationError(where(line_no) + "empty title for entity '" +
                          rec.id + "'");
  }
  return rec;
}

MentionRecord parse_mention_line(const std::string& line, std::size_t line_no) {
  const json obj = parse_object(line, line_no);
  MentionRecord rec{required_string(obj, "id", line_no),
                    required_string(obj, "context_left", line_no),
                    required_string(obj, "mention", line_no),
                    required_string(obj, "context_right", line_no),
                    required_string(obj, "gold_entity_id", line_no)};
  if (rec.id.empty()) throw ValidationError(where(line_no) + "empty mention id");
  if (rec.mention.empty()) {
    throw ValidationError(where(line_no) + "empty mention text in '" + rec.id +
                          "'");
  }
  return rec;
}

std::vector<EntityRecord> load_entities(const std::filesystem::path& path) {
  return load_jsonl<EntityRecord>(path, parse_entity_line);
}

std::vector<MentionRecord> load_mentions(const std::filesystem::path& path) {
  return load_jsonl<MentionRecord>(path, parse_mention_line);
}

void save_entities(const std::filesystem::path& path,
                   const std::vector<EntityRecord>& entities) {
  save_jsonl(path, entities, [](const EntityRecord& e) {
    return json{{"id", e.id}, {"title", e.title}, {"description", e.description}};
  });
}

void save_mentions(const std::filesystem::path& path,
                   const std::vector<MentionRecord>& mentions) {
  save_jsonl(path, mentions, [](const MentionRecord& m) {
    return json{{"id", m.id},
                {"context_left", m.context_left},
                {"mention", m.mention},
                {"context_right", m.context_right},
                {"gold_entity_id", m.gold_entity_id}};
  });
}

void check_gold_coverage(const std::vector<EntityRecord>& entities,
                         const std::vector<MentionRecord>& mentions) {
  std::unordered_set<std::string> ids;
  for (const auto& e : entities) ids.insert(e.id);
  for (const auto& m : mentions) {
    if (!ids.contains(m.gold_entity_id)) {
      throw ValidationError("mention '" + m.id + "' refers to unknown entity '" +
                            m.gold_entity_id + "'");
    }
  }
}

void validate(const SynthSpec& spec) {
  if (spec.n_entities < 1 || spec.facets_per_entity < 1 ||
      spec.mentions_per_facet < 1 || spec.vocab_size < 1) {
    throw ValidationError("synthetic spec counts must be >= 1");
  }
  if (!(spec.noise_rate >= 0.0 && spec.noise_rate <= 1.0)) {
    throw ValidationError("noise_rate must lie in [0, 1]");
  }
  if (spec.vocab_size < spec.n_entities * spec.facets_per_entity) {
    throw ValidationError(
        "vocab_size must be at least n_entities * facets_per_entity so every "
        "facet owns a token");
  }
}

std::string synth_token(std::size_t token, std::size_t vocab_size) {
  const std::size_t width =
      std::max<std::size_t>(4, std::to_string(vocab_size - 1).size());
  std::string digits = std::to_string(token);
  return "tok" + std::string(width - digits.size(), '0') + digits;
}

Corpus generate_synthetic(const SynthSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  const std::size_t facet_vocab =
      spec.vocab_size / (spec.n_entities * spec.facets_per_entity);

  auto facet_token = [&](std::size_t entity, std::size_t facet) {
    const std::size_t base =
        (entity * spec.facets_per_entity + facet) * facet_vocab;
    return base + rng.below(facet_vocab);
  };
  auto noisy_token = [&](std::size_t entity, std::size_t facet) {
    if (spec.noise_rate > 0.0 && rng.uniform() < spec.noise_rate) {
      return static_cast<std::size_t>(rng.below(spec.vocab_size));
    }
    return facet_token(entity, facet);
  };
  auto words = [&](std::size_t n, auto draw) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) out += ' ';
      out += synth_token(draw(), spec.vocab_size);
    }
    return out;
  };

  Corpus corpus;
  corpus.entities.reserve(spec.n_entities);
  for (std::size_t e = 0; e < spec.n_entities; ++e) {
    std::ostringstream name;
    name << "ent" << e;
    EntityRecord rec{"syn-e" + std::to_string(e), name.str(), ""};
    for (std::size_t f = 0; f < spec.facets_per_entity; ++f) {
      if (f) rec.description += ' ';
      rec.description +=
          words(kSynthSentenceTokens, [&] { return facet_token(e, f); }) + ".";
    }
    corpus.entities.push_back(std::move(rec));
  }

  for (std::size_t e = 0; e < spec.n_entities; ++e) {
    for (std::size_t f = 0; f < spec.facets_per_entity; ++f) {
      for (std::size_t j = 0; j < spec.mentions_per_facet; ++j) {
        auto draw = [&] { return noisy_token(e, f); };
        MentionRecord m;
        m.id = "syn-m" + std::to_string(e) + "-" + std::to_string(f) + "-" +
               std::to_string(j);
        m.context_left = words(kSynthContextTokens, draw);
        m.mention = words(kSynthMentionTokens, draw);
        m.context_right = words(kSynthContextTokens, draw);
        m.gold_entity_id = corpus.entities[e].id;
        corpus.mentions.push_back(std::move(m));
      }
    }
  }
  return corpus;
}

std::pair<std::vector<MentionRecord>, std::vector<MentionRecord>> split_holdout(
    const std::vector<MentionRecord>& mentions, double test_fraction,
    std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
    throw ValidationError("test_fraction must lie in [0, 1]");
  }
  std::vector<std::size_t> order(mentions.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed ^ 0x5EEDFACEULL);
  rng.shuffle(order.begin(), order.end());
  const auto n_test = static_cast<std::size_t>(
      static_cast<double>(mentions.size()) * test_fraction + 0.5);
  std::vector<char> is_test(mentions.size(), 0);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = 1;
  std::pair<std::vector<MentionRecord>, std::vector<MentionRecord>> out;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    (is_test[i] ? out.second : out.first).push_back(mentions[i]);
  }
  return out;
}

}  // namespace mvd
