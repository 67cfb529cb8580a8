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
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mvd {

struct EntityRecord {
  std::string id;
  std::string title;
  std::string description;

  friend bool operator==(const EntityRecord&, const EntityRecord&) = default;
};

struct MentionRecord {
  std::string id;
  std::string context_left;
  std::string mention;
  std::string context_right;
  std::string gold_entity_id;

  friend bool operator==(const MentionRecord&, const MentionRecord&) = default;
};

struct CandidateSet {
  std::string mention_id;
  std::vector<std::string> entity_ids;
};

/// Parameters of the synthetic multi-facet corpus. Every (entity, facet) pair
/// owns a disjoint range of vocab_size / (n_entities * facets_per_entity)
/// integer tokens rendered as "tokNNNN".
struct SynthSpec {
  std::size_t n_entities = 50;
  std::size_t facets_per_entity = 4;
  std::size_t mentions_per_facet = 5;
  std::size_t vocab_size = 2000;
  double noise_rate = 0.1;
  std::uint64_t seed = 1;
};

struct Corpus {
  std::vector<EntityRecord> entities;
  std::vector<MentionRecord> mentions;
};

std::vector<EntityRecord> load_entities(const std::filesystem::path& path);
std::vector<MentionRecord> load_mentions(const std::filesystem::path& path);

// Line-level parsers; line_no only feeds error messages.
EntityRecord parse_entity_line(const std::string& line, std::size_t line_no);
MentionRecord parse_mention_line(const std::string& line, std::size_t line_no);

void save_entities(const std::filesystem::path& path,
                   const std::vector<EntityRecord>& entities);
void save_mentions(const std::filesystem::path& path,
                   const std::vector<MentionRecord>& mentions);

void validate(const SynthSpec& spec);
Corpus generate_synthetic(const SynthSpec& spec);

// Layout constants of the synthetic generator.
inline constexpr std::size_t kSynthSentenceTokens = 8;
inline constexpr std::size_t kSynthContextTokens = 6;
inline constexpr std::size_t kSynthMentionTokens = 2;

std::string synth_token(std::size_t token, std::size_t vocab_size);

/// Checks that every mention's gold id names a loaded entity.
void check_gold_coverage(const std::vector<EntityRecord>& entities,
                         const std::vector<MentionRecord>& mentions);

/// Deterministic held-out split; returns (train, test).
std::pair<std::vector<MentionRecord>, std::vector<MentionRecord>> split_holdout(
    const std::vector<MentionRecord>& mentions, double test_fraction,
    std::uint64_t seed);

}  // namespace mvd
