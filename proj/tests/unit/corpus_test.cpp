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

#include <gtest/gtest.h>

#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mvd/corpus.hpp"
#include "test_util.hpp"

namespace {

using testing_util::TempDir;

TEST(EntityLoading, ParsesTitleAndDescription) {
  TempDir dir;
  const auto path = dir.write(
      "e.jsonl",
      R"({"id":"e1","title":"Greater ironguard","description":"Greater ironguard was an arcane abjuration spell..."})"
      "\n");
  const auto entities = mvd::load_entities(path);
  ASSERT_EQ(entities.size(), 1u);
  EXPECT_EQ(entities[0].id, "e1");
  EXPECT_EQ(entities[0].title, "Greater ironguard");
  EXPECT_EQ(entities[0].description.rfind("Greater ironguard was", 0), 0u);
}

TEST(EntityLoading, EmptyFileGivesEmptyList) {
  TempDir dir;
  EXPECT_TRUE(mvd::load_entities(dir.write("e.jsonl", "")).empty());
}

TEST(EntityLoading, DuplicateIdIsRejected) {
  TempDir dir;
  const auto path = dir.write("e.jsonl",
                              R"({"id":"e1","title":"A","description":"x."})"
                              "\n"
                              R"({"id":"e1","title":"B","description":"y."})"
                              "\n");
  EXPECT_THROW(mvd::load_entities(path), mvd::ValidationError);
}

TEST(EntityLoading, MalformedLineIsFormatError) {
  TempDir dir;
  EXPECT_THROW(mvd::load_entities(dir.write("e.jsonl", "{not json}\n")), mvd::FormatError);
  EXPECT_THROW(mvd::parse_entity_line(R"({"id":"e1","title":"A"})", 1), mvd::FormatError);
  EXPECT_THROW(mvd::parse_entity_line(R"({"id":"e1","title":"A","description":3})", 1),
               mvd::FormatError);
}

TEST(EntityLoading, EmptyTitleIsRejected) {
  EXPECT_THROW(mvd::parse_entity_line(R"({"id":"e1","title":"","description":""})", 1),
               mvd::ValidationError);
}

TEST(MentionLoading, ParsesRecord) {
  const auto m = mvd::parse_mention_line(
      R"({"id":"m1","context_left":"Rekelen was a member of the","mention":"underground movement",)"
      R"("context_right":"and a student","gold_entity_id":"cardassian_dissident_movement"})",
      1);
  EXPECT_EQ(m.mention, "underground movement");
  EXPECT_EQ(m.gold_entity_id, "cardassian_dissident_movement");
  EXPECT_EQ(m.context_left, "Rekelen was a member of the");
}

TEST(MentionLoading, EmptyMentionIsRejected) {
  EXPECT_THROW(
      mvd::parse_mention_line(
          R"({"id":"m1","context_left":"a","mention":"","context_right":"b","gold_entity_id":"e"})",
          1),
      mvd::ValidationError);
}

TEST(MentionLoading, KeepsEveryLine) {
  TempDir dir;
  std::string text;
  for (int i = 0; i < 3; ++i) {
    text += R"({"id":"m)" + std::to_string(i) +
            R"(","context_left":"","mention":"x","context_right":"","gold_entity_id":"e"})" "\n";
  }
  EXPECT_EQ(mvd::load_mentions(dir.write("m.jsonl", text)).size(), 3u);
}

TEST(MentionLoading, SaveLoadRoundTrip) {
  TempDir dir;
  const auto corpus = mvd::generate_synthetic({3, 2, 2, 60, 0.2, 5});
  mvd::save_mentions(dir.file("m.jsonl"), corpus.mentions);
  mvd::save_entities(dir.file("e.jsonl"), corpus.entities);
  EXPECT_EQ(mvd::load_mentions(dir.file("m.jsonl")), corpus.mentions);
  EXPECT_EQ(mvd::load_entities(dir.file("e.jsonl")), corpus.entities);
}

TEST(GoldCoverage, UnknownEntityIsRejected) {
  const std::vector<mvd::EntityRecord> entities{{"e1", "A", ""}};
  const std::vector<mvd::MentionRecord> mentions{{"m1", "", "x", "", "e2"}};
  EXPECT_THROW(mvd::check_gold_coverage(entities, mentions), mvd::ValidationError);
}

TEST(Synthetic, SmallSpecCounts) {
  const auto c = mvd::generate_synthetic({2, 1, 1, 100, 0.0, 7});
  EXPECT_EQ(c.entities.size(), 2u);
  EXPECT_EQ(c.mentions.size(), 2u);
}

TEST(Synthetic, SameSeedGivesIdenticalFiles) {
  TempDir dir;
  const mvd::SynthSpec spec{2, 1, 1, 100, 0.0, 7};
  mvd::save_entities(dir.file("a.jsonl"), mvd::generate_synthetic(spec).entities);
  mvd::save_entities(dir.file("b.jsonl"), mvd::generate_synthetic(spec).entities);
  mvd::save_mentions(dir.file("c.jsonl"), mvd::generate_synthetic(spec).mentions);
  mvd::save_mentions(dir.file("d.jsonl"), mvd::generate_synthetic(spec).mentions);
  EXPECT_EQ(testing_util::read_file(dir.file("a.jsonl")),
            testing_util::read_file(dir.file("b.jsonl")));
  EXPECT_EQ(testing_util::read_file(dir.file("c.jsonl")),
            testing_util::read_file(dir.file("d.jsonl")));
}

TEST(Synthetic, DifferentSeedsDiffer) {
  EXPECT_NE(mvd::generate_synthetic({5, 2, 2, 100, 0.1, 1}).mentions,
            mvd::generate_synthetic({5, 2, 2, 100, 0.1, 2}).mentions);
}

std::vector<std::size_t> token_numbers(const std::string& text) {
  std::vector<std::size_t> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) {
    if (w.back() == '.') w.pop_back();
    out.push_back(std::stoul(w.substr(3)));
  }
  return out;
}

// Facet blocks are recounted by a brute-force scan over every (entity, facet)
// token range; the generation facet is read from the mention id.
TEST(Synthetic, FacetCorpusMentionsOverlapTheirOwnFacetMost) {
  const mvd::SynthSpec spec{50, 4, 5, 2000, 0.1, 1};
  const auto c = mvd::generate_synthetic(spec);
  ASSERT_EQ(c.entities.size(), 50u);
  ASSERT_EQ(c.mentions.size(), 1000u);
  const std::size_t blocks = 200;
  const std::size_t width = 2000 / blocks;

  for (std::size_t e = 0; e < c.entities.size(); ++e) {
    const auto& desc = c.entities[e].description;
    std::vector<std::string> sentences;
    std::string cur;
    for (char ch : desc) {
      cur += ch;
      if (ch == '.') {
        sentences.push_back(cur);
        cur.clear();
      }
    }
    ASSERT_EQ(sentences.size(), 4u);
    for (std::size_t f = 0; f < 4; ++f) {
      for (std::size_t t : token_numbers(sentences[f])) {
        EXPECT_EQ(t / width, e * 4 + f);
      }
    }
  }

  for (const auto& m : c.mentions) {
    unsigned e = 0, f = 0, j = 0;
    ASSERT_EQ(std::sscanf(m.id.c_str(), "syn-m%u-%u-%u", &e, &f, &j), 3);
    EXPECT_EQ(m.gold_entity_id, "syn-e" + std::to_string(e));
    std::vector<std::size_t> overlap(blocks, 0);
    for (const auto* part : {&m.context_left, &m.mention, &m.context_right}) {
      for (std::size_t t : token_numbers(*part)) {
        for (std::size_t b = 0; b < blocks; ++b) {
          if (t >= b * width && t < (b + 1) * width) ++overlap[b];
        }
      }
    }
    std::size_t best = 0;
    for (std::size_t b = 1; b < blocks; ++b) {
      if (overlap[b] > overlap[best]) best = b;
    }
    EXPECT_EQ(best, e * 4 + f) << m.id;
  }
}

TEST(Synthetic, InvalidSpecIsRejected) {
  EXPECT_THROW(mvd::generate_synthetic({0, 1, 1, 100, 0.0, 1}), mvd::ValidationError);
  EXPECT_THROW(mvd::generate_synthetic({2, 1, 1, 100, 1.5, 1}), mvd::ValidationError);
  EXPECT_THROW(mvd::generate_synthetic({50, 4, 1, 100, 0.0, 1}), mvd::ValidationError);
}

TEST(Holdout, PartitionsMentionsDeterministically) {
  const auto c = mvd::generate_synthetic({10, 2, 5, 200, 0.1, 3});
  const auto [train, test] = mvd::split_holdout(c.mentions, 0.2, 9);
  EXPECT_EQ(test.size(), 20u);
  EXPECT_EQ(train.size() + test.size(), c.mentions.size());
  std::set<std::string> ids;
  for (const auto& m : train) ids.insert(m.id);
  for (const auto& m : test) EXPECT_TRUE(ids.insert(m.id).second);
  const auto again = mvd::split_holdout(c.mentions, 0.2, 9);
  EXPECT_EQ(again.second, test);
  EXPECT_THROW(mvd::split_holdout(c.mentions, 1.5, 9), mvd::ValidationError);
}

}  // namespace
