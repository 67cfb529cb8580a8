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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvd/corpus.hpp"

namespace mvd {

using TokenId = std::uint32_t;

// Reserved marker ids. Word tokens hash into [kFirstWordId, vocab_size).
inline constexpr TokenId kCls = 0;
inline constexpr TokenId kSep = 1;
inline constexpr TokenId kMentionStart = 2;
inline constexpr TokenId kMentionEnd = 3;
inline constexpr TokenId kEnt = 4;
inline constexpr TokenId kFirstWordId = 5;

enum class SeqKind : std::uint8_t { kMention, kView, kJoint };

struct TokenSeq {
  std::vector<TokenId> tokens;
  SeqKind kind = SeqKind::kView;

  std::size_t size() const { return tokens.size(); }
  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

/// Which of an entity's sequences take part in scoring or indexing.
enum class ViewSelection : std::uint8_t { kLocal, kGlobal, kLocalAndGlobal };

struct SegmentationConfig {
  std::size_t vocab_size = 16384;
  std::size_t max_mention_length = 128;
  std::size_t max_view_num = 10;
  std::size_t max_view_length = 40;
  std::size_t global_view_length = 512;
  std::size_t max_cross_length = 168;
};

void validate(const SegmentationConfig& cfg);

/// Local views are title+sentence sequences; the global view is the
/// title+full description sequence.
struct ViewSet {
  std::string entity_id;
  TokenSeq global_view;
  std::vector<TokenSeq> local_views;
  std::vector<std::string> view_texts;  // parallel to local_views
  std::string global_text;

  std::size_t num_local() const { return local_views.size(); }
  friend bool operator==(const ViewSet&, const ViewSet&) = default;
};

std::uint64_t fnv1a64(std::string_view bytes);

/// Lowercased word and punctuation pieces in text order.
std::vector<std::string> split_words(std::string_view text);

TokenId token_id(std::string_view word, std::size_t vocab_size);
std::vector<TokenId> tokenize(std::string_view text, std::size_t vocab_size);

/// Splits after '.', '?' or '!' runs that are followed by whitespace or the
/// end of the text. Terminators stay attached to their sentence.
std::vector<std::string> split_sentences(std::string_view description);

ViewSet make_views(const EntityRecord& entity, const SegmentationConfig& cfg);
std::vector<ViewSet> make_all_views(std::span<const EntityRecord> entities,
                                    const SegmentationConfig& cfg);

/// [CLS] left [Ms] mention [Me] right [SEP]. Over-long inputs keep the whole
/// mention and share the remaining budget between the two contexts, with the
/// left side taking the odd token.
TokenSeq make_mention_seq(const MentionRecord& mention,
                          const SegmentationConfig& cfg);

/// [CLS] mention-body [SEP] view-body [SEP], where a body is the sequence
/// without its own [CLS] and trailing [SEP]. Truncation trims the view body
/// first, then the mention body, never below one token each.
TokenSeq make_joint_seq(const TokenSeq& mention_seq, const TokenSeq& view_seq,
                        std::size_t max_cross_length);

struct JointSegments {
  std::span<const TokenId> mention_body;
  std::span<const TokenId> view_body;
};
JointSegments split_joint(const TokenSeq& joint);

/// Writes views.jsonl records {"entity_id","view_ord","kind","text"}.
void save_views_jsonl(const std::filesystem::path& path,
                      std::span<const ViewSet> views);

}  // namespace mvd
