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

#include "mvd/views.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

#include "mvd/common.hpp"

namespace mvd {
namespace {

bool is_terminator(char c) { return c == '.' || c == '?' || c == '!'; }

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)); }

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) || c == '_';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// [CLS] title [ENT] body [SEP], cut to max_len. The body is trimmed first so
// the title prefix survives whenever it fits.
TokenSeq entity_sequence(std::span<const TokenId> title,
                         std::span<const TokenId> body, std::size_t max_len) {
  const std::size_t room = max_len - 3;
  const std::size_t n_title = std::min(title.size(), room);
  const std::size_t n_body = std::min(body.size(), room - n_title);
  TokenSeq seq;
  seq.kind = SeqKind::kView;
  seq.tokens.reserve(n_title + n_body + 3);
  seq.tokens.push_back(kCls);
  seq.tokens.insert(seq.tokens.end(), title.begin(), title.begin() + n_title);
  seq.tokens.push_back(kEnt);
  seq.tokens.insert(seq.tokens.end(), body.begin(), body.begin() + n_body);
  seq.tokens.push_back(kSep);
  return seq;
}

}  // namespace

void validate(const SegmentationConfig& cfg) {
  if (cfg.vocab_size <= kFirstWordId) {
    throw ValidationError("vocab_size must exceed the 5 reserved marker ids");
  }
  if (cfg.max_view_num < 1) throw ValidationError("max_view_num must be >= 1");
  if (cfg.max_view_length < 3 || cfg.global_view_length < 3) {
    throw ValidationError("view lengths must be >= 3");
  }
  if (cfg.max_mention_length < 5) {
    throw ValidationError("max_mention_length must be >= 5");
  }
  if (cfg.max_cross_length < 5) {
    throw ValidationError("max_cross_length must be >= 5");
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (is_space(c)) {
      ++i;
    } else if (is_word_byte(c)) {
      std::string word;
      while (i < text.size() && is_word_byte(text[i])) {
        word += static_cast<char>(
            std::tolower(static_cast<unsigned char>(text[i])));
        ++i;
      }
      words.push_back(std::move(word));
    } else {
      words.emplace_back(1, c);
      ++i;
    }
  }
  return words;
}

TokenId token_id(std::string_view word, std::size_t vocab_size) {
  std::string lower(word);
  for (auto& ch : lower) {
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return static_cast<TokenId>(fnv1a64(lower) % (vocab_size - kFirstWordId) +
                              kFirstWordId);
}

std::vector<TokenId> tokenize(std::string_view text, std::size_t vocab_size) {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(text)) ids.push_back(token_id(w, vocab_size));
  return ids;
}

std::vector<std::string> split_sentences(std::string_view description) {
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < description.size()) {
    if (!is_terminator(description[i])) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < description.size() && is_terminator(description[end])) ++end;
    if (end == description.size() || is_space(description[end])) {
      auto piece = trim(description.substr(start, end - start));
      if (!piece.empty()) out.emplace_back(piece);
      start = end;
    }
    i = end;
  }
  auto tail = trim(description.substr(start));
  if (!tail.empty()) out.emplace_back(tail);
  return out;
}

ViewSet make_views(const EntityRecord& entity, const SegmentationConfig& cfg) {
  validate(cfg);
  const auto title = tokenize(entity.title, cfg.vocab_size);
  ViewSet vs;
  vs.entity_id = entity.id;
  vs.global_text = entity.description;
  vs.global_view = entity_sequence(
      title, tokenize(entity.description, cfg.vocab_size),
      cfg.global_view_length);

  auto sentences = split_sentences(entity.description);
  if (sentences.size() > cfg.max_view_num) sentences.resize(cfg.max_view_num);
  if (sentences.empty()) {
    vs.local_views.push_back(entity_sequence(title, {}, cfg.max_view_length));
    vs.view_texts.emplace_back();
    return vs;
  }
  for (auto& s : sentences) {
    vs.local_views.push_back(entity_sequence(
        title, tokenize(s, cfg.vocab_size), cfg.max_view_length));
    vs.view_texts.push_back(std::move(s));
  }
  return vs;
}

std::vector<ViewSet> make_all_views(std::span<const EntityRecord> entities,
                                    const SegmentationConfig& cfg) {
  std::vector<ViewSet> out;
  out.reserve(entities.size());
  for (const auto& e : entities) out.push_back(make_views(e, cfg));
  return out;
}

TokenSeq make_mention_seq(const MentionRecord& mention,
                          const SegmentationConfig& cfg) {
  validate(cfg);
  auto left = tokenize(mention.context_left, cfg.vocab_size);
  auto span = tokenize(mention.mention, cfg.vocab_size);
  auto right = tokenize(mention.context_right, cfg.vocab_size);

  const std::size_t markers = 4;
  const std::size_t max_len = cfg.max_mention_length;
  std::size_t n_left = left.size();
  std::size_t n_right = right.size();
  if (markers + span.size() + n_left + n_right > max_len) {
    if (markers + span.size() > max_len) {
      warn("mention '" + mention.id + "' exceeds max_mention_length; " +
           "truncating the mention span");
      span.resize(max_len - markers);
      n_left = n_right = 0;
    } else {
      const std::size_t budget = max_len - markers - span.size();
      std::size_t want_left = (budget + 1) / 2;
      std::size_t want_right = budget / 2;
      if (n_left < want_left) {
        want_right = budget - n_left;
        want_left = n_left;
      } else if (n_right < want_right) {
        want_left = budget - n_right;
        want_right = n_right;
      }
      n_left = std::min(n_left, want_left);
      n_right = std::min(n_right, want_right);
    }
  }

  TokenSeq seq;
  seq.kind = SeqKind::kMention;
  seq.tokens.reserve(markers + span.size() + n_left + n_right);
  seq.tokens.push_back(kCls);
  // Keep the context tokens adjacent to the mention.
  seq.tokens.insert(seq.tokens.end(), left.end() - static_cast<long>(n_left),
                    left.end());
  seq.tokens.push_back(kMentionStart);
  seq.tokens.insert(seq.tokens.end(), span.begin(), span.end());
  seq.tokens.push_back(kMentionEnd);
  seq.tokens.insert(seq.tokens.end(), right.begin(),
                    right.begin() + static_cast<long>(n_right));
  seq.tokens.push_back(kSep);
  return seq;
}

namespace {

std::span<const TokenId> body_of(const TokenSeq& seq) {
  std::span<const TokenId> body(seq.tokens);
  if (!body.empty() && body.front() == kCls) body = body.subspan(1);
  if (!body.empty() && body.back() == kSep) body = body.first(body.size() - 1);
  return body;
}

}  // namespace

TokenSeq make_joint_seq(const TokenSeq& mention_seq, const TokenSeq& view_seq,
                        std::size_t max_cross_length) {
  if (max_cross_length < 5) {
    throw ValidationError("max_cross_length must be >= 5");
  }
  auto m = body_of(mention_seq);
  auto v = body_of(view_seq);
  const std::size_t room = max_cross_length - 3;
  std::size_t n_m = m.size();
  std::size_t n_v = v.size();
  if (n_m + n_v > room) {
    n_v = std::max<std::size_t>(std::min<std::size_t>(n_v, 1),
                                room > n_m ? room - n_m : 0);
    n_v = std::min(n_v, v.size());
    if (n_m + n_v > room) n_m = room - n_v;
  }
  TokenSeq joint;
  joint.kind = SeqKind::kJoint;
  joint.tokens.reserve(n_m + n_v + 3);
  joint.tokens.push_back(kCls);
  joint.tokens.insert(joint.tokens.end(), m.begin(), m.begin() + n_m);
  joint.tokens.push_back(kSep);
  joint.tokens.insert(joint.tokens.end(), v.begin(), v.begin() + n_v);
  joint.tokens.push_back(kSep);
  return joint;
}

JointSegments split_joint(const TokenSeq& joint) {
  std::span<const TokenId> all(joint.tokens);
  const auto first_sep = std::find(all.begin() + 1, all.end(), kSep);
  const auto m_len = static_cast<std::size_t>(first_sep - all.begin()) - 1;
  const std::size_t v_start = m_len + 2;
  const std::size_t v_len =
      all.size() >= v_start + 1 ? all.size() - v_start - 1 : 0;
  return {all.subspan(1, m_len), all.subspan(v_start, v_len)};
}

void save_views_jsonl(const std::filesystem::path& path,
                      std::span<const ViewSet> views) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& vs : views) {
    for (std::size_t t = 0; t < vs.local_views.size(); ++t) {
      out << nlohmann::json{{"entity_id", vs.entity_id},
                            {"view_ord", t},
                            {"kind", "local"},
                            {"text", vs.view_texts[t]}}
                 .dump()
          << '\n';
    }
    out << nlohmann::json{{"entity_id", vs.entity_id},
                          {"view_ord", 0},
                          {"kind", "global"},
                          {"text", vs.global_text}}
               .dump()
        << '\n';
  }
}

}  // namespace mvd
