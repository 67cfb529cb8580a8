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

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mvd/corpus.hpp"
#include "mvd/encoders.hpp"
#include "mvd/index.hpp"
#include "mvd/training.hpp"
#include "mvd/views.hpp"

namespace mvd {

inline const std::vector<std::size_t> kDefaultKValues{1, 2, 4, 8, 16, 32, 50, 64};

struct IndexConfig {
  ViewSelection views = ViewSelection::kLocal;
  SearchBackend backend = SearchBackend::kExact;
  GraphParams graph;
};

/// Everything one end-to-end run needs besides the data.
struct PipelineConfig {
  SynthSpec synth;
  SegmentationConfig segmentation;
  EncoderConfig encoder;
  TrainConfig warmup_dual = default_config(Stage::kWarmupDual);
  TrainConfig warmup_cross = default_config(Stage::kWarmupCross);
  TrainConfig mvd = default_config(Stage::kMvd);
  MvdOptions distill;
  IndexConfig index;
  std::vector<std::size_t> k_values = kDefaultKValues;
};

void validate(const PipelineConfig& cfg);

nlohmann::json to_json(const PipelineConfig& cfg);

/// Missing keys keep their defaults; unknown keys and ill-typed values throw
/// ValidationError.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Applies "section.key=value" to a config document. The value is read as
/// JSON when it parses and as a bare string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);

/// 16 hex digits identifying the canonical config document.
std::string fingerprint(const PipelineConfig& cfg);

const char* to_string(ViewSelection v);
ViewSelection parse_view_selection(const std::string& s);
const char* to_string(SearchBackend b);
SearchBackend parse_backend(const std::string& s);
const char* to_string(RelevantView v);
RelevantView parse_relevant_view(const std::string& s);

}  // namespace mvd
