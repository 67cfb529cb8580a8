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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mvd/encoders.hpp"
#include "mvd/views.hpp"

namespace mvd {

enum class ViewKind : std::uint8_t { kLocal = 0, kGlobal = 1 };
enum class SearchBackend : std::uint8_t { kExact, kApproximate };

const char* to_string(ViewKind kind);

struct IndexRecord {
  std::uint32_t entity_ord = 0;
  std::uint16_t view_ord = 0;
  ViewKind kind = ViewKind::kLocal;

  friend bool operator==(const IndexRecord&, const IndexRecord&) = default;
};

/// Build and search parameters of the proximity graph.
struct GraphParams {
  std::size_t max_degree = 16;        // per upper layer; layer 0 keeps 2x
  std::size_t ef_construction = 128;
  std::size_t ef_search = 128;
  std::uint64_t seed = 0x5EED;
};

struct SearchHit {
  std::string entity_id;
  std::uint32_t entity_ord = 0;
  double score = 0.0;
  std::uint16_t best_view_ord = 0;
  ViewKind best_view_kind = ViewKind::kLocal;

  friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

/// Entities in descending score order, one hit per entity.
struct SearchResult {
  std::vector<SearchHit> hits;

  std::size_t size() const { return hits.size(); }
  friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

class ProximityGraph;

/// Immutable store of single-precision view vectors. Scores are dot products
/// of float values accumulated in double; an entity's score is the maximum
/// over its indexed views.
class ViewIndex {
 public:
  ViewIndex(std::size_t dim, std::vector<std::string> entity_ids,
            std::vector<IndexRecord> records, std::vector<float> vectors,
            SearchBackend backend = SearchBackend::kExact,
            const GraphParams& graph_params = {});

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  std::size_t num_entities() const { return entity_ids_.size(); }
  SearchBackend backend() const { return backend_; }
  const GraphParams& graph_params() const { return graph_params_; }
  const std::vector<std::string>& entity_ids() const { return entity_ids_; }
  const std::vector<IndexRecord>& records() const { return records_; }
  std::span<const float> vector(std::size_t record) const {
    return {vectors_->data() + record * dim_, dim_};
  }
  const std::vector<float>& raw_vectors() const { return *vectors_; }

  double score(std::span<const float> query, std::size_t record) const;

  SearchResult search_exact(const Vector& query, std::size_t k) const;
  /// Best-effort search through the proximity graph. ef defaults to
  /// GraphParams::ef_search; a breadth covering the whole index, or k covering
  /// every entity, degenerates to the exhaustive scan.
  SearchResult search_approx(const Vector& query, std::size_t k,
                             std::size_t ef = 0) const;
  SearchResult search(const Vector& query, std::size_t k) const;

 private:
  std::vector<float> to_query(const Vector& query) const;
  SearchResult rank_entities(std::span<const float> q,
                             std::span<const std::uint32_t> candidates,
                             std::size_t k) const;

  std::size_t dim_;
  std::vector<std::string> entity_ids_;
  std::vector<IndexRecord> records_;
  // Shared so copies keep the graph's view of the buffer valid.
  std::shared_ptr<const std::vector<float>> vectors_;
  SearchBackend backend_;
  GraphParams graph_params_;
  std::shared_ptr<const ProximityGraph> graph_;
};

/// Embeds every local view, plus the global view when include_global, with
/// the entity tower.
ViewIndex build_index(const ParamStore& student, std::span<const ViewSet> entities,
                      bool include_global,
                      SearchBackend backend = SearchBackend::kExact,
                      const GraphParams& graph_params = {});
ViewIndex build_index(const ParamStore& student, std::span<const ViewSet> entities,
                      ViewSelection views,
                      SearchBackend backend = SearchBackend::kExact,
                      const GraphParams& graph_params = {});

/// Index layout: "MVDI", u32 version, u32 dim, u64 record count, u32 entity
/// count, (u32 length, bytes) per entity id, then per record u32 entity_ord,
/// u16 view_ord, u8 kind, f32[dim]. All little-endian.
inline constexpr std::uint32_t kIndexVersion = 1;

std::string serialize_index(const ViewIndex& index);
ViewIndex deserialize_index(const std::string& bytes,
                            SearchBackend backend = SearchBackend::kExact,
                            const GraphParams& graph_params = {});
void save_index(const ViewIndex& index, const std::filesystem::path& path);
ViewIndex load_index(const std::filesystem::path& path,
                     SearchBackend backend = SearchBackend::kExact,
                     const GraphParams& graph_params = {});

}  // namespace mvd
