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

#include "mvd/index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

#include "binary_io.hpp"
#include "mvd/common.hpp"
#include "proximity_graph.hpp"

namespace mvd {

const char* to_string(ViewKind kind) {
  return kind == ViewKind::kLocal ? "local" : "global";
}

ViewIndex::ViewIndex(std::size_t dim, std::vector<std::string> entity_ids,
                     std::vector<IndexRecord> records, std::vector<float> vectors,
                     SearchBackend backend, const GraphParams& graph_params)
    : dim_(dim),
      entity_ids_(std::move(entity_ids)),
      records_(std::move(records)),
      backend_(backend),
      graph_params_(graph_params) {
  if (dim_ == 0) throw ValidationError("index dimension must be >= 1");
  if (vectors.size() != records_.size() * dim_) {
    throw ValidationError("index vector buffer does not match record count");
  }
  std::set<std::tuple<std::uint32_t, std::uint16_t, std::uint8_t>> keys;
  for (const auto& r : records_) {
    if (r.entity_ord >= entity_ids_.size()) {
      throw ValidationError("index record refers to entity ordinal " +
                            std::to_string(r.entity_ord) + " beyond table of " +
                            std::to_string(entity_ids_.size()));
    }
    if (!keys.emplace(r.entity_ord, r.view_ord, static_cast<std::uint8_t>(r.kind))
             .second) {
      throw ValidationError("duplicate index record for entity '" +
                            entity_ids_[r.entity_ord] + "' view " +
                            std::to_string(r.view_ord));
    }
  }
  for (float x : vectors) {
    if (!std::isfinite(x)) throw ValidationError("non-finite index vector");
  }
  vectors_ = std::make_shared<const std::vector<float>>(std::move(vectors));
  if (backend_ == SearchBackend::kApproximate && !records_.empty()) {
    graph_ = std::make_shared<const ProximityGraph>(
        vectors_->data(), records_.size(), dim_, graph_params_);
  }
}

double ViewIndex::score(std::span<const float> query, std::size_t record) const {
  return dot_f32(query, vector(record));
}

std::vector<float> ViewIndex::to_query(const Vector& query) const {
  if (static_cast<std::size_t>(query.size()) != dim_) {
    throw ValidationError("query dimension " + std::to_string(query.size()) +
                          " does not match index dimension " +
                          std::to_string(dim_));
  }
  std::vector<float> q(dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    q[i] = static_cast<float>(query(static_cast<Eigen::Index>(i)));
  }
  return q;
}

SearchResult ViewIndex::rank_entities(std::span<const float> q,
                                      std::span<const std::uint32_t> candidates,
                                      std::size_t k) const {
  struct Best {
    double score = -std::numeric_limits<double>::infinity();
    std::uint32_t record = 0;
    bool seen = false;
  };
  std::vector<Best> best(entity_ids_.size());
  auto view_key = [&](std::uint32_t rec) {
    return std::pair(static_cast<int>(records_[rec].kind), records_[rec].view_ord);
  };
  for (std::uint32_t rec : candidates) {
    const double s = score(q, rec);
    Best& b = best[records_[rec].entity_ord];
    if (!b.seen || s > b.score ||
        (s == b.score && view_key(rec) < view_key(b.record))) {
      b = {s, rec, true};
    }
  }
  std::vector<std::uint32_t> ents;
  for (std::uint32_t e = 0; e < best.size(); ++e) {
    if (best[e].seen) ents.push_back(e);
  }
  auto order = [&](std::uint32_t a, std::uint32_t b) {
    return best[a].score > best[b].score ||
           (best[a].score == best[b].score && a < b);
  };
  const std::size_t n = std::min(k, ents.size());
  std::partial_sort(ents.begin(), ents.begin() + static_cast<long>(n), ents.end(),
                    order);
  SearchResult result;
  result.hits.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& b = best[ents[i]];
    const auto& r = records_[b.record];
    result.hits.push_back({entity_ids_[ents[i]], ents[i], b.score, r.view_ord, r.kind});
  }
  return result;
}

SearchResult ViewIndex::search_exact(const Vector& query, std::size_t k) const {
  if (k < 1) throw ValidationError("search: k must be >= 1");
  const auto q = to_query(query);
  std::vector<std::uint32_t> all(records_.size());
  std::iota(all.begin(), all.end(), 0u);
  return rank_entities(q, all, k);
}

SearchResult ViewIndex::search_approx(const Vector& query, std::size_t k,
                                      std::size_t ef) const {
  if (k < 1) throw ValidationError("search: k must be >= 1");
  if (backend_ != SearchBackend::kApproximate) {
    throw ValidationError("search_approx needs an index built with the "
                          "approximate backend");
  }
  if (ef == 0) ef = graph_params_.ef_search;
  ef = std::max(ef, k);
  if (ef >= records_.size() || k >= entity_ids_.size()) {
    return search_exact(query, k);
  }
  const auto q = to_query(query);
  const auto ids = graph_->search(q, ef);
  return rank_entities(q, ids, k);
}

SearchResult ViewIndex::search(const Vector& query, std::size_t k) const {
  return backend_ == SearchBackend::kApproximate ? search_approx(query, k)
                                                 : search_exact(query, k);
}

ViewIndex build_index(const ParamStore& student, std::span<const ViewSet> entities,
                      bool include_global, SearchBackend backend,
                      const GraphParams& graph_params) {
  return build_index(student, entities,
                     include_global ? ViewSelection::kLocalAndGlobal
                                    : ViewSelection::kLocal,
                     backend, graph_params);
}

ViewIndex build_index(const ParamStore& student, std::span<const ViewSet> entities,
                      ViewSelection views, SearchBackend backend,
                      const GraphParams& graph_params) {
  if (entities.empty()) throw ValidationError("build_index: no entities");
  const auto dim = static_cast<std::size_t>(student.at("entity.w2").value.rows());
  std::vector<std::string> ids;
  std::vector<IndexRecord> records;
  std::vector<float> vectors;
  auto push = [&](std::uint32_t e, std::size_t ord, ViewKind kind,
                  const TokenSeq& seq) {
    if (ord > std::numeric_limits<std::uint16_t>::max()) {
      throw ValidationError("too many views for entity '" + ids[e] + "'");
    }
    records.push_back({e, static_cast<std::uint16_t>(ord), kind});
    const Vector v = encode_view(student, seq);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      vectors.push_back(static_cast<float>(v(i)));
    }
  };
  for (std::uint32_t e = 0; e < entities.size(); ++e) {
    const ViewSet& vs = entities[e];
    ids.push_back(vs.entity_id);
    if (views != ViewSelection::kGlobal) {
      for (std::size_t t = 0; t < vs.local_views.size(); ++t) {
        push(e, t, ViewKind::kLocal, vs.local_views[t]);
      }
    }
    if (views != ViewSelection::kLocal) {
      push(e, 0, ViewKind::kGlobal, vs.global_view);
    }
  }
  return ViewIndex(dim, std::move(ids), std::move(records), std::move(vectors),
                   backend, graph_params);
}

std::string serialize_index(const ViewIndex& index) {
  detail::ByteWriter w;
  w.put_bytes("MVDI");
  w.put<std::uint32_t>(kIndexVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(index.dim()));
  w.put<std::uint64_t>(index.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(index.num_entities()));
  for (const auto& id : index.entity_ids()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(id.size()));
    w.put_bytes(id);
  }
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& r = index.records()[i];
    w.put<std::uint32_t>(r.entity_ord);
    w.put<std::uint16_t>(r.view_ord);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(r.kind));
    for (float x : index.vector(i)) w.put<float>(x);
  }
  return w.bytes();
}

ViewIndex deserialize_index(const std::string& bytes, SearchBackend backend,
                            const GraphParams& graph_params) {
  detail::ByteReader r(bytes, "index");
  if (r.get_bytes(4) != "MVDI") throw FormatError("index: bad magic at byte offset 0");
  const auto version = r.get<std::uint32_t>();
  if (version != kIndexVersion) {
    throw FormatError("index: unsupported version " + std::to_string(version) +
                      " (expected " + std::to_string(kIndexVersion) + ")");
  }
  const auto dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  const auto n_entities = r.get<std::uint32_t>();
  std::vector<std::string> ids;
  ids.reserve(n_entities);
  for (std::uint32_t i = 0; i < n_entities; ++i) {
    const auto len = r.get<std::uint32_t>();
    ids.push_back(r.get_bytes(len));
  }
  const std::size_t record_bytes = 4 + 2 + 1 + 4 * static_cast<std::size_t>(dim);
  r.require(static_cast<std::size_t>(count) * record_bytes);
  std::vector<IndexRecord> records;
  std::vector<float> vectors;
  records.reserve(count);
  vectors.reserve(count * dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    IndexRecord rec;
    rec.entity_ord = r.get<std::uint32_t>();
    rec.view_ord = r.get<std::uint16_t>();
    const std::size_t kind_offset = r.offset();
    const auto kind = r.get<std::uint8_t>();
    if (kind > 1) {
      throw FormatError("index: invalid view kind " + std::to_string(kind) +
                        " at byte offset " + std::to_string(kind_offset));
    }
    rec.kind = static_cast<ViewKind>(kind);
    records.push_back(rec);
    for (std::uint32_t d = 0; d < dim; ++d) vectors.push_back(r.get<float>());
  }
  if (!r.at_end()) {
    throw FormatError("index: " + std::to_string(bytes.size() - r.offset()) +
                      " trailing bytes after byte offset " +
                      std::to_string(r.offset()));
  }
  return ViewIndex(dim, std::move(ids), std::move(records), std::move(vectors),
                   backend, graph_params);
}

void save_index(const ViewIndex& index, const std::filesystem::path& path) {
  detail::write_file(path.string(), serialize_index(index));
}

ViewIndex load_index(const std::filesystem::path& path, SearchBackend backend,
                     const GraphParams& graph_params) {
  return deserialize_index(detail::read_file(path.string()), backend,
                           graph_params);
}

}  // namespace mvd
