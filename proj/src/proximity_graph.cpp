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

#include "proximity_graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "mvd/common.hpp"

namespace mvd {
namespace {

// Per-thread visit marks; a generation counter avoids clearing per query.
struct VisitMarks {
  std::vector<std::uint32_t> stamp;
  std::uint32_t generation = 0;

  void reset(std::size_t n) {
    if (stamp.size() < n) stamp.resize(n, 0);
    if (++generation == 0) {
      std::fill(stamp.begin(), stamp.end(), 0);
      generation = 1;
    }
  }
  bool visit(std::uint32_t id) {
    if (stamp[id] == generation) return false;
    stamp[id] = generation;
    return true;
  }
};

thread_local VisitMarks t_marks;

}  // namespace

double dot_f32(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

ProximityGraph::ProximityGraph(const float* vectors, std::size_t n,
                               std::size_t dim, const GraphParams& params)
    : vectors_(vectors), n_(n), dim_(dim), params_(params), links_(n) {
  if (params_.max_degree < 2) {
    throw ValidationError("graph max_degree must be >= 2");
  }
  params_.ef_construction =
      std::max(params_.ef_construction, params_.max_degree);
  Rng rng(params_.seed);
  const double level_mult = 1.0 / std::log(static_cast<double>(params_.max_degree));
  for (std::uint32_t id = 0; id < n_; ++id) {
    const double u = 1.0 - rng.uniform();  // (0, 1]
    const int level = static_cast<int>(std::floor(-std::log(u) * level_mult));
    insert(id, level);
  }
}

std::uint32_t ProximityGraph::greedy(std::span<const float> q, std::uint32_t ep,
                                     int level) const {
  double best = sim(q, ep);
  bool moved = true;
  while (moved) {
    moved = false;
    for (std::uint32_t nb : links_[ep][static_cast<std::size_t>(level)]) {
      const double s = sim(q, nb);
      if (s > best || (s == best && nb < ep)) {
        best = s;
        ep = nb;
        moved = true;
      }
    }
  }
  return ep;
}

std::vector<ProximityGraph::Scored> ProximityGraph::search_layer(
    std::span<const float> q, const std::vector<Scored>& entry, std::size_t ef,
    int level) const {
  // Better = higher similarity, then lower id.
  auto worse = [](const Scored& a, const Scored& b) {
    return a.sim < b.sim || (a.sim == b.sim && a.id > b.id);
  };
  auto better = [&](const Scored& a, const Scored& b) { return worse(b, a); };
  std::priority_queue<Scored, std::vector<Scored>, decltype(worse)> frontier(worse);
  std::priority_queue<Scored, std::vector<Scored>, decltype(better)> found(better);

  t_marks.reset(n_);
  for (const auto& e : entry) {
    if (!t_marks.visit(e.id)) continue;
    frontier.push(e);
    found.push(e);
    if (found.size() > ef) found.pop();
  }
  while (!frontier.empty()) {
    const Scored c = frontier.top();
    if (found.size() >= ef && worse(c, found.top())) break;
    frontier.pop();
    for (std::uint32_t nb : links_[c.id][static_cast<std::size_t>(level)]) {
      if (!t_marks.visit(nb)) continue;
      const Scored s{sim(q, nb), nb};
      if (found.size() < ef || worse(found.top(), s)) {
        frontier.push(s);
        found.push(s);
        if (found.size() > ef) found.pop();
      }
    }
  }
  std::vector<Scored> out;
  out.reserve(found.size());
  while (!found.empty()) {
    out.push_back(found.top());
    found.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> ProximityGraph::select(std::vector<Scored> candidates,
                                                  std::size_t m) const {
  std::sort(candidates.begin(), candidates.end(),
            [](const Scored& a, const Scored& b) {
              return a.sim > b.sim || (a.sim == b.sim && a.id < b.id);
            });
  // Diversity pruning: skip a candidate that is more similar to an already
  // kept neighbor than to the base point, then backfill with the skipped ones.
  std::vector<std::uint32_t> kept;
  std::vector<std::uint32_t> skipped;
  for (const auto& c : candidates) {
    if (kept.size() >= m) break;
    bool diverse = true;
    for (std::uint32_t r : kept) {
      if (dot_f32(vec(c.id), vec(r)) > c.sim) {
        diverse = false;
        break;
      }
    }
    (diverse ? kept : skipped).push_back(c.id);
  }
  for (std::size_t i = 0; i < skipped.size() && kept.size() < m; ++i) {
    kept.push_back(skipped[i]);
  }
  return kept;
}

void ProximityGraph::insert(std::uint32_t id, int level) {
  links_[id].resize(static_cast<std::size_t>(level) + 1);
  if (max_level_ < 0) {
    entry_ = id;
    max_level_ = level;
    return;
  }
  const auto q = vec(id);
  std::uint32_t ep = entry_;
  for (int l = max_level_; l > level; --l) ep = greedy(q, ep, l);

  std::vector<Scored> entry{{sim(q, ep), ep}};
  for (int l = std::min(level, max_level_); l >= 0; --l) {
    auto found = search_layer(q, entry, params_.ef_construction, l);
    const auto lvl = static_cast<std::size_t>(l);
    links_[id][lvl] = select(found, params_.max_degree);
    for (std::uint32_t nb : links_[id][lvl]) {
      auto& nb_links = links_[nb][lvl];
      nb_links.push_back(id);
      if (nb_links.size() > capacity(l)) {
        std::vector<Scored> pool;
        pool.reserve(nb_links.size());
        for (std::uint32_t x : nb_links) pool.push_back({dot_f32(vec(nb), vec(x)), x});
        nb_links = select(std::move(pool), capacity(l));
      }
    }
    entry = std::move(found);
  }
  if (level > max_level_) {
    max_level_ = level;
    entry_ = id;
  }
}

std::vector<std::uint32_t> ProximityGraph::search(std::span<const float> query,
                                                  std::size_t ef) const {
  if (max_level_ < 0) return {};
  std::uint32_t ep = entry_;
  for (int l = max_level_; l > 0; --l) ep = greedy(query, ep, l);
  const auto found = search_layer(query, {{sim(query, ep), ep}}, ef, 0);
  std::vector<std::uint32_t> ids;
  ids.reserve(found.size());
  for (const auto& s : found) ids.push_back(s.id);
  return ids;
}

}  // namespace mvd
