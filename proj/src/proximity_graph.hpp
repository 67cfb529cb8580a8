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

// Layered navigable small-world graph over inner-product similarity.

#include <cstdint>
#include <span>
#include <vector>

#include "mvd/index.hpp"

namespace mvd {

double dot_f32(std::span<const float> a, std::span<const float> b);

class ProximityGraph {
 public:
  ProximityGraph(const float* vectors, std::size_t n, std::size_t dim,
                 const GraphParams& params);

  /// Up to ef node ids, best first.
  std::vector<std::uint32_t> search(std::span<const float> query,
                                    std::size_t ef) const;

  std::size_t max_level() const { return static_cast<std::size_t>(max_level_); }
  std::size_t degree(std::uint32_t node, std::size_t level) const {
    return links_[node][level].size();
  }

 private:
  struct Scored {
    double sim;
    std::uint32_t id;
  };

  std::span<const float> vec(std::uint32_t id) const {
    return {vectors_ + static_cast<std::size_t>(id) * dim_, dim_};
  }
  double sim(std::span<const float> q, std::uint32_t id) const {
    return dot_f32(q, vec(id));
  }
  std::size_t capacity(int level) const {
    return level == 0 ? 2 * params_.max_degree : params_.max_degree;
  }

  std::uint32_t greedy(std::span<const float> q, std::uint32_t ep,
                       int level) const;
  std::vector<Scored> search_layer(std::span<const float> q,
                                   const std::vector<Scored>& entry,
                                   std::size_t ef, int level) const;
  std::vector<std::uint32_t> select(std::vector<Scored> candidates,
                                    std::size_t m) const;
  void insert(std::uint32_t id, int level);

  const float* vectors_;
  std::size_t n_;
  std::size_t dim_;
  GraphParams params_;
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;
  std::uint32_t entry_ = 0;
  int max_level_ = -1;
};

}  // namespace mvd
