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
#include <vector>

#include <Eigen/Dense>

namespace mvd {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// A named parameter with a same-shaped gradient slot. Rank-1 tensors are
/// stored as n x 1 matrices. Row-sparse tensors (embedding tables) track the
/// rows whose gradient is nonzero so updates touch only those rows.
struct Tensor {
  std::string name;
  std::uint8_t rank = 2;
  Matrix value;
  Matrix grad;
  bool row_sparse = false;
  std::vector<Eigen::Index> touched_rows;
  std::vector<char> row_touched;

  void mark_row(Eigen::Index row) {
    if (!row_sparse) return;
    if (!row_touched[static_cast<std::size_t>(row)]) {
      row_touched[static_cast<std::size_t>(row)] = 1;
      touched_rows.push_back(row);
    }
  }
};

class ParamStore {
 public:
  Tensor& add(std::string name, Eigen::Index rows, Eigen::Index cols,
              std::uint8_t rank, bool row_sparse = false);

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  const Tensor* find(const std::string& name) const;

  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }

  void zero_grad();
  std::size_t num_values() const;

  /// Same names, shapes and bit-identical values.
  bool same_values(const ParamStore& other) const;

 private:
  std::vector<Tensor> tensors_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Checkpoint layout: "MVDP", u32 version, then per tensor: u16 name length,
/// name bytes, u8 rank, u32 dims..., row-major f64 values. All little-endian.
std::string serialize_checkpoint(const ParamStore& params);
ParamStore deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path,
                     const ParamStore& params);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace mvd
