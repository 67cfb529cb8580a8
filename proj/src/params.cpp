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

#include "mvd/params.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "binary_io.hpp"
#include "mvd/common.hpp"

namespace mvd {

namespace detail {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed: " + path);
}

}  // namespace detail

Tensor& ParamStore::add(std::string name, Eigen::Index rows, Eigen::Index cols,
                        std::uint8_t rank, bool row_sparse) {
  if (find(name)) throw ValidationError("duplicate tensor name '" + name + "'");
  Tensor t;
  t.name = std::move(name);
  t.rank = rank;
  t.value = Matrix::Zero(rows, cols);
  t.grad = Matrix::Zero(rows, cols);
  t.row_sparse = row_sparse;
  if (row_sparse) t.row_touched.assign(static_cast<std::size_t>(rows), 0);
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

const Tensor* ParamStore::find(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

Tensor& ParamStore::at(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).at(name));
}

const Tensor& ParamStore::at(const std::string& name) const {
  if (const Tensor* t = find(name)) return *t;
  throw ValidationError("no tensor named '" + name + "'");
}

void ParamStore::zero_grad() {
  for (auto& t : tensors_) {
    if (t.row_sparse) {
      for (auto r : t.touched_rows) {
        t.grad.row(r).setZero();
        t.row_touched[static_cast<std::size_t>(r)] = 0;
      }
      t.touched_rows.clear();
    } else {
      t.grad.setZero();
    }
  }
}

std::size_t ParamStore::num_values() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& a = tensors_[i];
    const auto& b = other.tensors_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() ||
        a.value.cols() != b.value.cols()) {
      return false;
    }
    if (std::memcmp(a.value.data(), b.value.data(),
                    sizeof(double) * static_cast<std::size_t>(a.value.size())) !=
        0) {
      return false;
    }
  }
  return true;
}

std::string serialize_checkpoint(const ParamStore& params) {
  detail::ByteWriter w;
  w.put_bytes("MVDP");
  w.put<std::uint32_t>(kCheckpointVersion);
  for (const auto& t : params.tensors()) {
    if (t.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw ValidationError("tensor name too long: " + t.name);
    }
    w.put<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.put_bytes(t.name);
    w.put<std::uint8_t>(t.rank);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.value.rows()));
    if (t.rank == 2) w.put<std::uint32_t>(static_cast<std::uint32_t>(t.value.cols()));
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      w.put<double>(t.value.data()[i]);
    }
  }
  return w.bytes();
}

ParamStore deserialize_checkpoint(const std::string& bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (r.get_bytes(4) != "MVDP") {
    throw FormatError("checkpoint: bad magic at byte offset 0");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " +
                      std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  ParamStore params;
  while (!r.at_end()) {
    const auto name_len = r.get<std::uint16_t>();
    std::string name = r.get_bytes(name_len);
    const std::size_t rank_offset = r.offset();
    const auto rank = r.get<std::uint8_t>();
    if (rank != 1 && rank != 2) {
      throw FormatError("checkpoint: unsupported rank " + std::to_string(rank) +
                        " at byte offset " + std::to_string(rank_offset));
    }
    const auto rows = static_cast<Eigen::Index>(r.get<std::uint32_t>());
    const auto cols =
        rank == 2 ? static_cast<Eigen::Index>(r.get<std::uint32_t>()) : 1;
    r.require(static_cast<std::size_t>(rows * cols) * sizeof(double));
    const bool sparse = name.ends_with(".embedding");
    Tensor& t = params.add(std::move(name), rows, cols, rank, sparse);
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      t.value.data()[i] = r.get<double>();
    }
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path,
                     const ParamStore& params) {
  detail::write_file(path.string(), serialize_checkpoint(params));
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(detail::read_file(path.string()));
}

}  // namespace mvd
