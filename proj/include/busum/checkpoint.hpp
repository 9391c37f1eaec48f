// Copyright 2026 The busum Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// BUSM checkpoint container.
//
// Layout:
//   bytes 0..3    magic "BUSM"
//   bytes 4..7    format version, uint32 little-endian
//   bytes 8..15   header length in bytes, uint64 little-endian
//   header        UTF-8 JSON: {"tensors": [{"name", "shape", "offset"}], "meta": {...}}
//   payload       little-endian float32 values of each tensor in header
//                 order; "offset" counts bytes from the start of the payload

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "busum/error.hpp"
#include "busum/nn.hpp"
#include "busum/tensor.hpp"
#include "json.hpp"

namespace busum {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Container {
  std::uint32_t version = kCheckpointVersion;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<StoredTensor> tensors;

  const StoredTensor& find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t;
    throw Error("checkpoint has no tensor named " + name);
  }
};

namespace detail {

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_le(const std::string& in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace detail

inline std::string serialize_container(const Container& c) {
  nlohmann::json header;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : c.tensors) {
    if (shape_numel(t.shape) != t.values.size()) throw Error("tensor " + t.name + " has inconsistent shape");
    header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += 4 * t.values.size();
  }
  header["meta"] = c.meta;
  const std::string h = header.dump();
  std::string out = "BUSM";
  detail::put_le(out, c.version, 4);
  detail::put_le(out, h.size(), 8);
  out += h;
  for (const auto& t : c.tensors)
    for (float f : t.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      detail::put_le(out, bits, 4);
    }
  return out;
}

inline Container parse_container(const std::string& bytes) {
  auto need = [&](std::size_t end) {
    if (bytes.size() < end) throw Error("truncated checkpoint at offset " + std::to_string(bytes.size()));
  };
  if (bytes.size() < 4 || bytes.compare(0, 4, "BUSM") != 0) throw Error("not a BUSM checkpoint");
  need(16);
  Container c;
  c.version = static_cast<std::uint32_t>(detail::get_le(bytes, 4, 4));
  if (c.version != kCheckpointVersion)
    throw Error("checkpoint format version " + std::to_string(c.version) + " is not supported (expected version " +
                std::to_string(kCheckpointVersion) + ")");
  const std::uint64_t hlen = detail::get_le(bytes, 8, 8);
  need(16 + hlen);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, hlen));
  } catch (const nlohmann::json::parse_error&) {
    throw Error("corrupt checkpoint header");
  }
  const std::size_t payload = 16 + hlen;
  c.meta = header.value("meta", nlohmann::json::object());
  for (const auto& e : header.at("tensors")) {
    StoredTensor t;
    t.name = e.at("name").get<std::string>();
    t.shape = e.at("shape").get<Shape>();
    const std::size_t off = payload + e.at("offset").get<std::size_t>();
    const std::size_t n = shape_numel(t.shape);
    need(off + 4 * n);
    t.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto bits = static_cast<std::uint32_t>(detail::get_le(bytes, off + 4 * i, 4));
      std::memcpy(&t.values[i], &bits, 4);
    }
    c.tensors.push_back(std::move(t));
  }
  return c;
}

inline void write_container(const Container& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path);
  const std::string bytes = serialize_container(c);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path);
}

inline Container read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_container(ss.str());
}

// Parameter lists <-> stored tensors.
template <class S>
void store_params(const ParamList<S>& params, Container& c) {
  for (const auto& p : params) {
    StoredTensor t;
    t.name = p.name;
    t.shape = p.tensor.shape();
    for (S v : p.tensor.data()) t.values.push_back(static_cast<float>(v));
    c.tensors.push_back(std::move(t));
  }
}

template <class S>
void restore_params(const ParamList<S>& params, const Container& c) {
  for (const auto& p : params) {
    const auto& t = c.find(p.name);
    if (t.shape != p.tensor.shape())
      throw Error("checkpoint tensor " + p.name + " has shape " + shape_str(t.shape) + ", model expects " +
                  shape_str(p.tensor.shape()));
    auto dst = p.tensor;
    auto d = dst.mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<S>(t.values[i]);
  }
}

}  // namespace busum
