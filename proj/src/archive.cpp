/*
 * Copyright 2026 The AuxSeg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "auxseg/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "auxseg/errors.hpp"

namespace auxseg {
namespace {

constexpr char kMagic[8] = {'A', 'U', 'X', 'A', 'R', 'R', '1', '\n'};

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

void append_le_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_le_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void append_floats(std::string& out, const std::vector<float>& values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * 4);
  std::memcpy(out.data() + start, values.data(), values.size() * 4);
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint32_t w;
      std::memcpy(&w, out.data() + start + 4 * i, 4);
      w = byteswap32(w);
      std::memcpy(out.data() + start + 4 * i, &w, 4);
    }
  }
}

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                         std::multiplies<std::int64_t>());
}

}  // namespace

const NamedArray* ArrayArchive::find(std::string_view name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

const NamedArray& ArrayArchive::get(std::string_view name) const {
  const NamedArray* a = find(name);
  if (!a) throw ValidationError("archive has no array named '" + std::string(name) + "'");
  return *a;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " +
                        ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_archive(const std::filesystem::path& path, const ArrayArchive& archive) {
  nlohmann::json manifest;
  manifest["format"] = "auxseg-array-archive";
  manifest["version"] = 1;
  manifest["meta"] = archive.meta;
  manifest["arrays"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& a : archive.arrays) {
    if (element_count(a.shape) != static_cast<std::int64_t>(a.values.size())) {
      throw ShapeError("array '" + a.name + "' shape does not match its element count");
    }
    const std::uint64_t nbytes = a.values.size() * 4;
    manifest["arrays"].push_back({{"name", a.name},
                                  {"shape", a.shape},
                                  {"dtype", "float32"},
                                  {"offset", offset},
                                  {"nbytes", nbytes}});
    offset += nbytes;
  }
  const std::string text = manifest.dump();
  std::string bytes(kMagic, sizeof(kMagic));
  append_le_u64(bytes, text.size());
  bytes += text;
  for (const auto& a : archive.arrays) append_floats(bytes, a.values);
  write_file_atomic(path, bytes);
}

ArrayArchive read_archive(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto fail = [&](const std::string& why) {
    return ValidationError("corrupt archive '" + path.string() + "': " + why);
  };
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw fail("bad magic");
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t len = read_le_u64(raw + 8);
  if (16 + len > bytes.size()) throw fail("truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(16, len));
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  const std::size_t base = 16 + len;
  ArrayArchive archive;
  archive.meta = manifest.value("meta", nlohmann::json::object());
  for (const auto& entry : manifest.at("arrays")) {
    NamedArray a;
    a.name = entry.at("name").get<std::string>();
    a.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    if (entry.at("dtype").get<std::string>() != "float32") throw fail("unsupported dtype");
    const std::uint64_t off = entry.at("offset").get<std::uint64_t>();
    const std::uint64_t nbytes = entry.at("nbytes").get<std::uint64_t>();
    if (nbytes != static_cast<std::uint64_t>(element_count(a.shape)) * 4) {
      throw fail("array '" + a.name + "' byte size mismatch");
    }
    if (base + off + nbytes > bytes.size()) throw fail("array '" + a.name + "' truncated");
    a.values.resize(nbytes / 4);
    std::memcpy(a.values.data(), bytes.data() + base + off, nbytes);
    if constexpr (std::endian::native == std::endian::big) {
      for (float& f : a.values) {
        std::uint32_t w;
        std::memcpy(&w, &f, 4);
        w = byteswap32(w);
        std::memcpy(&f, &w, 4);
      }
    }
    archive.arrays.push_back(std::move(a));
  }
  return archive;
}

}  // namespace auxseg
