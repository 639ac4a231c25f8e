#pragma once

#include <zlib.h>

#include <bit>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "placelab/core.hpp"

namespace placelab::io {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "column files are little-endian and written without byte swapping");

/// Splits one CSV record. Double-quoted fields may contain commas; "" escapes a quote.
inline const std::vector<std::string_view>& split_csv(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t i = 0;
  while (i <= line.size()) {
    if (i < line.size() && line[i] == '"') {
      std::size_t j = i + 1;
      while (j < line.size()) {
        if (line[j] == '"') {
          if (j + 1 < line.size() && line[j + 1] == '"') {
            j += 2;
            continue;
          }
          break;
        }
        ++j;
      }
      out.push_back(line.substr(i + 1, j - i - 1));
      i = j + 1;
      if (i < line.size() && line[i] == ',') ++i;
      else if (i >= line.size()) break;
      continue;
    }
    const std::size_t comma = line.find(',', i);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(i));
      break;
    }
    out.push_back(line.substr(i, comma - i));
    i = comma + 1;
    if (i == line.size()) {
      out.push_back(std::string_view{});
      break;
    }
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && p == end;
}

inline std::uint32_t crc32_bytes(const void* data, std::size_t n, std::uint32_t crc = 0) {
  const auto* p = static_cast<const Bytef*>(data);
  while (n > 0) {
    const uInt chunk = uInt(std::min<std::size_t>(n, 1u << 30));
    crc = std::uint32_t(::crc32(crc, p, chunk));
    p += chunk;
    n -= chunk;
  }
  return crc;
}

inline std::uint32_t crc32_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open " + path.string());
  std::vector<char> buf(1 << 20);
  std::uint32_t crc = 0;
  while (in) {
    in.read(buf.data(), std::streamsize(buf.size()));
    crc = crc32_bytes(buf.data(), std::size_t(in.gcount()), crc);
  }
  return crc;
}

inline std::string hex32(std::uint32_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(8) << std::setfill('0') << v;
  return s.str();
}

/// Writes through a sibling temp file and renames it into place, so readers
/// never observe a partially written output.
template <class Writer>
void write_atomic(const fs::path& path, Writer&& writer, bool binary = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(std::random_device{}() & 0xffffff);
  {
    std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) fail_io("cannot write " + tmp.string());
    writer(out);
    out.flush();
    if (!out) fail_io("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline void write_text_atomic(const fs::path& path, const std::string& text) {
  write_atomic(path, [&](std::ostream& o) { o << text; });
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

template <class T>
void write_column(const fs::path& path, const std::vector<T>& values) {
  write_atomic(
      path,
      [&](std::ostream& o) {
        o.write(reinterpret_cast<const char*>(values.data()), std::streamsize(values.size() * sizeof(T)));
      },
      true);
}

template <class T>
std::vector<T> read_column(const fs::path& path, std::size_t expected_rows) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open column " + path.string());
  const auto bytes = fs::file_size(path);
  if (bytes != expected_rows * sizeof(T))
    fail_data("column " + path.string() + " has " + std::to_string(bytes) + " bytes, expected " +
              std::to_string(expected_rows * sizeof(T)));
  std::vector<T> out(expected_rows);
  in.read(reinterpret_cast<char*>(out.data()), std::streamsize(bytes));
  return out;
}

/// Reads a two-column (item, label) partition CSV with a header row. An empty
/// label or -1 marks the item as unlabeled.
inline Partition read_partition_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail_io("cannot open " + path.string());
  Partition p;
  std::string line;
  std::vector<std::string_view> f;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    split_csv(line, f);
    if (header) {
      header = false;
      ItemId probe;
      if (!f.empty() && !parse_number(f[0], probe)) continue;
    }
    if (f.size() < 2) fail_data(path.string() + ":" + std::to_string(lineno) + ": expected item,label");
    ItemId item;
    Label label = kNullLabel;
    if (!parse_number(f[0], item)) fail_data(path.string() + ":" + std::to_string(lineno) + ": bad item id");
    if (!trim(f[1]).empty() && !parse_number(f[1], label))
      fail_data(path.string() + ":" + std::to_string(lineno) + ": bad label");
    p.items.push_back(item);
    p.labels.push_back(label < 0 ? kNullLabel : label);
  }
  return p;
}

inline void write_partition_csv(const fs::path& path, const Partition& p, std::string_view item_name = "item",
                                std::string_view label_name = "label") {
  write_atomic(path, [&](std::ostream& o) {
    o << item_name << ',' << label_name << '\n';
    for (std::size_t i = 0; i < p.size(); ++i) {
      o << p.items[i] << ',';
      if (p.labels[i] != kNullLabel) o << p.labels[i];
      o << '\n';
    }
  });
}

inline constexpr std::uint32_t kRleMagic = 0x454c5250;  // "PRLE"

/// Run-length encoded per-pixel labels of a full canvas (row-major):
/// magic, width, height, run count, then (run length u32, label i32) pairs.
inline void write_partition_rle(const fs::path& path, int width, int height, const std::vector<Label>& pixels) {
  if (pixels.size() != std::size_t(width) * std::size_t(height)) fail_argument("rle: pixel count mismatch");
  std::vector<std::pair<std::uint32_t, Label>> runs;
  for (Label v : pixels) {
    if (!runs.empty() && runs.back().second == v) ++runs.back().first;
    else runs.emplace_back(1u, v);
  }
  write_atomic(
      path,
      [&](std::ostream& o) {
        const std::uint32_t header[4] = {kRleMagic, std::uint32_t(width), std::uint32_t(height),
                                         std::uint32_t(runs.size())};
        o.write(reinterpret_cast<const char*>(header), sizeof header);
        for (auto [n, v] : runs) {
          o.write(reinterpret_cast<const char*>(&n), 4);
          o.write(reinterpret_cast<const char*>(&v), 4);
        }
      },
      true);
}

struct RleCanvas {
  int width = 0, height = 0;
  std::vector<Label> pixels;
};

inline RleCanvas read_partition_rle(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open " + path.string());
  std::uint32_t header[4];
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || header[0] != kRleMagic) fail_data(path.string() + ": not a run-length partition file");
  RleCanvas c{int(header[1]), int(header[2]), {}};
  c.pixels.reserve(std::size_t(c.width) * std::size_t(c.height));
  for (std::uint32_t r = 0; r < header[3]; ++r) {
    std::uint32_t n;
    Label v;
    in.read(reinterpret_cast<char*>(&n), 4);
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) fail_data(path.string() + ": truncated run table");
    c.pixels.insert(c.pixels.end(), n, v);
  }
  if (c.pixels.size() != std::size_t(c.width) * std::size_t(c.height))
    fail_data(path.string() + ": runs do not cover the canvas");
  return c;
}

}  // namespace placelab::io
