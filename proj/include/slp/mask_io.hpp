#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "slp/binary_mask.hpp"
#include "slp/error.hpp"

namespace slp {

/// Writes a binary PBM (P4). Set pixels are written as 1 (black), rows packed MSB first.
inline void write_pbm(const std::filesystem::path& path, const BinaryMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P4\n" << mask.width() << ' ' << mask.height() << '\n';
  const int row_bytes = (mask.width() + 7) / 8;
  std::vector<char> row(static_cast<std::size_t>(row_bytes));
  for (int y = 0; y < mask.height(); ++y) {
    std::fill(row.begin(), row.end(), 0);
    for (int x = 0; x < mask.width(); ++x)
      if (mask.test(x, y)) row[static_cast<std::size_t>(x / 8)] |= static_cast<char>(0x80 >> (x % 8));
    out.write(row.data(), row_bytes);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline BinaryMask read_pbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  auto next_token = [&]() {
    std::string tok;
    char c = 0;
    while (in.get(c)) {
      if (c == '#') {
        std::string ignored;
        std::getline(in, ignored);
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        tok.push_back(c);
        break;
      }
    }
    while (in.get(c) && !std::isspace(static_cast<unsigned char>(c))) tok.push_back(c);
    return tok;
  };
  if (next_token() != "P4") throw IoError(path.string() + ": not a P4 bitmap");
  int w = 0;
  int h = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PBM header");
  }
  if (w <= 0 || h <= 0) throw IoError(path.string() + ": bad PBM dimensions");
  BinaryMask mask(w, h);
  const int row_bytes = (w + 7) / 8;
  std::vector<char> row(static_cast<std::size_t>(row_bytes));
  for (int y = 0; y < h; ++y) {
    if (!in.read(row.data(), row_bytes)) throw IoError(path.string() + ": truncated PBM");
    for (int x = 0; x < w; ++x)
      if (static_cast<unsigned char>(row[static_cast<std::size_t>(x / 8)]) & (0x80 >> (x % 8)))
        mask.set(x, y);
  }
  return mask;
}

struct MaskIndexEntry {
  ObjectId object = 0;
  FrameId frame = 0;
  std::string path;  // relative to the index file's directory
};

/// Text index: one `object_id frame_id relative_path` line per stored mask.
inline void write_mask_index(const std::filesystem::path& path,
                             const std::vector<MaskIndexEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# object_id frame_id mask_path\n";
  for (const auto& e : entries) out << e.object << ' ' << e.frame << ' ' << e.path << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<MaskIndexEntry> read_mask_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<MaskIndexEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    MaskIndexEntry e;
    if (!(ss >> e.object >> e.frame >> e.path))
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed index line");
    entries.push_back(std::move(e));
  }
  return entries;
}

/// Loads every mask listed in an index as object -> frame -> mask.
inline std::map<ObjectId, std::map<FrameId, BinaryMask>> load_indexed_masks(
    const std::filesystem::path& index_path) {
  std::map<ObjectId, std::map<FrameId, BinaryMask>> out;
  const auto base = index_path.parent_path();
  for (const auto& e : read_mask_index(index_path))
    out[e.object].insert_or_assign(e.frame, read_pbm(base / e.path));
  return out;
}

}  // namespace slp
