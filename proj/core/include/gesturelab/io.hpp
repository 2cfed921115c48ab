#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gesturelab/error.hpp"

namespace gesturelab {

// Binary array file: magic "GLA1", little-endian uint32 rank, uint32 dims,
// then float32 payload in row-major order. The on-disk element type is f32
// per the dataset contract; in-memory math is double.
struct ArrayFile {
  std::vector<int64_t> shape;
  std::vector<float> data;

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
  }
};

ArrayFile load_array(const std::filesystem::path& path);
void save_array(const std::filesystem::path& path, const ArrayFile& array);

std::string read_text_file(const std::filesystem::path& path);
// Writes atomically enough for our purposes (temp file + rename would race
// nothing here; single-writer contract) and creates parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& content);

// FNV-1a content hash, hex-encoded; used for config fingerprints and
// byte-identity checks in tests.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace gesturelab
