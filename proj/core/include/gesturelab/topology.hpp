#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace gesturelab {

// Joint layout and bone list for the 27-joint upper-body + hands skeleton.
// The edge list drives the bone reconstruction loss, so it is versioned and
// also shipped as a data file (core/data/skeleton27.json).
struct SkeletonTopology {
  std::string version;
  int joint_count = 0;
  int root = 0;                       // neck; normalization origin
  std::array<int, 2> scale_pair{};    // shoulders; span defines the scale unit
  std::vector<std::pair<int, int>> edges;
  std::vector<std::string> joint_names;

  static const SkeletonTopology& upperbody27();
  static SkeletonTopology from_json_file(const std::filesystem::path& path);
  std::string to_json() const;
};

}  // namespace gesturelab
