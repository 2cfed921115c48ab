#include "gesturelab/topology.hpp"

#include <json.hpp>

#include "gesturelab/error.hpp"
#include "gesturelab/io.hpp"

namespace gesturelab {

namespace {

SkeletonTopology build_upperbody27() {
  SkeletonTopology t;
  t.version = "upperbody27-v1";
  t.joint_count = 27;
  t.root = 0;          // neck
  t.scale_pair = {1, 4};  // left/right shoulder span stands in for torso length
  t.joint_names = {
      "neck",
      "l_shoulder", "l_elbow", "l_wrist",
      "r_shoulder", "r_elbow", "r_wrist",
      "l_palm", "l_thumb_base", "l_thumb_tip", "l_index_base", "l_index_tip",
      "l_middle_base", "l_middle_tip", "l_ring_base", "l_ring_tip", "l_pinky_tip",
      "r_palm", "r_thumb_base", "r_thumb_tip", "r_index_base", "r_index_tip",
      "r_middle_base", "r_middle_tip", "r_ring_base", "r_ring_tip", "r_pinky_tip",
  };
  t.edges = {
      {0, 1},  {1, 2},  {2, 3},            // left arm
      {0, 4},  {4, 5},  {5, 6},            // right arm
      {3, 7},  {7, 8},  {8, 9},  {7, 10},  {10, 11},
      {7, 12}, {12, 13}, {7, 14}, {14, 15}, {7, 16},   // left hand
      {6, 17}, {17, 18}, {18, 19}, {17, 20}, {20, 21},
      {17, 22}, {22, 23}, {17, 24}, {24, 25}, {17, 26},  // right hand
  };
  return t;
}

}  // namespace

const SkeletonTopology& SkeletonTopology::upperbody27() {
  static const SkeletonTopology t = build_upperbody27();
  return t;
}

SkeletonTopology SkeletonTopology::from_json_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorKind::Io, "topology file " + path.string() + ": " + e.what());
  }
  SkeletonTopology t;
  try {
    t.version = j.at("version").get<std::string>();
    t.joint_count = j.at("joint_count").get<int>();
    t.root = j.at("root").get<int>();
    t.scale_pair = {j.at("scale_pair").at(0).get<int>(), j.at("scale_pair").at(1).get<int>()};
    for (const auto& e : j.at("edges"))
      t.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    if (j.contains("joint_names"))
      t.joint_names = j.at("joint_names").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorKind::Config, "topology field error in " + path.string() + ": " + e.what());
  }
  for (auto [a, b] : t.edges)
    check(a >= 0 && a < t.joint_count && b >= 0 && b < t.joint_count, ErrorKind::Config,
          "topology edge index out of range in " + path.string());
  return t;
}

std::string SkeletonTopology::to_json() const {
  nlohmann::json j;
  j["version"] = version;
  j["joint_count"] = joint_count;
  j["root"] = root;
  j["scale_pair"] = {scale_pair[0], scale_pair[1]};
  nlohmann::json edges_json = nlohmann::json::array();
  for (auto [a, b] : edges) edges_json.push_back({a, b});
  j["edges"] = edges_json;
  j["joint_names"] = joint_names;
  return j.dump(2) + "\n";
}

}  // namespace gesturelab
