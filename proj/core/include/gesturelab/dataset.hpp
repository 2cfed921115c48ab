#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gesturelab/skeleton.hpp"

namespace gesturelab {

struct ReferentLabel {
  int object_id = 0;
  std::string part;  // sub-part letter or "main"/"general"
};

struct FormSimilarityPair {
  std::string id_a, id_b;
  std::array<int, 5> features{};  // shape, movement, rotation, position, hands

  int shared_count() const {
    int n = 0;
    for (int f : features) n += f;
    return n;
  }
};

// Manifest entry; the skeleton array itself loads lazily.
struct GestureSampleDesc {
  std::string sample_id;
  std::string skeleton_path;  // relative to the manifest directory
  std::string dialogue_id;
  int round = 1;
  std::string speaker;
  std::optional<ReferentLabel> referent;
  std::optional<std::string> verbal_ref;
};

// Bijective (object_id, part) -> class index mapping, built by sorting the
// distinct labels observed in a manifest. 70 classes on the real data; K on
// synthetic corpora.
class ReferentVocabulary {
 public:
  static ReferentVocabulary from_samples(const std::vector<GestureSampleDesc>& samples);
  int class_index(const ReferentLabel& label) const;  // -1 if unknown
  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::pair<int, std::string>>& labels() const { return labels_; }

 private:
  std::vector<std::pair<int, std::string>> labels_;
  std::map<std::pair<int, std::string>, int> index_;
};

struct DatasetManifest {
  int version = 1;
  int fps = 25;
  std::optional<std::string> feature_store;  // index path, relative to root
  std::vector<GestureSampleDesc> samples;
  std::vector<FormSimilarityPair> form_pairs;
  std::vector<std::string> split_train;
  std::vector<std::string> split_val;
  std::filesystem::path root;  // directory containing the manifest file

  const GestureSampleDesc* find(const std::string& sample_id) const;
  SkeletonSequence load_skeleton(const GestureSampleDesc& sample) const;
  std::filesystem::path resolve(const std::string& relative) const;

 private:
  friend DatasetManifest load_manifest(const std::filesystem::path&);
  std::map<std::string, size_t> index_;
};

// Parses and validates a manifest. Schema violations raise a Config error
// naming the field; missing skeleton files and dangling verbal_refs raise
// Integrity errors listing the sample.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace gesturelab
