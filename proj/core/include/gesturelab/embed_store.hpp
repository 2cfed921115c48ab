#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gesturelab/dataset.hpp"
#include "gesturelab/pipeline.hpp"
#include "gesturelab/tensor.hpp"

namespace gesturelab {

// On-disk embedding table: store.json (sorted ids + provenance) next to
// embeddings.bin (GLA1 array, one row per id). Writing the same embeddings
// twice produces byte-identical directories.
struct EmbeddingStore {
  int64_t width = 0;
  std::string source;            // provenance fingerprint (e.g. checkpoint hash)
  std::vector<std::string> ids;  // sorted
  Tensor matrix;                 // (ids.size(), width)

  bool contains(const std::string& id) const;
  Tensor row(const std::string& id) const;  // (1, width); Argument error if missing
  std::map<std::string, Tensor> table() const;
};

void save_embedding_store(const std::filesystem::path& dir,
                          const std::map<std::string, Tensor>& embeddings,
                          const std::string& source);
EmbeddingStore load_embedding_store(const std::filesystem::path& dir);

// Content hash over the two store files; equal hashes mean equal stores.
std::string embedding_store_hash(const std::filesystem::path& dir);

// Normalizes and embeds every manifest sample with the pipeline's inference
// path (skeletal input only).
std::map<std::string, Tensor> embed_corpus(const DatasetManifest& manifest,
                                           const TrainablePipeline& pipeline);

// Mean-pooled verbal features per sample for the concatenation protocol;
// samples without verbal content (or without a verbal_ref) are omitted.
std::map<std::string, Tensor> pooled_verbal_table(const DatasetManifest& manifest);

}  // namespace gesturelab
