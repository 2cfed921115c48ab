#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gesturelab/params.hpp"
#include "gesturelab/tape.hpp"
#include "gesturelab/tensor.hpp"

namespace gesturelab {

enum class VerbalModality { Semantic, Speech };

std::string to_string(VerbalModality m);
VerbalModality verbal_modality_from_string(const std::string& s);

// Precomputed verbal features for the 2-second window around a gesture.
// Semantic entries are token embedding matrices (N x 768); speech entries
// carry the full layerwise stack (L x N x 1024), with `tokens` set to the
// final layer by convention.
struct UtteranceFeatures {
  VerbalModality modality = VerbalModality::Semantic;
  int64_t token_count = 0;  // N; 0 when no verbal content co-occurs
  int64_t dim = 0;          // D
  Tensor tokens;            // (N, D)
  std::optional<Tensor> layerwise;  // (L, N, D), speech only
  double window_start = 0.0, window_end = 0.0;

  int64_t layer_count() const { return layerwise ? layerwise->size(0) : 0; }
  void validate() const;
};

// On-disk store: one binary array file per key plus a JSON index mapping
// verbal_ref -> {path, modality, shape, window}. A relative store path is
// resolved against the manifest directory first, then $GESTURE_EMBED_CACHE.
class FeatureStore {
 public:
  static FeatureStore open(const std::filesystem::path& index_path);
  // Resolution helper for relative store paths (see above).
  static std::filesystem::path resolve_index_path(const std::string& index,
                                                  const std::filesystem::path& base_dir);

  bool contains(const std::string& key) const { return entries_.count(key) > 0; }
  UtteranceFeatures load(const std::string& key) const;
  std::vector<std::string> keys() const;
  size_t size() const { return entries_.size(); }

  class Writer {
   public:
    explicit Writer(std::filesystem::path store_dir);
    void add(const std::string& key, const UtteranceFeatures& features);
    // Writes the index; relative array paths, deterministic ordering.
    std::filesystem::path finalize();

   private:
    std::filesystem::path dir_;
    std::map<std::string, std::string> index_entries_;  // key -> serialized entry
  };

 private:
  struct Entry {
    std::string path;
    VerbalModality modality;
    std::vector<int64_t> shape;
    double window_start, window_end;
  };
  std::filesystem::path dir_;
  std::map<std::string, Entry> entries_;
};

// Mean over the token axis. N = 0 is signaled so the caller can substitute
// the learned null-utterance vector.
Tensor pool_utterance(const UtteranceFeatures& features);

// Learnable softmax-weighted average over backbone layers followed by two
// pointwise (kernel size 1) convolutions along the temporal axis. Convs are
// initialized to identity so training starts from the plain weighted mean.
class LayerAggregator {
 public:
  LayerAggregator(int layers, int dim, ParamRegistry& registry,
                  const std::string& prefix = "verbal_agg.");

  // stacked: (L*N, D) laid out layer-major. Returns (N, D).
  Var forward(Tape& tape, Var stacked, int64_t layer_count, int64_t token_count) const;
  // Convenience for plain tensors (builds a throwaway non-tracking tape).
  Tensor apply(const Tensor& layerwise) const;

  int layers() const { return layers_; }
  int dim() const { return dim_; }
  // Softmax of the layer logits; sums to 1 (asserted in training).
  std::vector<double> layer_weights() const;

 private:
  int layers_, dim_;
  Parameter* logits_;
  Parameter *conv1_w_, *conv1_b_, *conv2_w_, *conv2_b_;
};

}  // namespace gesturelab
