#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gesturelab/checkpoint.hpp"
#include "gesturelab/dataset.hpp"
#include "gesturelab/pipeline.hpp"
#include "gesturelab/verbal.hpp"

namespace gesturelab {

// A manifest materialized for training: skeletons loaded and normalized,
// verbal features resolved when the architecture consumes them.
struct PreparedSample {
  std::string sample_id;
  SkeletonSequence normalized;
  std::optional<UtteranceFeatures> verbal;
};

struct PreparedCorpus {
  std::vector<PreparedSample> samples;
  std::map<std::string, size_t> by_id;
  std::vector<size_t> train_indices, val_indices;

  const PreparedSample& by_sample_id(const std::string& id) const;
};

// Loads and normalizes every manifest sample. Manifest splits are honored
// when present; otherwise a seeded split with the given validation fraction
// is drawn. Verbal features load only when want_verbal.
PreparedCorpus prepare_corpus(const DatasetManifest& manifest, bool want_verbal,
                              double validation_fraction, uint64_t seed);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  std::map<std::string, double> components;  // epoch means
  double val_loss = 0.0;
  double monitor_rho = std::numeric_limits<double>::quiet_NaN();
  double wall_time = 0.0;
};

struct PretrainOptions {
  std::filesystem::path out_dir;  // metrics.ndjson + epoch-NNN.ckpt + best.ckpt
  std::vector<FormSimilarityPair> monitor_pairs;
  int start_epoch = 0;  // resume: first epoch to run is start_epoch + 1
  // Clock used for the wall_time field. Null means real elapsed seconds;
  // supply a fixed clock to make the metrics stream byte-reproducible.
  std::function<double()> clock;
};

struct PretrainResult {
  std::vector<EpochMetrics> epochs;
  int best_epoch = 0;
  double best_rho = 0.0;
  std::filesystem::path best_record;
};

// Epoch loop with per-step metrics, per-epoch validation loss and
// form-similarity monitoring, a checkpoint per epoch, and a best.ckpt record
// for the highest monitor correlation (earliest epoch on ties). Deterministic
// for a fixed seed. Non-finite losses save a diagnostics checkpoint and raise
// a numeric error.
PretrainResult pretrain(TrainablePipeline& pipeline, Adam& optimizer,
                        const PreparedCorpus& corpus, const PretrainOptions& options);

// Monitor statistic: Spearman rho between pair shared_count and the cosine
// similarity of current embeddings; NaN when undefined (constant inputs).
double monitor_correlation(const TrainablePipeline& pipeline, const PreparedCorpus& corpus,
                           const std::vector<FormSimilarityPair>& pairs);

}  // namespace gesturelab
