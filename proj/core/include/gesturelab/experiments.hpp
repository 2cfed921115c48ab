#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gesturelab/dataset.hpp"
#include "gesturelab/pipeline.hpp"
#include "gesturelab/resolver.hpp"
#include "gesturelab/stats.hpp"
#include "gesturelab/tensor.hpp"

namespace gesturelab {

// Embedding lookup by sample id. Implementations throw an Argument error for
// unknown ids. Returned tensors are treated as flat vectors of equal width.
using EmbedFn = std::function<Tensor(const std::string& sample_id)>;

EmbedFn embed_from_table(const std::map<std::string, Tensor>& table);

// Seeded Gaussian embeddings, one per manifest sample: the chance-level
// reference against which learned embeddings are compared.
std::map<std::string, Tensor> random_embedding_table(const DatasetManifest& manifest,
                                                     int dim, uint64_t seed);

struct ExperimentConfig {
  ResolverConfig resolver;  // class_count is overwritten from the vocabulary
  uint64_t seed = 0;

  std::string fingerprint(const std::string& protocol) const;
};

struct FoldResult {
  std::string name;  // e.g. "round-3"
  int test_count = 0;
  int train_count = 0;
  double accuracy = 0.0;
};

struct ExperimentReport {
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  double sd_accuracy = 0.0;
  std::string config_fingerprint;
  std::vector<std::string> warnings;
};

// Spearman correlation between the number of shared form features and the
// cosine similarity of the paired embeddings. Needs >= 3 pairs; nullopt when
// either series is constant.
std::optional<Correlation> form_similarity_correlation(
    const std::vector<FormSimilarityPair>& pairs, const EmbedFn& embed);

// One fold per round: the held-out round is the test set, every other round
// (all dialogues) is the training set. Rounds with no labeled samples are
// skipped with a warning.
ExperimentReport leave_one_round_out(const DatasetManifest& manifest, const EmbedFn& embed,
                                     const ExperimentConfig& config);

// (gesture, semantic) concatenation; a missing semantic vector becomes the
// null utterance (zeros), so such samples reduce to gesture-only.
Tensor concat_embeddings(const Tensor& gesture, const Tensor& semantic);
Tensor concat_embeddings(const Tensor& gesture, const Tensor* semantic, int64_t semantic_dim);

struct DialogueHistoryReport {
  std::vector<int> rounds;
  std::vector<double> baseline_accuracy;  // mean over target dialogues, per round
  std::vector<double> specific_accuracy;
  std::vector<int> samples_per_round;  // shared training-set size (parity)
  std::optional<TTest> series_ttest;   // baseline vs dialogue-specific series
  std::optional<Correlation> baseline_trend;  // accuracy vs round
  std::optional<Correlation> specific_trend;
  std::string config_fingerprint;
};

// Baseline vs dialogue-specific resolution across rounds. For target dialogue
// D and round n, both models are tested on (D, n). The baseline trains on
// other dialogues only; the dialogue-specific model adds D's rounds 1..n-1
// and drops an equal amount of other-dialogue data (stratified by referent,
// fixed seed) so the training-set sizes match exactly. At round 1 the two
// training sets are identical.
DialogueHistoryReport dialogue_history_experiment(const DatasetManifest& manifest,
                                                  const EmbedFn& embed,
                                                  const ExperimentConfig& config);

struct NoiseRow {
  double sigma = 0.0;
  ExperimentReport report;
};

// Adds Gaussian pixel jitter to the raw skeletons, re-embeds with the given
// pipeline, and repeats leave-one-round-out per sigma. Sigma 0 reproduces the
// clean evaluation exactly.
std::vector<NoiseRow> noise_robustness(const DatasetManifest& manifest,
                                       const TrainablePipeline& pipeline,
                                       const std::vector<double>& sigmas,
                                       const ExperimentConfig& config);

}  // namespace gesturelab
