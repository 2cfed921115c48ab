#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gesturelab/dataset.hpp"
#include "gesturelab/params.hpp"
#include "gesturelab/rng.hpp"
#include "gesturelab/skeleton.hpp"
#include "gesturelab/tape.hpp"
#include "gesturelab/tensor.hpp"
#include "gesturelab/verbal.hpp"

namespace gltest {

// Unique scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Central-difference gradient checks. rel err = |a - fd| / max(|a|, |fd|, 1e-6).

// Scalar graph over explicit input tensors; the harness perturbs input
// coordinates and compares tape gradients against central differences.
struct LeafCheck {
  std::vector<gesturelab::Tensor> inputs;
  std::function<gesturelab::Var(gesturelab::Tape&, const std::vector<gesturelab::Var>&)> build;
};

double max_rel_err_leaf(LeafCheck& check, gesturelab::Rng& rng, int coords_per_input);

// Scalar functional over registry parameters. eval(true) must rebuild the
// graph, run backward, and leave gradients in the registry (zeroed by the
// harness first); eval(false) only returns the value. probes_total
// (parameter, coordinate) pairs are sampled uniformly.
double max_rel_err_params(gesturelab::ParamRegistry& registry,
                          const std::function<double(bool track)>& eval,
                          gesturelab::Rng& rng, int probes_total);

// ---------------------------------------------------------------------------
// Independent statistics oracles.

// O(n^2) average ranks (ties averaged), then a direct Pearson over the ranks.
double spearman_bruteforce(const std::vector<double>& xs, const std::vector<double>& ys);

// ---------------------------------------------------------------------------
// Data builders.

gesturelab::SkeletonSequence random_sequence(int64_t frames, int joints, uint64_t seed,
                                             int fps = 25);

gesturelab::UtteranceFeatures random_semantic(int64_t tokens, int64_t dim, uint64_t seed);
gesturelab::UtteranceFeatures random_speech(int64_t layers, int64_t tokens, int64_t dim,
                                            uint64_t seed);

// One row of a tiny corpus written to disk.
struct TinySample {
  std::string id;
  std::string dialogue;
  int round = 1;
  int class_id = -1;  // < 0 means unlabeled
};

// Writes skeleton files and a manifest for the given samples and returns the
// reloaded (fully validated) manifest. Skeletons are random but seeded by id.
gesturelab::DatasetManifest write_tiny_corpus(const std::filesystem::path& dir,
                                              const std::vector<TinySample>& samples,
                                              int frames = 6, int fps = 25);

template <class F>
std::optional<gesturelab::ErrorKind> thrown_kind(F&& f) {
  try {
    f();
  } catch (const gesturelab::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace gltest
