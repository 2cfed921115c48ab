#include "helpers.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>

#include "gesturelab/dataset.hpp"

namespace gltest {

using namespace gesturelab;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<uint64_t> counter{0};
  const uint64_t n = counter.fetch_add(1);
  path_ = std::filesystem::temp_directory_path() /
          ("gl-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(n));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

namespace {

double rel_err(double a, double fd) {
  return std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), 1e-6});
}

}  // namespace

double max_rel_err_leaf(LeafCheck& check, Rng& rng, int coords_per_input) {
  auto eval = [&]() {
    Tape tape(false);
    std::vector<Var> leaves;
    leaves.reserve(check.inputs.size());
    for (auto& t : check.inputs) leaves.push_back(tape.leaf(t, false));
    return tape.value(check.build(tape, leaves)).item();
  };

  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(check.inputs.size());
  for (auto& t : check.inputs) leaves.push_back(tape.leaf(t, true));
  Var root = check.build(tape, leaves);
  tape.backward(root);

  double worst = 0.0;
  for (size_t i = 0; i < check.inputs.size(); ++i) {
    const Tensor& g = tape.grad(leaves[i]);
    Tensor& x = check.inputs[i];
    for (int k = 0; k < coords_per_input && x.numel() > 0; ++k) {
      const int64_t c = rng.uniform_int(x.numel());
      const double analytic = g.empty() ? 0.0 : g[c];
      const double x0 = x[c];
      const double h = 1e-5 * std::max(1.0, std::fabs(x0));
      x[c] = x0 + h;
      const double fp = eval();
      x[c] = x0 - h;
      const double fm = eval();
      x[c] = x0;
      worst = std::max(worst, rel_err(analytic, (fp - fm) / (2.0 * h)));
    }
  }
  return worst;
}

double max_rel_err_params(ParamRegistry& registry, const std::function<double(bool)>& eval,
                          Rng& rng, int probes_total) {
  registry.zero_grads();
  eval(true);

  auto params = registry.all();
  double worst = 0.0;
  for (int k = 0; k < probes_total; ++k) {
    Parameter* p = params[static_cast<size_t>(rng.uniform_int(
        static_cast<int64_t>(params.size())))];
    if (p->value.numel() == 0) continue;
    const int64_t c = rng.uniform_int(p->value.numel());
    const double analytic = p->grad[c];
    const double x0 = p->value[c];
    const double h = 1e-5 * std::max(1.0, std::fabs(x0));
    p->value[c] = x0 + h;
    const double fp = eval(false);
    p->value[c] = x0 - h;
    const double fm = eval(false);
    p->value[c] = x0;
    worst = std::max(worst, rel_err(analytic, (fp - fm) / (2.0 * h)));
  }
  return worst;
}

double spearman_bruteforce(const std::vector<double>& xs, const std::vector<double>& ys) {
  const size_t n = xs.size();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<double> r(n);
    for (size_t i = 0; i < n; ++i) {
      double below = 0.0, equal = 0.0;
      for (size_t j = 0; j < n; ++j) {
        if (v[j] < v[i]) below += 1.0;
        if (v[j] == v[i]) equal += 1.0;
      }
      r[i] = below + (equal + 1.0) / 2.0;
    }
    return r;
  };
  const std::vector<double> rx = ranks(xs), ry = ranks(ys);
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

SkeletonSequence random_sequence(int64_t frames, int joints, uint64_t seed, int fps) {
  Rng rng(seed);
  SkeletonSequence seq = SkeletonSequence::zeros(frames, joints, fps);
  for (int64_t t = 0; t < frames; ++t) {
    for (int j = 0; j < joints; ++j) {
      seq.x(t, j) = rng.uniform(100.0, 1000.0);
      seq.y(t, j) = rng.uniform(100.0, 700.0);
      seq.conf(t, j) = rng.uniform(0.5, 1.0);
    }
  }
  return seq;
}

UtteranceFeatures random_semantic(int64_t tokens, int64_t dim, uint64_t seed) {
  Rng rng(seed);
  UtteranceFeatures f;
  f.modality = VerbalModality::Semantic;
  f.token_count = tokens;
  f.dim = dim;
  f.tokens = Tensor::randn({tokens, dim}, rng);
  f.window_start = 0.0;
  f.window_end = 2.0;
  return f;
}

UtteranceFeatures random_speech(int64_t layers, int64_t tokens, int64_t dim, uint64_t seed) {
  Rng rng(seed);
  UtteranceFeatures f;
  f.modality = VerbalModality::Speech;
  f.token_count = tokens;
  f.dim = dim;
  f.layerwise = Tensor::randn({layers, tokens, dim}, rng);
  // Final layer by convention.
  f.tokens = Tensor({tokens, dim});
  const int64_t block = tokens * dim;
  for (int64_t i = 0; i < block; ++i)
    f.tokens[i] = (*f.layerwise)[(layers - 1) * block + i];
  f.window_start = 0.0;
  f.window_end = 2.0;
  return f;
}

DatasetManifest write_tiny_corpus(const std::filesystem::path& dir,
                                  const std::vector<TinySample>& samples, int frames,
                                  int fps) {
  std::filesystem::create_directories(dir / "skeletons");
  DatasetManifest m;
  m.fps = fps;
  for (const auto& s : samples) {
    GestureSampleDesc d;
    d.sample_id = s.id;
    d.skeleton_path = "skeletons/" + s.id + ".skel";
    d.dialogue_id = s.dialogue;
    d.round = s.round;
    d.speaker = "A";
    if (s.class_id >= 0) d.referent = ReferentLabel{s.class_id, "main"};
    save_skeleton(dir / d.skeleton_path,
                  random_sequence(frames, 27, derive_seed(99, "tiny", s.id), fps));
    m.samples.push_back(std::move(d));
  }
  save_manifest(m, dir / "manifest.json");
  return load_manifest(dir / "manifest.json");
}

}  // namespace gltest
