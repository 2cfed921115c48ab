#include "gesturelab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "gesturelab/error.hpp"
#include "gesturelab/rng.hpp"
#include "gesturelab/skeleton.hpp"
#include "gesturelab/verbal.hpp"

namespace gesturelab {

void SynthConfig::validate() const {
  check_config(referents >= 2, "synth: referents must be >= 2");
  check_config(samples_per_referent >= 1, "synth: samples_per_referent must be >= 1");
  check_config(dialogues >= 1, "synth: dialogues must be >= 1");
  check_config(rounds >= 1, "synth: rounds must be >= 1");
  check_config(fps >= 2 && frames >= 2, "synth: fps and frames must be >= 2");
  check_config(moving_joints >= 1 && moving_joints <= 20,
               "synth: moving_joints outside [1, 20]");
  check_config(motion_noise_px >= 0.0, "synth: motion_noise_px must be >= 0");
  check_config(semantic_informativeness >= 0.0 && semantic_informativeness <= 1.0,
               "synth: semantic_informativeness outside [0, 1]");
  check_config(drift_px >= 0.0, "synth: drift_px must be >= 0");
  check_config(nuisance_phase >= 0.0 && nuisance_amp >= 0.0 && nuisance_amp < 1.0 &&
                   nuisance_speed >= 0.0 && nuisance_speed < 1.0,
               "synth: nuisance magnitudes out of range");
  check_config(semantic_dim >= 1, "synth: semantic_dim must be >= 1");
  check_config(pairs_per_referent >= 0, "synth: pairs_per_referent must be >= 0");
}

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

struct Prototype {
  double frequency_hz = 0.0;
  std::vector<double> amp_x, amp_y, phase_x, phase_y;  // per moving joint
};

// Per-sample generating parameters; kept around so form-pair descriptors can
// be computed from parameter proximity rather than from the noisy data.
struct SampleParams {
  double phase_shift = 0.0;
  double amp_x_scale = 1.0, amp_y_scale = 1.0;
  double speed_scale = 1.0;
  std::vector<double> drift_dx, drift_dy;  // per moving joint, already scaled
};

struct Generator {
  SynthConfig cfg;
  const SkeletonTopology& topo = SkeletonTopology::upperbody27();
  std::vector<double> base_x, base_y;
  std::vector<int> moving;  // joint indices carrying the prototype motion
  std::vector<Prototype> prototypes;

  explicit Generator(const SynthConfig& config) : cfg(config) {
    base_x.assign(static_cast<size_t>(topo.joint_count), 0.0);
    base_y.assign(static_cast<size_t>(topo.joint_count), 0.0);
    Rng pose(derive_seed(cfg.seed, "pose"));
    for (int j = 0; j < topo.joint_count; ++j) {
      base_x[static_cast<size_t>(j)] = 640.0 + pose.uniform(-150.0, 150.0);
      base_y[static_cast<size_t>(j)] = 360.0 + pose.uniform(-150.0, 150.0);
    }
    base_x[static_cast<size_t>(topo.root)] = 640.0;
    base_y[static_cast<size_t>(topo.root)] = 300.0;
    base_x[static_cast<size_t>(topo.scale_pair[0])] = 640.0 - 80.0;
    base_y[static_cast<size_t>(topo.scale_pair[0])] = 310.0;
    base_x[static_cast<size_t>(topo.scale_pair[1])] = 640.0 + 80.0;
    base_y[static_cast<size_t>(topo.scale_pair[1])] = 310.0;

    for (int j = topo.joint_count - 1;
         j >= 0 && static_cast<int>(moving.size()) < cfg.moving_joints; --j) {
      if (j == topo.root || j == topo.scale_pair[0] || j == topo.scale_pair[1]) continue;
      moving.push_back(j);
    }

    // Evenly spaced frequencies keep the classes separable under nuisance
    // jitter; the band stays clear of the Nyquist limit.
    const double f_min = 0.4;
    const double f_max = std::min(2.5, 0.4 * static_cast<double>(cfg.fps));
    prototypes.resize(static_cast<size_t>(cfg.referents));
    for (int k = 0; k < cfg.referents; ++k) {
      Prototype& p = prototypes[static_cast<size_t>(k)];
      p.frequency_hz =
          f_min + (f_max - f_min) * static_cast<double>(k) /
                      static_cast<double>(cfg.referents - 1);
      Rng rng(derive_seed(cfg.seed, "proto", static_cast<uint64_t>(k)));
      for (size_t m = 0; m < moving.size(); ++m) {
        p.amp_x.push_back(rng.uniform(25.0, 55.0));
        p.amp_y.push_back(rng.uniform(25.0, 55.0));
        p.phase_x.push_back(rng.uniform(0.0, kTau));
        p.phase_y.push_back(rng.uniform(0.0, kTau));
      }
    }
  }

  SampleParams draw_params(int referent, const std::string& dialogue, int round,
                           uint64_t sample_seed) const {
    SampleParams sp;
    Rng rng(derive_seed(sample_seed, "nuisance"));
    sp.phase_shift = rng.uniform(-cfg.nuisance_phase, cfg.nuisance_phase);
    sp.amp_x_scale = rng.uniform(1.0 - cfg.nuisance_amp, 1.0 + cfg.nuisance_amp);
    sp.amp_y_scale = rng.uniform(1.0 - cfg.nuisance_amp, 1.0 + cfg.nuisance_amp);
    sp.speed_scale = rng.uniform(1.0 - cfg.nuisance_speed, 1.0 + cfg.nuisance_speed);

    const double progress =
        cfg.rounds > 1 ? static_cast<double>(round - 1) / static_cast<double>(cfg.rounds - 1)
                       : 0.0;
    Rng drift(derive_seed(cfg.seed, "drift", dialogue, static_cast<uint64_t>(referent)));
    for (size_t m = 0; m < moving.size(); ++m) {
      sp.drift_dx.push_back(cfg.drift_px * progress * drift.gaussian());
      sp.drift_dy.push_back(cfg.drift_px * progress * drift.gaussian());
    }
    return sp;
  }

  SkeletonSequence render(int referent, const SampleParams& sp, uint64_t noise_seed) const {
    const Prototype& p = prototypes[static_cast<size_t>(referent)];
    SkeletonSequence seq = SkeletonSequence::zeros(cfg.frames, topo.joint_count, cfg.fps);
    Rng noise(derive_seed(noise_seed, "motion-noise"));
    Rng conf(derive_seed(noise_seed, "confidence"));
    for (int64_t t = 0; t < seq.frames; ++t) {
      const double ts = static_cast<double>(t) / static_cast<double>(cfg.fps);
      for (int j = 0; j < topo.joint_count; ++j) {
        seq.x(t, j) = base_x[static_cast<size_t>(j)];
        seq.y(t, j) = base_y[static_cast<size_t>(j)];
        seq.conf(t, j) = conf.uniform(0.85, 1.0);
      }
      for (size_t m = 0; m < moving.size(); ++m) {
        const int j = moving[m];
        const double angle = kTau * p.frequency_hz * sp.speed_scale * ts + sp.phase_shift;
        seq.x(t, j) += sp.drift_dx[m] +
                       sp.amp_x_scale * p.amp_x[m] * std::sin(angle + p.phase_x[m]);
        seq.y(t, j) += sp.drift_dy[m] +
                       sp.amp_y_scale * p.amp_y[m] * std::cos(angle + p.phase_y[m]);
      }
      if (cfg.motion_noise_px > 0.0) {
        for (int j = 0; j < topo.joint_count; ++j) {
          seq.x(t, j) += noise.gaussian(0.0, cfg.motion_noise_px);
          seq.y(t, j) += noise.gaussian(0.0, cfg.motion_noise_px);
        }
      }
    }
    return seq;
  }

  // Clean prototype trajectory (no nuisance, drift, or noise) of the moving
  // joints; the nearest-centroid oracle works in this space.
  std::vector<double> clean_trace(int referent) const {
    SampleParams none;
    none.drift_dx.assign(moving.size(), 0.0);
    none.drift_dy.assign(moving.size(), 0.0);
    const Prototype& p = prototypes[static_cast<size_t>(referent)];
    std::vector<double> out;
    for (int64_t t = 0; t < cfg.frames; ++t) {
      const double ts = static_cast<double>(t) / static_cast<double>(cfg.fps);
      for (size_t m = 0; m < moving.size(); ++m) {
        const double angle = kTau * p.frequency_hz * ts;
        out.push_back(p.amp_x[m] * std::sin(angle + p.phase_x[m]));
        out.push_back(p.amp_y[m] * std::cos(angle + p.phase_y[m]));
      }
    }
    return out;
  }

  std::vector<double> moving_trace(const SkeletonSequence& seq) const {
    std::vector<double> out;
    for (int64_t t = 0; t < seq.frames; ++t)
      for (size_t m = 0; m < moving.size(); ++m) {
        const int j = moving[m];
        out.push_back(seq.x(t, j) - base_x[static_cast<size_t>(j)]);
        out.push_back(seq.y(t, j) - base_y[static_cast<size_t>(j)]);
      }
    return out;
  }
};

std::string format_id(int referent, int dialogue, int round, int index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "k%02d-d%02d-r%d-i%04d", referent, dialogue, round, index);
  return buf;
}

UtteranceFeatures semantic_features(const SynthConfig& cfg, int referent,
                                    uint64_t sample_seed, const Tensor& code) {
  Rng rng(derive_seed(sample_seed, "verbal"));
  const bool informative = rng.uniform() < cfg.semantic_informativeness;
  const int64_t tokens = 4;
  UtteranceFeatures f;
  f.modality = VerbalModality::Semantic;
  f.token_count = tokens;
  f.dim = cfg.semantic_dim;
  f.tokens = Tensor({tokens, cfg.semantic_dim});
  for (int64_t i = 0; i < tokens; ++i)
    for (int64_t d = 0; d < cfg.semantic_dim; ++d)
      f.tokens.at(i, d) = informative ? code.data()[d] + 0.05 * rng.gaussian()
                                      : rng.gaussian();
  f.window_start = 0.0;
  f.window_end = 2.0;
  (void)referent;
  return f;
}

}  // namespace

DatasetManifest generate_corpus(const SynthConfig& config,
                                const std::filesystem::path& out_dir) {
  config.validate();
  Generator gen(config);
  std::filesystem::create_directories(out_dir / "skeletons");

  std::vector<Tensor> codes;
  for (int k = 0; k < config.referents; ++k) {
    Rng rng(derive_seed(config.seed, "code", static_cast<uint64_t>(k)));
    Tensor c({config.semantic_dim});
    for (int64_t d = 0; d < config.semantic_dim; ++d) c.data()[d] = rng.gaussian();
    codes.push_back(std::move(c));
  }

  DatasetManifest manifest;
  manifest.version = 1;
  manifest.fps = config.fps;
  FeatureStore::Writer features(out_dir / "features");

  std::vector<std::vector<std::string>> ids_by_referent(
      static_cast<size_t>(config.referents));
  std::vector<std::vector<SampleParams>> params_by_referent(
      static_cast<size_t>(config.referents));

  for (int k = 0; k < config.referents; ++k) {
    for (int i = 0; i < config.samples_per_referent; ++i) {
      const int dialogue = i % config.dialogues;
      const int round = (i / config.dialogues) % config.rounds + 1;
      const std::string id = format_id(k, dialogue, round, i);
      const uint64_t sample_seed = derive_seed(config.seed, "sample", id);
      const std::string dialogue_id = "d" + std::to_string(dialogue);

      SampleParams sp = gen.draw_params(k, dialogue_id, round, sample_seed);
      SkeletonSequence seq = gen.render(k, sp, sample_seed);
      save_skeleton(out_dir / "skeletons" / (id + ".skel"), seq);
      features.add(id, semantic_features(config, k, sample_seed, codes[static_cast<size_t>(k)]));

      GestureSampleDesc desc;
      desc.sample_id = id;
      desc.skeleton_path = "skeletons/" + id + ".skel";
      desc.dialogue_id = dialogue_id;
      desc.round = round;
      desc.speaker = (i % 2 == 0) ? "A" : "B";
      desc.referent = ReferentLabel{k + 1, "main"};
      desc.verbal_ref = id;
      manifest.samples.push_back(std::move(desc));

      ids_by_referent[static_cast<size_t>(k)].push_back(id);
      params_by_referent[static_cast<size_t>(k)].push_back(std::move(sp));
    }
  }

  const auto index_path = features.finalize();
  manifest.feature_store = std::filesystem::relative(index_path, out_dir).generic_string();

  // Form pairs among same-referent samples; binary features mark proximity in
  // each generating parameter, thresholded at the median over all pairs.
  struct PairDraft {
    std::string a, b;
    std::array<double, 5> descriptors;
  };
  std::vector<PairDraft> drafts;
  for (int k = 0; k < config.referents; ++k) {
    const auto& ids = ids_by_referent[static_cast<size_t>(k)];
    const auto& params = params_by_referent[static_cast<size_t>(k)];
    if (ids.size() < 2) continue;
    Rng rng(derive_seed(config.seed, "pairs", static_cast<uint64_t>(k)));
    std::set<std::pair<size_t, size_t>> used;
    for (int n = 0; n < config.pairs_per_referent; ++n) {
      size_t a = rng.uniform_int(ids.size());
      size_t b = rng.uniform_int(ids.size());
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      if (!used.insert({a, b}).second) continue;
      const SampleParams& pa = params[a];
      const SampleParams& pb = params[b];
      double drift_gap = 0.0;
      for (size_t m = 0; m < pa.drift_dx.size(); ++m)
        drift_gap += std::hypot(pa.drift_dx[m] - pb.drift_dx[m],
                                pa.drift_dy[m] - pb.drift_dy[m]);
      drafts.push_back({ids[a], ids[b],
                        {std::fabs(pa.amp_x_scale - pb.amp_x_scale),
                         std::fabs(pa.amp_y_scale - pb.amp_y_scale),
                         std::fabs(pa.phase_shift - pb.phase_shift),
                         std::fabs(pa.speed_scale - pb.speed_scale), drift_gap}});
    }
  }
  if (!drafts.empty()) {
    std::array<double, 5> medians{};
    for (int f = 0; f < 5; ++f) {
      std::vector<double> vals;
      for (const auto& d : drafts) vals.push_back(d.descriptors[static_cast<size_t>(f)]);
      std::nth_element(vals.begin(), vals.begin() + static_cast<long>(vals.size() / 2),
                       vals.end());
      medians[static_cast<size_t>(f)] = vals[vals.size() / 2];
    }
    for (const auto& d : drafts) {
      FormSimilarityPair pair;
      pair.id_a = d.a;
      pair.id_b = d.b;
      for (int f = 0; f < 5; ++f)
        pair.features[static_cast<size_t>(f)] =
            d.descriptors[static_cast<size_t>(f)] <= medians[static_cast<size_t>(f)] ? 1 : 0;
      manifest.form_pairs.push_back(std::move(pair));
    }
  }

  // Stratified 90/10 split per referent.
  for (int k = 0; k < config.referents; ++k) {
    auto ids = ids_by_referent[static_cast<size_t>(k)];
    Rng rng(derive_seed(config.seed, "split", static_cast<uint64_t>(k)));
    rng.shuffle(ids);
    size_t val_n = std::max<size_t>(1, ids.size() / 10);
    if (val_n >= ids.size()) val_n = ids.size() - 1;
    for (size_t i = 0; i < ids.size(); ++i)
      (i < val_n ? manifest.split_val : manifest.split_train).push_back(ids[i]);
  }
  std::sort(manifest.split_train.begin(), manifest.split_train.end());
  std::sort(manifest.split_val.begin(), manifest.split_val.end());

  save_manifest(manifest, out_dir / "manifest.json");
  return load_manifest(out_dir / "manifest.json");
}

AccuracyBounds oracle_accuracy_bounds(const SynthConfig& config) {
  config.validate();
  Generator gen(config);
  AccuracyBounds bounds;
  bounds.semantic_ceiling =
      config.semantic_informativeness +
      (1.0 - config.semantic_informativeness) / static_cast<double>(config.referents);

  std::vector<std::vector<double>> centroids;
  for (int k = 0; k < config.referents; ++k) centroids.push_back(gen.clean_trace(k));

  const int probes_per_class = 40;
  int hits = 0, total = 0;
  for (int k = 0; k < config.referents; ++k) {
    for (int i = 0; i < probes_per_class; ++i) {
      const uint64_t probe_seed =
          derive_seed(config.seed, "probe", static_cast<uint64_t>(k),
                      static_cast<uint64_t>(i));
      const int dialogue = i % config.dialogues;
      const int round = i % config.rounds + 1;
      SampleParams sp =
          gen.draw_params(k, "d" + std::to_string(dialogue), round, probe_seed);
      const auto trace = gen.moving_trace(gen.render(k, sp, probe_seed));
      int best = -1;
      double best_dist = 0.0;
      for (int c = 0; c < config.referents; ++c) {
        double dist = 0.0;
        for (size_t n = 0; n < trace.size(); ++n) {
          const double d = trace[n] - centroids[static_cast<size_t>(c)][n];
          dist += d * d;
        }
        if (best < 0 || dist < best_dist) {
          best = c;
          best_dist = dist;
        }
      }
      hits += (best == k) ? 1 : 0;
      ++total;
    }
  }
  bounds.gesture_ceiling = static_cast<double>(hits) / static_cast<double>(total);
  return bounds;
}

}  // namespace gesturelab
