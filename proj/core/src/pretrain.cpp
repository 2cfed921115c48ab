#include "gesturelab/pretrain.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "gesturelab/error.hpp"
#include "gesturelab/rng.hpp"
#include "gesturelab/stats.hpp"

namespace gesturelab {

using nlohmann::json;

const PreparedSample& PreparedCorpus::by_sample_id(const std::string& id) const {
  auto it = by_id.find(id);
  check_arg(it != by_id.end(), "unknown sample id: " + id);
  return samples[it->second];
}

PreparedCorpus prepare_corpus(const DatasetManifest& manifest, bool want_verbal,
                              double validation_fraction, uint64_t seed) {
  check_arg(validation_fraction > 0.0 && validation_fraction < 1.0,
            "prepare_corpus: validation_fraction outside (0, 1)");
  PreparedCorpus corpus;
  std::optional<FeatureStore> store;
  if (want_verbal && manifest.feature_store) {
    const auto index = FeatureStore::resolve_index_path(*manifest.feature_store, manifest.root);
    store = FeatureStore::open(index);
  }
  const SkeletonTopology& topo = SkeletonTopology::upperbody27();
  corpus.samples.reserve(manifest.samples.size());
  for (const GestureSampleDesc& desc : manifest.samples) {
    PreparedSample s;
    s.sample_id = desc.sample_id;
    s.normalized = normalize_skeleton(manifest.load_skeleton(desc), topo);
    if (store && desc.verbal_ref) s.verbal = store->load(*desc.verbal_ref);
    corpus.by_id[s.sample_id] = corpus.samples.size();
    corpus.samples.push_back(std::move(s));
  }

  if (!manifest.split_train.empty() || !manifest.split_val.empty()) {
    for (const std::string& id : manifest.split_train)
      corpus.train_indices.push_back(corpus.by_id.at(id));
    for (const std::string& id : manifest.split_val)
      corpus.val_indices.push_back(corpus.by_id.at(id));
  } else {
    std::vector<size_t> order(corpus.samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(order);
    size_t val_n = static_cast<size_t>(
        std::llround(validation_fraction * static_cast<double>(order.size())));
    val_n = std::max<size_t>(val_n, 1);
    check_arg(val_n < order.size(), "prepare_corpus: dataset too small to split");
    corpus.val_indices.assign(order.begin(), order.begin() + static_cast<long>(val_n));
    corpus.train_indices.assign(order.begin() + static_cast<long>(val_n), order.end());
  }
  return corpus;
}

double monitor_correlation(const TrainablePipeline& pipeline, const PreparedCorpus& corpus,
                           const std::vector<FormSimilarityPair>& pairs) {
  if (pairs.size() < 3) return std::numeric_limits<double>::quiet_NaN();
  std::map<std::string, Tensor> cache;
  auto embed_of = [&](const std::string& id) -> const Tensor& {
    auto it = cache.find(id);
    if (it == cache.end())
      it = cache.emplace(id, pipeline.embed(corpus.by_sample_id(id).normalized)).first;
    return it->second;
  };
  std::vector<double> shared, cos;
  shared.reserve(pairs.size());
  cos.reserve(pairs.size());
  for (const FormSimilarityPair& p : pairs) {
    shared.push_back(static_cast<double>(p.shared_count()));
    cos.push_back(cosine_similarity(embed_of(p.id_a), embed_of(p.id_b)));
  }
  const auto corr = spearman(shared, cos);
  return corr ? corr->rho : std::numeric_limits<double>::quiet_NaN();
}

namespace {

json components_json(const std::map<std::string, double>& components) {
  json j = json::object();
  for (const auto& [k, v] : components) j[k] = v;
  return j;
}

struct MetricsWriter {
  std::ofstream out;

  MetricsWriter(const std::filesystem::path& dir, bool append) {
    std::filesystem::create_directories(dir);
    out.open(dir / "metrics.ndjson", append ? std::ios::app : std::ios::trunc);
    check(static_cast<bool>(out), ErrorKind::Io, "cannot open metrics stream");
  }

  void step(int epoch, int step, double loss, const std::map<std::string, double>& comps,
            double wall) {
    json j;
    j["epoch"] = epoch;
    j["step"] = step;
    j["loss"] = loss;
    j["components"] = components_json(comps);
    j["wall_time"] = wall;
    out << j.dump() << "\n" << std::flush;
  }

  void epoch(const EpochMetrics& m) {
    json j;
    j["epoch"] = m.epoch;
    j["step"] = nullptr;
    j["loss"] = m.train_loss;
    j["components"] = components_json(m.components);
    j["val_loss"] = m.val_loss;
    j["monitor_rho"] = std::isfinite(m.monitor_rho) ? json(m.monitor_rho) : json(nullptr);
    j["wall_time"] = m.wall_time;
    out << j.dump() << "\n" << std::flush;
  }
};

std::vector<TrainablePipeline::SampleInput> make_batch(const PreparedCorpus& corpus,
                                                       const std::vector<size_t>& indices,
                                                       size_t lo, size_t hi,
                                                       uint64_t seed_root, uint64_t epoch,
                                                       std::string_view role) {
  std::vector<TrainablePipeline::SampleInput> batch;
  batch.reserve(hi - lo);
  for (size_t i = lo; i < hi; ++i) {
    const PreparedSample& s = corpus.samples[indices[i]];
    TrainablePipeline::SampleInput in;
    in.normalized = &s.normalized;
    in.verbal = s.verbal ? &*s.verbal : nullptr;
    in.seed = derive_seed(seed_root, role, s.sample_id, epoch);
    batch.push_back(in);
  }
  return batch;
}

}  // namespace

PretrainResult pretrain(TrainablePipeline& pipeline, Adam& optimizer,
                        const PreparedCorpus& corpus, const PretrainOptions& options) {
  const TrainConfig& tc = pipeline.config().train;
  const size_t b = static_cast<size_t>(tc.batch_size);
  check_config(corpus.train_indices.size() >= b,
               "pretrain: training split smaller than one batch");
  check_config(corpus.val_indices.size() >= 2, "pretrain: validation split needs >= 2 samples");
  check_arg(options.start_epoch >= 0 && options.start_epoch < tc.max_epochs,
            "pretrain: start_epoch outside [0, max_epochs)");

  const auto t0 = std::chrono::steady_clock::now();
  auto wall = [&] {
    if (options.clock) return options.clock();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  auto validation_loss = [&](uint64_t /*epoch*/) {
    double total = 0.0;
    size_t n = 0;
    for (size_t lo = 0; lo < corpus.val_indices.size(); lo += b) {
      const size_t hi = std::min(corpus.val_indices.size(), lo + b);
      if (hi - lo < 2) break;
      auto batch = make_batch(corpus, corpus.val_indices, lo, hi, tc.seed, 0, "val");
      total += pipeline.training_loss(batch, false).total * static_cast<double>(hi - lo);
      n += hi - lo;
    }
    return total / static_cast<double>(n);
  };

  auto diagnostics_abort = [&](int epoch, const std::string& why) {
    CheckpointMeta meta;
    meta.epoch = epoch;
    save_checkpoint(options.out_dir / "diagnostics.ckpt", pipeline, &optimizer, meta);
    throw_error(ErrorKind::Numeric,
                why + "; diagnostics checkpoint written to " +
                    (options.out_dir / "diagnostics.ckpt").string());
  };

  MetricsWriter metrics(options.out_dir, options.start_epoch > 0);
  PretrainResult result;
  result.best_epoch = -1;
  result.best_rho = std::numeric_limits<double>::quiet_NaN();
  if (options.start_epoch > 0) {
    if (const auto prior = read_best_record(options.out_dir)) {
      result.best_epoch = prior->epoch;
      result.best_rho = prior->monitor_rho;
    }
  } else {
    EpochMetrics m0;
    m0.epoch = 0;
    m0.val_loss = validation_loss(0);
    m0.monitor_rho = monitor_correlation(pipeline, corpus, options.monitor_pairs);
    m0.wall_time = wall();
    metrics.epoch(m0);
  }

  int epochs_since_best = 0;
  for (int epoch = options.start_epoch + 1; epoch <= tc.max_epochs; ++epoch) {
    std::vector<size_t> order = corpus.train_indices;
    Rng shuffler(derive_seed(tc.seed, "shuffle", static_cast<uint64_t>(epoch)));
    shuffler.shuffle(order);

    EpochMetrics em;
    em.epoch = epoch;
    int step = 0;
    const size_t batches = order.size() / b;  // partial tail dropped
    for (size_t k = 0; k < batches; ++k) {
      auto batch = make_batch(corpus, order, k * b, (k + 1) * b, tc.seed, static_cast<uint64_t>(epoch), "sample");
      optimizer.zero_grad();
      const auto res = pipeline.training_loss(batch, true);
      if (!std::isfinite(res.total))
        diagnostics_abort(epoch, "non-finite training loss at epoch " + std::to_string(epoch) +
                                     " step " + std::to_string(step));
      if (!pipeline.params().grads_finite())
        diagnostics_abort(epoch, "non-finite gradient at epoch " + std::to_string(epoch) +
                                     " step " + std::to_string(step));
      optimizer.step();
      metrics.step(epoch, step, res.total, res.components, wall());
      em.train_loss += res.total;
      for (const auto& [k2, v] : res.components) em.components[k2] += v;
      ++step;
    }
    check_config(step > 0, "pretrain: no full batch available");
    em.train_loss /= step;
    for (auto& [k2, v] : em.components) v /= step;

    em.val_loss = validation_loss(static_cast<uint64_t>(epoch));
    em.monitor_rho = monitor_correlation(pipeline, corpus, options.monitor_pairs);
    em.wall_time = wall();
    metrics.epoch(em);
    result.epochs.push_back(em);

    CheckpointMeta meta;
    meta.epoch = epoch;
    meta.monitor_rho = em.monitor_rho;
    save_checkpoint(options.out_dir / checkpoint_filename(epoch), pipeline, &optimizer, meta);

    const bool improved =
        result.best_epoch < 0 ||
        (std::isfinite(em.monitor_rho) &&
         (!std::isfinite(result.best_rho) || em.monitor_rho > result.best_rho));
    if (improved) {
      result.best_epoch = epoch;
      result.best_rho = em.monitor_rho;
      epochs_since_best = 0;
    } else if (tc.patience > 0 && ++epochs_since_best >= tc.patience) {
      break;
    }
  }

  write_best_record(options.out_dir, result.best_epoch, result.best_rho,
                    checkpoint_filename(result.best_epoch));
  result.best_record = options.out_dir / "best.ckpt";
  return result;
}

}  // namespace gesturelab
