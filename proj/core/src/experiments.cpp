#include "gesturelab/experiments.hpp"

#include <algorithm>
#include <memory>
#include <set>
#include <sstream>

#include "gesturelab/error.hpp"
#include "gesturelab/io.hpp"
#include "gesturelab/rng.hpp"

namespace gesturelab {

EmbedFn embed_from_table(const std::map<std::string, Tensor>& table) {
  auto shared = std::make_shared<std::map<std::string, Tensor>>(table);
  return [shared](const std::string& sample_id) -> Tensor {
    auto it = shared->find(sample_id);
    check_arg(it != shared->end(), "no embedding for sample id: " + sample_id);
    return it->second;
  };
}

std::map<std::string, Tensor> random_embedding_table(const DatasetManifest& manifest,
                                                     int dim, uint64_t seed) {
  check_arg(dim >= 1, "random_embedding_table: dim must be >= 1");
  std::map<std::string, Tensor> table;
  for (const auto& s : manifest.samples) {
    Rng rng(derive_seed(seed, "rand-embed", s.sample_id));
    Tensor v({1, dim});
    for (int64_t i = 0; i < dim; ++i) v.data()[i] = rng.gaussian();
    table[s.sample_id] = std::move(v);
  }
  return table;
}

std::string ExperimentConfig::fingerprint(const std::string& protocol) const {
  std::ostringstream os;
  os << protocol << "|h1=" << resolver.hidden1 << "|h2=" << resolver.hidden2
     << "|b=" << resolver.batch_size << "|lr=" << resolver.learning_rate
     << "|epochs=" << resolver.epochs << "|classes=" << resolver.class_count
     << "|seed=" << seed;
  return fnv1a_hex(os.str());
}

std::optional<Correlation> form_similarity_correlation(
    const std::vector<FormSimilarityPair>& pairs, const EmbedFn& embed) {
  check_arg(pairs.size() >= 3, "form similarity needs at least 3 pairs");
  std::vector<double> shared, cos;
  shared.reserve(pairs.size());
  cos.reserve(pairs.size());
  for (const auto& p : pairs) {
    shared.push_back(static_cast<double>(p.shared_count()));
    cos.push_back(cosine_similarity(embed(p.id_a), embed(p.id_b)));
  }
  return spearman(shared, cos);
}

namespace {

std::vector<const GestureSampleDesc*> labeled_samples(const DatasetManifest& manifest) {
  std::vector<const GestureSampleDesc*> out;
  for (const auto& s : manifest.samples)
    if (s.referent) out.push_back(&s);
  check_arg(!out.empty(), "no referent-labeled samples in manifest");
  return out;
}

struct EmbedCache {
  const EmbedFn& embed;
  std::map<std::string, Tensor> cache;

  const Tensor& get(const std::string& id) {
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, embed(id)).first;
    return it->second;
  }
};

std::pair<Tensor, std::vector<int>> assemble(const std::vector<const GestureSampleDesc*>& samples,
                                             EmbedCache& embeds,
                                             const ReferentVocabulary& vocabulary) {
  check_arg(!samples.empty(), "empty sample set");
  const Tensor& first = embeds.get(samples.front()->sample_id);
  const int64_t d = first.numel();
  check_arg(d >= 1, "empty embedding vector");
  Tensor x({static_cast<int64_t>(samples.size()), d});
  std::vector<int> y(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    const Tensor& e = embeds.get(samples[i]->sample_id);
    check_arg(e.numel() == d, "inconsistent embedding width across samples");
    for (int64_t j = 0; j < d; ++j) x.at(static_cast<int64_t>(i), j) = e.data()[j];
    const int cls = vocabulary.class_index(*samples[i]->referent);
    check_arg(cls >= 0, "referent missing from vocabulary: " + samples[i]->sample_id);
    y[i] = cls;
  }
  return {std::move(x), std::move(y)};
}

double fold_accuracy(const std::vector<const GestureSampleDesc*>& train,
                     const std::vector<const GestureSampleDesc*>& test, EmbedCache& embeds,
                     const ReferentVocabulary& vocabulary, const ResolverConfig& resolver,
                     uint64_t seed) {
  auto [xtr, ytr] = assemble(train, embeds, vocabulary);
  auto [xte, yte] = assemble(test, embeds, vocabulary);
  ResolverModel model = train_resolver(xtr, ytr, resolver, seed);
  return model.accuracy(xte, yte);
}

void summarize(ExperimentReport& report) {
  std::vector<double> accs;
  for (const auto& f : report.folds) accs.push_back(f.accuracy);
  report.mean_accuracy = mean_of(accs);
  report.sd_accuracy = sample_sd(accs);
}

}  // namespace

ExperimentReport leave_one_round_out(const DatasetManifest& manifest, const EmbedFn& embed,
                                     const ExperimentConfig& config) {
  const auto labeled = labeled_samples(manifest);
  ReferentVocabulary vocabulary = ReferentVocabulary::from_samples(manifest.samples);
  check_arg(vocabulary.size() >= 2, "leave-one-round-out needs at least 2 referent classes");
  ResolverConfig resolver = config.resolver;
  resolver.class_count = vocabulary.size();

  int max_round = 0;
  for (const auto* s : labeled) max_round = std::max(max_round, s->round);
  check_arg(max_round >= 2, "leave-one-round-out needs at least 2 rounds");

  EmbedCache embeds{embed, {}};
  ExperimentReport report;
  report.config_fingerprint = config.fingerprint("leave-one-round-out");
  for (int r = 1; r <= max_round; ++r) {
    std::vector<const GestureSampleDesc*> train, test;
    for (const auto* s : labeled) (s->round == r ? test : train).push_back(s);
    if (test.empty()) {
      report.warnings.push_back("round " + std::to_string(r) +
                                " has no labeled samples; fold skipped");
      continue;
    }
    FoldResult fold;
    fold.name = "round-" + std::to_string(r);
    fold.test_count = static_cast<int>(test.size());
    fold.train_count = static_cast<int>(train.size());
    fold.accuracy = fold_accuracy(train, test, embeds, vocabulary, resolver,
                                  derive_seed(config.seed, "fold", static_cast<uint64_t>(r)));
    report.folds.push_back(std::move(fold));
  }
  check_arg(!report.folds.empty(), "every round was empty");
  summarize(report);
  return report;
}

Tensor concat_embeddings(const Tensor& gesture, const Tensor& semantic) {
  const int64_t d1 = gesture.numel(), d2 = semantic.numel();
  check_arg(d1 >= 1 && d2 >= 1, "concat_embeddings: empty input vector");
  Tensor out({1, d1 + d2});
  for (int64_t i = 0; i < d1; ++i) out.data()[i] = gesture.data()[i];
  for (int64_t i = 0; i < d2; ++i) out.data()[d1 + i] = semantic.data()[i];
  return out;
}

Tensor concat_embeddings(const Tensor& gesture, const Tensor* semantic, int64_t semantic_dim) {
  if (semantic) return concat_embeddings(gesture, *semantic);
  check_arg(semantic_dim >= 1, "concat_embeddings: semantic_dim must be >= 1");
  return concat_embeddings(gesture, Tensor({1, semantic_dim}));
}

namespace {

// Proportional (largest-remainder) per-class quota, then a seeded sample
// without replacement inside each class. Picking the whole pool returns it
// unchanged, which makes the round-1 training sets literally identical.
std::vector<const GestureSampleDesc*> stratified_downsample(
    const std::vector<const GestureSampleDesc*>& pool, size_t want,
    const ReferentVocabulary& vocabulary, uint64_t seed) {
  check_arg(want <= pool.size(), "downsample target exceeds pool");
  if (want == pool.size()) return pool;
  std::map<int, std::vector<const GestureSampleDesc*>> by_class;
  for (const auto* s : pool) by_class[vocabulary.class_index(*s->referent)].push_back(s);

  std::vector<std::pair<int, double>> remainders;
  std::map<int, size_t> quota;
  size_t assigned = 0;
  const double ratio = static_cast<double>(want) / static_cast<double>(pool.size());
  for (const auto& [cls, members] : by_class) {
    const double exact = ratio * static_cast<double>(members.size());
    const size_t base = static_cast<size_t>(exact);
    quota[cls] = base;
    assigned += base;
    remainders.push_back({cls, exact - static_cast<double>(base)});
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (size_t i = 0; assigned < want; ++i) {
    const int cls = remainders[i % remainders.size()].first;
    if (quota[cls] < by_class[cls].size()) {
      ++quota[cls];
      ++assigned;
    }
  }

  std::vector<const GestureSampleDesc*> out;
  out.reserve(want);
  for (auto& [cls, members] : by_class) {
    Rng rng(derive_seed(seed, "class", static_cast<uint64_t>(cls)));
    rng.shuffle(members);
    for (size_t i = 0; i < quota[cls] && i < members.size(); ++i) out.push_back(members[i]);
  }
  std::sort(out.begin(), out.end(), [](const auto* a, const auto* b) {
    return a->sample_id < b->sample_id;
  });
  check(out.size() == want, ErrorKind::Numeric, "downsample quota mismatch");
  return out;
}

}  // namespace

DialogueHistoryReport dialogue_history_experiment(const DatasetManifest& manifest,
                                                  const EmbedFn& embed,
                                                  const ExperimentConfig& config) {
  const auto labeled = labeled_samples(manifest);
  std::set<std::string> dialogues;
  int max_round = 0;
  for (const auto* s : labeled) {
    dialogues.insert(s->dialogue_id);
    max_round = std::max(max_round, s->round);
  }
  check_arg(dialogues.size() >= 2, "dialogue-history protocol needs at least 2 dialogues");
  check_arg(max_round >= 2, "dialogue-history protocol needs at least 2 rounds");

  ReferentVocabulary vocabulary = ReferentVocabulary::from_samples(manifest.samples);
  check_arg(vocabulary.size() >= 2, "dialogue-history needs at least 2 referent classes");
  ResolverConfig resolver = config.resolver;
  resolver.class_count = vocabulary.size();

  EmbedCache embeds{embed, {}};
  DialogueHistoryReport report;
  report.config_fingerprint = config.fingerprint("dialogue-history");

  for (int n = 1; n <= max_round; ++n) {
    std::vector<double> base_accs, spec_accs;
    int round_samples = 0;
    for (const std::string& target : dialogues) {
      std::vector<const GestureSampleDesc*> test, others, history;
      for (const auto* s : labeled) {
        if (s->dialogue_id == target) {
          if (s->round == n) test.push_back(s);
          if (s->round < n) history.push_back(s);
        } else {
          others.push_back(s);
        }
      }
      if (test.empty()) continue;
      check_arg(!others.empty(), "no other-dialogue data for target " + target);
      check_arg(history.size() <= others.size(),
                "dialogue history larger than the other-dialogue pool; parity unattainable");

      const uint64_t fold_seed =
          derive_seed(config.seed, "hist", target, static_cast<uint64_t>(n));
      std::vector<const GestureSampleDesc*> specific = history;
      const auto kept = stratified_downsample(others, others.size() - history.size(),
                                              vocabulary, fold_seed);
      specific.insert(specific.end(), kept.begin(), kept.end());
      check(specific.size() == others.size(), ErrorKind::Numeric,
            "dialogue-history sample parity violated");

      base_accs.push_back(
          fold_accuracy(others, test, embeds, vocabulary, resolver, fold_seed));
      spec_accs.push_back(
          fold_accuracy(specific, test, embeds, vocabulary, resolver, fold_seed));
      round_samples += static_cast<int>(others.size());
    }
    if (base_accs.empty()) continue;
    report.rounds.push_back(n);
    report.baseline_accuracy.push_back(mean_of(base_accs));
    report.specific_accuracy.push_back(mean_of(spec_accs));
    report.samples_per_round.push_back(round_samples);
  }
  check_arg(!report.rounds.empty(), "no round had test samples");

  report.series_ttest = ttest_independent(report.baseline_accuracy, report.specific_accuracy);
  std::vector<double> xs(report.rounds.begin(), report.rounds.end());
  if (xs.size() >= 3) {
    report.baseline_trend = spearman(xs, report.baseline_accuracy);
    report.specific_trend = spearman(xs, report.specific_accuracy);
  }
  return report;
}

std::vector<NoiseRow> noise_robustness(const DatasetManifest& manifest,
                                       const TrainablePipeline& pipeline,
                                       const std::vector<double>& sigmas,
                                       const ExperimentConfig& config) {
  check_arg(!sigmas.empty(), "noise_robustness: empty sigma grid");
  for (double s : sigmas) check_arg(s >= 0.0, "noise_robustness: sigma must be >= 0");
  const SkeletonTopology& topo = SkeletonTopology::upperbody27();

  std::vector<NoiseRow> rows;
  for (double sigma : sigmas) {
    std::map<std::string, Tensor> table;
    for (const auto& desc : manifest.samples) {
      if (!desc.referent) continue;
      SkeletonSequence raw = manifest.load_skeleton(desc);
      if (sigma > 0.0)
        raw = add_gaussian_jitter(raw, sigma, derive_seed(config.seed, "jitter", desc.sample_id));
      table[desc.sample_id] = pipeline.embed(normalize_skeleton(raw, topo));
    }
    NoiseRow row;
    row.sigma = sigma;
    row.report = leave_one_round_out(manifest, embed_from_table(table), config);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace gesturelab
