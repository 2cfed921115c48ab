#include "gesturelab/verbal.hpp"

#include <cmath>
#include <cstdlib>

#include <json.hpp>

#include "gesturelab/error.hpp"
#include "gesturelab/io.hpp"

namespace gesturelab {

using nlohmann::json;

std::string to_string(VerbalModality m) {
  return m == VerbalModality::Semantic ? "semantic" : "speech";
}

VerbalModality verbal_modality_from_string(const std::string& s) {
  if (s == "semantic") return VerbalModality::Semantic;
  if (s == "speech") return VerbalModality::Speech;
  throw_error(ErrorKind::Config, "unknown verbal modality '" + s + "'");
}

void UtteranceFeatures::validate() const {
  check_arg(token_count >= 0 && dim >= 0, "negative feature dimensions");
  check_arg(tokens.numel() == token_count * dim, "tokens size does not match (N, D)");
  if (layerwise) {
    check_arg(layerwise->rank() == 3, "layerwise must be rank 3");
    check_arg(layerwise->size(1) == token_count && layerwise->size(2) == dim,
              "layerwise N/D must match tokens");
  }
}

std::filesystem::path FeatureStore::resolve_index_path(const std::string& index,
                                                       const std::filesystem::path& base_dir) {
  std::filesystem::path p(index);
  if (p.is_absolute()) return p;
  std::filesystem::path local = base_dir / p;
  if (std::filesystem::exists(local)) return local;
  if (const char* cache = std::getenv("GESTURE_EMBED_CACHE")) {
    std::filesystem::path cached = std::filesystem::path(cache) / p;
    if (std::filesystem::exists(cached)) return cached;
  }
  return local;  // let open() report the missing file at the primary location
}

FeatureStore FeatureStore::open(const std::filesystem::path& index_path) {
  check(std::filesystem::exists(index_path), ErrorKind::Io,
        "feature store index not found: " + index_path.string());
  json j;
  try {
    j = json::parse(read_text_file(index_path));
  } catch (const json::exception& e) {
    throw_error(ErrorKind::Io, "feature store index parse error: " + std::string(e.what()));
  }
  FeatureStore store;
  store.dir_ = index_path.has_parent_path() ? index_path.parent_path()
                                            : std::filesystem::path(".");
  const json& entries = j.contains("entries") ? j.at("entries") : j;
  for (auto it = entries.begin(); it != entries.end(); ++it) {
    const json& je = it.value();
    Entry e;
    try {
      e.path = je.at("path").get<std::string>();
      e.modality = verbal_modality_from_string(je.at("modality").get<std::string>());
      for (const auto& d : je.at("shape")) e.shape.push_back(d.get<int64_t>());
      e.window_start = je.at("window").at(0).get<double>();
      e.window_end = je.at("window").at(1).get<double>();
    } catch (const json::exception& ex) {
      throw_error(ErrorKind::Io,
                  "feature store entry '" + it.key() + "' malformed: " + ex.what());
    }
    store.entries_[it.key()] = std::move(e);
  }
  return store;
}

std::vector<std::string> FeatureStore::keys() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

UtteranceFeatures FeatureStore::load(const std::string& key) const {
  auto it = entries_.find(key);
  check(it != entries_.end(), ErrorKind::Io, "feature store has no key '" + key + "'");
  const Entry& e = it->second;
  UtteranceFeatures f;
  f.modality = e.modality;
  f.window_start = e.window_start;
  f.window_end = e.window_end;

  if (!e.shape.empty() && e.shape[0] == 0) {
    // Empty utterance: no array file required.
    f.token_count = 0;
    f.dim = e.shape.size() >= 2 ? e.shape.back() : 0;
    f.tokens = Tensor::zeros({0, f.dim});
    return f;
  }

  ArrayFile a = load_array(dir_ / e.path);
  check(a.shape == e.shape, ErrorKind::Integrity,
        "feature entry '" + key + "': file shape does not match index shape");
  std::vector<double> data(a.data.begin(), a.data.end());
  if (e.modality == VerbalModality::Semantic) {
    check(a.shape.size() == 2, ErrorKind::Integrity,
          "semantic entry '" + key + "' must be rank 2");
    f.token_count = a.shape[0];
    f.dim = a.shape[1];
    f.tokens = Tensor::from({f.token_count, f.dim}, std::move(data));
  } else {
    check(a.shape.size() == 3, ErrorKind::Integrity,
          "speech entry '" + key + "' must be rank 3 (L, N, D)");
    int64_t L = a.shape[0];
    f.token_count = a.shape[1];
    f.dim = a.shape[2];
    f.layerwise = Tensor::from({L, f.token_count, f.dim}, data);
    // Convention: tokens = final layer.
    std::vector<double> last(data.end() - f.token_count * f.dim, data.end());
    f.tokens = Tensor::from({f.token_count, f.dim}, std::move(last));
  }
  f.validate();
  return f;
}

FeatureStore::Writer::Writer(std::filesystem::path store_dir) : dir_(std::move(store_dir)) {
  std::filesystem::create_directories(dir_);
}

void FeatureStore::Writer::add(const std::string& key, const UtteranceFeatures& features) {
  features.validate();
  check_arg(index_entries_.find(key) == index_entries_.end(),
            "duplicate feature store key '" + key + "'");
  std::string rel = "arrays/" + key + ".bin";
  json je;
  je["modality"] = to_string(features.modality);
  je["window"] = {features.window_start, features.window_end};
  if (features.token_count == 0) {
    je["path"] = rel;  // recorded but absent; shape[0] == 0 marks it
    je["shape"] = {int64_t{0}, features.dim};
  } else if (features.layerwise) {
    const Tensor& lw = *features.layerwise;
    ArrayFile a;
    a.shape = {lw.size(0), lw.size(1), lw.size(2)};
    a.data.assign(lw.vec().begin(), lw.vec().end());
    save_array(dir_ / rel, a);
    je["path"] = rel;
    je["shape"] = a.shape;
  } else {
    ArrayFile a;
    a.shape = {features.token_count, features.dim};
    a.data.assign(features.tokens.vec().begin(), features.tokens.vec().end());
    save_array(dir_ / rel, a);
    je["path"] = rel;
    je["shape"] = a.shape;
  }
  index_entries_[key] = je.dump();
}

std::filesystem::path FeatureStore::Writer::finalize() {
  json entries = json::object();
  for (const auto& [k, v] : index_entries_) entries[k] = json::parse(v);
  json j;
  j["version"] = 1;
  j["entries"] = std::move(entries);
  std::filesystem::path index_path = dir_ / "index.json";
  write_text_file(index_path, j.dump(2) + "\n");
  return index_path;
}

Tensor pool_utterance(const UtteranceFeatures& features) {
  features.validate();
  check_arg(features.token_count >= 1, "pool_utterance requires at least one token");
  Tensor out(Shape{features.dim});
  out.flat() = features.tokens.mat().colwise().mean().transpose();
  return out;
}

LayerAggregator::LayerAggregator(int layers, int dim, ParamRegistry& registry,
                                 const std::string& prefix)
    : layers_(layers), dim_(dim) {
  check_arg(layers >= 1, "layer aggregator needs at least one layer");
  logits_ = &registry.create(prefix + "layer_logits", {layers}, Init::Zeros);
  // Identity-initialized pointwise convs: kernel size 1 over time is a plain
  // per-token linear map, so weights are (D, D) identity matrices.
  conv1_w_ = &registry.create(prefix + "conv1.weight", {dim, dim}, Init::Zeros);
  conv1_b_ = &registry.create(prefix + "conv1.bias", {dim}, Init::Zeros);
  conv2_w_ = &registry.create(prefix + "conv2.weight", {dim, dim}, Init::Zeros);
  conv2_b_ = &registry.create(prefix + "conv2.bias", {dim}, Init::Zeros);
  for (int i = 0; i < dim; ++i) {
    conv1_w_->value.at(i, i) = 1.0;
    conv2_w_->value.at(i, i) = 1.0;
  }
}

Var LayerAggregator::forward(Tape& tape, Var stacked, int64_t layer_count,
                             int64_t token_count) const {
  check_arg(layer_count == layers_, "layerwise stack does not match aggregator layer count");
  const Tensor& tx = tape.value(stacked);
  check_arg(tx.rows() == layer_count * token_count && tx.cols() == dim_,
            "layer aggregator input shape mismatch");
  Var avg = tape.weighted_layer_sum(stacked, tape.param(*logits_), layer_count);
  Var h = tape.linear(avg, tape.param(*conv1_w_), tape.param(*conv1_b_));
  return tape.linear(h, tape.param(*conv2_w_), tape.param(*conv2_b_));
}

Tensor LayerAggregator::apply(const Tensor& layerwise) const {
  check_arg(layerwise.rank() == 3, "layerwise must be rank 3");
  int64_t L = layerwise.size(0), N = layerwise.size(1), D = layerwise.size(2);
  Tape tape(false);
  Var stacked = tape.input(layerwise.reshaped({L * N, D}));
  Var out = forward(tape, stacked, L, N);
  return tape.value(out);
}

std::vector<double> LayerAggregator::layer_weights() const {
  double mx = logits_->value.flat().maxCoeff();
  std::vector<double> w(static_cast<size_t>(layers_));
  double sum = 0.0;
  for (int i = 0; i < layers_; ++i) {
    w[static_cast<size_t>(i)] = std::exp(logits_->value[i] - mx);
    sum += w[static_cast<size_t>(i)];
  }
  for (auto& v : w) v /= sum;
  return w;
}

}  // namespace gesturelab
