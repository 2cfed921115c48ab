#include "gesturelab/embed_store.hpp"

#include <algorithm>

#include <json.hpp>

#include "gesturelab/error.hpp"
#include "gesturelab/io.hpp"
#include "gesturelab/verbal.hpp"

namespace gesturelab {

using nlohmann::json;

bool EmbeddingStore::contains(const std::string& id) const {
  return std::binary_search(ids.begin(), ids.end(), id);
}

Tensor EmbeddingStore::row(const std::string& id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  check_arg(it != ids.end() && *it == id, "no embedding for sample id: " + id);
  const int64_t r = it - ids.begin();
  Tensor out({1, width});
  for (int64_t j = 0; j < width; ++j) out.at(0, j) = matrix.at(r, j);
  return out;
}

std::map<std::string, Tensor> EmbeddingStore::table() const {
  std::map<std::string, Tensor> out;
  for (const auto& id : ids) out[id] = row(id);
  return out;
}

void save_embedding_store(const std::filesystem::path& dir,
                          const std::map<std::string, Tensor>& embeddings,
                          const std::string& source) {
  check_arg(!embeddings.empty(), "embedding store: nothing to save");
  const int64_t width = embeddings.begin()->second.numel();
  check_arg(width >= 1, "embedding store: empty embedding vector");

  ArrayFile array;
  array.shape = {static_cast<int64_t>(embeddings.size()), width};
  array.data.reserve(static_cast<size_t>(array.numel()));
  json ids = json::array();
  for (const auto& [id, v] : embeddings) {  // std::map iterates sorted
    check_arg(v.numel() == width, "embedding store: inconsistent width at " + id);
    ids.push_back(id);
    for (int64_t j = 0; j < width; ++j)
      array.data.push_back(static_cast<float>(v.data()[j]));
  }

  std::filesystem::create_directories(dir);
  save_array(dir / "embeddings.bin", array);
  json index;
  index["version"] = 1;
  index["width"] = width;
  index["count"] = embeddings.size();
  index["source"] = source;
  index["ids"] = std::move(ids);
  write_text_file(dir / "store.json", index.dump(2) + "\n");
}

EmbeddingStore load_embedding_store(const std::filesystem::path& dir) {
  json index;
  try {
    index = json::parse(read_text_file(dir / "store.json"));
  } catch (const json::exception& e) {
    throw_error(ErrorKind::Integrity, "embedding store index unreadable: " + std::string(e.what()));
  }
  EmbeddingStore store;
  check(index.value("version", 0) == 1, ErrorKind::Integrity,
        "embedding store: unsupported version");
  store.width = index.at("width").get<int64_t>();
  store.source = index.value("source", "");
  for (const auto& id : index.at("ids")) store.ids.push_back(id.get<std::string>());
  check(std::is_sorted(store.ids.begin(), store.ids.end()), ErrorKind::Integrity,
        "embedding store: ids out of order");

  ArrayFile array = load_array(dir / "embeddings.bin");
  check(array.shape.size() == 2 &&
            array.shape[0] == static_cast<int64_t>(store.ids.size()) &&
            array.shape[1] == store.width,
        ErrorKind::Integrity, "embedding store: array shape does not match index");
  store.matrix = Tensor({array.shape[0], array.shape[1]});
  for (int64_t i = 0; i < store.matrix.numel(); ++i)
    store.matrix.data()[i] = static_cast<double>(array.data[static_cast<size_t>(i)]);
  return store;
}

std::string embedding_store_hash(const std::filesystem::path& dir) {
  return fnv1a_hex(read_text_file(dir / "store.json") +
                   read_text_file(dir / "embeddings.bin"));
}

std::map<std::string, Tensor> embed_corpus(const DatasetManifest& manifest,
                                           const TrainablePipeline& pipeline) {
  const SkeletonTopology& topo = SkeletonTopology::upperbody27();
  std::map<std::string, Tensor> out;
  for (const auto& desc : manifest.samples)
    out[desc.sample_id] = pipeline.embed(normalize_skeleton(manifest.load_skeleton(desc), topo));
  return out;
}

std::map<std::string, Tensor> pooled_verbal_table(const DatasetManifest& manifest) {
  std::map<std::string, Tensor> out;
  if (!manifest.feature_store) return out;
  FeatureStore store = FeatureStore::open(
      FeatureStore::resolve_index_path(*manifest.feature_store, manifest.root));
  for (const auto& desc : manifest.samples) {
    if (!desc.verbal_ref || !store.contains(*desc.verbal_ref)) continue;
    const UtteranceFeatures f = store.load(*desc.verbal_ref);
    if (f.token_count == 0) continue;
    out[desc.sample_id] = pool_utterance(f);
  }
  return out;
}

}  // namespace gesturelab
