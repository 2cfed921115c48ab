#include <fstream>
#include <map>

#include "doctest.h"
#include "gesturelab/embed_store.hpp"
#include "gesturelab/synth.hpp"
#include "helpers.hpp"

using namespace gesturelab;

namespace {

std::map<std::string, Tensor> three_vectors() {
  std::map<std::string, Tensor> m;
  Rng rng(60);
  for (const char* id : {"b", "a", "c"}) {
    Tensor v({1, 4});
    for (int64_t i = 0; i < 4; ++i) v[i] = rng.gaussian();
    m[id] = std::move(v);
  }
  return m;
}

}  // namespace

TEST_CASE("embedding store round trip") {
  gltest::TempDir dir("estore");
  auto table = three_vectors();
  save_embedding_store(dir.path(), table, "test-source");

  EmbeddingStore store = load_embedding_store(dir.path());
  CHECK(store.width == 4);
  CHECK(store.source == "test-source");
  CHECK(store.ids == std::vector<std::string>{"a", "b", "c"});
  CHECK(store.matrix.rows() == 3);
  CHECK(store.matrix.cols() == 4);

  for (const auto& [id, v] : table) {
    REQUIRE(store.contains(id));
    Tensor r = store.row(id);
    REQUIRE(r.numel() == 4);
    for (int64_t i = 0; i < 4; ++i)
      CHECK(r[i] == doctest::Approx(v[i]).epsilon(1e-6));
  }
  CHECK_FALSE(store.contains("d"));
  CHECK(gltest::thrown_kind([&] { store.row("d"); }) == ErrorKind::Argument);

  auto out = store.table();
  REQUIRE(out.size() == 3);
  CHECK(out.count("a") == 1);
}

TEST_CASE("rewriting a store reproduces the same bytes and hash") {
  gltest::TempDir a("estore-a"), b("estore-b");
  auto table = three_vectors();
  save_embedding_store(a.path(), table, "src");
  save_embedding_store(b.path(), table, "src");
  CHECK(embedding_store_hash(a.path()) == embedding_store_hash(b.path()));

  // A different source string or payload changes the hash.
  gltest::TempDir c("estore-c");
  save_embedding_store(c.path(), table, "other");
  CHECK(embedding_store_hash(a.path()) != embedding_store_hash(c.path()));

  table["a"].at(0, 0) += 1.0;
  gltest::TempDir d("estore-d");
  save_embedding_store(d.path(), table, "src");
  CHECK(embedding_store_hash(a.path()) != embedding_store_hash(d.path()));
}

TEST_CASE("corrupt stores are rejected") {
  gltest::TempDir dir("estore-bad");
  save_embedding_store(dir.path(), three_vectors(), "src");

  SUBCASE("truncated payload") {
    const auto bin = dir / "embeddings.bin";
    std::filesystem::resize_file(bin, std::filesystem::file_size(bin) - 8);
    CHECK(gltest::thrown_kind([&] { load_embedding_store(dir.path()); }).has_value());
  }
  SUBCASE("missing index") {
    std::filesystem::remove(dir / "store.json");
    CHECK(gltest::thrown_kind([&] { load_embedding_store(dir.path()); }).has_value());
  }
  SUBCASE("unparseable index") {
    std::ofstream(dir / "store.json") << "not json";
    CHECK(gltest::thrown_kind([&] { load_embedding_store(dir.path()); }).has_value());
  }
}

TEST_CASE("corpus embedding covers every sample at the advertised width") {
  gltest::TempDir dir("estore-corpus");
  DatasetManifest m = gltest::write_tiny_corpus(
      dir.path(), {{"s0", "d0", 1, 0}, {"s1", "d0", 2, 1}, {"s2", "d1", 1, -1}});

  PipelineConfig cfg;
  cfg.kind.arch = ArchKind::Unimodal;
  cfg.encoder.feature_width = 16;
  cfg.encoder.blocks_per_branch = 1;
  cfg.encoder.heads = 2;
  cfg.encoder.projection_width = 8;
  cfg.encoder.joint_count = 27;
  cfg.encoder.max_frames = 8;
  TrainablePipeline pipeline(cfg);

  auto table = embed_corpus(m, pipeline);
  REQUIRE(table.size() == 3);  // unlabeled samples embed too
  for (const auto& [id, v] : table) CHECK(v.numel() == 8);

  // Store round trip through the pipeline table.
  save_embedding_store(dir / "emb", table, "ckpt");
  EmbeddingStore store = load_embedding_store(dir / "emb");
  CHECK(store.ids == std::vector<std::string>{"s0", "s1", "s2"});
}

TEST_CASE("pooled verbal table covers exactly the referenced samples") {
  gltest::TempDir dir("estore-verbal");
  SynthConfig cfg;
  cfg.referents = 2;
  cfg.samples_per_referent = 4;
  cfg.dialogues = 2;
  cfg.rounds = 2;
  cfg.fps = 10;
  cfg.frames = 8;
  cfg.moving_joints = 3;
  cfg.semantic_dim = 12;
  cfg.pairs_per_referent = 0;
  cfg.seed = 61;
  DatasetManifest m = generate_corpus(cfg, dir.path());

  auto table = pooled_verbal_table(m);
  CHECK(table.size() == m.samples.size());
  for (const auto& [id, v] : table) CHECK(v.numel() == 12);

  // Samples without a verbal reference are omitted.
  gltest::TempDir plain("estore-plain");
  DatasetManifest bare = gltest::write_tiny_corpus(plain.path(), {{"s0", "d0", 1, 0}});
  CHECK(pooled_verbal_table(bare).empty());
}
