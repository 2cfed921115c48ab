#include <fstream>

#include "doctest.h"
#include "gesturelab/dataset.hpp"
#include "gesturelab/verbal.hpp"
#include "helpers.hpp"

using namespace gesturelab;

namespace {

std::vector<gltest::TinySample> six_samples() {
  return {{"s0", "d0", 1, 0}, {"s1", "d0", 2, 1}, {"s2", "d1", 1, 0},
          {"s3", "d1", 2, 1}, {"s4", "d0", 3, -1}, {"s5", "d1", 3, 2}};
}

}  // namespace

TEST_CASE("manifest round trip preserves every field") {
  gltest::TempDir dir("manifest");
  DatasetManifest m = gltest::write_tiny_corpus(dir.path(), six_samples());

  // Decorate with splits, pairs, and a feature store, then round-trip again.
  FeatureStore::Writer writer(dir / "features");
  writer.add("s0", gltest::random_semantic(3, 8, 1));
  writer.add("s1", gltest::random_semantic(2, 8, 2));
  writer.finalize();

  m.feature_store = "features/index.json";
  m.samples[0].verbal_ref = "s0";
  m.samples[1].verbal_ref = "s1";
  m.form_pairs.push_back({"s0", "s2", {1, 0, 1, 1, 0}});
  m.split_train = {"s0", "s1", "s2", "s3"};
  m.split_val = {"s4", "s5"};
  save_manifest(m, dir / "manifest.json");

  DatasetManifest back = load_manifest(dir / "manifest.json");
  REQUIRE(back.samples.size() == 6);
  CHECK(back.fps == 25);
  CHECK(back.samples[0].sample_id == "s0");
  CHECK(back.samples[0].dialogue_id == "d0");
  CHECK(back.samples[0].round == 1);
  REQUIRE(back.samples[0].referent.has_value());
  CHECK(back.samples[0].referent->object_id == 0);
  CHECK(back.samples[0].referent->part == "main");
  CHECK_FALSE(back.samples[4].referent.has_value());
  REQUIRE(back.samples[1].verbal_ref.has_value());
  CHECK(*back.samples[1].verbal_ref == "s1");
  REQUIRE(back.form_pairs.size() == 1);
  CHECK(back.form_pairs[0].id_a == "s0");
  CHECK(back.form_pairs[0].shared_count() == 3);
  CHECK(back.split_train == m.split_train);
  CHECK(back.split_val == m.split_val);

  const GestureSampleDesc* found = back.find("s3");
  REQUIRE(found != nullptr);
  CHECK(found->round == 2);
  CHECK(back.find("nope") == nullptr);

  SkeletonSequence seq = back.load_skeleton(*found);
  CHECK(seq.frames == 6);
  CHECK(seq.fps == 25);
}

TEST_CASE("referent vocabulary is sorted and bijective") {
  gltest::TempDir dir("vocab");
  DatasetManifest m = gltest::write_tiny_corpus(
      dir.path(), {{"a", "d0", 1, 5}, {"b", "d0", 2, 1}, {"c", "d0", 3, 5}, {"d", "d0", 4, 3}});
  ReferentVocabulary vocab = ReferentVocabulary::from_samples(m.samples);
  CHECK(vocab.size() == 3);
  CHECK(vocab.class_index({1, "main"}) == 0);
  CHECK(vocab.class_index({3, "main"}) == 1);
  CHECK(vocab.class_index({5, "main"}) == 2);
  CHECK(vocab.class_index({2, "main"}) == -1);
  CHECK(vocab.class_index({1, "other"}) == -1);
}

TEST_CASE("manifest validation rejects malformed input") {
  gltest::TempDir dir("badmanifest");

  // Duplicate sample id.
  {
    auto kind = gltest::thrown_kind([&] {
      gltest::write_tiny_corpus(dir / "dup", {{"x", "d0", 1, 0}, {"x", "d0", 2, 0}});
    });
    REQUIRE(kind.has_value());
    CHECK(*kind == ErrorKind::Config);
  }

  // Round outside 1..6.
  {
    auto kind = gltest::thrown_kind(
        [&] { gltest::write_tiny_corpus(dir / "round", {{"x", "d0", 7, 0}}); });
    REQUIRE(kind.has_value());
    CHECK(*kind == ErrorKind::Config);
  }

  // Missing skeleton file.
  {
    DatasetManifest m = gltest::write_tiny_corpus(dir / "gone", {{"x", "d0", 1, 0}});
    std::filesystem::remove(dir / "gone" / "skeletons" / "x.skel");
    auto kind = gltest::thrown_kind([&] { load_manifest(dir / "gone" / "manifest.json"); });
    REQUIRE(kind.has_value());
    CHECK(*kind == ErrorKind::Integrity);
  }

  // Dangling verbal_ref (no feature store).
  {
    DatasetManifest m = gltest::write_tiny_corpus(dir / "ref", {{"x", "d0", 1, 0}});
    m.samples[0].verbal_ref = "x";
    save_manifest(m, dir / "ref" / "manifest.json");
    auto kind = gltest::thrown_kind([&] { load_manifest(dir / "ref" / "manifest.json"); });
    REQUIRE(kind.has_value());
    CHECK(*kind == ErrorKind::Integrity);
  }

  // Form pair referencing an unknown sample.
  {
    DatasetManifest m = gltest::write_tiny_corpus(dir / "pair", {{"x", "d0", 1, 0}});
    m.form_pairs.push_back({"x", "ghost", {1, 1, 1, 1, 1}});
    save_manifest(m, dir / "pair" / "manifest.json");
    auto kind = gltest::thrown_kind([&] { load_manifest(dir / "pair" / "manifest.json"); });
    REQUIRE(kind.has_value());
    CHECK(*kind == ErrorKind::Integrity);
  }

  // Unparseable JSON.
  {
    std::filesystem::create_directories(dir / "syntax");
    std::ofstream(dir / "syntax" / "manifest.json") << "{not json";
    CHECK(gltest::thrown_kind([&] { load_manifest(dir / "syntax" / "manifest.json"); })
              .has_value());
  }
}
