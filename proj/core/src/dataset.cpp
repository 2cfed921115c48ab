#include "gesturelab/dataset.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "gesturelab/error.hpp"
#include "gesturelab/io.hpp"

namespace gesturelab {

using nlohmann::json;

ReferentVocabulary ReferentVocabulary::from_samples(
    const std::vector<GestureSampleDesc>& samples) {
  std::set<std::pair<int, std::string>> distinct;
  for (const auto& s : samples)
    if (s.referent) distinct.insert({s.referent->object_id, s.referent->part});
  ReferentVocabulary v;
  for (const auto& l : distinct) {
    v.index_[l] = static_cast<int>(v.labels_.size());
    v.labels_.push_back(l);
  }
  return v;
}

int ReferentVocabulary::class_index(const ReferentLabel& label) const {
  auto it = index_.find({label.object_id, label.part});
  return it == index_.end() ? -1 : it->second;
}

const GestureSampleDesc* DatasetManifest::find(const std::string& sample_id) const {
  auto it = index_.find(sample_id);
  return it == index_.end() ? nullptr : &samples[it->second];
}

std::filesystem::path DatasetManifest::resolve(const std::string& relative) const {
  std::filesystem::path p(relative);
  if (p.is_absolute()) return p;
  return root / p;
}

SkeletonSequence DatasetManifest::load_skeleton(const GestureSampleDesc& sample) const {
  return gesturelab::load_skeleton(resolve(sample.skeleton_path), fps);
}

namespace {

[[noreturn]] void field_error(const std::string& where, const std::string& what) {
  throw_error(ErrorKind::Config, "manifest field '" + where + "': " + what);
}

template <class T>
T require(const json& j, const std::string& field, const std::string& context) {
  if (!j.contains(field)) field_error(context + "." + field, "missing");
  try {
    return j.at(field).get<T>();
  } catch (const json::exception&) {
    field_error(context + "." + field, "wrong type");
  }
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  check(std::filesystem::exists(path), ErrorKind::Io,
        "manifest not found: " + path.string());
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw_error(ErrorKind::Config, "manifest parse error: " + std::string(e.what()));
  }

  DatasetManifest m;
  m.root = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  m.version = require<int>(j, "version", "manifest");
  m.fps = require<int>(j, "fps", "manifest");
  if (m.fps < 1) field_error("manifest.fps", "must be positive");
  if (j.contains("feature_store") && !j.at("feature_store").is_null())
    m.feature_store = require<std::string>(j, "feature_store", "manifest");

  if (!j.contains("samples") || !j.at("samples").is_array())
    field_error("manifest.samples", "missing or not an array");
  size_t si = 0;
  for (const auto& js : j.at("samples")) {
    std::string ctx = "samples[" + std::to_string(si++) + "]";
    GestureSampleDesc s;
    s.sample_id = require<std::string>(js, "sample_id", ctx);
    s.skeleton_path = require<std::string>(js, "skeleton_path", ctx);
    s.dialogue_id = require<std::string>(js, "dialogue_id", ctx);
    s.round = require<int>(js, "round", ctx);
    if (s.round < 1 || s.round > 6) field_error(ctx + ".round", "must be in 1..6");
    s.speaker = require<std::string>(js, "speaker", ctx);
    if (js.contains("referent") && !js.at("referent").is_null()) {
      const auto& jr = js.at("referent");
      ReferentLabel r;
      r.object_id = require<int>(jr, "object_id", ctx + ".referent");
      r.part = require<std::string>(jr, "part", ctx + ".referent");
      s.referent = r;
    }
    if (js.contains("verbal_ref") && !js.at("verbal_ref").is_null())
      s.verbal_ref = require<std::string>(js, "verbal_ref", ctx);
    if (m.index_.count(s.sample_id))
      field_error(ctx + ".sample_id", "duplicate id '" + s.sample_id + "'");
    m.index_[s.sample_id] = m.samples.size();
    m.samples.push_back(std::move(s));
  }

  if (j.contains("form_pairs")) {
    size_t pi = 0;
    for (const auto& jp : j.at("form_pairs")) {
      std::string ctx = "form_pairs[" + std::to_string(pi++) + "]";
      FormSimilarityPair p;
      p.id_a = require<std::string>(jp, "id_a", ctx);
      p.id_b = require<std::string>(jp, "id_b", ctx);
      auto feats = require<std::vector<int>>(jp, "features", ctx);
      if (feats.size() != 5) field_error(ctx + ".features", "must have 5 entries");
      for (size_t k = 0; k < 5; ++k) {
        if (feats[k] != 0 && feats[k] != 1) field_error(ctx + ".features", "entries must be 0/1");
        p.features[k] = feats[k];
      }
      if (p.id_a == p.id_b) field_error(ctx, "pair ids must be distinct");
      for (const auto& id : {p.id_a, p.id_b})
        check(m.index_.count(id) > 0, ErrorKind::Integrity,
              "form pair references unknown sample '" + id + "'");
      m.form_pairs.push_back(std::move(p));
    }
  }

  if (j.contains("splits")) {
    const auto& sp = j.at("splits");
    if (sp.contains("train")) m.split_train = sp.at("train").get<std::vector<std::string>>();
    if (sp.contains("val")) m.split_val = sp.at("val").get<std::vector<std::string>>();
    for (const auto* split : {&m.split_train, &m.split_val})
      for (const auto& id : *split)
        check(m.index_.count(id) > 0, ErrorKind::Integrity,
              "split references unknown sample '" + id + "'");
  }

  // Integrity: every referenced skeleton file exists.
  for (const auto& s : m.samples)
    check(std::filesystem::exists(m.resolve(s.skeleton_path)), ErrorKind::Integrity,
          "sample '" + s.sample_id + "' references missing skeleton file " + s.skeleton_path);

  // Integrity: verbal refs resolve against the feature store index if present.
  bool any_verbal = std::any_of(m.samples.begin(), m.samples.end(),
                                [](const auto& s) { return s.verbal_ref.has_value(); });
  if (any_verbal) {
    check(m.feature_store.has_value(), ErrorKind::Integrity,
          "samples carry verbal_ref but the manifest names no feature_store");
    std::filesystem::path idx_path = m.resolve(*m.feature_store);
    check(std::filesystem::exists(idx_path), ErrorKind::Integrity,
          "feature store index not found: " + idx_path.string());
    json idx;
    try {
      idx = json::parse(read_text_file(idx_path));
    } catch (const json::exception& e) {
      throw_error(ErrorKind::Integrity, "feature store index parse error: " + std::string(e.what()));
    }
    const auto& entries = idx.contains("entries") ? idx.at("entries") : idx;
    for (const auto& s : m.samples)
      if (s.verbal_ref)
        check(entries.contains(*s.verbal_ref), ErrorKind::Integrity,
              "sample '" + s.sample_id + "' has dangling verbal_ref '" + *s.verbal_ref + "'");
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  json j;
  j["version"] = manifest.version;
  j["fps"] = manifest.fps;
  if (manifest.feature_store) j["feature_store"] = *manifest.feature_store;
  json samples = json::array();
  for (const auto& s : manifest.samples) {
    json js;
    js["sample_id"] = s.sample_id;
    js["skeleton_path"] = s.skeleton_path;
    js["dialogue_id"] = s.dialogue_id;
    js["round"] = s.round;
    js["speaker"] = s.speaker;
    if (s.referent)
      js["referent"] = {{"object_id", s.referent->object_id}, {"part", s.referent->part}};
    else
      js["referent"] = nullptr;
    if (s.verbal_ref)
      js["verbal_ref"] = *s.verbal_ref;
    else
      js["verbal_ref"] = nullptr;
    samples.push_back(std::move(js));
  }
  j["samples"] = std::move(samples);
  json pairs = json::array();
  for (const auto& p : manifest.form_pairs) {
    json jp;
    jp["id_a"] = p.id_a;
    jp["id_b"] = p.id_b;
    jp["features"] = std::vector<int>(p.features.begin(), p.features.end());
    pairs.push_back(std::move(jp));
  }
  j["form_pairs"] = std::move(pairs);
  j["splits"] = {{"train", manifest.split_train}, {"val", manifest.split_val}};
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace gesturelab
