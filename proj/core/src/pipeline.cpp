#include "gesturelab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <json.hpp>

#include "gesturelab/error.hpp"
#include "gesturelab/rng.hpp"

namespace gesturelab {

using nlohmann::json;

std::string to_string(ArchKind k) {
  switch (k) {
    case ArchKind::Unimodal:
      return "unimodal";
    case ArchKind::Multimodal:
      return "multimodal";
    case ArchKind::MultimodalX:
      return "multimodal_x";
  }
  return "unimodal";
}

ArchKind arch_kind_from_string(const std::string& s) {
  if (s == "unimodal") return ArchKind::Unimodal;
  if (s == "multimodal") return ArchKind::Multimodal;
  if (s == "multimodal_x") return ArchKind::MultimodalX;
  throw_error(ErrorKind::Config, "unknown architecture: " + s);
}

std::string ArchitectureKind::name() const {
  std::string n = to_string(arch);
  if (modality) n += "+" + to_string(*modality);
  return n;
}

void ArchitectureKind::validate() const {
  if (arch == ArchKind::Unimodal)
    check_config(!modality.has_value(), "unimodal takes no verbal modality");
  else
    check_config(modality.has_value(),
                 to_string(arch) + " requires a verbal modality (semantic or speech)");
}

ArchitectureKind ArchitectureKind::parse(const std::string& arch, const std::string& modality) {
  ArchitectureKind k;
  k.arch = arch_kind_from_string(arch);
  if (modality != "none" && !modality.empty()) k.modality = verbal_modality_from_string(modality);
  k.validate();
  return k;
}

void TrainConfig::validate() const {
  check_config(learning_rate > 0.0, "train: learning_rate must be positive");
  check_config(max_epochs >= 1, "train: max_epochs must be >= 1");
  check_config(batch_size >= 2, "train: batch_size must be >= 2");
  check_config(temperature > 0.0, "train: temperature must be positive");
  check_config(mask_probability >= 0.0 && mask_probability <= 1.0,
               "train: mask_probability outside [0, 1]");
  check_config(mask_noise_std_px >= 0.0, "train: negative mask_noise_std_px");
  check_config(validation_fraction > 0.0 && validation_fraction < 1.0,
               "train: validation_fraction outside (0, 1)");
  check_config(micro_batch >= 1, "train: micro_batch must be >= 1");
  check_config(patience >= 0, "train: negative patience");
  augment.validate();
}

void PipelineConfig::validate() const {
  kind.validate();
  encoder.validate();
  train.validate();
  check_config(encoder.cross_attention == CrossMode::Off,
               "pipeline: encoder.cross_attention is derived from the architecture kind; "
               "configure it off");
  if (kind.modality == VerbalModality::Speech)
    check_config(speech_layers >= 1, "pipeline: speech modality requires speech_layers >= 1");
}

namespace {

CrossMode cross_mode_from_string(const std::string& s) {
  if (s == "off") return CrossMode::Off;
  if (s == "semantic") return CrossMode::Semantic;
  if (s == "speech") return CrossMode::Speech;
  throw_error(ErrorKind::Config, "unknown cross_attention mode: " + s);
}

void parse_augment(const json& j, AugmentSpec& a) {
  for (const auto& [k, v] : j.items()) {
    if (k == "mirror")
      v.get_to(a.mirror);
    else if (k == "shift_max_fraction")
      v.get_to(a.shift_max_fraction);
    else if (k == "scale_min")
      v.get_to(a.scale_min);
    else if (k == "scale_max")
      v.get_to(a.scale_max);
    else if (k == "rotation_min_deg")
      v.get_to(a.rotation_min_deg);
    else if (k == "rotation_max_deg")
      v.get_to(a.rotation_max_deg);
    else if (k == "jitter_sigma_px")
      v.get_to(a.jitter_sigma_px);
    else if (k == "shear_min")
      v.get_to(a.shear_min);
    else if (k == "shear_max")
      v.get_to(a.shear_max);
    else
      throw_error(ErrorKind::Config, "unknown augment key: " + k);
  }
}

void parse_encoder(const json& j, EncoderConfig& e) {
  for (const auto& [k, v] : j.items()) {
    if (k == "feature_width")
      v.get_to(e.feature_width);
    else if (k == "blocks_per_branch")
      v.get_to(e.blocks_per_branch);
    else if (k == "heads")
      v.get_to(e.heads);
    else if (k == "cross_attention")
      e.cross_attention = cross_mode_from_string(v.get<std::string>());
    else if (k == "projection_width")
      v.get_to(e.projection_width);
    else if (k == "context_width")
      v.get_to(e.context_width);
    else if (k == "joint_count")
      v.get_to(e.joint_count);
    else if (k == "max_frames")
      v.get_to(e.max_frames);
    else if (k == "mlp_ratio")
      v.get_to(e.mlp_ratio);
    else
      throw_error(ErrorKind::Config, "unknown encoder key: " + k);
  }
}

void parse_train(const json& j, TrainConfig& t) {
  for (const auto& [k, v] : j.items()) {
    if (k == "learning_rate")
      v.get_to(t.learning_rate);
    else if (k == "max_epochs")
      v.get_to(t.max_epochs);
    else if (k == "batch_size")
      v.get_to(t.batch_size);
    else if (k == "temperature")
      v.get_to(t.temperature);
    else if (k == "mask_probability")
      v.get_to(t.mask_probability);
    else if (k == "mask_noise_std_px")
      v.get_to(t.mask_noise_std_px);
    else if (k == "validation_fraction")
      v.get_to(t.validation_fraction);
    else if (k == "seed")
      v.get_to(t.seed);
    else if (k == "micro_batch")
      v.get_to(t.micro_batch);
    else if (k == "patience")
      v.get_to(t.patience);
    else if (k == "use_null_verbal")
      v.get_to(t.use_null_verbal);
    else if (k == "augment")
      parse_augment(v, t.augment);
    else
      throw_error(ErrorKind::Config, "unknown train key: " + k);
  }
}

json augment_to_json(const AugmentSpec& a) {
  return json{{"mirror", a.mirror},
              {"shift_max_fraction", a.shift_max_fraction},
              {"scale_min", a.scale_min},
              {"scale_max", a.scale_max},
              {"rotation_min_deg", a.rotation_min_deg},
              {"rotation_max_deg", a.rotation_max_deg},
              {"jitter_sigma_px", a.jitter_sigma_px},
              {"shear_min", a.shear_min},
              {"shear_max", a.shear_max}};
}

// Copies rows [lo, hi) of a matrix tensor.
Tensor slice_rows(const Tensor& t, int64_t lo, int64_t hi) {
  const int64_t cols = t.cols();
  Tensor out({hi - lo, cols});
  std::copy(t.data() + lo * cols, t.data() + hi * cols, out.data());
  return out;
}

// (rows, 3) tokens -> (rows, 2) coordinate targets.
Tensor xy_targets(const Tensor& tokens3) {
  Tensor out({tokens3.size(0), 2});
  for (int64_t r = 0; r < tokens3.size(0); ++r) {
    out[r * 2 + 0] = tokens3[r * 3 + 0];
    out[r * 2 + 1] = tokens3[r * 3 + 1];
  }
  return out;
}

}  // namespace

std::string pipeline_config_to_json(const PipelineConfig& c) {
  json j;
  j["arch"] = to_string(c.kind.arch);
  j["modality"] = c.kind.modality ? to_string(*c.kind.modality) : "none";
  j["speech_layers"] = c.speech_layers;
  j["encoder"] = json{{"feature_width", c.encoder.feature_width},
                      {"blocks_per_branch", c.encoder.blocks_per_branch},
                      {"heads", c.encoder.heads},
                      {"cross_attention", to_string(c.encoder.cross_attention)},
                      {"projection_width", c.encoder.projection_width},
                      {"context_width", c.encoder.context_width},
                      {"joint_count", c.encoder.joint_count},
                      {"max_frames", c.encoder.max_frames},
                      {"mlp_ratio", c.encoder.mlp_ratio}};
  j["train"] = json{{"learning_rate", c.train.learning_rate},
                    {"max_epochs", c.train.max_epochs},
                    {"batch_size", c.train.batch_size},
                    {"temperature", c.train.temperature},
                    {"mask_probability", c.train.mask_probability},
                    {"mask_noise_std_px", c.train.mask_noise_std_px},
                    {"validation_fraction", c.train.validation_fraction},
                    {"seed", c.train.seed},
                    {"micro_batch", c.train.micro_batch},
                    {"patience", c.train.patience},
                    {"use_null_verbal", c.train.use_null_verbal},
                    {"augment", augment_to_json(c.train.augment)}};
  return j.dump(2) + "\n";
}

PipelineConfig pipeline_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw_error(ErrorKind::Config, std::string("config parse failure: ") + e.what());
  }
  check_config(j.is_object(), "config must be a JSON object");
  PipelineConfig c;
  std::string arch = "unimodal", modality = "none";
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "arch")
        v.get_to(arch);
      else if (k == "modality")
        v.get_to(modality);
      else if (k == "speech_layers")
        v.get_to(c.speech_layers);
      else if (k == "encoder")
        parse_encoder(v, c.encoder);
      else if (k == "train")
        parse_train(v, c.train);
      else
        throw_error(ErrorKind::Config, "unknown config key: " + k);
    }
  } catch (const json::exception& e) {
    throw_error(ErrorKind::Config, std::string("config field type mismatch: ") + e.what());
  }
  c.kind = ArchitectureKind::parse(arch, modality);
  return c;
}

TrainablePipeline::TrainablePipeline(PipelineConfig config)
    : cfg_(std::move(config)), registry_(derive_seed(cfg_.train.seed, "params")) {
  cfg_.validate();
  EncoderConfig base = cfg_.encoder;
  base.cross_attention = CrossMode::Off;
  encoder_ = std::make_unique<SkeletonEncoder>(base, registry_, "encoder.");

  const int w = base.feature_width;
  const int p = base.projection_width;
  const int d = base.context_width;
  const bool verbal = cfg_.kind.uses_verbal();

  if (cfg_.kind.arch != ArchKind::MultimodalX) {
    ntxent_head_ = std::make_unique<ProjectionHead>(w, w, p, registry_, "proj_ntxent.");
    recon_head_ = std::make_unique<ReconstructionHead>(w, registry_, "recon.");
  } else {
    cross_head_ = std::make_unique<ProjectionHead>(w, w, p, registry_, "proj_cross.");
    EncoderConfig xcfg = base;
    xcfg.cross_attention = *cfg_.kind.modality == VerbalModality::Semantic ? CrossMode::Semantic
                                                                           : CrossMode::Speech;
    xencoder_ = std::make_unique<SkeletonEncoder>(xcfg, registry_, "xencoder.");
  }
  if (verbal) {
    clip_gesture_head_ = std::make_unique<ProjectionHead>(w, w, p, registry_, "proj_clip_g.");
    clip_verbal_head_ = std::make_unique<ProjectionHead>(d, w, p, registry_, "proj_clip_t.");
    null_verbal_ = &registry_.create("verbal_null", {1, d}, Init::Normal);
    if (*cfg_.kind.modality == VerbalModality::Speech)
      aggregator_ =
          std::make_unique<LayerAggregator>(cfg_.speech_layers, d, registry_, "verbal_agg.");
  }
}

std::vector<std::string> TrainablePipeline::loss_component_names() const {
  switch (cfg_.kind.arch) {
    case ArchKind::Unimodal:
      return {"reconstruction", "ntxent"};
    case ArchKind::Multimodal:
      return {"reconstruction", "ntxent", "clip"};
    case ArchKind::MultimodalX:
      return {"clip", "crossmodal"};
  }
  return {};
}

const ProjectionHead& TrainablePipeline::primary_head() const {
  return cfg_.kind.arch == ArchKind::Unimodal ? *ntxent_head_ : *clip_gesture_head_;
}

Var TrainablePipeline::pooled_verbal_row(Tape& tape, const UtteranceFeatures* verbal) const {
  const int d = cfg_.encoder.context_width;
  if (verbal == nullptr || verbal->token_count == 0) {
    check_config(cfg_.train.use_null_verbal,
                 "sample without verbal features and the null fallback is disabled");
    return tape.param(*null_verbal_);
  }
  verbal->validate();
  check_arg(verbal->dim == d, "verbal feature width does not match encoder context_width");
  check_arg((verbal->modality == VerbalModality::Speech) ==
                (*cfg_.kind.modality == VerbalModality::Speech),
            "verbal feature modality does not match the pipeline modality");
  if (verbal->modality == VerbalModality::Semantic)
    return tape.input(pool_utterance(*verbal).reshaped({1, static_cast<int64_t>(d)}));
  check_arg(verbal->layer_count() == aggregator_->layers(),
            "speech layer count does not match the configured aggregator");
  const int64_t n = verbal->token_count;
  Var stacked = tape.input(verbal->layerwise->reshaped({verbal->layer_count() * n, d}));
  Var agg = aggregator_->forward(tape, stacked, verbal->layer_count(), n);
  return tape.group_mean_rows(agg, 1);
}

Var TrainablePipeline::verbal_context_rows(Tape& tape, const UtteranceFeatures* verbal) const {
  const int d = cfg_.encoder.context_width;
  if (verbal == nullptr || verbal->token_count == 0) {
    check_config(cfg_.train.use_null_verbal,
                 "sample without verbal features and the null fallback is disabled");
    return tape.param(*null_verbal_);
  }
  verbal->validate();
  check_arg(verbal->dim == d, "verbal feature width does not match encoder context_width");
  if (verbal->modality == VerbalModality::Semantic) return tape.input(verbal->tokens);
  check_arg(verbal->layer_count() == aggregator_->layers(),
            "speech layer count does not match the configured aggregator");
  const int64_t n = verbal->token_count;
  Var stacked = tape.input(verbal->layerwise->reshaped({verbal->layer_count() * n, d}));
  return aggregator_->forward(tape, stacked, verbal->layer_count(), n);
}

TrainablePipeline::LossResult TrainablePipeline::training_loss(
    const std::vector<SampleInput>& batch, bool accumulate_grads) {
  const int64_t b = static_cast<int64_t>(batch.size());
  check_arg(b >= 2, "training loss: batch needs at least 2 samples");
  for (const SampleInput& s : batch) check_arg(s.normalized != nullptr, "training loss: null sample");
  const int64_t frames = batch[0].normalized->frames;
  const int64_t joints = cfg_.encoder.joint_count;
  for (const SampleInput& s : batch) {
    check_arg(s.normalized->frames == frames, "training loss: mixed frame counts in one batch");
    check_arg(s.normalized->joint_count == joints, "training loss: joint count mismatch");
  }
  const bool recon_on = cfg_.kind.has_reconstruction();
  const bool mmx = cfg_.kind.arch == ArchKind::MultimodalX;
  const SkeletonTopology& topo = SkeletonTopology::upperbody27();
  if (recon_on)
    check_arg(joints == topo.joint_count, "reconstruction requires the 27-joint topology");
  LossConfig lcfg;
  lcfg.temperature = cfg_.train.temperature;

  struct Prepared {
    Tensor tokens_a, tokens_b;
    Tensor truth_a, truth_b;
    MaskSpec spec_a, spec_b;
    const UtteranceFeatures* verbal = nullptr;
  };
  std::vector<Prepared> prep(static_cast<size_t>(b));
  for (int64_t i = 0; i < b; ++i) {
    const SampleInput& s = batch[static_cast<size_t>(i)];
    Prepared& p = prep[static_cast<size_t>(i)];
    p.verbal = s.verbal;
    SkeletonSequence va = augment(*s.normalized, cfg_.train.augment,
                                  derive_seed(s.seed, "view", uint64_t{0}));
    SkeletonSequence vb = augment(*s.normalized, cfg_.train.augment,
                                  derive_seed(s.seed, "view", uint64_t{1}));
    Tensor ta = tokens_from_sequence(va);
    Tensor tb = tokens_from_sequence(vb);
    if (recon_on) {
      p.spec_a = draw_mask(ta, frames, static_cast<int>(joints), cfg_.train.mask_probability,
                           derive_seed(s.seed, "mask", uint64_t{0}), cfg_.train.mask_noise_std_px);
      p.spec_b = draw_mask(tb, frames, static_cast<int>(joints), cfg_.train.mask_probability,
                           derive_seed(s.seed, "mask", uint64_t{1}), cfg_.train.mask_noise_std_px);
      p.truth_a = xy_targets(ta);
      p.truth_b = xy_targets(tb);
      p.tokens_a = apply_mask_noise(ta, p.spec_a, va.norm_scale,
                                    derive_seed(s.seed, "noise", uint64_t{0}));
      p.tokens_b = apply_mask_noise(tb, p.spec_b, vb.norm_scale,
                                    derive_seed(s.seed, "noise", uint64_t{1}));
    } else {
      p.tokens_a = std::move(ta);
      p.tokens_b = std::move(tb);
    }
  }

  struct MicroOut {
    std::unique_ptr<Tape> tape;
    int64_t lo = 0, hi = 0;
    Var pooled_a, pooled_b;
    Var recon_total;
    double recon_value = 0.0;
  };
  const int64_t rows_per = frames * joints;
  const int w = cfg_.encoder.feature_width;
  std::vector<MicroOut> micros;
  for (int64_t lo = 0; lo < b; lo += cfg_.train.micro_batch) {
    const int64_t hi = std::min<int64_t>(b, lo + cfg_.train.micro_batch);
    const int64_t m = hi - lo;
    MicroOut mo;
    mo.lo = lo;
    mo.hi = hi;
    mo.tape = std::make_unique<Tape>(accumulate_grads);
    Tape& tape = *mo.tape;

    Tensor tokens_a({m * rows_per, 3});
    Tensor tokens_b({m * rows_per, 3});
    for (int64_t i = lo; i < hi; ++i) {
      const Prepared& p = prep[static_cast<size_t>(i)];
      std::copy(p.tokens_a.data(), p.tokens_a.data() + rows_per * 3,
                tokens_a.data() + (i - lo) * rows_per * 3);
      std::copy(p.tokens_b.data(), p.tokens_b.data() + rows_per * 3,
                tokens_b.data() + (i - lo) * rows_per * 3);
    }
    Var va = tape.input(std::move(tokens_a));
    Var vb = tape.input(std::move(tokens_b));

    if (recon_on) {
      std::vector<uint8_t> mask_a, mask_b;
      std::vector<MaskSpec> specs_a, specs_b;
      Tensor truth_a({m * rows_per, 2});
      Tensor truth_b({m * rows_per, 2});
      for (int64_t i = lo; i < hi; ++i) {
        const Prepared& p = prep[static_cast<size_t>(i)];
        mask_a.insert(mask_a.end(), p.spec_a.mask.begin(), p.spec_a.mask.end());
        mask_b.insert(mask_b.end(), p.spec_b.mask.begin(), p.spec_b.mask.end());
        specs_a.push_back(p.spec_a);
        specs_b.push_back(p.spec_b);
        std::copy(p.truth_a.data(), p.truth_a.data() + rows_per * 2,
                  truth_a.data() + (i - lo) * rows_per * 2);
        std::copy(p.truth_b.data(), p.truth_b.data() + rows_per * 2,
                  truth_b.data() + (i - lo) * rows_per * 2);
      }
      Var token = tape.param(recon_head_->mask_token());
      auto out_a = encoder_->forward(tape, va, m, frames, &mask_a, token);
      auto out_b = encoder_->forward(tape, vb, m, frames, &mask_b, token);
      mo.pooled_a = out_a.pooled;
      mo.pooled_b = out_b.pooled;
      ReconParts parts_a = reconstruction_loss_batch(
          tape, recon_head_->forward(tape, out_a.tokens), tape.input(std::move(truth_a)), specs_a,
          topo, lcfg);
      ReconParts parts_b = reconstruction_loss_batch(
          tape, recon_head_->forward(tape, out_b.tokens), tape.input(std::move(truth_b)), specs_b,
          topo, lcfg);
      mo.recon_total = tape.scale(tape.add(parts_a.total, parts_b.total), 0.5);
      mo.recon_value = tape.value(mo.recon_total).item();
    } else if (mmx) {
      ContextBatch ctx;
      ctx.offsets.push_back(0);
      std::vector<Var> ctx_parts;
      for (int64_t i = lo; i < hi; ++i) {
        Var rows = verbal_context_rows(tape, prep[static_cast<size_t>(i)].verbal);
        ctx_parts.push_back(rows);
        ctx.offsets.push_back(ctx.offsets.back() + tape.value(rows).size(0));
      }
      ctx.rows = tape.concat_rows(ctx_parts);
      mo.pooled_a = encoder_->forward(tape, va, m, frames).pooled;
      mo.pooled_b = xencoder_->forward(tape, vb, m, frames, nullptr, Var{}, &ctx).pooled;
    } else {
      mo.pooled_a = encoder_->forward(tape, va, m, frames).pooled;
      mo.pooled_b = encoder_->forward(tape, vb, m, frames).pooled;
    }
    micros.push_back(std::move(mo));
  }

  Tensor pa_all({b, w}), pb_all({b, w});
  for (const MicroOut& mo : micros) {
    const Tensor& a = mo.tape->value(mo.pooled_a);
    const Tensor& pbv = mo.tape->value(mo.pooled_b);
    std::copy(a.data(), a.data() + a.numel(), pa_all.data() + mo.lo * w);
    std::copy(pbv.data(), pbv.data() + pbv.numel(), pb_all.data() + mo.lo * w);
  }

  Tape ltape(accumulate_grads);
  Var pa = ltape.leaf(std::move(pa_all), accumulate_grads);
  Var pb = ltape.leaf(std::move(pb_all), accumulate_grads);

  LossResult result;
  std::vector<Var> terms;
  if (!mmx) {
    Var z1 = ntxent_head_->forward(ltape, pa);
    Var z2 = ntxent_head_->forward(ltape, pb);
    Var nt = ntxent(ltape, z1, z2, cfg_.train.temperature);
    terms.push_back(nt);
    result.components["ntxent"] = ltape.value(nt).item();
  }
  if (cfg_.kind.uses_verbal()) {
    std::vector<Var> vrows;
    for (const Prepared& p : prep) vrows.push_back(pooled_verbal_row(ltape, p.verbal));
    Var verbal = ltape.concat_rows(vrows);
    Var g = clip_gesture_head_->forward(ltape, pa);
    Var t = clip_verbal_head_->forward(ltape, verbal);
    Var cl = clip_loss(ltape, g, t, cfg_.train.temperature);
    terms.push_back(cl);
    result.components["clip"] = ltape.value(cl).item();
  }
  if (mmx) {
    Var u = cross_head_->forward(ltape, pa);
    Var f = cross_head_->forward(ltape, pb);
    Var cm = crossmodal_loss(ltape, u, f, cfg_.train.temperature);
    terms.push_back(cm);
    result.components["crossmodal"] = ltape.value(cm).item();
  }
  if (recon_on) {
    double recon = 0.0;
    for (const MicroOut& mo : micros)
      recon += mo.recon_value * static_cast<double>(mo.hi - mo.lo) / static_cast<double>(b);
    result.components["reconstruction"] = recon;
  }
  for (const auto& [name, value] : result.components) result.total += value;

  if (accumulate_grads) {
    Var contrastive = terms.front();
    for (size_t i = 1; i < terms.size(); ++i) contrastive = ltape.add(contrastive, terms[i]);
    ltape.backward(contrastive);
    const Tensor& dpa = ltape.grad(pa);
    const Tensor& dpb = ltape.grad(pb);
    for (MicroOut& mo : micros) {
      std::vector<std::pair<Var, Tensor>> seeds;
      seeds.emplace_back(mo.pooled_a, slice_rows(dpa, mo.lo, mo.hi));
      seeds.emplace_back(mo.pooled_b, slice_rows(dpb, mo.lo, mo.hi));
      if (recon_on)
        seeds.emplace_back(
            mo.recon_total,
            Tensor::scalar(static_cast<double>(mo.hi - mo.lo) / static_cast<double>(b)));
      mo.tape->backward(seeds);
    }
  }
  return result;
}

Tensor TrainablePipeline::embed(const SkeletonSequence& normalized) const {
  return encode_single(*encoder_, primary_head(), normalized).projected;
}

}  // namespace gesturelab
