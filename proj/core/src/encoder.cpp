#include "gesturelab/encoder.hpp"

#include <algorithm>
#include <utility>

#include "gesturelab/error.hpp"

namespace gesturelab {

std::string to_string(CrossMode m) {
  switch (m) {
    case CrossMode::Off:
      return "off";
    case CrossMode::Semantic:
      return "semantic";
    case CrossMode::Speech:
      return "speech";
  }
  return "off";
}

void EncoderConfig::validate() const {
  check_config(feature_width > 0, "encoder: feature_width must be positive");
  check_config(heads > 0, "encoder: heads must be positive");
  check_config(feature_width % heads == 0, "encoder: heads must divide feature_width");
  check_config(blocks_per_branch > 0, "encoder: blocks_per_branch must be positive");
  check_config(projection_width > 0, "encoder: projection_width must be positive");
  check_config(joint_count > 0, "encoder: joint_count must be positive");
  check_config(max_frames > 0, "encoder: max_frames must be positive");
  check_config(mlp_ratio > 0, "encoder: mlp_ratio must be positive");
  if (cross_attention != CrossMode::Off)
    check_config(context_width > 0, "encoder: context_width must be positive with cross attention");
}

namespace {

std::vector<AttnGroup> temporal_groups(int64_t batch, int64_t frames, int64_t joints) {
  std::vector<AttnGroup> gs;
  gs.reserve(static_cast<size_t>(batch * joints));
  for (int64_t s = 0; s < batch; ++s)
    for (int64_t j = 0; j < joints; ++j) {
      AttnGroup g;
      g.q_start = s * frames * joints + j;
      g.q_stride = joints;
      g.q_count = frames;
      g.kv_start = g.q_start;
      g.kv_stride = joints;
      g.kv_count = frames;
      gs.push_back(g);
    }
  return gs;
}

std::vector<AttnGroup> spatial_groups(int64_t batch, int64_t frames, int64_t joints) {
  std::vector<AttnGroup> gs;
  gs.reserve(static_cast<size_t>(batch * frames));
  for (int64_t s = 0; s < batch; ++s)
    for (int64_t t = 0; t < frames; ++t) {
      AttnGroup g;
      g.q_start = (s * frames + t) * joints;
      g.q_stride = 1;
      g.q_count = joints;
      g.kv_start = g.q_start;
      g.kv_stride = 1;
      g.kv_count = joints;
      gs.push_back(g);
    }
  return gs;
}

std::vector<AttnGroup> cross_groups(int64_t batch, int64_t frames, int64_t joints,
                                    const std::vector<int64_t>& offsets) {
  std::vector<AttnGroup> gs;
  gs.reserve(static_cast<size_t>(batch));
  for (int64_t s = 0; s < batch; ++s) {
    AttnGroup g;
    g.q_start = s * frames * joints;
    g.q_stride = 1;
    g.q_count = frames * joints;
    g.kv_start = offsets[static_cast<size_t>(s)];
    g.kv_stride = 1;
    g.kv_count = offsets[static_cast<size_t>(s) + 1] - offsets[static_cast<size_t>(s)];
    gs.push_back(g);
  }
  return gs;
}

}  // namespace

SkeletonEncoder::AttnParams SkeletonEncoder::make_attn(ParamRegistry& r, const std::string& name,
                                                       int kv_width) {
  const int w = cfg_.feature_width;
  AttnParams p;
  p.ln_g = &r.create(name + ".ln_g", {w}, Init::Ones);
  p.ln_b = &r.create(name + ".ln_b", {w}, Init::Zeros);
  p.wq = &r.create(name + ".wq", {w, w}, Init::Normal);
  p.bq = &r.create(name + ".bq", {w}, Init::Zeros);
  p.wk = &r.create(name + ".wk", {kv_width, w}, Init::Normal);
  p.bk = &r.create(name + ".bk", {w}, Init::Zeros);
  p.wv = &r.create(name + ".wv", {kv_width, w}, Init::Normal);
  p.bv = &r.create(name + ".bv", {w}, Init::Zeros);
  p.wo = &r.create(name + ".wo", {w, w}, Init::Normal);
  p.bo = &r.create(name + ".bo", {w}, Init::Zeros);
  return p;
}

SkeletonEncoder::MlpParams SkeletonEncoder::make_mlp(ParamRegistry& r, const std::string& name) {
  const int w = cfg_.feature_width;
  const int h = cfg_.mlp_ratio * w;
  MlpParams p;
  p.ln_g = &r.create(name + ".ln_g", {w}, Init::Ones);
  p.ln_b = &r.create(name + ".ln_b", {w}, Init::Zeros);
  p.w1 = &r.create(name + ".w1", {w, h}, Init::Normal);
  p.b1 = &r.create(name + ".b1", {h}, Init::Zeros);
  p.w2 = &r.create(name + ".w2", {h, w}, Init::Normal);
  p.b2 = &r.create(name + ".b2", {w}, Init::Zeros);
  return p;
}

SkeletonEncoder::SkeletonEncoder(const EncoderConfig& config, ParamRegistry& registry,
                                 std::string prefix)
    : cfg_(config), prefix_(std::move(prefix)) {
  cfg_.validate();
  const int w = cfg_.feature_width;
  embed_w_ = &registry.create(prefix_ + "embed.w", {3, w}, Init::Normal);
  embed_b_ = &registry.create(prefix_ + "embed.b", {w}, Init::Zeros);
  pos_spatial_ = &registry.create(prefix_ + "pos_spatial", {cfg_.joint_count, w}, Init::Normal);
  pos_temporal_ = &registry.create(prefix_ + "pos_temporal", {cfg_.max_frames, w}, Init::Normal);
  const bool cross = cfg_.cross_attention != CrossMode::Off;
  const int kv2 = cross ? cfg_.context_width : w;
  blocks_.reserve(static_cast<size_t>(cfg_.blocks_per_branch));
  for (int i = 0; i < cfg_.blocks_per_branch; ++i) {
    const std::string base = prefix_ + "blocks." + std::to_string(i) + ".";
    BlockParams b;
    b.ts.attn1 = make_attn(registry, base + "ts.temporal", w);
    b.ts.mlp1 = make_mlp(registry, base + "ts.mlp1");
    b.ts.attn2 = make_attn(registry, base + (cross ? "ts.cross" : "ts.spatial"), kv2);
    b.ts.mlp2 = make_mlp(registry, base + "ts.mlp2");
    b.st.attn1 = make_attn(registry, base + "st.spatial", w);
    b.st.mlp1 = make_mlp(registry, base + "st.mlp1");
    b.st.attn2 = make_attn(registry, base + (cross ? "st.cross" : "st.temporal"), kv2);
    b.st.mlp2 = make_mlp(registry, base + "st.mlp2");
    b.fuse_logits = &registry.create(base + "fuse", {2, w}, Init::Zeros);
    blocks_.push_back(b);
  }
  final_ln_g_ = &registry.create(prefix_ + "final_ln.g", {w}, Init::Ones);
  final_ln_b_ = &registry.create(prefix_ + "final_ln.b", {w}, Init::Zeros);
}

Var SkeletonEncoder::attn_sublayer(Tape& tape, Var x, const AttnParams& p,
                                   const std::vector<AttnGroup>& groups) const {
  Var xn = tape.layer_norm(x, tape.param(*p.ln_g), tape.param(*p.ln_b));
  Var q = tape.linear(xn, tape.param(*p.wq), tape.param(*p.bq));
  Var k = tape.linear(xn, tape.param(*p.wk), tape.param(*p.bk));
  Var v = tape.linear(xn, tape.param(*p.wv), tape.param(*p.bv));
  Var o = tape.attention(q, k, v, groups, cfg_.heads);
  o = tape.linear(o, tape.param(*p.wo), tape.param(*p.bo));
  return tape.add(x, o);
}

Var SkeletonEncoder::cross_sublayer(Tape& tape, Var x, const AttnParams& p,
                                    const ContextBatch& context, int64_t batch,
                                    int64_t frames) const {
  Var xn = tape.layer_norm(x, tape.param(*p.ln_g), tape.param(*p.ln_b));
  Var q = tape.linear(xn, tape.param(*p.wq), tape.param(*p.bq));
  Var k = tape.linear(context.rows, tape.param(*p.wk), tape.param(*p.bk));
  Var v = tape.linear(context.rows, tape.param(*p.wv), tape.param(*p.bv));
  Var o = tape.attention(q, k, v, cross_groups(batch, frames, cfg_.joint_count, context.offsets),
                         cfg_.heads);
  o = tape.linear(o, tape.param(*p.wo), tape.param(*p.bo));
  return tape.add(x, o);
}

Var SkeletonEncoder::mlp_sublayer(Tape& tape, Var x, const MlpParams& p) const {
  Var xn = tape.layer_norm(x, tape.param(*p.ln_g), tape.param(*p.ln_b));
  Var h = tape.gelu(tape.linear(xn, tape.param(*p.w1), tape.param(*p.b1)));
  Var o = tape.linear(h, tape.param(*p.w2), tape.param(*p.b2));
  return tape.add(x, o);
}

Var SkeletonEncoder::embed(Tape& tape, Var tokens3, int64_t batch, int64_t frames,
                           const std::vector<uint8_t>* mask_rows, Var mask_token) const {
  const int64_t joints = cfg_.joint_count;
  const Tensor& tv = tape.value(tokens3);
  check_arg(tv.rank() == 2 && tv.size(1) == 3, "encoder: tokens must be (rows, 3)");
  check_arg(tv.size(0) == batch * frames * joints,
            "encoder: token rows do not match batch*frames*joints");
  check_arg(frames >= 1 && frames <= cfg_.max_frames, "encoder: frames outside [1, max_frames]");
  Var h = tape.linear(tokens3, tape.param(*embed_w_), tape.param(*embed_b_));
  if (mask_rows != nullptr) {
    check_arg(mask_token.valid(), "encoder: mask rows given without a mask token");
    h = tape.replace_rows(h, *mask_rows, mask_token);
  }
  std::vector<int64_t> sp(static_cast<size_t>(batch * frames * joints));
  std::vector<int64_t> tp(sp.size());
  for (int64_t s = 0; s < batch; ++s)
    for (int64_t t = 0; t < frames; ++t)
      for (int64_t j = 0; j < joints; ++j) {
        const size_t r = static_cast<size_t>((s * frames + t) * joints + j);
        sp[r] = j;
        tp[r] = t;
      }
  h = tape.add(h, tape.gather_rows(tape.param(*pos_spatial_), std::move(sp)));
  h = tape.add(h, tape.gather_rows(tape.param(*pos_temporal_), std::move(tp)));
  return h;
}

SkeletonEncoder::Output SkeletonEncoder::forward(Tape& tape, Var tokens3, int64_t batch,
                                                 int64_t frames,
                                                 const std::vector<uint8_t>* mask_rows,
                                                 Var mask_token,
                                                 const ContextBatch* context) const {
  const bool cross = cfg_.cross_attention != CrossMode::Off;
  if (cross) {
    check_arg(context != nullptr, "encoder: cross attention requires a context batch");
    check_arg(static_cast<int64_t>(context->offsets.size()) == batch + 1,
              "encoder: context offsets must have batch+1 entries");
    const Tensor& cv = tape.value(context->rows);
    check_arg(cv.rank() == 2 && cv.size(1) == cfg_.context_width,
              "encoder: context width mismatch");
    check_arg(context->offsets.front() == 0 && context->offsets.back() == cv.size(0),
              "encoder: context offsets do not cover the rows");
    for (int64_t s = 0; s < batch; ++s)
      check_arg(context->offsets[static_cast<size_t>(s) + 1] > context->offsets[static_cast<size_t>(s)],
                "encoder: every sample needs at least one context row");
  } else {
    check_arg(context == nullptr, "encoder: context supplied to a self-attention encoder");
  }
  const int64_t joints = cfg_.joint_count;
  Var h = embed(tape, tokens3, batch, frames, mask_rows, mask_token);
  const auto tg = temporal_groups(batch, frames, joints);
  const auto sg = spatial_groups(batch, frames, joints);
  for (const BlockParams& b : blocks_) {
    Var ts = attn_sublayer(tape, h, b.ts.attn1, tg);
    ts = mlp_sublayer(tape, ts, b.ts.mlp1);
    ts = cross ? cross_sublayer(tape, ts, b.ts.attn2, *context, batch, frames)
               : attn_sublayer(tape, ts, b.ts.attn2, sg);
    ts = mlp_sublayer(tape, ts, b.ts.mlp2);

    Var st = attn_sublayer(tape, h, b.st.attn1, sg);
    st = mlp_sublayer(tape, st, b.st.mlp1);
    st = cross ? cross_sublayer(tape, st, b.st.attn2, *context, batch, frames)
               : attn_sublayer(tape, st, b.st.attn2, tg);
    st = mlp_sublayer(tape, st, b.st.mlp2);

    h = tape.blend(ts, st, tape.param(*b.fuse_logits));
  }
  Output out;
  out.tokens = tape.layer_norm(h, tape.param(*final_ln_g_), tape.param(*final_ln_b_));
  out.pooled = tape.group_mean_rows(out.tokens, batch);
  return out;
}

ProjectionHead::ProjectionHead(int in_width, int hidden_width, int out_width,
                               ParamRegistry& registry, const std::string& prefix)
    : out_width_(out_width) {
  check_config(in_width > 0 && hidden_width > 0 && out_width > 0,
               "projection head widths must be positive");
  w1_ = &registry.create(prefix + "w1", {in_width, hidden_width}, Init::Normal);
  b1_ = &registry.create(prefix + "b1", {hidden_width}, Init::Zeros);
  w2_ = &registry.create(prefix + "w2", {hidden_width, out_width}, Init::Normal);
  b2_ = &registry.create(prefix + "b2", {out_width}, Init::Zeros);
}

Var ProjectionHead::forward(Tape& tape, Var x) const {
  Var h = tape.gelu(tape.linear(x, tape.param(*w1_), tape.param(*b1_)));
  return tape.linear(h, tape.param(*w2_), tape.param(*b2_));
}

Tensor ProjectionHead::apply(const Tensor& x) const {
  Tape tape(false);
  return tape.value(forward(tape, tape.input(x)));
}

ReconstructionHead::ReconstructionHead(int in_width, ParamRegistry& registry,
                                       const std::string& prefix) {
  check_config(in_width > 0, "reconstruction head width must be positive");
  w_ = &registry.create(prefix + "w", {in_width, 2}, Init::Normal);
  b_ = &registry.create(prefix + "b", {2}, Init::Zeros);
  mask_token_ = &registry.create(prefix + "mask_token", {in_width}, Init::Normal);
}

Var ReconstructionHead::forward(Tape& tape, Var tokens) const {
  return tape.linear(tokens, tape.param(*w_), tape.param(*b_));
}

int64_t MaskSpec::masked_count() const {
  return static_cast<int64_t>(std::count(mask.begin(), mask.end(), uint8_t{1}));
}

void MaskSpec::validate() const {
  check_arg(frames >= 1 && joints >= 1, "mask spec: empty shape");
  const size_t n = static_cast<size_t>(frames * joints);
  check_arg(mask.size() == n, "mask spec: mask size does not match frames*joints");
  check_arg(weights.size() == n, "mask spec: weight size does not match frames*joints");
  check_arg(noise_fraction >= 0.0 && noise_fraction <= 1.0,
            "mask spec: noise_fraction outside [0, 1]");
  check_arg(noise_std_px >= 0.0, "mask spec: negative noise_std");
}

MaskSpec draw_mask(const Tensor& tokens3, int64_t frames, int joints, double probability,
                   uint64_t seed, double noise_std_px) {
  check_arg(probability >= 0.0 && probability <= 1.0, "mask probability outside [0, 1]");
  check_arg(tokens3.rank() == 2 && tokens3.size(1) == 3 && tokens3.size(0) == frames * joints,
            "draw_mask: token shape mismatch");
  MaskSpec spec;
  spec.frames = frames;
  spec.joints = joints;
  spec.noise_fraction = probability;
  spec.noise_std_px = noise_std_px;
  const size_t n = static_cast<size_t>(frames * joints);
  spec.mask.resize(n);
  spec.weights.resize(n);
  Rng rng(seed);
  for (size_t i = 0; i < n; ++i) {
    spec.mask[i] = rng.uniform() < probability ? 1 : 0;
    spec.weights[i] = tokens3[static_cast<int64_t>(i) * 3 + 2];
  }
  return spec;
}

Tensor apply_mask_noise(const Tensor& tokens3, const MaskSpec& spec, double norm_scale,
                        uint64_t seed) {
  spec.validate();
  check_arg(tokens3.rank() == 2 && tokens3.size(1) == 3 &&
                tokens3.size(0) == spec.frames * spec.joints,
            "apply_mask_noise: token shape mismatch");
  Tensor out = tokens3;
  if (spec.noise_std_px == 0.0 || spec.noise_fraction == 0.0) return out;
  const double sigma = spec.noise_std_px * (norm_scale > 0.0 ? norm_scale : 1.0);
  Rng rng(seed);
  for (int64_t r = 0; r < tokens3.size(0); ++r) {
    if (spec.mask[static_cast<size_t>(r)]) continue;
    if (rng.uniform() >= spec.noise_fraction) continue;
    out[r * 3 + 0] += sigma * rng.gaussian();
    out[r * 3 + 1] += sigma * rng.gaussian();
  }
  return out;
}

Var reconstruct_masked(Tape& tape, const SkeletonEncoder& encoder,
                       const ReconstructionHead& head, Var tokens3, int64_t batch,
                       int64_t frames, const std::vector<uint8_t>& mask_rows) {
  Var token = tape.param(head.mask_token());
  const auto out = encoder.forward(tape, tokens3, batch, frames, &mask_rows, token);
  return head.forward(tape, out.tokens);
}

Tensor tokens_from_sequence(const SkeletonSequence& seq) {
  seq.validate();
  return Tensor::from({seq.frames * seq.joint_count, 3}, seq.data);
}

EncodedGesture encode_single(const SkeletonEncoder& encoder, const ProjectionHead& head,
                             const SkeletonSequence& normalized) {
  Tape tape(false);
  Var tok = tape.input(tokens_from_sequence(normalized));
  const auto out = encoder.forward(tape, tok, 1, normalized.frames);
  EncodedGesture e;
  e.per_token = tape.value(out.tokens);
  e.pooled = tape.value(out.pooled).reshaped({encoder.config().feature_width});
  e.projected = tape.value(head.forward(tape, out.pooled)).reshaped({head.out_width()});
  return e;
}

}  // namespace gesturelab
