#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gesturelab/params.hpp"
#include "gesturelab/skeleton.hpp"
#include "gesturelab/tape.hpp"

namespace gesturelab {

enum class CrossMode { Off, Semantic, Speech };

std::string to_string(CrossMode m);

struct EncoderConfig {
  int feature_width = 256;
  int blocks_per_branch = 4;
  int heads = 8;
  CrossMode cross_attention = CrossMode::Off;
  int projection_width = 128;
  int context_width = 768;  // D of the verbal features when cross is on
  int joint_count = 27;
  int max_frames = 64;  // temporal positional table length
  int mlp_ratio = 3;

  void validate() const;
};

// Per-sample context rows for cross-attention, concatenated over the batch.
struct ContextBatch {
  Var rows;                      // (sum_i N_i, context_width)
  std::vector<int64_t> offsets;  // batch+1 prefix offsets into rows
};

// Dual-branch spatio-temporal attention encoder. One branch runs temporal
// self-attention then a second layer; the other spatial then a second layer;
// each attention sublayer is followed by an MLP sublayer. The second
// attention of each branch is either self-attention over the other axis
// (CrossMode::Off) or cross-attention over verbal context tokens. Branch
// outputs merge through a learned per-feature convex combination.
//
// Token rows are laid out (sample-major, then frame, then joint):
// row = (s*T + t)*J + j.
class SkeletonEncoder {
 public:
  SkeletonEncoder(const EncoderConfig& config, ParamRegistry& registry,
                  std::string prefix = "encoder.");

  struct Output {
    Var tokens;  // (batch*T*J, feature_width), after the final layer norm
    Var pooled;  // (batch, feature_width), mean over T and J
  };

  // tokens3: (batch*T*J, 3) of normalized (x, y, confidence).
  // mask_rows/mask_token: optional masked-token substitution applied to the
  // linear embedding before positional terms. context: required iff the
  // encoder was built with cross attention.
  Output forward(Tape& tape, Var tokens3, int64_t batch, int64_t frames,
                 const std::vector<uint8_t>* mask_rows = nullptr,
                 Var mask_token = Var{},
                 const ContextBatch* context = nullptr) const;

  // Linear joint embedding plus spatial/temporal positional terms (the
  // block-input representation).
  Var embed(Tape& tape, Var tokens3, int64_t batch, int64_t frames,
            const std::vector<uint8_t>* mask_rows = nullptr,
            Var mask_token = Var{}) const;

  const EncoderConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }

 private:
  struct AttnParams {
    Parameter *ln_g, *ln_b, *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
  };
  struct MlpParams {
    Parameter *ln_g, *ln_b, *w1, *b1, *w2, *b2;
  };
  struct BranchParams {
    AttnParams attn1;
    MlpParams mlp1;
    AttnParams attn2;  // self over the other axis, or cross when enabled
    MlpParams mlp2;
  };
  struct BlockParams {
    BranchParams ts, st;
    Parameter* fuse_logits;
  };

  AttnParams make_attn(ParamRegistry& r, const std::string& name, int kv_width);
  MlpParams make_mlp(ParamRegistry& r, const std::string& name);

  Var attn_sublayer(Tape& tape, Var x, const AttnParams& p,
                    const std::vector<AttnGroup>& groups) const;
  Var cross_sublayer(Tape& tape, Var x, const AttnParams& p,
                     const ContextBatch& context, int64_t batch, int64_t frames) const;
  Var mlp_sublayer(Tape& tape, Var x, const MlpParams& p) const;

  EncoderConfig cfg_;
  std::string prefix_;
  Parameter *embed_w_, *embed_b_, *pos_spatial_, *pos_temporal_;
  Parameter *final_ln_g_, *final_ln_b_;
  std::vector<BlockParams> blocks_;
};

// Two-layer perceptron projection head (one hidden GELU).
class ProjectionHead {
 public:
  ProjectionHead(int in_width, int hidden_width, int out_width, ParamRegistry& registry,
                 const std::string& prefix);
  Var forward(Tape& tape, Var x) const;
  Tensor apply(const Tensor& x) const;
  int out_width() const { return out_width_; }

 private:
  int out_width_;
  Parameter *w1_, *b1_, *w2_, *b2_;
};

// Linear head predicting (x, y) per token for masked reconstruction.
class ReconstructionHead {
 public:
  ReconstructionHead(int in_width, ParamRegistry& registry,
                     const std::string& prefix = "recon.");
  Var forward(Tape& tape, Var tokens) const;
  Parameter& mask_token() const { return *mask_token_; }

 private:
  Parameter *w_, *b_, *mask_token_;
};

// Masking plan for reconstruction pre-training over one sequence.
struct MaskSpec {
  int64_t frames = 0;
  int joints = 0;
  std::vector<uint8_t> mask;     // frames*joints token flags
  std::vector<double> weights;   // per-token loss weights (confidence-derived)
  double noise_fraction = 0.05;  // share of unmasked tokens that receive noise
  double noise_std_px = 1.0;

  bool masked(int64_t t, int j) const {
    return mask[static_cast<size_t>(t * joints + j)] != 0;
  }
  int64_t masked_count() const;
  void validate() const;
};

// Bernoulli(probability) token mask with weights taken from the confidence
// channel of the token matrix.
MaskSpec draw_mask(const Tensor& tokens3, int64_t frames, int joints, double probability,
                   uint64_t seed, double noise_std_px = 1.0);

// Gaussian noise on the (x, y) of a noise_fraction subset of unmasked tokens.
// noise_std_px is pixel-denominated; norm_scale converts it for normalized
// coordinates (0 means pixel space, used as-is).
Tensor apply_mask_noise(const Tensor& tokens3, const MaskSpec& spec, double norm_scale,
                        uint64_t seed);

// Encoder pass with masked-token substitution, then the linear head: returns
// (batch*frames*joints, 2) predicted coordinates.
Var reconstruct_masked(Tape& tape, const SkeletonEncoder& encoder,
                       const ReconstructionHead& head, Var tokens3, int64_t batch,
                       int64_t frames, const std::vector<uint8_t>& mask_rows);

// Flattens a sequence into the encoder's (T*J, 3) token matrix.
Tensor tokens_from_sequence(const SkeletonSequence& seq);

// Inference-mode single-sample encoding (no context, no masking).
struct EncodedGesture {
  Tensor per_token;  // (T*J, feature_width)
  Tensor pooled;     // (feature_width)
  Tensor projected;  // (projection_width)
};

EncodedGesture encode_single(const SkeletonEncoder& encoder, const ProjectionHead& head,
                             const SkeletonSequence& normalized);

}  // namespace gesturelab
