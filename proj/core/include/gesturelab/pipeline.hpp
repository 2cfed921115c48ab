#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gesturelab/encoder.hpp"
#include "gesturelab/losses.hpp"
#include "gesturelab/params.hpp"
#include "gesturelab/skeleton.hpp"
#include "gesturelab/verbal.hpp"

namespace gesturelab {

enum class ArchKind { Unimodal, Multimodal, MultimodalX };

std::string to_string(ArchKind k);
ArchKind arch_kind_from_string(const std::string& s);

struct ArchitectureKind {
  ArchKind arch = ArchKind::Unimodal;
  std::optional<VerbalModality> modality;

  bool uses_verbal() const { return arch != ArchKind::Unimodal; }
  bool has_reconstruction() const { return arch != ArchKind::MultimodalX; }
  bool has_cross_attention() const { return arch == ArchKind::MultimodalX; }
  std::string name() const;
  void validate() const;  // unimodal <=> no modality

  static ArchitectureKind parse(const std::string& arch, const std::string& modality);
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int max_epochs = 100;
  int batch_size = 64;  // 96 is the multimodal_x default at the CLI layer
  double temperature = 0.1;
  double mask_probability = 0.05;
  double mask_noise_std_px = 1.0;
  double validation_fraction = 0.10;
  uint64_t seed = 0;
  int micro_batch = 8;  // samples per autodiff graph; affects speed only
  int patience = 0;     // epochs without monitor improvement; 0 disables
  bool use_null_verbal = true;
  AugmentSpec augment;

  void validate() const;
};

struct PipelineConfig {
  ArchitectureKind kind;
  EncoderConfig encoder;
  TrainConfig train;
  int speech_layers = 0;  // required for speech modality

  void validate() const;
};

std::string pipeline_config_to_json(const PipelineConfig& config);
// Missing fields keep their defaults; unknown keys are configuration errors.
PipelineConfig pipeline_config_from_json(const std::string& text);

// An assembled architecture: encoder(s), the heads its losses require, the
// learned null-utterance vector and speech layer aggregator when verbal
// features are consumed, and the shared parameter registry.
//
// unimodal      losses {reconstruction, ntxent}, one self-attention encoder
// multimodal    losses {reconstruction, ntxent, clip}, one encoder
// multimodal_x  losses {clip, crossmodal}, a second cross-attentive encoder
class TrainablePipeline {
 public:
  explicit TrainablePipeline(PipelineConfig config);

  const PipelineConfig& config() const { return cfg_; }
  const ArchitectureKind& kind() const { return cfg_.kind; }
  ParamRegistry& params() { return registry_; }
  const ParamRegistry& params() const { return registry_; }
  std::vector<std::string> loss_component_names() const;
  int embedding_width() const { return cfg_.encoder.projection_width; }

  struct SampleInput {
    const SkeletonSequence* normalized = nullptr;
    const UtteranceFeatures* verbal = nullptr;  // null -> learned null vector
    uint64_t seed = 0;                          // per-sample stochasticity root
  };

  struct LossResult {
    double total = 0.0;
    std::map<std::string, double> components;
  };

  // Two augmented views per sample; losses composed per the architecture.
  // With accumulate_grads, parameter gradients are added (caller zeroes).
  LossResult training_loss(const std::vector<SampleInput>& batch, bool accumulate_grads);

  // Gesture-only inference embedding: pooled encoder output through the
  // architecture's primary head (ntxent head for unimodal, the gesture-side
  // clip head otherwise).
  Tensor embed(const SkeletonSequence& normalized) const;

  const SkeletonEncoder& encoder() const { return *encoder_; }
  const SkeletonEncoder* cross_encoder() const { return xencoder_.get(); }
  const LayerAggregator* aggregator() const { return aggregator_.get(); }

 private:
  struct ViewPass {
    Var pooled;            // on the micro tape
    Var recon_total;       // valid when reconstruction is on
    double recon_value = 0.0;
  };

  Var verbal_context_rows(Tape& tape, const UtteranceFeatures* verbal) const;
  Var pooled_verbal_row(Tape& tape, const UtteranceFeatures* verbal) const;
  const ProjectionHead& primary_head() const;

  PipelineConfig cfg_;
  ParamRegistry registry_;
  std::unique_ptr<SkeletonEncoder> encoder_;
  std::unique_ptr<SkeletonEncoder> xencoder_;
  std::unique_ptr<ProjectionHead> ntxent_head_;
  std::unique_ptr<ProjectionHead> clip_gesture_head_;
  std::unique_ptr<ProjectionHead> clip_verbal_head_;
  std::unique_ptr<ProjectionHead> cross_head_;
  std::unique_ptr<ReconstructionHead> recon_head_;
  std::unique_ptr<LayerAggregator> aggregator_;
  Parameter* null_verbal_ = nullptr;
};

}  // namespace gesturelab
