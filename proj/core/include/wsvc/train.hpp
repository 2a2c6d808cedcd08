#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wsvc/codec.hpp"
#include "wsvc/delta.hpp"
#include "wsvc/frame.hpp"
#include "wsvc/gates.hpp"
#include "wsvc/model_spec.hpp"
#include "wsvc/quant.hpp"

namespace wsvc {

enum class Regularizer : uint8_t { none, direct_l0, dct_l0 };
enum class StageMode : uint8_t { two_stage, single_stage };

// slice_length value meaning "never split".
constexpr int kNoSlicing = 1 << 30;

struct TrainConfig {
  int steps = 2000;      // anchor / full-sequence iterations
  int step_steps = 0;    // weight-step iterations; 0 means same as steps
  float lambda = 0.f;    // sparsity weight; penalty is lambda*E[L0]/param_count
  Regularizer regularizer = Regularizer::none;
  uint64_t seed = 1;
  StageMode stage_mode = StageMode::two_stage;
  int slice_length = kNoSlicing;  // frames per independently encoded slice
  float lr = 1e-4f;               // theta learning rate (Adam)
  float delta_lr = 1e-3f;         // free delta values
  float gate_lr = 1e-2f;          // gate log_alpha
  int batch_coords = 4096;        // coordinate minibatch (full grid if smaller)
  int checkpoint_every = 25;      // best-so-far evaluation cadence
  bool train_from_quantized = false;  // chain steps off the quantized thetas
  QuantSpec quant;                    // used when train_from_quantized

  int effective_step_steps() const {
    return step_steps > 0 ? step_steps : steps;
  }
  void validate() const {
    if (steps < 1) throw ContractError("train config: steps must be >= 1");
    if (lambda < 0.f) throw ContractError("train config: lambda must be >= 0");
    if (slice_length < 1)
      throw ContractError("train config: slice_length must be >= 1");
    if (batch_coords < 1)
      throw ContractError("train config: batch_coords must be >= 1");
  }
};

struct TrainReport {
  std::vector<float> step_losses;      // training objective per step
  std::vector<double> checkpoint_losses;  // best-so-far deterministic objective
  std::vector<double> frame_psnr;      // final per-frame PSNR (training chain)
  std::vector<size_t> frame_nonzeros;  // transmitted nonzeros per frame (0 for anchors)
  double encode_seconds = 0;

  void append(const TrainReport& other);
  // One JSON object per line: step records then a summary record.
  std::string to_jsonl() const;
};

struct AnchorFit {
  ParamVector theta;
  TrainReport report;
};

// Overfits theta to a single frame by Adam on MSE; returns the best
// parameters seen at any checkpoint.
AnchorFit fit_anchor(const ModelSpec& spec, const FrameBuffer& target,
                     const TrainConfig& cfg);

struct StepFit {
  DeltaParams delta;          // trained underlying values, untouched by gates
  GateSet gates;
  std::vector<float> folded;  // deterministic gates folded in (domain values)
  size_t nonzeros = 0;
  TrainReport report;
};

// Finds a sparse parameter shift taking theta_t to the next frame: minimizes
// MSE(f(theta_t + delta), next) + lambda*E[L0]/P with theta_t frozen. Only
// the delta values and gate parameters train.
StepFit fit_step(const ModelSpec& spec, const ParamVector& theta_t,
                 const FrameBuffer& next, const TrainConfig& cfg);

struct SequenceFit {
  SequenceEncoding encoding;  // ready for encode_video
  TrainReport report;
};

// Weight-stepped encoding of a frame sequence (two-stage or single-stage per
// cfg), slice by slice. The spec must be anchor_only.
SequenceFit fit_sequence(const ModelSpec& spec,
                         const std::vector<FrameBuffer>& frames,
                         const TrainConfig& cfg);

// Whole-video baseline: one parameter vector per slice captures all of its
// frames (coordinate models gain a t input, conv models get one noise tensor
// per frame). The spec must be full_sequence; regularizer must be none.
SequenceFit fit_full_sequence(const ModelSpec& spec,
                              const std::vector<FrameBuffer>& frames,
                              const TrainConfig& cfg);

}  // namespace wsvc
