#pragma once

#include <filesystem>
#include <vector>

#include "xsdepth/adam.hpp"
#include "xsdepth/data.hpp"
#include "xsdepth/losses.hpp"
#include "xsdepth/networks.hpp"

namespace xsdepth {

enum class TrainPhase { vis, full };

struct TrainConfig {
  Scalar learning_rate = 2e-4;  // Adam, beta = (0.9, 0.999)
  int batch_size = 1;           // only 1 is supported, as trained in practice
  int epochs = 60;
  long max_steps = 0;  // when > 0, overrides epochs
  uint64_t seed = 0;
  LossWeights weights;
  SsimConfig ssim;
  Scalar adam_beta1 = 0.9;
  Scalar adam_beta2 = 0.999;
  int disc_update_ratio = 1;
  long log_every = 1;
  long checkpoint_every = 0;  // 0 = final checkpoint only
  // The shared depth decoder is trained by the VIS branch only unless this
  // flag opts it into the transfer update as well.
  bool unfreeze_decoder_in_transfer = false;
  GanGeneratorForm gan_form = GanGeneratorForm::non_saturating;
  TrainPhase phase = TrainPhase::full;
  NetworkConfig network;

  void validate() const;
};

// One Adam instance per parameter group: the VIS-depth group (E_V + decoder),
// the transfer group (E_T, R_V, R_T, optionally decoder), and one per
// discriminator.
struct OptimizerSet {
  AdamOptimizer vis_depth;
  AdamOptimizer transfer;
  std::vector<AdamOptimizer> discriminators;
};

OptimizerSet make_optimizers(const NetworkBundle& bundle, const TrainConfig& cfg);

// VIS unsupervised step: encodes the pair with E_V, decodes disparities,
// applies one update to E_V + decoder from the total VIS loss. Returns the
// pre-update loss values. Throws TrainAbortError on non-finite loss.
LossBreakdown vis_step(NetworkBundle& bundle, OptimizerSet& opt, const VisStereoSample& sample,
                       const TrainConfig& cfg);

// Cross-spectrum transfer step: adversarial feature transfer + reconstruction
// losses + smoothness/left-right terms + depth cycle consistency, one
// generator update (E_T, R_V, R_T), then disc_update_ratio discriminator
// updates against the detached features. Breakdown keys include gan_g, gan_d,
// rec, wrec, s_l, s_r, lr_l, lr_r, tr, ms, cyc, total where
// total = lambda_ms * ms + lambda_cyc * cyc.
LossBreakdown transfer_step(NetworkBundle& bundle, OptimizerSet& opt,
                            const CrossSpectrumSample& target, const VisStereoSample& source,
                            const TrainConfig& cfg);

// Spectrum-swap cycle: warps T_L right / V_R left with the first-pass
// disparities, re-encodes the swapped pair (E_V for the VIS-like left, E_T
// for the TIR-like right) and decodes second-pass disparities at the finest
// scale. Gradients flow through warps and both passes.
std::pair<Var, Var> cycle_pass(const NetworkBundle& bundle, const Var& tir_l, const Var& vis_r,
                               const Var& d_l, const Var& d_r);

// Full loop: per step one vis_step on a source pair, then (in phase full) one
// transfer_step on a target sample paired with an independently drawn source
// sample. Writes logs/train.ndjson (one JSON record per logged step),
// periodic checkpoints, and final.ckpt. Fully deterministic given (seed,
// config, data). Returns the final checkpoint path.
std::filesystem::path run_training(const TrainConfig& cfg,
                                   const std::vector<LoadedSample>& source_dataset,
                                   const std::vector<LoadedSample>& target_dataset,
                                   const std::filesystem::path& out_dir);

// Same loop over a caller-provided bundle (pre-trained or instrumented).
// On a non-finite loss the pre-step parameters are saved to
// checkpoints/last_good.ckpt before TrainAbortError surfaces.
std::filesystem::path run_training(const TrainConfig& cfg, NetworkBundle& bundle,
                                   const std::vector<LoadedSample>& source_dataset,
                                   const std::vector<LoadedSample>& target_dataset,
                                   const std::filesystem::path& out_dir);

// FNV-1a over parameter bytes; order-sensitive. Used to assert optimizer
// isolation and checkpoint round trips.
uint64_t hash_parameters(const std::vector<NamedParam>& params);

}  // namespace xsdepth
