#pragma once

#include <map>
#include <string>
#include <vector>

#include "xsdepth/geometry.hpp"
#include "xsdepth/ops.hpp"

namespace xsdepth {

struct LossWeights {
  Scalar alpha = 0.85;      // SSIM mix in the photometric loss
  Scalar lambda_s = 0.1;
  Scalar lambda_lr = 1.0;
  Scalar lambda_v = 1.0;
  Scalar lambda_ms = 1.0;
  Scalar lambda_cyc = 10.0;

  void validate() const {
    XS_REQUIRE(alpha >= 0.0 && alpha <= 1.0, "LossWeights: alpha must be in [0,1]");
    XS_REQUIRE(lambda_s >= 0 && lambda_lr >= 0 && lambda_v >= 0 && lambda_ms >= 0 &&
                   lambda_cyc >= 0,
               "LossWeights: lambdas must be >= 0");
  }
};

struct SsimConfig {
  int window = 3;
  Scalar c1 = 1e-4;  // (0.01)^2 on [0,1] intensities
  Scalar c2 = 9e-4;  // (0.03)^2

  void validate() const {
    XS_REQUIRE(window >= 3 && window % 2 == 1, "SsimConfig: window must be odd and >= 3");
    XS_REQUIRE(c1 > 0 && c2 > 0, "SsimConfig: stabilizers must be > 0");
  }
};

// Named scalar loss terms; composite entries ("tr", "ms", "v", "total") equal
// their documented combination of components.
using LossBreakdown = std::map<std::string, Scalar>;

// A loss evaluation that participates in a gradient step: the scalar graph
// root plus the detached per-term values for logging.
struct LossResult {
  Var objective;
  LossBreakdown breakdown;
};

enum class GanGeneratorForm {
  non_saturating,  // minimize -log sigma(fake); the trainable default
  saturating,      // minimize log(1 - sigma(fake)), the literal minimax form
};

// Per-pixel SSIM with an unweighted window-sized block filter; valid-region
// output [C, H-w+1, W-w+1], values in [-1, 1].
Var ssim_map(const Var& a, const Var& b, const SsimConfig& cfg);
ImagePlane ssim_map(const ImagePlane& a, const ImagePlane& b, const SsimConfig& cfg);

// alpha * mean((1 - ssim)/2) over the SSIM valid region
//   + (1 - alpha) * mean(|target - reprojected|) over the full region.
Var photometric_loss(const Var& target, const Var& reprojected, const LossWeights& w,
                     const SsimConfig& cfg);
Scalar photometric_loss(const ImagePlane& target, const ImagePlane& reprojected,
                        const LossWeights& w, const SsimConfig& cfg);

// Edge-aware smoothness: mean(|dx d| * exp(-mean_c|dx I|)) + same along y.
Var smoothness_loss(const Var& disparity, const Var& image);
Scalar smoothness_loss(const DisparityMap& disparity, const ImagePlane& image);

// mean |d_this - warp(d_other, d_this, dir)|. The left-view form uses
// dir=to_left; the right-view counterpart swaps the arguments and direction.
Var lr_consistency_loss(const Var& d_this, const Var& d_other,
                        WarpDirection dir = WarpDirection::to_left);
Scalar lr_consistency_loss(const DisparityMap& d_this, const DisparityMap& d_other,
                           WarpDirection dir = WarpDirection::to_left);

// Total VIS stereo loss over multi-scale disparities (finest first, each
// upsampled to full resolution before evaluation and averaged across scales):
//   L_v = L_p(l) + L_p(r) + lambda_s (L_s(l)+L_s(r)) + lambda_lr (L_lr(l)+L_lr(r))
// Breakdown keys: p_l, p_r, s_l, s_r, lr_l, lr_r, total.
LossResult vis_total_loss(const Var& img_l, const Var& img_r, const std::vector<Var>& disp_l,
                          const std::vector<Var>& disp_r, const LossWeights& w,
                          const SsimConfig& cfg);

// Sigmoid GAN losses over per-scale patch logits, averaged over scales:
//   disc = mean[-log s(real) - log(1 - s(fake))], gen = mean[-log s(fake)].
// Gradient of gen flows only into the fake logits.
std::pair<Var, Var> adversarial_losses(const std::vector<Var>& real_logits,
                                       const std::vector<Var>& fake_logits,
                                       GanGeneratorForm form = GanGeneratorForm::non_saturating);

// L_rec = mean|recon_tir_l - tir_l| + mean|recon_vis_r - vis_r|.
Var reconstruction_loss(const Var& recon_tir_l, const Var& tir_l, const Var& recon_vis_r,
                        const Var& vis_r);

// L_wrec = mean|R_T(f^r) - warp(tir_l, d_r, to_right)|
//        + mean|R_V(f^l) - warp(vis_r, d_l, to_left)|.
Var warp_reconstruction_loss(const Var& recon_tir_from_right, const Var& recon_vis_from_left,
                             const Var& tir_l, const Var& vis_r, const Var& d_l, const Var& d_r);

// Cross reconstructions produced by the transfer branch. "left" features come
// from the TIR encoder on T_L, "right" features from the VIS encoder on V_R.
struct CrossReconstructions {
  Var tir_from_left;    // R_T(f^l)
  Var vis_from_right;   // R_V(f^r)
  Var tir_from_right;   // R_T(f^r)
  Var vis_from_left;    // R_V(f^l)
};

// L_tr = gen GAN + L_rec + L_wrec;  L_ms = L_tr + lambda_s (s_l+s_r) +
// lambda_lr (lr_l+lr_r). Breakdown keys: gan_g, gan_d, rec, wrec, s_l, s_r,
// lr_l, lr_r, tr, total (= L_ms).
LossResult cross_spectrum_loss(const Var& tir_l, const Var& vis_r,
                               const std::vector<Var>& disp_l, const std::vector<Var>& disp_r,
                               const std::vector<Var>& real_logits,
                               const std::vector<Var>& fake_logits,
                               const CrossReconstructions& recons, const LossWeights& w,
                               GanGeneratorForm form = GanGeneratorForm::non_saturating);

// L_cyc = mean|d_l - d_l_hat| + mean|d_r - d_r_hat|.
Var cycle_consistency_loss(const Var& d_l, const Var& d_r, const Var& d_l_hat,
                           const Var& d_r_hat);
Scalar cycle_consistency_loss(const DisparityMap& d_l, const DisparityMap& d_r,
                              const DisparityMap& d_l_hat, const DisparityMap& d_r_hat);

// L = lambda_v L_v + lambda_ms L_ms + lambda_cyc L_cyc.
Scalar total_loss(Scalar l_v, Scalar l_ms, Scalar l_cyc, const LossWeights& w);

}  // namespace xsdepth
