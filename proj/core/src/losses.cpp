#include "xsdepth/losses.hpp"

namespace xsdepth {

namespace {

void require_same_spatial(const Var& a, const Var& b, const char* op) {
  XS_REQUIRE(a && b, std::string(op) + ": null input");
  XS_REQUIRE(a->value.height() == b->value.height() && a->value.width() == b->value.width(),
             std::string(op) + ": spatial size mismatch");
}

Var mean_abs_diff(const Var& a, const Var& b) { return mean_all(abs_v(sub(a, b))); }

// Upsamples per-scale disparities to the full resolution of the reference.
std::vector<Var> to_full_resolution(const std::vector<Var>& disps, long h, long w) {
  std::vector<Var> out;
  out.reserve(disps.size());
  for (const Var& d : disps) out.push_back(resize_bilinear(d, h, w));
  return out;
}

}  // namespace

Var ssim_map(const Var& a, const Var& b, const SsimConfig& cfg) {
  cfg.validate();
  XS_REQUIRE(a && b, "ssim_map: null input");
  XS_REQUIRE(a->value.same_shape(b->value), "ssim_map: shape mismatch");
  const int w = cfg.window;
  Var mu_a = box_filter(a, w);
  Var mu_b = box_filter(b, w);
  Var mu_aa = box_filter(mul(a, a), w);
  Var mu_bb = box_filter(mul(b, b), w);
  Var mu_ab = box_filter(mul(a, b), w);
  Var var_a = sub(mu_aa, mul(mu_a, mu_a));
  Var var_b = sub(mu_bb, mul(mu_b, mu_b));
  Var cov = sub(mu_ab, mul(mu_a, mu_b));
  Var num = mul(add_scalar(mul_scalar(mul(mu_a, mu_b), 2.0), cfg.c1),
                add_scalar(mul_scalar(cov, 2.0), cfg.c2));
  Var den = mul(add_scalar(add(mul(mu_a, mu_a), mul(mu_b, mu_b)), cfg.c1),
                add_scalar(add(var_a, var_b), cfg.c2));
  return div(num, den);
}

ImagePlane ssim_map(const ImagePlane& a, const ImagePlane& b, const SsimConfig& cfg) {
  return ImagePlane(ssim_map(constant(a.tensor()), constant(b.tensor()), cfg)->value);
}

Var photometric_loss(const Var& target, const Var& reprojected, const LossWeights& w,
                     const SsimConfig& cfg) {
  w.validate();
  XS_REQUIRE(target && reprojected, "photometric_loss: null input");
  XS_REQUIRE(target->value.same_shape(reprojected->value), "photometric_loss: shape mismatch");
  Var l1_term = mean_abs_diff(target, reprojected);
  Var loss = mul_scalar(l1_term, 1.0 - w.alpha);
  if (w.alpha > 0.0) {
    Var ssim = ssim_map(reprojected, target, cfg);
    Var dissim = mul_scalar(add_scalar(mul_scalar(ssim, -1.0), 1.0), 0.5);
    loss = add(loss, mul_scalar(mean_all(dissim), w.alpha));
  }
  return loss;
}

Scalar photometric_loss(const ImagePlane& target, const ImagePlane& reprojected,
                        const LossWeights& w, const SsimConfig& cfg) {
  return photometric_loss(constant(target.tensor()), constant(reprojected.tensor()), w, cfg)
      ->value.item();
}

Var smoothness_loss(const Var& disparity, const Var& image) {
  require_same_spatial(disparity, image, "smoothness_loss");
  XS_REQUIRE(disparity->value.channels() == 1, "smoothness_loss: disparity must be 1-channel");
  Var dx_d = abs_v(image_grad_x(disparity));
  Var dy_d = abs_v(image_grad_y(disparity));
  Var wx = exp_v(mul_scalar(mean_channels(abs_v(image_grad_x(image))), -1.0));
  Var wy = exp_v(mul_scalar(mean_channels(abs_v(image_grad_y(image))), -1.0));
  return add(mean_all(mul(dx_d, wx)), mean_all(mul(dy_d, wy)));
}

Scalar smoothness_loss(const DisparityMap& disparity, const ImagePlane& image) {
  return smoothness_loss(constant(disparity.tensor()), constant(image.tensor()))->value.item();
}

Var lr_consistency_loss(const Var& d_this, const Var& d_other, WarpDirection dir) {
  require_same_spatial(d_this, d_other, "lr_consistency_loss");
  XS_REQUIRE(d_this->value.same_shape(d_other->value), "lr_consistency_loss: shape mismatch");
  Var reprojected = warp_horizontal(d_other, d_this, dir);
  return mean_abs_diff(d_this, reprojected);
}

Scalar lr_consistency_loss(const DisparityMap& d_this, const DisparityMap& d_other,
                           WarpDirection dir) {
  return lr_consistency_loss(constant(d_this.tensor()), constant(d_other.tensor()), dir)
      ->value.item();
}

LossResult vis_total_loss(const Var& img_l, const Var& img_r, const std::vector<Var>& disp_l,
                          const std::vector<Var>& disp_r, const LossWeights& w,
                          const SsimConfig& cfg) {
  w.validate();
  XS_REQUIRE(!disp_l.empty() && disp_l.size() == disp_r.size(),
             "vis_total_loss: disparity scale lists must be non-empty and equal length");
  require_same_spatial(img_l, img_r, "vis_total_loss");
  const long h = img_l->value.height(), width = img_l->value.width();
  std::vector<Var> dl = to_full_resolution(disp_l, h, width);
  std::vector<Var> dr = to_full_resolution(disp_r, h, width);

  std::vector<Var> p_l, p_r, s_l, s_r, lr_l, lr_r;
  for (size_t s = 0; s < dl.size(); ++s) {
    Var warped_l = warp_horizontal(img_r, dl[s], WarpDirection::to_left);
    Var warped_r = warp_horizontal(img_l, dr[s], WarpDirection::to_right);
    p_l.push_back(photometric_loss(img_l, warped_l, w, cfg));
    p_r.push_back(photometric_loss(img_r, warped_r, w, cfg));
    s_l.push_back(smoothness_loss(dl[s], img_l));
    s_r.push_back(smoothness_loss(dr[s], img_r));
    lr_l.push_back(lr_consistency_loss(dl[s], dr[s], WarpDirection::to_left));
    lr_r.push_back(lr_consistency_loss(dr[s], dl[s], WarpDirection::to_right));
  }
  Var pl = average_scalars(p_l), pr = average_scalars(p_r);
  Var sl = average_scalars(s_l), sr = average_scalars(s_r);
  Var lrl = average_scalars(lr_l), lrr = average_scalars(lr_r);

  Var total = add(pl, pr);
  total = add(total, mul_scalar(add(sl, sr), w.lambda_s));
  total = add(total, mul_scalar(add(lrl, lrr), w.lambda_lr));

  LossResult res;
  res.objective = total;
  res.breakdown = {{"p_l", pl->value.item()},   {"p_r", pr->value.item()},
                   {"s_l", sl->value.item()},   {"s_r", sr->value.item()},
                   {"lr_l", lrl->value.item()}, {"lr_r", lrr->value.item()},
                   {"total", total->value.item()}};
  return res;
}

std::pair<Var, Var> adversarial_losses(const std::vector<Var>& real_logits,
                                       const std::vector<Var>& fake_logits,
                                       GanGeneratorForm form) {
  XS_REQUIRE(!real_logits.empty() && !fake_logits.empty(), "adversarial_losses: empty logit list");
  XS_REQUIRE(real_logits.size() == fake_logits.size(),
             "adversarial_losses: real/fake scale count mismatch");
  std::vector<Var> disc_terms, gen_terms;
  for (size_t i = 0; i < real_logits.size(); ++i) {
    // -log s(x) = softplus(-x); -log(1 - s(x)) = softplus(x).
    Var d_real = mean_all(softplus_v(mul_scalar(real_logits[i], -1.0)));
    Var d_fake = mean_all(softplus_v(fake_logits[i]));
    disc_terms.push_back(add(d_real, d_fake));
    if (form == GanGeneratorForm::non_saturating) {
      gen_terms.push_back(mean_all(softplus_v(mul_scalar(fake_logits[i], -1.0))));
    } else {
      gen_terms.push_back(mul_scalar(mean_all(softplus_v(fake_logits[i])), -1.0));
    }
  }
  return {average_scalars(gen_terms), average_scalars(disc_terms)};
}

Var reconstruction_loss(const Var& recon_tir_l, const Var& tir_l, const Var& recon_vis_r,
                        const Var& vis_r) {
  XS_REQUIRE(recon_tir_l && tir_l && recon_vis_r && vis_r, "reconstruction_loss: null input");
  XS_REQUIRE(recon_tir_l->value.same_shape(tir_l->value),
             "reconstruction_loss: TIR shape mismatch");
  XS_REQUIRE(recon_vis_r->value.same_shape(vis_r->value),
             "reconstruction_loss: VIS shape mismatch");
  return add(mean_abs_diff(recon_tir_l, tir_l), mean_abs_diff(recon_vis_r, vis_r));
}

Var warp_reconstruction_loss(const Var& recon_tir_from_right, const Var& recon_vis_from_left,
                             const Var& tir_l, const Var& vis_r, const Var& d_l, const Var& d_r) {
  XS_REQUIRE(recon_tir_from_right && recon_vis_from_left && tir_l && vis_r && d_l && d_r,
             "warp_reconstruction_loss: null input");
  Var tir_warped_right = warp_horizontal(tir_l, d_r, WarpDirection::to_right);
  Var vis_warped_left = warp_horizontal(vis_r, d_l, WarpDirection::to_left);
  XS_REQUIRE(recon_tir_from_right->value.same_shape(tir_warped_right->value),
             "warp_reconstruction_loss: TIR shape mismatch");
  XS_REQUIRE(recon_vis_from_left->value.same_shape(vis_warped_left->value),
             "warp_reconstruction_loss: VIS shape mismatch");
  return add(mean_abs_diff(recon_tir_from_right, tir_warped_right),
             mean_abs_diff(recon_vis_from_left, vis_warped_left));
}

LossResult cross_spectrum_loss(const Var& tir_l, const Var& vis_r,
                               const std::vector<Var>& disp_l, const std::vector<Var>& disp_r,
                               const std::vector<Var>& real_logits,
                               const std::vector<Var>& fake_logits,
                               const CrossReconstructions& recons, const LossWeights& w,
                               GanGeneratorForm form) {
  w.validate();
  XS_REQUIRE(!disp_l.empty() && disp_l.size() == disp_r.size(),
             "cross_spectrum_loss: disparity scale lists must be non-empty and equal length");
  require_same_spatial(tir_l, vis_r, "cross_spectrum_loss");
  const long h = tir_l->value.height(), width = tir_l->value.width();
  std::vector<Var> dl = to_full_resolution(disp_l, h, width);
  std::vector<Var> dr = to_full_resolution(disp_r, h, width);

  auto [gan_g, gan_d] = adversarial_losses(real_logits, fake_logits, form);
  Var rec = reconstruction_loss(recons.tir_from_left, tir_l, recons.vis_from_right, vis_r);
  Var wrec = warp_reconstruction_loss(recons.tir_from_right, recons.vis_from_left, tir_l, vis_r,
                                      dl[0], dr[0]);
  Var tr = add(add(gan_g, rec), wrec);

  std::vector<Var> s_l, s_r, lr_l, lr_r;
  for (size_t s = 0; s < dl.size(); ++s) {
    s_l.push_back(smoothness_loss(dl[s], tir_l));
    s_r.push_back(smoothness_loss(dr[s], vis_r));
    lr_l.push_back(lr_consistency_loss(dl[s], dr[s], WarpDirection::to_left));
    lr_r.push_back(lr_consistency_loss(dr[s], dl[s], WarpDirection::to_right));
  }
  Var sl = average_scalars(s_l), sr = average_scalars(s_r);
  Var lrl = average_scalars(lr_l), lrr = average_scalars(lr_r);

  Var total = tr;
  total = add(total, mul_scalar(add(sl, sr), w.lambda_s));
  total = add(total, mul_scalar(add(lrl, lrr), w.lambda_lr));

  LossResult res;
  res.objective = total;
  res.breakdown = {{"gan_g", gan_g->value.item()}, {"gan_d", gan_d->value.item()},
                   {"rec", rec->value.item()},     {"wrec", wrec->value.item()},
                   {"s_l", sl->value.item()},      {"s_r", sr->value.item()},
                   {"lr_l", lrl->value.item()},    {"lr_r", lrr->value.item()},
                   {"tr", tr->value.item()},       {"total", total->value.item()}};
  return res;
}

Var cycle_consistency_loss(const Var& d_l, const Var& d_r, const Var& d_l_hat,
                           const Var& d_r_hat) {
  XS_REQUIRE(d_l && d_r && d_l_hat && d_r_hat, "cycle_consistency_loss: null input");
  XS_REQUIRE(d_l->value.same_shape(d_l_hat->value) && d_r->value.same_shape(d_r_hat->value) &&
                 d_l->value.same_shape(d_r->value),
             "cycle_consistency_loss: shape mismatch");
  return add(mean_abs_diff(d_l, d_l_hat), mean_abs_diff(d_r, d_r_hat));
}

Scalar cycle_consistency_loss(const DisparityMap& d_l, const DisparityMap& d_r,
                              const DisparityMap& d_l_hat, const DisparityMap& d_r_hat) {
  return cycle_consistency_loss(constant(d_l.tensor()), constant(d_r.tensor()),
                                constant(d_l_hat.tensor()), constant(d_r_hat.tensor()))
      ->value.item();
}

Scalar total_loss(Scalar l_v, Scalar l_ms, Scalar l_cyc, const LossWeights& w) {
  w.validate();
  XS_REQUIRE(std::isfinite(l_v) && std::isfinite(l_ms) && std::isfinite(l_cyc),
             "total_loss: non-finite component");
  return w.lambda_v * l_v + w.lambda_ms * l_ms + w.lambda_cyc * l_cyc;
}

}  // namespace xsdepth
