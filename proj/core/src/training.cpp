#include "xsdepth/training.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xsdepth/checkpoint.hpp"

namespace xsdepth {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  XS_CONFIG_REQUIRE(learning_rate > 0, "TrainConfig: learning_rate must be > 0");
  XS_CONFIG_REQUIRE(epochs >= 1, "TrainConfig: epochs must be >= 1");
  XS_CONFIG_REQUIRE(batch_size == 1, "TrainConfig: only batch_size 1 is supported");
  XS_CONFIG_REQUIRE(disc_update_ratio >= 1, "TrainConfig: disc_update_ratio must be >= 1");
  XS_CONFIG_REQUIRE(log_every >= 1, "TrainConfig: log_every must be >= 1");
  XS_CONFIG_REQUIRE(checkpoint_every >= 0, "TrainConfig: checkpoint_every must be >= 0");
  XS_CONFIG_REQUIRE(max_steps >= 0, "TrainConfig: max_steps must be >= 0");
  weights.validate();
  ssim.validate();
  network.validate();
}

OptimizerSet make_optimizers(const NetworkBundle& bundle, const TrainConfig& cfg) {
  OptimizerSet opt;
  opt.vis_depth = AdamOptimizer(bundle.params_vis_depth(), cfg.learning_rate, cfg.adam_beta1,
                                cfg.adam_beta2);
  opt.transfer = AdamOptimizer(bundle.params_transfer(cfg.unfreeze_decoder_in_transfer),
                               cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);
  for (size_t i = 0; i < bundle.discriminators.size(); ++i)
    opt.discriminators.emplace_back(bundle.params_discriminator(static_cast<int>(i)),
                                    cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);
  return opt;
}

namespace {

void require_finite(const LossBreakdown& terms, const char* phase) {
  for (const auto& [name, value] : terms)
    if (!std::isfinite(value)) {
      std::ostringstream os;
      os << "non-finite loss in " << phase << " step:";
      for (const auto& [n, v] : terms) os << " " << n << "=" << v;
      throw TrainAbortError(os.str());
    }
}

}  // namespace

LossBreakdown vis_step(NetworkBundle& bundle, OptimizerSet& opt, const VisStereoSample& sample,
                       const TrainConfig& cfg) {
  XS_REQUIRE(sample.vis_left.channels() == 3 && sample.vis_right.channels() == 3,
             "vis_step: VIS pair must be 3-channel");
  Var img_l = constant(sample.vis_left.tensor());
  Var img_r = constant(sample.vis_right.tensor());

  LossResult lv;
  try {
    std::vector<Var> pyr_l = bundle.encoder_vis->forward(img_l);
    std::vector<Var> pyr_r = bundle.encoder_vis->forward(img_r);
    std::vector<Var> disp_l = bundle.depth_decoder.forward(pyr_l);
    std::vector<Var> disp_r = bundle.depth_decoder.forward(pyr_r);
    lv = vis_total_loss(img_l, img_r, disp_l, disp_r, cfg.weights, cfg.ssim);
  } catch (const ContractError& e) {
    // Non-finite activations trip input checks deep in the graph; during a
    // training step that is a divergence, not an API misuse.
    throw TrainAbortError(std::string("vis step forward failed: ") + e.what());
  }
  require_finite(lv.breakdown, "vis");
  backward(lv.objective);
  opt.vis_depth.step();
  return lv.breakdown;
}

std::pair<Var, Var> cycle_pass(const NetworkBundle& bundle, const Var& tir_l, const Var& vis_r,
                               const Var& d_l, const Var& d_r) {
  Var tir_right = warp_horizontal(tir_l, d_r, WarpDirection::to_right);
  Var vis_left = warp_horizontal(vis_r, d_l, WarpDirection::to_left);
  std::vector<Var> pyr_l = bundle.encoder_vis->forward(vis_left);
  std::vector<Var> pyr_r = bundle.encoder_tir->forward(tir_right);
  Var d_hat_l = bundle.depth_decoder.forward(pyr_l)[0];
  Var d_hat_r = bundle.depth_decoder.forward(pyr_r)[0];
  return {d_hat_l, d_hat_r};
}

LossBreakdown transfer_step(NetworkBundle& bundle, OptimizerSet& opt,
                            const CrossSpectrumSample& target, const VisStereoSample& source,
                            const TrainConfig& cfg) {
  XS_REQUIRE(target.tir_left.channels() == 1, "transfer_step: T_L must be single channel");
  XS_REQUIRE(target.vis_right.channels() == 3, "transfer_step: V_R must be 3-channel");
  Var tir_l = constant(target.tir_left.tensor());
  Var vis_r = constant(target.vis_right.tensor());
  Var src_l = constant(source.vis_left.tensor());

  LossBreakdown terms;
  Var objective;
  std::vector<Var> feat_l, real_feat;
  try {
    // Generator pass. E_T acts as the generator producing VIS-like features
    // from the TIR image; E_V is the frozen reference in this step.
    feat_l = bundle.encoder_tir->forward(tir_l);
    std::vector<Var> feat_r = bundle.encoder_vis->forward(vis_r);
    std::vector<Var> disp_l = bundle.depth_decoder.forward(feat_l);
    std::vector<Var> disp_r = bundle.depth_decoder.forward(feat_r);

    CrossReconstructions recons;
    recons.tir_from_left = bundle.recon_tir.forward(feat_l);
    recons.vis_from_right = bundle.recon_vis.forward(feat_r);
    recons.tir_from_right = bundle.recon_tir.forward(feat_r);
    recons.vis_from_left = bundle.recon_vis.forward(feat_l);

    for (const Var& f : bundle.encoder_vis->forward(src_l)) real_feat.push_back(detach(f));
    XS_REQUIRE(bundle.discriminators.size() == feat_l.size(),
               "transfer_step: discriminator count must match pyramid length");
    std::vector<Var> fake_logits, real_logits;
    for (size_t i = 0; i < bundle.discriminators.size(); ++i) {
      fake_logits.push_back(bundle.discriminators[i].forward(feat_l[i]));
      real_logits.push_back(bundle.discriminators[i].forward(real_feat[i]));
    }

    LossResult ms = cross_spectrum_loss(tir_l, vis_r, disp_l, disp_r, real_logits, fake_logits,
                                        recons, cfg.weights, cfg.gan_form);

    auto [d_hat_l, d_hat_r] = cycle_pass(bundle, tir_l, vis_r, disp_l[0], disp_r[0]);
    Var cyc = cycle_consistency_loss(disp_l[0], disp_r[0], d_hat_l, d_hat_r);

    objective = add(mul_scalar(ms.objective, cfg.weights.lambda_ms),
                    mul_scalar(cyc, cfg.weights.lambda_cyc));
    terms = ms.breakdown;
    terms["ms"] = terms["total"];
    terms["cyc"] = cyc->value.item();
    terms["total"] = objective->value.item();
  } catch (const ContractError& e) {
    throw TrainAbortError(std::string("transfer step forward failed: ") + e.what());
  }
  require_finite(terms, "transfer");

  backward(objective);
  opt.transfer.step();

  // Discriminator updates on the detached features captured above; the
  // generator side is never touched by these steps.
  std::vector<Var> fake_detached;
  for (const Var& f : feat_l) fake_detached.push_back(detach(f));
  Scalar last_disc = 0;
  for (int it = 0; it < cfg.disc_update_ratio; ++it) {
    std::vector<Var> fl, rl;
    for (size_t i = 0; i < bundle.discriminators.size(); ++i) {
      fl.push_back(bundle.discriminators[i].forward(fake_detached[i]));
      rl.push_back(bundle.discriminators[i].forward(real_feat[i]));
    }
    auto [gen_unused, disc_loss] = adversarial_losses(rl, fl, cfg.gan_form);
    (void)gen_unused;
    last_disc = disc_loss->value.item();
    XS_REQUIRE(std::isfinite(last_disc), "transfer_step: non-finite discriminator loss");
    backward(disc_loss);
    for (AdamOptimizer& d : opt.discriminators) d.step();
  }
  terms["gan_d"] = last_disc;
  return terms;
}

namespace {

// Epoch-reshuffled index stream, deterministic per fork of the run seed.
class IndexSampler {
 public:
  IndexSampler(size_t n, Rng rng) : rng_(rng), order_(n) {
    XS_REQUIRE(n > 0, "IndexSampler: empty dataset");
    reshuffle();
  }
  size_t next() {
    if (pos_ == order_.size()) reshuffle();
    return order_[pos_++];
  }

 private:
  void reshuffle() {
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    shuffle_indices(order_, rng_);
    pos_ = 0;
  }
  Rng rng_;
  std::vector<size_t> order_;
  size_t pos_ = 0;
};

std::string to_log_record(long step, const char* phase, const LossBreakdown& terms) {
  nlohmann::json j;
  j["step"] = step;
  j["phase"] = phase;
  nlohmann::json t;
  for (const auto& [k, v] : terms) t[k] = v;
  j["terms"] = t;
  return j.dump();
}

}  // namespace

uint64_t hash_parameters(const std::vector<NamedParam>& params) {
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const NamedParam& p : params) {
    mix(p.name.data(), p.name.size());
    mix(p.var->value.data(), static_cast<size_t>(p.var->value.numel()) * sizeof(Scalar));
  }
  return h;
}

fs::path run_training(const TrainConfig& cfg, const std::vector<LoadedSample>& source_dataset,
                      const std::vector<LoadedSample>& target_dataset, const fs::path& out_dir) {
  cfg.validate();
  NetworkBundle bundle = build_networks(cfg.network, cfg.seed);
  return run_training(cfg, bundle, source_dataset, target_dataset, out_dir);
}

fs::path run_training(const TrainConfig& cfg, NetworkBundle& bundle,
                      const std::vector<LoadedSample>& source_dataset,
                      const std::vector<LoadedSample>& target_dataset, const fs::path& out_dir) {
  cfg.validate();
  XS_REQUIRE(!source_dataset.empty(), "run_training: source dataset is empty");
  if (cfg.phase == TrainPhase::full)
    XS_REQUIRE(!target_dataset.empty(), "run_training: target dataset is empty");
  for (const LoadedSample& s : source_dataset)
    XS_REQUIRE(s.vis_left.has_value(),
               "run_training: source sample " + s.id + " has no vis_left image");

  std::error_code ec;
  fs::create_directories(out_dir / "logs", ec);
  fs::create_directories(out_dir / "checkpoints", ec);
  if (!fs::exists(out_dir / "logs") || !fs::exists(out_dir / "checkpoints"))
    throw IoError("cannot create training output directory: " + out_dir.string());

  OptimizerSet opt = make_optimizers(bundle, cfg);

  const Rng base(cfg.seed);
  IndexSampler vis_sampler(source_dataset.size(), base.fork(1));
  // Streams 2 and 3 are only consumed in phase full, which keeps the vis-step
  // sample sequence identical between a vis-only run and a full run.
  IndexSampler target_sampler(cfg.phase == TrainPhase::full ? target_dataset.size() : 1,
                              base.fork(2));
  IndexSampler real_sampler(source_dataset.size(), base.fork(3));

  const long steps_per_epoch = static_cast<long>(source_dataset.size());
  const long total_steps =
      cfg.max_steps > 0 ? cfg.max_steps : steps_per_epoch * static_cast<long>(cfg.epochs);

  const fs::path log_path = out_dir / "logs" / "train.ndjson";
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw IoError("cannot open loss log: " + log_path.string());

  const fs::path final_path = out_dir / "final.ckpt";
  long step = 0;
  try {
    for (step = 0; step < total_steps; ++step) {
      const VisStereoSample vis = to_vis_sample(source_dataset[vis_sampler.next()]);
      LossBreakdown record = vis_step(bundle, opt, vis, cfg);
      const char* phase_name = "vis";

      if (cfg.phase == TrainPhase::full) {
        const CrossSpectrumSample target = to_cross_sample(target_dataset[target_sampler.next()]);
        const VisStereoSample real = to_vis_sample(source_dataset[real_sampler.next()]);
        LossBreakdown transfer = transfer_step(bundle, opt, target, real, cfg);
        const Scalar l_v = record["total"];
        for (auto& [k, v] : transfer) {
          // The vis-branch s_*/lr_* values stay under their plain names; the
          // target-pair counterparts get a t_ prefix in the merged record.
          if (k == "s_l" || k == "s_r" || k == "lr_l" || k == "lr_r")
            record["t_" + k] = v;
          else
            record[k] = v;
        }
        record["v"] = l_v;
        record["total"] = total_loss(l_v, transfer["ms"], transfer["cyc"], cfg.weights);
        phase_name = "full";
      }

      if (step % cfg.log_every == 0) log << to_log_record(step, phase_name, record) << "\n";
      if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) {
        char name[32];
        std::snprintf(name, sizeof(name), "step-%06ld.ckpt", step + 1);
        save_checkpoint(bundle, step + 1, out_dir / "checkpoints" / name);
      }
    }
  } catch (const TrainAbortError& e) {
    // Loss went non-finite before the optimizer step: parameters are still
    // the last good state. Persist them for postmortems, then surface.
    log.flush();
    save_checkpoint(bundle, step, out_dir / "checkpoints" / "last_good.ckpt");
    throw TrainAbortError(std::string(e.what()) + " (step " + std::to_string(step) +
                          "; last-good checkpoint written)");
  }
  log.flush();
  save_checkpoint(bundle, total_steps, final_path);
  return final_path;
}

}  // namespace xsdepth
