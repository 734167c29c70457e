#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "support/test_util.hpp"
#include "xsdepth/checkpoint.hpp"
#include "xsdepth/networks.hpp"
#include "xsdepth/training.hpp"

using namespace xsdepth;

namespace {

NetworkConfig tiny_config(long w = 64, long h = 48) {
  NetworkConfig cfg;
  cfg.input_width = w;
  cfg.input_height = h;
  return cfg;
}

ImagePlane random_image(long c, long h, long w, uint64_t seed) {
  Rng rng(seed);
  return ImagePlane(random_uniform({c, h, w}, rng));
}

}  // namespace

TEST_CASE("build_networks is deterministic given the seed") {
  NetworkBundle a = build_networks(tiny_config(), 42);
  NetworkBundle b = build_networks(tiny_config(), 42);
  NetworkBundle c = build_networks(tiny_config(), 43);
  CHECK(hash_parameters(a.named_parameters()) == hash_parameters(b.named_parameters()));
  CHECK(hash_parameters(a.named_parameters()) != hash_parameters(c.named_parameters()));
}

TEST_CASE("non-encoder weights follow the configured init stddev") {
  NetworkBundle bundle = build_networks(tiny_config(), 7);
  double sum = 0, sum_sq = 0;
  long n = 0;
  for (const NamedParam& p : bundle.named_parameters()) {
    if (p.name.rfind("encoder", 0) == 0) continue;       // encoders use He init
    if (p.name.find(".bias") != std::string::npos) continue;  // biases start at zero
    for (long i = 0; i < p.var->value.numel(); ++i) {
      sum += p.var->value[i];
      sum_sq += p.var->value[i] * p.var->value[i];
      ++n;
    }
  }
  REQUIRE(n >= 10000);
  const double mean = sum / n;
  const double stddev = std::sqrt(sum_sq / n - mean * mean);
  CHECK(std::abs(mean) < 0.002);
  CHECK(stddev == doctest::Approx(0.02).epsilon(0.15));
}

TEST_CASE("biases start at zero") {
  NetworkBundle bundle = build_networks(tiny_config(), 9);
  for (const NamedParam& p : bundle.named_parameters())
    if (p.name.find(".bias") != std::string::npos)
      for (long i = 0; i < p.var->value.numel(); ++i) CHECK(p.var->value[i] == 0.0);
}

TEST_CASE("tiny encoder emits 5 scales with the documented schedule") {
  NetworkConfig cfg = tiny_config(64, 48);
  NetworkBundle bundle = build_networks(cfg, 11);
  FeaturePyramid pyr = encode(*bundle.encoder_vis, random_image(3, 48, 64, 1));
  REQUIRE(pyr.num_scales() == 5);
  const std::vector<long> want_ch = {16, 32, 64, 128, 128};
  for (int i = 0; i < 5; ++i) {
    const long div = cfg.scale_divisor(i);
    CHECK(pyr.scales[i]->value.channels() == want_ch[i]);
    CHECK(pyr.scales[i]->value.height() == 48 / div);
    CHECK(pyr.scales[i]->value.width() == 64 / div);
  }
  pyr.validate();
}

TEST_CASE("resnet18-like encoder emits 5 scales at /2../32") {
  NetworkConfig cfg = tiny_config(96, 64);
  cfg.encoder_depth = EncoderDepth::resnet18_like;
  NetworkBundle bundle = build_networks(cfg, 13);
  FeaturePyramid pyr = encode(*bundle.encoder_vis, random_image(3, 64, 96, 2));
  REQUIRE(pyr.num_scales() == 5);
  const std::vector<long> want_ch = {64, 64, 128, 256, 512};
  for (int i = 0; i < 5; ++i) {
    const long div = 2L << i;
    CHECK(pyr.scales[i]->value.channels() == want_ch[i]);
    CHECK(pyr.scales[i]->value.height() == 64 / div);
    CHECK(pyr.scales[i]->value.width() == 96 / div);
  }
}

TEST_CASE("encoders accept 1-channel input by replication and reject others") {
  NetworkBundle bundle = build_networks(tiny_config(), 15);
  FeaturePyramid from_gray = encode(*bundle.encoder_tir, random_image(1, 48, 64, 3));
  CHECK(from_gray.num_scales() == 5);
  CHECK_THROWS_AS((void)encode(*bundle.encoder_tir, random_image(2, 48, 64, 4)), ContractError);
}

TEST_CASE("encode is deterministic and finite on a zero image") {
  NetworkBundle bundle = build_networks(tiny_config(), 17);
  ImagePlane zero(Tensor::zeros({3, 48, 64}));
  FeaturePyramid a = encode(*bundle.encoder_vis, zero);
  FeaturePyramid b = encode(*bundle.encoder_vis, zero);
  for (int i = 0; i < a.num_scales(); ++i) {
    CHECK(a.scales[i]->value.all_finite());
    for (long k = 0; k < a.scales[i]->value.numel(); ++k)
      CHECK(a.scales[i]->value[k] == b.scales[i]->value[k]);
  }
  // Identical inputs -> identical pyramids.
  ImagePlane img = random_image(3, 48, 64, 5);
  FeaturePyramid p1 = encode(*bundle.encoder_vis, img);
  FeaturePyramid p2 = encode(*bundle.encoder_vis, img);
  for (int i = 0; i < p1.num_scales(); ++i)
    for (long k = 0; k < p1.scales[i]->value.numel(); ++k)
      CHECK(p1.scales[i]->value[k] == p2.scales[i]->value[k]);
}

TEST_CASE("decoded disparities stay in [0, d_max] at the documented scales") {
  NetworkConfig cfg = tiny_config();
  NetworkBundle bundle = build_networks(cfg, 19);
  FeaturePyramid pyr = encode(*bundle.encoder_vis, random_image(3, 48, 64, 6));
  std::vector<DisparityMap> disps = decode_disparity(bundle.depth_decoder, pyr, cfg.d_max);
  REQUIRE(static_cast<int>(disps.size()) == cfg.num_disparity_scales);
  for (int s = 0; s < cfg.num_disparity_scales; ++s) {
    CHECK(disps[s].height() == 48 / (1L << s));
    CHECK(disps[s].width() == 64 / (1L << s));
    for (long y = 0; y < disps[s].height(); ++y)
      for (long x = 0; x < disps[s].width(); ++x) {
        CHECK(disps[s].at(y, x) >= 0.0);
        CHECK(disps[s].at(y, x) <= cfg.d_max);
      }
  }
  // Upsampled to full resolution each scale is [1,H,W].
  for (const DisparityMap& d : disps) {
    Tensor up = resize_bilinear_tensor(d.tensor(), 48, 64);
    CHECK(up.shape() == std::vector<long>{1, 48, 64});
  }
}

TEST_CASE("disparity gradients reach the pyramid (autodiff connectivity)") {
  NetworkBundle bundle = build_networks(tiny_config(), 21);
  Rng rng(23);
  Var img = parameter(random_uniform({3, 48, 64}, rng));
  std::vector<Var> pyr = bundle.encoder_vis->forward(img);
  std::vector<Var> disps = bundle.depth_decoder.forward(pyr);
  backward(mean_all(disps[0]));
  Scalar norm = 0;
  for (long i = 0; i < img->grad.numel(); ++i) norm += std::abs(img->grad[i]);
  CHECK(norm > 0.0);
}

TEST_CASE("discriminator logit planes follow the downsampling schedule") {
  NetworkConfig cfg = tiny_config(64, 48);
  NetworkBundle bundle = build_networks(cfg, 25);
  REQUIRE(static_cast<int>(bundle.discriminators.size()) == cfg.num_scales);
  FeaturePyramid pyr = encode(*bundle.encoder_vis, random_image(3, 48, 64, 7));
  std::vector<ImagePlane> logits = discriminate(bundle.discriminators, pyr);
  REQUIRE(logits.size() == 5);
  for (int i = 0; i < 5; ++i) {
    const int downs = std::max(1, 4 - i);
    CHECK(bundle.discriminators[i].num_downs() == downs);
    long h = pyr.scales[i]->value.height(), w = pyr.scales[i]->value.width();
    for (int k = 0; k < downs; ++k) {
      h = (h + 1) / 2;
      w = (w + 1) / 2;
    }
    CHECK(logits[i].channels() == 1);
    CHECK(logits[i].height() == h);
    CHECK(logits[i].width() == w);
    CHECK(logits[i].height() >= 1);
    CHECK(logits[i].width() >= 1);
    CHECK(logits[i].tensor().all_finite());
  }
}

TEST_CASE("discriminate rejects pyramid length mismatches") {
  NetworkBundle bundle = build_networks(tiny_config(), 27);
  FeaturePyramid pyr = encode(*bundle.encoder_vis, random_image(3, 48, 64, 8));
  pyr.scales.pop_back();
  CHECK_THROWS_AS((void)discriminate(bundle.discriminators, pyr), ContractError);
}

TEST_CASE("samples pass through discriminators independently of list order") {
  NetworkBundle bundle = build_networks(tiny_config(), 29);
  std::vector<ImagePlane> images = {random_image(3, 48, 64, 9), random_image(3, 48, 64, 10)};
  std::vector<std::vector<ImagePlane>> fwd, rev;
  for (const ImagePlane& im : images)
    fwd.push_back(discriminate(bundle.discriminators, encode(*bundle.encoder_vis, im)));
  for (auto it = images.rbegin(); it != images.rend(); ++it)
    rev.push_back(discriminate(bundle.discriminators, encode(*bundle.encoder_vis, *it)));
  for (size_t s = 0; s < 5; ++s)
    for (long i = 0; i < fwd[0][s].tensor().numel(); ++i) {
      CHECK(fwd[0][s].tensor()[i] == rev[1][s].tensor()[i]);
      CHECK(fwd[1][s].tensor()[i] == rev[0][s].tensor()[i]);
    }
}

TEST_CASE("reconstructors emit [0,1] images with the right channel counts") {
  NetworkBundle bundle = build_networks(tiny_config(), 31);
  FeaturePyramid pyr = encode(*bundle.encoder_tir, random_image(1, 48, 64, 11));
  ImagePlane tir = reconstruct(bundle.recon_tir, pyr);
  ImagePlane vis = reconstruct(bundle.recon_vis, pyr);
  CHECK(tir.channels() == 1);
  CHECK(vis.channels() == 3);
  CHECK(tir.height() == 48);
  CHECK(vis.width() == 64);
  for (long i = 0; i < tir.tensor().numel(); ++i) {
    CHECK(tir.tensor()[i] >= 0.0);
    CHECK(tir.tensor()[i] <= 1.0);
  }
  // Determinism.
  ImagePlane again = reconstruct(bundle.recon_tir, pyr);
  for (long i = 0; i < tir.tensor().numel(); ++i) CHECK(tir.tensor()[i] == again.tensor()[i]);
}

TEST_CASE("reconstruction output depends on every pyramid scale") {
  NetworkBundle bundle = build_networks(tiny_config(), 33);
  FeaturePyramid pyr = encode(*bundle.encoder_vis, random_image(3, 48, 64, 12));
  ImagePlane base = reconstruct(bundle.recon_vis, pyr);
  for (int s = 0; s < pyr.num_scales(); ++s) {
    FeaturePyramid zeroed = pyr;
    zeroed.scales[s] = constant(Tensor::zeros(pyr.scales[s]->value.shape()));
    ImagePlane out = reconstruct(bundle.recon_vis, zeroed);
    Scalar diff = 0;
    for (long i = 0; i < out.tensor().numel(); ++i)
      diff += std::abs(out.tensor()[i] - base.tensor()[i]);
    INFO("scale ", s);
    CHECK(diff > 1e-6);
  }
}

TEST_CASE("transfer-branch parameters all receive gradient from L_tr (connectivity)") {
  NetworkConfig cfg = tiny_config();
  NetworkBundle bundle = build_networks(cfg, 35);
  Rng rng(36);
  Var tir = constant(random_uniform({1, 48, 64}, rng));
  Var vis = constant(random_uniform({3, 48, 64}, rng));

  std::vector<Var> f_l = bundle.encoder_tir->forward(tir);
  std::vector<Var> f_r = bundle.encoder_vis->forward(vis);
  std::vector<Var> disp_l = bundle.depth_decoder.forward(f_l);
  std::vector<Var> disp_r = bundle.depth_decoder.forward(f_r);
  CrossReconstructions recons;
  recons.tir_from_left = bundle.recon_tir.forward(f_l);
  recons.vis_from_right = bundle.recon_vis.forward(f_r);
  recons.tir_from_right = bundle.recon_tir.forward(f_r);
  recons.vis_from_left = bundle.recon_vis.forward(f_l);
  std::vector<Var> fake_logits, real_logits;
  for (size_t i = 0; i < bundle.discriminators.size(); ++i) {
    fake_logits.push_back(bundle.discriminators[i].forward(f_l[i]));
    real_logits.push_back(constant(Tensor::zeros(fake_logits[i]->value.shape())));
  }
  auto [gan_g, gan_d] = adversarial_losses(real_logits, fake_logits);
  (void)gan_d;
  Var rec = reconstruction_loss(recons.tir_from_left, tir, recons.vis_from_right, vis);
  Var wrec = warp_reconstruction_loss(recons.tir_from_right, recons.vis_from_left, tir, vis,
                                      disp_l[0], disp_r[0]);
  Var l_tr = add(add(gan_g, rec), wrec);
  backward(l_tr);

  std::vector<NamedParam> params;
  bundle.encoder_tir->append_parameters("encoder_tir", params);
  bundle.recon_tir.append_parameters("recon_tir", params);
  bundle.recon_vis.append_parameters("recon_vis", params);
  for (const NamedParam& p : params) {
    Scalar norm = 0;
    REQUIRE(p.var->grad.numel() == p.var->value.numel());
    for (long i = 0; i < p.var->grad.numel(); ++i) norm += std::abs(p.var->grad[i]);
    INFO(p.name);
    CHECK(norm > 0.0);
  }
}

TEST_CASE("invalid configurations are rejected") {
  NetworkConfig bad = tiny_config(60, 48);  // 60 is not divisible by 16
  CHECK_THROWS_AS((void)build_networks(bad, 1), ConfigError);
  NetworkConfig bad2 = tiny_config();
  bad2.num_disparity_scales = 9;
  CHECK_THROWS_AS((void)build_networks(bad2, 1), ConfigError);
  NetworkConfig bad3 = tiny_config();
  bad3.encoder_depth = EncoderDepth::resnet18_like;
  bad3.input_width = 64;  // not divisible by 32
  bad3.input_height = 48;
  CHECK_THROWS_AS((void)build_networks(bad3, 1), ConfigError);
  NetworkConfig bad4 = tiny_config();
  bad4.pretrained_encoder = true;  // tiny encoders are always random
  CHECK_THROWS_AS((void)build_networks(bad4, 1), ConfigError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "xsdepth_ckpt_test.ckpt";
  NetworkBundle bundle = build_networks(tiny_config(), 51);
  save_checkpoint(bundle, 123, path);
  LoadedCheckpoint loaded = load_checkpoint(path);
  CHECK(loaded.step == 123);
  CHECK(hash_parameters(bundle.named_parameters()) ==
        hash_parameters(loaded.bundle.named_parameters()));

  // Forward outputs are identical bit for bit.
  ImagePlane img = random_image(3, 48, 64, 13);
  std::vector<DisparityMap> before = decode_disparity(
      bundle.depth_decoder, encode(*bundle.encoder_vis, img), bundle.config.d_max);
  std::vector<DisparityMap> after = decode_disparity(
      loaded.bundle.depth_decoder, encode(*loaded.bundle.encoder_vis, img),
      loaded.bundle.config.d_max);
  for (long i = 0; i < before[0].tensor().numel(); ++i)
    CHECK(before[0].tensor()[i] == after[0].tensor()[i]);
  fs::remove(path);
}

TEST_CASE("truncated checkpoints are reported as corrupt") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "xsdepth_ckpt_trunc.ckpt";
  NetworkBundle bundle = build_networks(tiny_config(), 53);
  save_checkpoint(bundle, 5, path);
  const auto full_size = fs::file_size(path);
  fs::resize_file(path, full_size / 2);
  CHECK_THROWS_AS((void)load_checkpoint(path), CheckpointError);
  fs::remove(path);
  CHECK_THROWS_AS((void)load_checkpoint(path), IoError);
}

TEST_CASE("checkpoint version mismatches name the versions") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "xsdepth_ckpt_version.ckpt";
  NetworkBundle bundle = build_networks(tiny_config(), 55);
  save_checkpoint(bundle, 1, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);  // version field follows the 8-byte magic
    const uint32_t bogus = 999;
    f.write(reinterpret_cast<const char*>(&bogus), 4);
  }
  bool threw = false;
  try {
    (void)load_checkpoint(path);
  } catch (const CheckpointError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("999") != std::string::npos);
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
  CHECK(threw);
  fs::remove(path);
}

TEST_CASE("pretrained encoder arrays load from a parameter file") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "xsdepth_pretrained_test";
  fs::create_directories(dir);
  NetworkConfig cfg;
  cfg.encoder_depth = EncoderDepth::resnet18_like;
  cfg.input_width = 64;
  cfg.input_height = 64;

  // Donor encoder arrays, stored under the generic "encoder." prefix.
  NetworkBundle donor = build_networks(cfg, 99);
  std::vector<NamedParam> donor_params;
  donor.encoder_vis->append_parameters("encoder", donor_params);
  const fs::path file = dir / "pretrained.params";
  save_parameter_arrays(donor_params, file);

  NetworkConfig with_pretrained = cfg;
  with_pretrained.pretrained_encoder = true;
  with_pretrained.pretrained_encoder_path = file.string();
  NetworkBundle loaded = build_networks(with_pretrained, 100);

  std::vector<NamedParam> got_vis, got_tir, want;
  loaded.encoder_vis->append_parameters("e", got_vis);
  loaded.encoder_tir->append_parameters("e", got_tir);
  donor.encoder_vis->append_parameters("e", want);
  REQUIRE(got_vis.size() == want.size());
  for (size_t i = 0; i < want.size(); ++i) {
    for (long k = 0; k < want[i].var->value.numel(); ++k) {
      CHECK(got_vis[i].var->value[k] == want[i].var->value[k]);
      CHECK(got_tir[i].var->value[k] == want[i].var->value[k]);
    }
  }
  // Non-encoder parameters still come from the build seed, not the file.
  CHECK(hash_parameters(loaded.named_parameters()) != hash_parameters(donor.named_parameters()));
  fs::remove_all(dir);
}
