#include "xsdepth/networks.hpp"

#include <algorithm>
#include <cmath>

#include "xsdepth/checkpoint.hpp"

namespace xsdepth {

void NetworkConfig::validate() const {
  XS_CONFIG_REQUIRE(num_scales >= 2, "NetworkConfig: num_scales must be >= 2");
  XS_CONFIG_REQUIRE(num_disparity_scales >= 1 && num_disparity_scales <= num_scales,
                    "NetworkConfig: num_disparity_scales must be in [1, num_scales]");
  XS_CONFIG_REQUIRE(base_channels >= 1, "NetworkConfig: base_channels must be >= 1");
  XS_CONFIG_REQUIRE(d_max > 0.0, "NetworkConfig: d_max must be > 0");
  XS_CONFIG_REQUIRE(init_std > 0.0, "NetworkConfig: init_std must be > 0");
  XS_CONFIG_REQUIRE(input_width >= 2 && input_height >= 2, "NetworkConfig: degenerate input size");
  if (encoder_depth == EncoderDepth::resnet18_like)
    XS_CONFIG_REQUIRE(num_scales == 5, "NetworkConfig: resnet18-like encoder requires 5 scales");
  const long deepest = scale_divisor(num_scales - 1);
  XS_CONFIG_REQUIRE(input_width % deepest == 0 && input_height % deepest == 0,
                    "NetworkConfig: input size must be divisible by the deepest scale divisor (" +
                        std::to_string(deepest) + ")");
}

std::vector<long> NetworkConfig::encoder_channels() const {
  std::vector<long> ch;
  if (encoder_depth == EncoderDepth::tiny) {
    for (int i = 0; i < num_scales; ++i)
      ch.push_back(static_cast<long>(base_channels) * std::min(1L << i, 8L));
  } else {
    ch = {64, 64, 128, 256, 512};
  }
  return ch;
}

long NetworkConfig::scale_divisor(int i) const {
  return encoder_depth == EncoderDepth::tiny ? (1L << i) : (1L << (i + 1));
}

void FeaturePyramid::validate() const {
  XS_REQUIRE(!scales.empty(), "FeaturePyramid: empty");
  for (size_t i = 1; i < scales.size(); ++i) {
    const long h0 = scales[i - 1]->value.height(), w0 = scales[i - 1]->value.width();
    const long h1 = scales[i]->value.height(), w1 = scales[i]->value.width();
    XS_REQUIRE(h1 * 2 == h0 && w1 * 2 == w0, "FeaturePyramid: resolutions must halve per scale");
  }
}

Conv2dLayer make_conv(long in_c, long out_c, int kernel, int stride, Rng& rng, WeightInit init,
                      Scalar init_std) {
  Conv2dLayer layer;
  Scalar stddev = init_std;
  if (init == WeightInit::he)
    stddev = std::sqrt(2.0 / static_cast<Scalar>(in_c * kernel * kernel));
  layer.weight = parameter(random_normal({out_c, in_c, kernel, kernel}, rng, 0.0, stddev));
  layer.bias = parameter(Tensor::zeros({out_c}));
  layer.stride = stride;
  layer.pad = kernel / 2;
  return layer;
}

namespace {

void push_conv_params(const std::string& prefix, const Conv2dLayer& c,
                      std::vector<NamedParam>& out) {
  out.push_back({prefix + ".weight", c.weight});
  out.push_back({prefix + ".bias", c.bias});
}

// --- encoders ---

class TinyEncoder : public Encoder {
 public:
  TinyEncoder(const NetworkConfig& cfg, Rng& rng) {
    const std::vector<long> ch = cfg.encoder_channels();
    stem_ = make_conv(3, ch[0], 3, 1, rng, WeightInit::he, cfg.init_std);
    for (int i = 1; i < cfg.num_scales; ++i) {
      stages_.push_back({make_conv(ch[i - 1], ch[i], 3, 2, rng, WeightInit::he, cfg.init_std),
                         make_conv(ch[i], ch[i], 3, 1, rng, WeightInit::he, cfg.init_std)});
    }
  }

  std::vector<Var> forward(const Var& image) const override {
    Var x = elu_v(stem_(expand_to_encoder_input(image)));
    std::vector<Var> scales = {x};
    for (const auto& st : stages_) {
      x = elu_v(st.down(x));
      x = elu_v(st.same(x));
      scales.push_back(x);
    }
    return scales;
  }

  void append_parameters(const std::string& prefix,
                         std::vector<NamedParam>& out) const override {
    push_conv_params(prefix + ".stem", stem_, out);
    for (size_t i = 0; i < stages_.size(); ++i) {
      push_conv_params(prefix + ".stage" + std::to_string(i + 1) + ".down", stages_[i].down, out);
      push_conv_params(prefix + ".stage" + std::to_string(i + 1) + ".same", stages_[i].same, out);
    }
  }

 private:
  struct Stage {
    Conv2dLayer down, same;
  };
  Conv2dLayer stem_;
  std::vector<Stage> stages_;
};

// Residual pairs with the resnet18 stage widths. Normalization layers are
// omitted: training runs at batch size 1, where batch norm degenerates
// anyway, and the desk-scale capacity is the tiny encoder.
class ResnetLikeEncoder : public Encoder {
 public:
  ResnetLikeEncoder(const NetworkConfig& cfg, Rng& rng) {
    stem_ = make_conv(3, 64, 7, 2, rng, WeightInit::he, cfg.init_std);
    const long widths[4] = {64, 128, 256, 512};
    long in_c = 64;
    for (int s = 0; s < 4; ++s) {
      stages_.push_back({make_block(in_c, widths[s], 2, rng), make_block(widths[s], widths[s], 1, rng)});
      in_c = widths[s];
    }
  }

  std::vector<Var> forward(const Var& image) const override {
    Var x = relu_v(stem_(expand_to_encoder_input(image)));
    std::vector<Var> scales = {x};
    for (const auto& st : stages_) {
      x = run_block(st.a, x);
      x = run_block(st.b, x);
      scales.push_back(x);
    }
    return scales;
  }

  void append_parameters(const std::string& prefix,
                         std::vector<NamedParam>& out) const override {
    push_conv_params(prefix + ".stem", stem_, out);
    for (size_t i = 0; i < stages_.size(); ++i) {
      const std::string sp = prefix + ".stage" + std::to_string(i + 1);
      append_block_params(sp + ".block0", stages_[i].a, out);
      append_block_params(sp + ".block1", stages_[i].b, out);
    }
  }

 private:
  struct Block {
    Conv2dLayer conv1, conv2;
    Conv2dLayer proj;  // 1x1 shortcut when shape changes
    bool has_proj = false;
  };
  struct Stage {
    Block a, b;
  };

  Block make_block(long in_c, long out_c, int stride, Rng& rng) {
    Block b;
    b.conv1 = make_conv(in_c, out_c, 3, stride, rng, WeightInit::he, 0.02);
    b.conv2 = make_conv(out_c, out_c, 3, 1, rng, WeightInit::he, 0.02);
    if (stride != 1 || in_c != out_c) {
      b.proj = make_conv(in_c, out_c, 1, stride, rng, WeightInit::he, 0.02);
      b.has_proj = true;
    }
    return b;
  }

  static Var run_block(const Block& b, const Var& x) {
    Var main = b.conv2(relu_v(b.conv1(x)));
    Var skip = b.has_proj ? b.proj(x) : x;
    return relu_v(add(main, skip));
  }

  static void append_block_params(const std::string& prefix, const Block& b,
                                  std::vector<NamedParam>& out) {
    push_conv_params(prefix + ".conv1", b.conv1, out);
    push_conv_params(prefix + ".conv2", b.conv2, out);
    if (b.has_proj) push_conv_params(prefix + ".proj", b.proj, out);
  }

  Conv2dLayer stem_;
  std::vector<Stage> stages_;
};

// Decoder plan shared by DepthDecoder and ReconDecoder.
struct DecoderPlan {
  int start_level;                 // level of the deepest pyramid scale
  std::vector<long> dec_channels;  // per target level 0..start_level-1
  std::vector<int> skip_scale;     // pyramid index feeding level j, -1 if none
  std::vector<long> skip_channels;
  long deepest_channels;
};

DecoderPlan make_plan(const NetworkConfig& cfg) {
  DecoderPlan p;
  const std::vector<long> enc = cfg.encoder_channels();
  const bool tiny = cfg.encoder_depth == EncoderDepth::tiny;
  p.start_level = tiny ? cfg.num_scales - 1 : cfg.num_scales;
  p.deepest_channels = enc.back();
  p.dec_channels.resize(p.start_level);
  p.skip_scale.assign(p.start_level, -1);
  p.skip_channels.assign(p.start_level, 0);
  const long cap = tiny ? static_cast<long>(cfg.base_channels) * 8 : 256;
  for (int j = 0; j < p.start_level; ++j) {
    const long base = tiny ? cfg.base_channels : 16;
    p.dec_channels[j] = std::min(base * (1L << j), cap);
    const int scale = tiny ? j : j - 1;  // pyramid index at this level
    if (scale >= 0 && scale < cfg.num_scales - 1) {
      p.skip_scale[j] = scale;
      p.skip_channels[j] = enc[scale];
    }
  }
  return p;
}

}  // namespace

Var expand_to_encoder_input(const Var& image) {
  const long c = image->value.channels();
  if (c == 3) return image;
  XS_REQUIRE(c == 1, "encode: image must have 1 or 3 channels");
  return concat_channels({image, image, image});
}

std::unique_ptr<Encoder> make_encoder(const NetworkConfig& cfg, Rng& rng) {
  if (cfg.encoder_depth == EncoderDepth::tiny) return std::make_unique<TinyEncoder>(cfg, rng);
  return std::make_unique<ResnetLikeEncoder>(cfg, rng);
}

DepthDecoder::DepthDecoder(const NetworkConfig& cfg, Rng& rng) {
  const DecoderPlan plan = make_plan(cfg);
  start_level_ = plan.start_level;
  expected_scales_ = cfg.num_scales;
  d_max_ = cfg.d_max;
  levels_.resize(plan.start_level);
  for (int j = plan.start_level - 1; j >= 0; --j) {
    Level& lv = levels_[j];
    const long in_a = (j == plan.start_level - 1) ? plan.deepest_channels : plan.dec_channels[j + 1];
    lv.up_a = make_conv(in_a, plan.dec_channels[j], 3, 1, rng, WeightInit::gaussian, cfg.init_std);
    lv.has_skip = plan.skip_scale[j] >= 0;
    lv.skip_scale = plan.skip_scale[j];
    lv.up_b = make_conv(plan.dec_channels[j] + plan.skip_channels[j], plan.dec_channels[j], 3, 1,
                        rng, WeightInit::gaussian, cfg.init_std);
    if (j < cfg.num_disparity_scales) {
      lv.head = make_conv(plan.dec_channels[j], 1, 3, 1, rng, WeightInit::gaussian, cfg.init_std);
      lv.has_head = true;
    }
  }
}

std::vector<Var> DepthDecoder::forward(const std::vector<Var>& pyramid) const {
  XS_REQUIRE(static_cast<int>(pyramid.size()) == expected_scales_,
             "decode_disparity: pyramid scale count mismatch");
  std::vector<Var> disparities(levels_.size());
  int emitted = 0;
  Var x = pyramid.back();
  for (int j = start_level_ - 1; j >= 0; --j) {
    const Level& lv = levels_[j];
    x = elu_v(lv.up_a(x));
    x = upsample_nearest2x(x);
    if (lv.has_skip) x = concat_channels({x, pyramid[lv.skip_scale]});
    x = elu_v(lv.up_b(x));
    if (lv.has_head) {
      disparities[j] = mul_scalar(sigmoid_v(lv.head(x)), d_max_);
      ++emitted;
    }
  }
  disparities.resize(emitted);  // heads occupy levels 0..n-1
  return disparities;
}

void DepthDecoder::append_parameters(const std::string& prefix,
                                     std::vector<NamedParam>& out) const {
  for (size_t j = 0; j < levels_.size(); ++j) {
    const std::string lp = prefix + ".level" + std::to_string(j);
    push_conv_params(lp + ".up_a", levels_[j].up_a, out);
    push_conv_params(lp + ".up_b", levels_[j].up_b, out);
    if (levels_[j].has_head) push_conv_params(lp + ".head", levels_[j].head, out);
  }
}

ReconDecoder::ReconDecoder(const NetworkConfig& cfg, long out_channels, Rng& rng)
    : out_channels_(out_channels) {
  const DecoderPlan plan = make_plan(cfg);
  start_level_ = plan.start_level;
  expected_scales_ = cfg.num_scales;
  levels_.resize(plan.start_level);
  for (int j = plan.start_level - 1; j >= 0; --j) {
    Level& lv = levels_[j];
    const long in_a = (j == plan.start_level - 1) ? plan.deepest_channels : plan.dec_channels[j + 1];
    lv.up_a = make_conv(in_a, plan.dec_channels[j], 3, 1, rng, WeightInit::gaussian, cfg.init_std);
    lv.has_skip = plan.skip_scale[j] >= 0;
    lv.skip_scale = plan.skip_scale[j];
    lv.up_b = make_conv(plan.dec_channels[j] + plan.skip_channels[j], plan.dec_channels[j], 3, 1,
                        rng, WeightInit::gaussian, cfg.init_std);
  }
  head_ = make_conv(plan.dec_channels[0], out_channels, 3, 1, rng, WeightInit::gaussian,
                    cfg.init_std);
}

Var ReconDecoder::forward(const std::vector<Var>& pyramid) const {
  XS_REQUIRE(static_cast<int>(pyramid.size()) == expected_scales_,
             "reconstruct: pyramid scale count mismatch");
  Var x = pyramid.back();
  for (int j = start_level_ - 1; j >= 0; --j) {
    const Level& lv = levels_[j];
    x = elu_v(lv.up_a(x));
    x = upsample_nearest2x(x);
    if (lv.has_skip) x = concat_channels({x, pyramid[lv.skip_scale]});
    x = elu_v(lv.up_b(x));
  }
  return sigmoid_v(head_(x));
}

void ReconDecoder::append_parameters(const std::string& prefix,
                                     std::vector<NamedParam>& out) const {
  for (size_t j = 0; j < levels_.size(); ++j) {
    const std::string lp = prefix + ".level" + std::to_string(j);
    push_conv_params(lp + ".up_a", levels_[j].up_a, out);
    push_conv_params(lp + ".up_b", levels_[j].up_b, out);
  }
  push_conv_params(prefix + ".head", head_, out);
}

PatchDiscriminator::PatchDiscriminator(long in_channels, int num_downs, Rng& rng,
                                       Scalar init_std) {
  XS_REQUIRE(num_downs >= 1, "PatchDiscriminator: need at least one downsampling stage");
  long c_in = in_channels;
  long c_out = 64;
  for (int k = 0; k < num_downs; ++k) {
    downs_.push_back(make_conv(c_in, c_out, 3, 2, rng, WeightInit::gaussian, init_std));
    c_in = c_out;
    c_out = std::min<long>(c_out * 2, 256);
  }
  head_ = make_conv(c_in, 1, 3, 1, rng, WeightInit::gaussian, init_std);
}

Var PatchDiscriminator::forward(const Var& features) const {
  Var x = features;
  for (const auto& down : downs_) x = leaky_relu_v(down(x), 0.2);
  return head_(x);
}

void PatchDiscriminator::append_parameters(const std::string& prefix,
                                           std::vector<NamedParam>& out) const {
  for (size_t k = 0; k < downs_.size(); ++k)
    push_conv_params(prefix + ".down" + std::to_string(k), downs_[k], out);
  push_conv_params(prefix + ".head", head_, out);
}

std::vector<NamedParam> NetworkBundle::named_parameters() const {
  std::vector<NamedParam> out;
  encoder_vis->append_parameters("encoder_vis", out);
  encoder_tir->append_parameters("encoder_tir", out);
  depth_decoder.append_parameters("depth_decoder", out);
  recon_vis.append_parameters("recon_vis", out);
  recon_tir.append_parameters("recon_tir", out);
  for (size_t i = 0; i < discriminators.size(); ++i)
    discriminators[i].append_parameters("discriminator" + std::to_string(i), out);
  return out;
}

namespace {

std::vector<Var> collect_with_prefix(const NetworkBundle& bundle,
                                     const std::vector<std::string>& prefixes) {
  std::vector<Var> out;
  for (const NamedParam& p : bundle.named_parameters())
    for (const std::string& pre : prefixes)
      if (p.name.rfind(pre, 0) == 0) {
        out.push_back(p.var);
        break;
      }
  return out;
}

}  // namespace

std::vector<Var> NetworkBundle::params_vis_depth() const {
  return collect_with_prefix(*this, {"encoder_vis", "depth_decoder"});
}

std::vector<Var> NetworkBundle::params_transfer(bool include_decoder) const {
  std::vector<std::string> prefixes = {"encoder_tir", "recon_vis", "recon_tir"};
  if (include_decoder) prefixes.push_back("depth_decoder");
  return collect_with_prefix(*this, prefixes);
}

std::vector<Var> NetworkBundle::params_discriminator(int i) const {
  return collect_with_prefix(*this, {"discriminator" + std::to_string(i) + "."});
}

NetworkBundle build_networks(const NetworkConfig& cfg, uint64_t seed) {
  cfg.validate();
  if (cfg.pretrained_encoder)
    XS_CONFIG_REQUIRE(cfg.encoder_depth == EncoderDepth::resnet18_like,
                      "NetworkConfig: pretrained encoder weights require the resnet18-like mode");
  Rng rng(seed);
  NetworkBundle bundle;
  bundle.config = cfg;
  bundle.encoder_vis = make_encoder(cfg, rng);
  bundle.encoder_tir = make_encoder(cfg, rng);
  bundle.depth_decoder = DepthDecoder(cfg, rng);
  bundle.recon_vis = ReconDecoder(cfg, 3, rng);
  bundle.recon_tir = ReconDecoder(cfg, 1, rng);
  const std::vector<long> enc_ch = cfg.encoder_channels();
  for (int i = 0; i < cfg.num_scales; ++i) {
    bundle.discriminators.emplace_back(enc_ch[i], std::max(1, 4 - i), rng, cfg.init_std);
  }
  if (cfg.pretrained_encoder) {
    const auto arrays = read_parameter_arrays(cfg.pretrained_encoder_path);
    for (auto* enc : {bundle.encoder_vis.get(), bundle.encoder_tir.get()}) {
      std::vector<NamedParam> params;
      enc->append_parameters("encoder", params);
      for (NamedParam& p : params) {
        auto it = arrays.find(p.name);
        XS_CONFIG_REQUIRE(it != arrays.end(),
                          "pretrained encoder file is missing array " + p.name);
        XS_CONFIG_REQUIRE(it->second.same_shape(p.var->value),
                          "pretrained encoder array shape mismatch for " + p.name);
        p.var->value = it->second;
      }
    }
  }
  return bundle;
}

FeaturePyramid encode(const Encoder& encoder, const ImagePlane& image) {
  FeaturePyramid pyr;
  std::vector<Var> scales = encoder.forward(constant(image.tensor()));
  for (Var& s : scales) pyr.scales.push_back(constant(std::move(s->value)));
  pyr.validate();
  return pyr;
}

std::vector<DisparityMap> decode_disparity(const DepthDecoder& decoder,
                                           const FeaturePyramid& pyramid, Scalar d_max) {
  std::vector<DisparityMap> out;
  for (const Var& d : decoder.forward(pyramid.scales)) out.emplace_back(d->value, d_max);
  return out;
}

std::vector<ImagePlane> discriminate(const std::vector<PatchDiscriminator>& discriminators,
                                     const FeaturePyramid& pyramid) {
  XS_REQUIRE(discriminators.size() == pyramid.scales.size(),
             "discriminate: pyramid length must equal discriminator count");
  std::vector<ImagePlane> logits;
  for (size_t i = 0; i < discriminators.size(); ++i)
    logits.emplace_back(discriminators[i].forward(pyramid.scales[i])->value);
  return logits;
}

ImagePlane reconstruct(const ReconDecoder& decoder, const FeaturePyramid& pyramid) {
  return ImagePlane(decoder.forward(pyramid.scales)->value);
}

}  // namespace xsdepth
