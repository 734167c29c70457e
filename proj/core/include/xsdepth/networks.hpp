#pragma once

#include <memory>
#include <string>
#include <vector>

#include "xsdepth/geometry.hpp"
#include "xsdepth/ops.hpp"
#include "xsdepth/rng.hpp"

namespace xsdepth {

enum class EncoderDepth { tiny, resnet18_like };

struct NetworkConfig {
  EncoderDepth encoder_depth = EncoderDepth::tiny;
  int num_scales = 5;            // L: pyramid scales == discriminator count
  int num_disparity_scales = 4;  // decoder disparity outputs (finest first)
  int base_channels = 16;        // tiny stem width
  long input_width = 64;         // faithful mode: 512
  long input_height = 48;        // faithful mode: 320
  Scalar d_max = 0.3;
  Scalar init_std = 0.02;        // non-encoder weight init
  bool pretrained_encoder = false;
  std::string pretrained_encoder_path;

  void validate() const;
  // Pyramid channel widths, scale 0 (finest) .. L-1 (coarsest).
  std::vector<long> encoder_channels() const;
  // Downsampling divisor of pyramid scale i relative to the input.
  long scale_divisor(int i) const;
};

// L feature planes; scale i has half the resolution of scale i-1.
struct FeaturePyramid {
  std::vector<Var> scales;

  int num_scales() const { return static_cast<int>(scales.size()); }
  void validate() const;
};

struct NamedParam {
  std::string name;
  Var var;
};

struct Conv2dLayer {
  Var weight;  // [O,C,kh,kw]
  Var bias;    // [O]
  int stride = 1;
  int pad = 1;

  Var operator()(const Var& x) const { return conv2d(x, weight, bias, stride, pad); }
  long out_channels() const { return weight->value.dim(0); }
};

enum class WeightInit { gaussian, he };

Conv2dLayer make_conv(long in_c, long out_c, int kernel, int stride, Rng& rng, WeightInit init,
                      Scalar init_std);

class Encoder {
 public:
  virtual ~Encoder() = default;
  // 1-channel inputs are replicated to 3 channels so both spectra share one
  // architecture; TIR and VIS encoders differ only in parameters.
  virtual std::vector<Var> forward(const Var& image) const = 0;
  virtual void append_parameters(const std::string& prefix,
                                 std::vector<NamedParam>& out) const = 0;
};

std::unique_ptr<Encoder> make_encoder(const NetworkConfig& cfg, Rng& rng);

// Monodepth-style U-Net decoder over the pyramid. Disparity heads apply
// sigmoid * d_max, so outputs always lie in [0, d_max].
class DepthDecoder {
 public:
  DepthDecoder() = default;
  DepthDecoder(const NetworkConfig& cfg, Rng& rng);
  // Returns num_disparity_scales maps, finest (full resolution) first.
  std::vector<Var> forward(const std::vector<Var>& pyramid) const;
  void append_parameters(const std::string& prefix, std::vector<NamedParam>& out) const;

 private:
  struct Level {
    Conv2dLayer up_a, up_b;
    Conv2dLayer head;  // present when this level emits disparity
    bool has_head = false;
    bool has_skip = false;
    int skip_scale = -1;  // pyramid index concatenated after upsampling
  };
  std::vector<Level> levels_;  // index = target level, 0 is full resolution
  int start_level_ = 0;
  int expected_scales_ = 0;
  Scalar d_max_ = 0.3;
};

// Same up path as DepthDecoder with a single full-resolution sigmoid head;
// emits an image in [0,1] with 1 (TIR) or 3 (VIS) channels.
class ReconDecoder {
 public:
  ReconDecoder() = default;
  ReconDecoder(const NetworkConfig& cfg, long out_channels, Rng& rng);
  Var forward(const std::vector<Var>& pyramid) const;
  void append_parameters(const std::string& prefix, std::vector<NamedParam>& out) const;
  long out_channels() const { return out_channels_; }

 private:
  struct Level {
    Conv2dLayer up_a, up_b;
    bool has_skip = false;
    int skip_scale = -1;
  };
  std::vector<Level> levels_;
  Conv2dLayer head_;
  int start_level_ = 0;
  int expected_scales_ = 0;
  long out_channels_ = 0;
};

// PatchGAN discriminator for one pyramid scale: strided conv + leaky ReLU
// stack emitting a plane of patch logits. Deeper scales use fewer
// downsampling stages so the logit plane stays at least 1x1.
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;
  PatchDiscriminator(long in_channels, int num_downs, Rng& rng, Scalar init_std);
  Var forward(const Var& features) const;
  void append_parameters(const std::string& prefix, std::vector<NamedParam>& out) const;
  int num_downs() const { return static_cast<int>(downs_.size()); }

 private:
  std::vector<Conv2dLayer> downs_;
  Conv2dLayer head_;
};

// All trainable components. E_V and E_T share architecture, not parameters;
// the depth decoder is shared across every branch.
struct NetworkBundle {
  NetworkConfig config;
  std::unique_ptr<Encoder> encoder_vis;   // E_V
  std::unique_ptr<Encoder> encoder_tir;   // E_T
  DepthDecoder depth_decoder;
  ReconDecoder recon_vis;                 // R_V, 3-channel output
  ReconDecoder recon_tir;                 // R_T, 1-channel output
  std::vector<PatchDiscriminator> discriminators;  // D_1..D_L

  std::vector<NamedParam> named_parameters() const;
  std::vector<Var> params_vis_depth() const;   // E_V + depth decoder
  std::vector<Var> params_transfer(bool include_decoder) const;  // E_T, R_V, R_T
  std::vector<Var> params_discriminator(int i) const;
};

// Deterministic given seed. Encoder weights use He initialization unless a
// pretrained checkpoint path is configured; all other networks use
// N(0, init_std^2) weights and zero biases.
NetworkBundle build_networks(const NetworkConfig& cfg, uint64_t seed);

// Inference-mode wrappers over the Var paths.
FeaturePyramid encode(const Encoder& encoder, const ImagePlane& image);
std::vector<DisparityMap> decode_disparity(const DepthDecoder& decoder,
                                           const FeaturePyramid& pyramid, Scalar d_max);
std::vector<ImagePlane> discriminate(const std::vector<PatchDiscriminator>& discriminators,
                                     const FeaturePyramid& pyramid);
ImagePlane reconstruct(const ReconDecoder& decoder, const FeaturePyramid& pyramid);

// Replicates a 1-channel plane to the encoder's 3-channel input; passes
// 3-channel planes through. Part of the public encode contract.
Var expand_to_encoder_input(const Var& image);

}  // namespace xsdepth
