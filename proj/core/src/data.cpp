#include "xsdepth/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "xsdepth/image_io.hpp"

namespace xsdepth {

namespace fs = std::filesystem;

namespace {

std::string six_digit(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

std::optional<fs::path> optional_file(const fs::path& dir, const std::string& name) {
  fs::path p = dir / name;
  if (fs::exists(p)) return p;
  return std::nullopt;
}

}  // namespace

StereoCalibration read_calibration(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open calibration file: " + path.string());
  StereoCalibration calib;
  std::string key;
  std::map<std::string, Scalar> values;
  Scalar v = 0;
  while (is >> key >> v) values[key] = v;
  auto get = [&](const char* k) {
    auto it = values.find(k);
    if (it == values.end())
      throw IoError("calibration file " + path.string() + " is missing key '" + k + "'");
    return it->second;
  };
  calib.focal_px = get("focal_px");
  calib.baseline_m = get("baseline_m");
  calib.native_width_px = static_cast<long>(get("native_width_px"));
  calib.validate();
  return calib;
}

void write_calibration(const fs::path& path, const StereoCalibration& calib) {
  calib.validate();
  std::ofstream os(path);
  if (!os) throw IoError("cannot write calibration file: " + path.string());
  os << "focal_px " << calib.focal_px << "\n";
  os << "baseline_m " << calib.baseline_m << "\n";
  os << "native_width_px " << calib.native_width_px << "\n";
}

DatasetManifest discover_dataset(const fs::path& root, const std::string& split) {
  DatasetManifest m;
  m.root = root;
  m.split = split;
  if (!fs::exists(root)) throw IoError("dataset root does not exist: " + root.string());
  m.calibration = read_calibration(root / "calibration.txt");

  const fs::path split_dir = root / split;
  if (!fs::exists(split_dir)) return m;  // empty split is a valid, empty sequence

  // Entries are keyed by filename stems present in tir_left; ordering is the
  // sorted relative path, which keeps iteration stable across processes.
  const fs::path tir_dir = split_dir / "tir_left";
  const fs::path vis_dir = split_dir / "vis_right";
  std::vector<std::string> stems;
  if (fs::exists(tir_dir))
    for (const auto& e : fs::directory_iterator(tir_dir))
      if (e.path().extension() == ".png") stems.push_back(e.path().filename().string());
  std::sort(stems.begin(), stems.end());

  for (const std::string& name : stems) {
    DatasetEntry entry;
    entry.id = fs::path(name).stem().string();
    entry.tir_left = tir_dir / name;
    entry.vis_right = vis_dir / name;
    if (!fs::exists(entry.vis_right))
      throw IoError("dataset entry " + entry.id + " is missing " + entry.vis_right.string());
    entry.vis_left = optional_file(split_dir / "vis_left", name);
    entry.tir_right = optional_file(split_dir / "tir_right", name);
    entry.depth = optional_file(split_dir / "depth", name);
    entry.disparity = optional_file(split_dir / "disparity", name);
    m.entries.push_back(std::move(entry));
  }
  return m;
}

namespace {

struct EntryReader {
  const DatasetEntry& entry;
  long tw, th;
  long native_w = 0, native_h = 0;

  // Every plane of an entry must share one native resolution before resizing.
  void check_native(const ImagePlane& img, const fs::path& path) {
    if (native_w == 0) {
      native_w = img.width();
      native_h = img.height();
      return;
    }
    if (img.width() != native_w || img.height() != native_h)
      throw IoError("dataset entry " + entry.id + ": resolution mismatch at " + path.string() +
                    " (" + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                    " vs " + std::to_string(native_w) + "x" + std::to_string(native_h) + ")");
  }

  ImagePlane image(const fs::path& path) {
    ImagePlane img = read_png8(path);
    check_native(img, path);
    if (img.width() == tw && img.height() == th) return img;
    return ImagePlane(resize_bilinear_tensor(img.tensor(), th, tw));
  }

  Tensor raw16(const fs::path& path) {
    Tensor raw = read_png16(path);
    check_native(ImagePlane(raw), path);
    return resize_nearest_tensor(raw, th, tw);
  }
};

}  // namespace

LoadedSample load_entry(const DatasetEntry& entry, long tw, long th) {
  EntryReader reader{entry, tw, th};
  LoadedSample s;
  s.id = entry.id;
  s.tir_left = reader.image(entry.tir_left);
  s.vis_right = reader.image(entry.vis_right);
  if (s.tir_left.channels() != 1)
    throw IoError("dataset entry " + entry.id + ": tir_left must be single channel");
  if (s.vis_right.channels() != 3)
    throw IoError("dataset entry " + entry.id + ": vis_right must be 3-channel");
  if (entry.vis_left) s.vis_left = reader.image(*entry.vis_left);
  if (entry.tir_right) s.tir_right = reader.image(*entry.tir_right);
  if (entry.depth) {
    // Millimeters -> meters; nearest-neighbor keeps the 0-invalid sentinel.
    Tensor meters = reader.raw16(*entry.depth);
    for (long i = 0; i < meters.numel(); ++i) meters[i] *= 1e-3;
    s.gt_depth = ImagePlane(std::move(meters));
  }
  if (entry.disparity) {
    Tensor frac = reader.raw16(*entry.disparity);
    for (long i = 0; i < frac.numel(); ++i) frac[i] /= kDisparityPngScale;
    s.gt_disparity = ImagePlane(std::move(frac));
  }
  return s;
}

std::vector<LoadedSample> load_dataset(const fs::path& root, const std::string& split,
                                       long target_width, long target_height) {
  const DatasetManifest manifest = discover_dataset(root, split);
  std::vector<LoadedSample> out;
  out.reserve(manifest.entries.size());
  for (const DatasetEntry& e : manifest.entries)
    out.push_back(load_entry(e, target_width, target_height));
  return out;
}

VisStereoSample to_vis_sample(const LoadedSample& s) {
  XS_REQUIRE(s.vis_left.has_value(), "sample " + s.id + " has no vis_left image");
  return {*s.vis_left, s.vis_right};
}

CrossSpectrumSample to_cross_sample(const LoadedSample& s) {
  return {s.tir_left, s.vis_right, s.gt_depth};
}

void SynthParams::validate() const {
  XS_CONFIG_REQUIRE(num_scenes >= 0 && num_test_scenes >= 0, "SynthParams: negative scene count");
  XS_CONFIG_REQUIRE(width >= 8 && height >= 8, "SynthParams: scene size too small");
  XS_CONFIG_REQUIRE(num_shapes >= 0, "SynthParams: negative shape count");
  XS_CONFIG_REQUIRE(disparity_lo >= 0.0 && disparity_hi >= disparity_lo,
                    "SynthParams: bad disparity range");
  XS_CONFIG_REQUIRE(disparity_hi <= DisparityMap::kDefaultDMax,
                    "SynthParams: disparity_hi exceeds d_max");
  XS_CONFIG_REQUIRE(texture_octaves >= 1, "SynthParams: texture_octaves must be >= 1");
  XS_CONFIG_REQUIRE(thermal.blur_sigma_px >= 0 && thermal.noise_std >= 0 &&
                        thermal.contrast_gamma > 0,
                    "SynthParams: bad thermal parameters");
}

std::vector<Scalar> gaussian_kernel(Scalar sigma_px) {
  if (sigma_px <= 0.0) return {1.0};
  const long radius = std::max<long>(1, static_cast<long>(std::ceil(3.0 * sigma_px)));
  std::vector<Scalar> k(2 * radius + 1);
  Scalar sum = 0;
  for (long i = -radius; i <= radius; ++i) {
    const Scalar v = std::exp(-0.5 * (static_cast<Scalar>(i) * i) / (sigma_px * sigma_px));
    k[i + radius] = v;
    sum += v;
  }
  for (Scalar& v : k) v /= sum;
  return k;
}

namespace {

Tensor gaussian_blur(const Tensor& img, Scalar sigma) {
  if (sigma <= 0.0) return img;
  const std::vector<Scalar> k = gaussian_kernel(sigma);
  const long r = (static_cast<long>(k.size()) - 1) / 2;
  const long c = img.channels(), h = img.height(), w = img.width();
  Tensor tmp({c, h, w}), out({c, h, w});
  for (long ch = 0; ch < c; ++ch)
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        Scalar s = 0;
        for (long i = -r; i <= r; ++i) {
          const long xi = std::clamp(x + i, 0L, w - 1);
          s += img.at(ch, y, xi) * k[i + r];
        }
        tmp.at(ch, y, x) = s;
      }
  for (long ch = 0; ch < c; ++ch)
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        Scalar s = 0;
        for (long i = -r; i <= r; ++i) {
          const long yi = std::clamp(y + i, 0L, h - 1);
          s += tmp.at(ch, yi, x) * k[i + r];
        }
        out.at(ch, y, x) = s;
      }
  return out;
}

// Multi-octave value noise in [0,1]; each octave is a bilinearly upsampled
// random lattice at doubling frequency and halving amplitude.
Tensor value_noise(long h, long w, int octaves, Rng& rng) {
  Tensor acc({1, h, w});
  Scalar amplitude = 1.0, total = 0.0;
  for (int o = 0; o < octaves; ++o) {
    const long cells_x = std::min<long>(w, 4L << o);
    const long cells_y = std::min<long>(h, 3L << o);
    Tensor lattice = random_uniform({1, cells_y, cells_x}, rng);
    Tensor up = resize_bilinear_tensor(lattice, h, w);
    for (long i = 0; i < acc.numel(); ++i) acc[i] += amplitude * up[i];
    total += amplitude;
    amplitude *= 0.5;
  }
  for (long i = 0; i < acc.numel(); ++i) acc[i] /= total;
  return acc;
}

struct Region {
  bool is_ellipse = false;
  Scalar cx = 0, cy = 0, rx = 0, ry = 0;  // center/extent in left-view pixels
  Scalar disparity = 0;                   // fraction of width
  Tensor texture;                          // [3,H,W] full-plane texture
};

bool region_contains(const Region& reg, Scalar x, Scalar y) {
  const Scalar dx = (x - reg.cx) / reg.rx;
  const Scalar dy = (y - reg.cy) / reg.ry;
  if (reg.is_ellipse) return dx * dx + dy * dy <= 1.0;
  return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
}

Scalar sample_texture(const Tensor& tex, long ch, Scalar x, Scalar y) {
  const long w = tex.width(), h = tex.height();
  Scalar xs = std::clamp(x, 0.0, static_cast<Scalar>(w - 1));
  Scalar ys = std::clamp(y, 0.0, static_cast<Scalar>(h - 1));
  const long x0 = std::min(static_cast<long>(std::floor(xs)), w - 2 >= 0 ? w - 2 : 0);
  const long y0 = std::min(static_cast<long>(std::floor(ys)), h - 2 >= 0 ? h - 2 : 0);
  const Scalar tx = xs - x0, ty = ys - y0;
  const Scalar v00 = tex.at(ch, y0, x0), v01 = tex.at(ch, y0, x0 + 1);
  const Scalar v10 = tex.at(ch, y0 + 1, x0), v11 = tex.at(ch, y0 + 1, x0 + 1);
  return (v00 * (1 - tx) + v01 * tx) * (1 - ty) + (v10 * (1 - tx) + v11 * tx) * ty;
}

// Per-region RGB texture: value noise shaped by a random color palette with
// strong contrast so photometric losses have gradient to work with.
Tensor make_texture(long h, long w, int octaves, Rng& rng) {
  Tensor noise = value_noise(h, w, octaves, rng);
  Tensor tex({3, h, w});
  const Scalar base_r = rng.uniform(0.05, 0.95), base_g = rng.uniform(0.05, 0.95),
               base_b = rng.uniform(0.05, 0.95);
  const Scalar gain = rng.uniform(0.5, 0.9);
  for (long i = 0; i < h * w; ++i) {
    const Scalar n = (noise[i] - 0.5) * 2.0 * gain;
    tex[i] = std::clamp(base_r + n, 0.0, 1.0);
    tex[h * w + i] = std::clamp(base_g + n * 0.8, 0.0, 1.0);
    tex[2 * h * w + i] = std::clamp(base_b + n * 1.2, 0.0, 1.0);
  }
  return tex;
}

}  // namespace

StereoCalibration synthetic_calibration(long width_px) {
  StereoCalibration c;
  c.focal_px = static_cast<Scalar>(width_px);
  c.baseline_m = 0.5;
  c.native_width_px = width_px;
  return c;
}

RenderedScene render_scene(const SynthParams& params, const std::string& split, int scene_index) {
  params.validate();
  // Stream derivation keeps train/test corpora and individual scenes
  // independent of each other and of scene count.
  const uint64_t split_tag = split == "test" ? 0x7465737400000000ULL : 0;
  Rng rng(params.seed ^ split_tag ^ (0x9e3779b97f4a7c15ULL * (scene_index + 1)));

  const long h = params.height, w = params.width;

  // Region disparities snap to whole-pixel shifts so the rendered right view
  // is an exact per-region copy of the left; photometric consistency then
  // fails only at occlusions, not from resampling blur.
  auto snap = [&](Scalar d) {
    const Scalar lo = std::ceil(params.disparity_lo * static_cast<Scalar>(w));
    const Scalar hi = std::floor(params.disparity_hi * static_cast<Scalar>(w));
    Scalar px = std::round(d * static_cast<Scalar>(w));
    px = std::clamp(px, std::min(lo, hi), std::max(lo, hi));
    return px / static_cast<Scalar>(w);
  };

  std::vector<Region> regions;
  Region bg;
  bg.is_ellipse = false;
  bg.cx = w / 2.0;
  bg.cy = h / 2.0;
  bg.rx = static_cast<Scalar>(w);  // covers everything
  bg.ry = static_cast<Scalar>(h);
  bg.disparity = snap(params.disparity_lo);
  bg.texture = make_texture(h, w, params.texture_octaves, rng);
  regions.push_back(std::move(bg));

  for (int i = 0; i < params.num_shapes; ++i) {
    Region reg;
    reg.is_ellipse = rng.uniform() < 0.5;
    reg.rx = rng.uniform(0.10, 0.28) * w;
    reg.ry = rng.uniform(0.12, 0.32) * h;
    reg.cx = rng.uniform(0.15, 0.85) * w;
    reg.cy = rng.uniform(0.15, 0.85) * h;
    reg.disparity = snap(rng.uniform(params.disparity_lo, params.disparity_hi));
    reg.texture = make_texture(h, w, params.texture_octaves, rng);
    regions.push_back(std::move(reg));
  }

  // Nearest-wins compositing: paint in ascending disparity so larger
  // disparities (nearer surfaces) overwrite farther ones.
  std::vector<size_t> order(regions.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return regions[a].disparity < regions[b].disparity;
  });

  Tensor left({3, h, w}), right({3, h, w});
  Tensor gt({1, h, w});
  Tensor id_left({1, h, w}), id_right({1, h, w});

  for (size_t oi : order) {
    const Region& reg = regions[oi];
    const Scalar shift = reg.disparity * static_cast<Scalar>(w);
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        if (region_contains(reg, static_cast<Scalar>(x), static_cast<Scalar>(y))) {
          for (long c = 0; c < 3; ++c) left.at(c, y, x) = reg.texture.at(c, y, x);
          gt.at(0, y, x) = reg.disparity;
          id_left.at(0, y, x) = static_cast<Scalar>(oi);
        }
        // Right view: a left-view point at xl appears at xl + shift, so the
        // pixel at x samples the region at xl = x - shift.
        const Scalar xl = static_cast<Scalar>(x) - shift;
        if (region_contains(reg, xl, static_cast<Scalar>(y))) {
          for (long c = 0; c < 3; ++c) right.at(c, y, x) = sample_texture(reg.texture, c, xl, y);
          id_right.at(0, y, x) = static_cast<Scalar>(oi);
        }
      }
  }

  RenderedScene scene;
  scene.vis_left = ImagePlane(std::move(left));
  scene.vis_right = ImagePlane(std::move(right));
  Rng thermal_rng = rng.fork(0x7468);
  scene.tir_left = simulate_thermal(scene.vis_left, params.thermal, thermal_rng);
  scene.gt_disparity = std::move(gt);
  scene.region_id_left = std::move(id_left);
  scene.region_id_right = std::move(id_right);
  for (const Region& r : regions) scene.region_disparity.push_back(r.disparity);
  return scene;
}

ImagePlane simulate_thermal(const ImagePlane& vis, const ThermalParams& params, Rng& rng) {
  XS_REQUIRE(vis.channels() == 3, "simulate_thermal: input must be 3-channel");
  const long h = vis.height(), w = vis.width();
  Tensor luma({1, h, w});
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      luma.at(0, y, x) =
          0.299 * vis.at(0, y, x) + 0.587 * vis.at(1, y, x) + 0.114 * vis.at(2, y, x);
  if (params.invert)
    for (long i = 0; i < luma.numel(); ++i) luma[i] = 1.0 - luma[i];
  luma = gaussian_blur(luma, params.blur_sigma_px);
  if (params.contrast_gamma != 1.0)
    for (long i = 0; i < luma.numel(); ++i)
      luma[i] = std::pow(std::clamp(luma[i], 0.0, 1.0), params.contrast_gamma);
  if (params.noise_std > 0.0)
    for (long i = 0; i < luma.numel(); ++i)
      luma[i] = std::clamp(luma[i] + rng.normal(0.0, params.noise_std), 0.0, 1.0);
  return ImagePlane(std::move(luma));
}

namespace {

void write_scene(const fs::path& split_dir, const std::string& id, const RenderedScene& scene,
                 const StereoCalibration& calib) {
  write_png8(split_dir / "vis_left" / (id + ".png"), scene.vis_left);
  write_png8(split_dir / "vis_right" / (id + ".png"), scene.vis_right);
  write_png8(split_dir / "tir_left" / (id + ".png"), scene.tir_left);

  const long h = scene.gt_disparity.height(), w = scene.gt_disparity.width();
  Tensor disp_raw({1, h, w});
  Tensor depth_mm({1, h, w});
  const Scalar fb = calib.focal_px * calib.baseline_m;
  for (long i = 0; i < h * w; ++i) {
    const Scalar d = scene.gt_disparity[i];
    disp_raw[i] = d * kDisparityPngScale;
    depth_mm[i] = d > 1e-6 ? 1000.0 * fb / (d * static_cast<Scalar>(calib.native_width_px)) : 0.0;
  }
  write_png16(split_dir / "disparity" / (id + ".png"), disp_raw);
  write_png16(split_dir / "depth" / (id + ".png"), depth_mm);
}

void generate_split(const SynthParams& params, const fs::path& root, const std::string& split,
                    int count, const StereoCalibration& calib) {
  if (count <= 0) return;
  const fs::path split_dir = root / split;
  for (const char* sub : {"vis_left", "vis_right", "tir_left", "depth", "disparity"})
    fs::create_directories(split_dir / sub);
  for (int i = 0; i < count; ++i)
    write_scene(split_dir, six_digit(i), render_scene(params, split, i), calib);
}

}  // namespace

DatasetManifest generate_synthetic_dataset(const SynthParams& params, const fs::path& out_root) {
  params.validate();
  std::error_code ec;
  fs::create_directories(out_root, ec);
  if (ec || !fs::exists(out_root))
    throw IoError("cannot create dataset root: " + out_root.string());
  const StereoCalibration calib = synthetic_calibration(params.width);
  write_calibration(out_root / "calibration.txt", calib);
  generate_split(params, out_root, "train", params.num_scenes, calib);
  generate_split(params, out_root, "test", params.num_test_scenes, calib);
  return discover_dataset(out_root, "train");
}

}  // namespace xsdepth
