#include "xsdepth/evaluation.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "xsdepth/image_io.hpp"

namespace xsdepth {

MetricsReport compute_depth_metrics(const ImagePlane& pred_depth_m, const ImagePlane& gt_depth_m,
                                    const DepthRange& range) {
  XS_REQUIRE(pred_depth_m.tensor().same_shape(gt_depth_m.tensor()),
             "compute_depth_metrics: shape mismatch");
  XS_REQUIRE(range.min_m > 0 && range.max_m > range.min_m,
             "compute_depth_metrics: bad depth range");
  const Tensor& pred = pred_depth_m.tensor();
  const Tensor& gt = gt_depth_m.tensor();

  long n = 0;
  Scalar abs_rel = 0, sq_rel = 0, sq_err = 0, sq_log_err = 0;
  long d1 = 0, d2 = 0, d3 = 0;
  const Scalar t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;
  for (long i = 0; i < gt.numel(); ++i) {
    const Scalar g = gt[i];
    if (g < range.min_m || g > range.max_m) continue;
    const Scalar p = std::min(range.max_m, std::max(range.min_m, pred[i]));
    const Scalar diff = p - g;
    abs_rel += std::abs(diff) / g;
    sq_rel += diff * diff / g;
    sq_err += diff * diff;
    const Scalar log_diff = std::log(p) - std::log(g);
    sq_log_err += log_diff * log_diff;
    const Scalar ratio = std::max(p / g, g / p);
    if (ratio < t1) ++d1;
    if (ratio < t2) ++d2;
    if (ratio < t3) ++d3;
    ++n;
  }
  XS_REQUIRE(n > 0, "compute_depth_metrics: no valid ground-truth pixels in range");

  MetricsReport r;
  const Scalar inv = 1.0 / static_cast<Scalar>(n);
  r.abs_rel = abs_rel * inv;
  r.sq_rel = sq_rel * inv;
  r.rmse = std::sqrt(sq_err * inv);
  r.rmse_log = std::sqrt(sq_log_err * inv);
  r.delta1 = static_cast<Scalar>(d1) * inv;
  r.delta2 = static_cast<Scalar>(d2) * inv;
  r.delta3 = static_cast<Scalar>(d3) * inv;
  r.valid_pixels = n;
  r.num_images = 1;
  return r;
}

MetricsReport aggregate_reports(const std::vector<MetricsReport>& reports) {
  XS_REQUIRE(!reports.empty(), "aggregate_reports: empty report list");
  MetricsReport agg;
  for (const MetricsReport& r : reports) {
    agg.abs_rel += r.abs_rel;
    agg.sq_rel += r.sq_rel;
    agg.rmse += r.rmse;
    agg.rmse_log += r.rmse_log;
    agg.delta1 += r.delta1;
    agg.delta2 += r.delta2;
    agg.delta3 += r.delta3;
    agg.valid_pixels += r.valid_pixels;
    agg.num_images += r.num_images;
  }
  const Scalar inv = 1.0 / static_cast<Scalar>(reports.size());
  agg.abs_rel *= inv;
  agg.sq_rel *= inv;
  agg.rmse *= inv;
  agg.rmse_log *= inv;
  agg.delta1 *= inv;
  agg.delta2 *= inv;
  agg.delta3 *= inv;
  return agg;
}

Scalar disparity_abs_rel(const ImagePlane& pred_disp, const ImagePlane& gt_disp) {
  XS_REQUIRE(pred_disp.tensor().same_shape(gt_disp.tensor()), "disparity_abs_rel: shape mismatch");
  const Tensor& p = pred_disp.tensor();
  const Tensor& g = gt_disp.tensor();
  Scalar acc = 0;
  long n = 0;
  for (long i = 0; i < g.numel(); ++i) {
    if (g[i] <= 0) continue;
    acc += std::abs(p[i] - g[i]) / g[i];
    ++n;
  }
  XS_REQUIRE(n > 0, "disparity_abs_rel: no positive ground-truth disparities");
  return acc / static_cast<Scalar>(n);
}

EvaluationResult evaluate_model(const NetworkBundle& bundle,
                                const std::vector<LoadedSample>& dataset,
                                const StereoCalibration& calib, const EvaluateOptions& opts) {
  bool any_gt = false;
  for (const LoadedSample& s : dataset) any_gt |= s.gt_depth.has_value();
  XS_REQUIRE(any_gt, "evaluate_model: dataset has no ground-truth depth");

  EvaluationResult result;
  std::vector<MetricsReport> reports;
  for (const LoadedSample& s : dataset) {
    if (!s.gt_depth) continue;
    // Cross-spectrum pass over the pair: T_L through the TIR encoder drives
    // the left disparity used for metrics; V_R goes through the VIS encoder
    // as in training (its right-view disparity is not scored).
    FeaturePyramid pyr_l = encode(*bundle.encoder_tir, s.tir_left);
    FeaturePyramid pyr_r = encode(*bundle.encoder_vis, s.vis_right);
    pyr_r.validate();
    std::vector<DisparityMap> disps =
        decode_disparity(bundle.depth_decoder, pyr_l, bundle.config.d_max);
    const DisparityMap& finest = disps[0];
    ImagePlane pred_depth =
        disparity_to_depth(finest, calib, finest.width());

    if (opts.dump_dir) {
      std::error_code ec;
      std::filesystem::create_directories(*opts.dump_dir, ec);
      write_colormap_png(*opts.dump_dir / (s.id + "_disparity.png"), finest.tensor());
      write_colormap_png(*opts.dump_dir / (s.id + "_depth.png"), pred_depth.tensor());
    }

    MetricsReport r;
    try {
      r = compute_depth_metrics(pred_depth, *s.gt_depth, opts.range);
    } catch (const ContractError&) {
      continue;  // no valid pixels in this image
    }
    reports.push_back(r);
    result.per_image.push_back({s.id, r});
  }
  XS_REQUIRE(!reports.empty(), "evaluate_model: no image had valid ground-truth pixels");
  result.aggregate = aggregate_reports(reports);
  return result;
}

namespace {

nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["abs_rel"] = r.abs_rel;
  j["sq_rel"] = r.sq_rel;
  j["rmse"] = r.rmse;
  j["rmse_log"] = r.rmse_log;
  j["delta1"] = r.delta1;
  j["delta2"] = r.delta2;
  j["delta3"] = r.delta3;
  j["valid_pixels"] = r.valid_pixels;
  j["num_images"] = r.num_images;
  return j;
}

}  // namespace

std::string evaluation_to_json(const EvaluationResult& result) {
  nlohmann::json j;
  j["aggregate"] = report_to_json(result.aggregate);
  nlohmann::json per = nlohmann::json::array();
  for (const PerImageRecord& rec : result.per_image) {
    nlohmann::json e = report_to_json(rec.metrics);
    e["id"] = rec.id;
    per.push_back(e);
  }
  j["per_image"] = per;
  return j.dump(2);
}

void write_evaluation_report(const EvaluationResult& result, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write evaluation report: " + path.string());
  os << evaluation_to_json(result) << "\n";
}

}  // namespace xsdepth
