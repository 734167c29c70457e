#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xsdepth/data.hpp"
#include "xsdepth/networks.hpp"

namespace xsdepth {

// The seven evaluation numbers plus bookkeeping.
struct MetricsReport {
  Scalar abs_rel = 0, sq_rel = 0, rmse = 0, rmse_log = 0;
  Scalar delta1 = 0, delta2 = 0, delta3 = 0;
  long valid_pixels = 0;
  long num_images = 0;
};

struct DepthRange {
  Scalar min_m = 0.1;
  Scalar max_m = 80.0;
};

// Masked single-image metrics: mask = gt in [min,max] (0 stays invalid),
// predictions clamped to the range before comparison, no median rescaling.
// Throws ContractError when the mask is empty.
MetricsReport compute_depth_metrics(const ImagePlane& pred_depth_m, const ImagePlane& gt_depth_m,
                                    const DepthRange& range);

// Mean of per-image metrics; valid_pixels and num_images accumulate.
MetricsReport aggregate_reports(const std::vector<MetricsReport>& reports);

struct PerImageRecord {
  std::string id;
  MetricsReport metrics;
};

struct EvaluationResult {
  MetricsReport aggregate;
  std::vector<PerImageRecord> per_image;
};

struct EvaluateOptions {
  DepthRange range;
  std::optional<std::filesystem::path> dump_dir;  // colormapped disparity/depth previews
};

// Cross-spectrum protocol: encode T_L with E_T and V_R with E_V, decode the
// finest left disparity, convert to meters with the calibration, compare to
// ground truth. Images lacking gt depth (or with no valid pixels) are
// skipped; an entirely empty evaluation throws.
EvaluationResult evaluate_model(const NetworkBundle& bundle,
                                const std::vector<LoadedSample>& dataset,
                                const StereoCalibration& calib, const EvaluateOptions& opts);

// Disparity-space abs rel against dense synthetic ground truth (all pixels).
Scalar disparity_abs_rel(const ImagePlane& pred_disp, const ImagePlane& gt_disp);

std::string evaluation_to_json(const EvaluationResult& result);
void write_evaluation_report(const EvaluationResult& result, const std::filesystem::path& path);

}  // namespace xsdepth
