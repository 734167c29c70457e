// Command-line front end: synth / train / evaluate / infer.
//
// Option precedence: built-in defaults < --config JSON file < XSDEPTH_* env
// vars < explicit flags. Every command echoes its fully resolved
// configuration and persists it next to its outputs, so a run can be
// reproduced from the echoed JSON alone.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "xsdepth/checkpoint.hpp"
#include "xsdepth/data.hpp"
#include "xsdepth/evaluation.hpp"
#include "xsdepth/image_io.hpp"
#include "xsdepth/training.hpp"

namespace {

using nlohmann::json;
using namespace xsdepth;

struct RunConfig {
  // data
  std::string source_root, target_root, data_root, out_dir = "out";
  std::string split = "test";
  // synth
  SynthParams synth;
  std::string size = "64x48";
  // network + training
  TrainConfig train;
  std::string encoder = "tiny";
  std::string phase = "full";
  std::string device = "cpu";
  // evaluation
  DepthRange depth_range;
  bool dump_depth = false;
  // inference
  std::string checkpoint, tir_path, vis_path;
};

std::pair<long, long> parse_size(const std::string& s) {
  long w = 0, h = 0;
  if (std::sscanf(s.c_str(), "%ldx%ld", &w, &h) != 2 || w <= 0 || h <= 0)
    throw ConfigError("bad --size '" + s + "', expected WIDTHxHEIGHT like 64x48");
  return {w, h};
}

json config_to_json(const RunConfig& c) {
  json j;
  j["source_root"] = c.source_root;
  j["target_root"] = c.target_root;
  j["data_root"] = c.data_root;
  j["out_dir"] = c.out_dir;
  j["split"] = c.split;
  j["size"] = c.size;
  j["seed"] = c.train.seed;
  j["encoder"] = c.encoder;
  j["phase"] = c.phase;
  j["device"] = c.device;
  j["learning_rate"] = c.train.learning_rate;
  j["epochs"] = c.train.epochs;
  j["steps"] = c.train.max_steps;
  j["log_every"] = c.train.log_every;
  j["checkpoint_every"] = c.train.checkpoint_every;
  j["disc_update_ratio"] = c.train.disc_update_ratio;
  j["unfreeze_decoder"] = c.train.unfreeze_decoder_in_transfer;
  j["alpha"] = c.train.weights.alpha;
  j["lambda_s"] = c.train.weights.lambda_s;
  j["lambda_lr"] = c.train.weights.lambda_lr;
  j["lambda_v"] = c.train.weights.lambda_v;
  j["lambda_ms"] = c.train.weights.lambda_ms;
  j["lambda_cyc"] = c.train.weights.lambda_cyc;
  j["d_max"] = c.train.network.d_max;
  j["base_channels"] = c.train.network.base_channels;
  j["init_std"] = c.train.network.init_std;
  j["scenes"] = c.synth.num_scenes;
  j["test_scenes"] = c.synth.num_test_scenes;
  j["shapes"] = c.synth.num_shapes;
  j["octaves"] = c.synth.texture_octaves;
  j["disp_lo"] = c.synth.disparity_lo;
  j["disp_hi"] = c.synth.disparity_hi;
  j["thermal_invert"] = c.synth.thermal.invert;
  j["thermal_blur"] = c.synth.thermal.blur_sigma_px;
  j["thermal_gamma"] = c.synth.thermal.contrast_gamma;
  j["thermal_noise"] = c.synth.thermal.noise_std;
  j["min_depth"] = c.depth_range.min_m;
  j["max_depth"] = c.depth_range.max_m;
  j["dump_depth"] = c.dump_depth;
  j["checkpoint"] = c.checkpoint;
  j["tir"] = c.tir_path;
  j["vis"] = c.vis_path;
  return j;
}

void apply_json(RunConfig& c, const json& j) {
  c.source_root = j.value("source_root", c.source_root);
  c.target_root = j.value("target_root", c.target_root);
  c.data_root = j.value("data_root", c.data_root);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.split = j.value("split", c.split);
  c.size = j.value("size", c.size);
  c.train.seed = j.value("seed", c.train.seed);
  c.encoder = j.value("encoder", c.encoder);
  c.phase = j.value("phase", c.phase);
  c.device = j.value("device", c.device);
  c.train.learning_rate = j.value("learning_rate", c.train.learning_rate);
  c.train.epochs = j.value("epochs", c.train.epochs);
  c.train.max_steps = j.value("steps", c.train.max_steps);
  c.train.log_every = j.value("log_every", c.train.log_every);
  c.train.checkpoint_every = j.value("checkpoint_every", c.train.checkpoint_every);
  c.train.disc_update_ratio = j.value("disc_update_ratio", c.train.disc_update_ratio);
  c.train.unfreeze_decoder_in_transfer = j.value("unfreeze_decoder",
                                                 c.train.unfreeze_decoder_in_transfer);
  c.train.weights.alpha = j.value("alpha", c.train.weights.alpha);
  c.train.weights.lambda_s = j.value("lambda_s", c.train.weights.lambda_s);
  c.train.weights.lambda_lr = j.value("lambda_lr", c.train.weights.lambda_lr);
  c.train.weights.lambda_v = j.value("lambda_v", c.train.weights.lambda_v);
  c.train.weights.lambda_ms = j.value("lambda_ms", c.train.weights.lambda_ms);
  c.train.weights.lambda_cyc = j.value("lambda_cyc", c.train.weights.lambda_cyc);
  c.train.network.d_max = j.value("d_max", c.train.network.d_max);
  c.train.network.base_channels = j.value("base_channels", c.train.network.base_channels);
  c.train.network.init_std = j.value("init_std", c.train.network.init_std);
  c.synth.num_scenes = j.value("scenes", c.synth.num_scenes);
  c.synth.num_test_scenes = j.value("test_scenes", c.synth.num_test_scenes);
  c.synth.num_shapes = j.value("shapes", c.synth.num_shapes);
  c.synth.texture_octaves = j.value("octaves", c.synth.texture_octaves);
  c.synth.disparity_lo = j.value("disp_lo", c.synth.disparity_lo);
  c.synth.disparity_hi = j.value("disp_hi", c.synth.disparity_hi);
  c.synth.thermal.invert = j.value("thermal_invert", c.synth.thermal.invert);
  c.synth.thermal.blur_sigma_px = j.value("thermal_blur", c.synth.thermal.blur_sigma_px);
  c.synth.thermal.contrast_gamma = j.value("thermal_gamma", c.synth.thermal.contrast_gamma);
  c.synth.thermal.noise_std = j.value("thermal_noise", c.synth.thermal.noise_std);
  c.depth_range.min_m = j.value("min_depth", c.depth_range.min_m);
  c.depth_range.max_m = j.value("max_depth", c.depth_range.max_m);
  c.dump_depth = j.value("dump_depth", c.dump_depth);
  c.checkpoint = j.value("checkpoint", c.checkpoint);
  c.tir_path = j.value("tir", c.tir_path);
  c.vis_path = j.value("vis", c.vis_path);
}

void echo_config(const RunConfig& c, const std::filesystem::path& out_dir) {
  const std::string text = config_to_json(c).dump(2);
  std::cout << "resolved config:\n" << text << "\n";
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  std::ofstream os(out_dir / "config.json");
  if (!os) throw IoError("cannot write resolved config to " + (out_dir / "config.json").string());
  os << text << "\n";
}

void finalize_config(RunConfig& c) {
  auto [w, h] = parse_size(c.size);
  c.synth.width = w;
  c.synth.height = h;
  c.train.network.input_width = w;
  c.train.network.input_height = h;
  if (c.encoder == "tiny")
    c.train.network.encoder_depth = EncoderDepth::tiny;
  else if (c.encoder == "resnet18-like" || c.encoder == "resnet")
    c.train.network.encoder_depth = EncoderDepth::resnet18_like;
  else
    throw ConfigError("unknown encoder '" + c.encoder + "' (tiny | resnet18-like)");
  if (c.phase == "vis")
    c.train.phase = TrainPhase::vis;
  else if (c.phase == "full")
    c.train.phase = TrainPhase::full;
  else
    throw ConfigError("unknown phase '" + c.phase + "' (vis | full)");
  if (c.device != "cpu") throw ConfigError("only --device cpu is supported in this build");
}

void print_metrics_table(const MetricsReport& r) {
  std::printf("%10s %10s %10s %10s %9s %9s %9s\n", "abs rel", "sq rel", "rmse", "rmse log",
              "d<1.25", "d<1.25^2", "d<1.25^3");
  std::printf("%10.4f %10.4f %10.4f %10.4f %9.4f %9.4f %9.4f\n", r.abs_rel, r.sq_rel, r.rmse,
              r.rmse_log, r.delta1, r.delta2, r.delta3);
}

int cmd_synth(RunConfig& c) {
  finalize_config(c);
  c.synth.validate();
  echo_config(c, c.out_dir);
  generate_synthetic_dataset(c.synth, c.out_dir);
  const DatasetManifest train = discover_dataset(c.out_dir, "train");
  const DatasetManifest test = discover_dataset(c.out_dir, "test");
  std::cout << "wrote " << train.entries.size() << " train and " << test.entries.size()
            << " test scenes to " << c.out_dir << "\n";
  return 0;
}

int cmd_train(RunConfig& c) {
  finalize_config(c);
  std::string source_root = c.source_root.empty() ? c.data_root : c.source_root;
  std::string target_root = c.target_root.empty() ? c.data_root : c.target_root;
  if (source_root.empty()) throw ConfigError("train: no source dataset (use --synthetic or --source)");
  if (target_root.empty() && c.train.phase == TrainPhase::full)
    throw ConfigError("train: no target dataset (use --synthetic or --target)");
  echo_config(c, c.out_dir);

  const long w = c.train.network.input_width, h = c.train.network.input_height;
  std::vector<LoadedSample> source = load_dataset(source_root, "train", w, h);
  std::vector<LoadedSample> target;
  if (c.train.phase == TrainPhase::full) {
    target = target_root == source_root ? source : load_dataset(target_root, "train", w, h);
  }
  const std::filesystem::path final_ckpt = run_training(c.train, source, target, c.out_dir);
  std::cout << "final checkpoint: " << final_ckpt.string() << "\n";

  // Summarize the last logged record.
  std::ifstream log(std::filesystem::path(c.out_dir) / "logs" / "train.ndjson");
  std::string line, last;
  while (std::getline(log, line))
    if (!line.empty()) last = line;
  if (!last.empty()) std::cout << "final losses: " << last << "\n";
  return 0;
}

int cmd_evaluate(RunConfig& c) {
  finalize_config(c);
  if (c.checkpoint.empty()) throw ConfigError("evaluate: --checkpoint is required");
  if (c.data_root.empty()) throw ConfigError("evaluate: --data is required");
  echo_config(c, c.out_dir);

  LoadedCheckpoint ckpt = load_checkpoint(c.checkpoint);
  const long w = ckpt.bundle.config.input_width, h = ckpt.bundle.config.input_height;
  std::vector<LoadedSample> samples = load_dataset(c.data_root, c.split, w, h);
  const DatasetManifest manifest = discover_dataset(c.data_root, c.split);

  EvaluateOptions opts;
  opts.range = c.depth_range;
  if (c.dump_depth) opts.dump_dir = std::filesystem::path(c.out_dir) / "depth_dumps";
  EvaluationResult result = evaluate_model(ckpt.bundle, samples, manifest.calibration, opts);

  const std::filesystem::path report = std::filesystem::path(c.out_dir) / "evaluation.json";
  write_evaluation_report(result, report);
  std::cout << "evaluated " << result.aggregate.num_images << " images ("
            << result.aggregate.valid_pixels << " valid pixels), report: " << report.string()
            << "\n";
  print_metrics_table(result.aggregate);
  return 0;
}

int cmd_infer(RunConfig& c) {
  finalize_config(c);
  if (c.checkpoint.empty()) throw ConfigError("infer: --checkpoint is required");
  if (c.tir_path.empty() || c.vis_path.empty())
    throw ConfigError("infer: --tir and --vis are required");
  echo_config(c, c.out_dir);

  LoadedCheckpoint ckpt = load_checkpoint(c.checkpoint);
  const long w = ckpt.bundle.config.input_width, h = ckpt.bundle.config.input_height;

  ImagePlane tir = read_png8(c.tir_path);
  ImagePlane vis = read_png8(c.vis_path);
  if (tir.channels() != 1)
    throw ContractError("infer: TIR input must be single channel, got " +
                        std::to_string(tir.channels()) + " (are the arguments swapped?)");
  if (vis.channels() != 3)
    throw ContractError("infer: VIS input must be 3-channel, got " +
                        std::to_string(vis.channels()));
  tir = ImagePlane(resize_bilinear_tensor(tir.tensor(), h, w));
  vis = ImagePlane(resize_bilinear_tensor(vis.tensor(), h, w));

  FeaturePyramid pyr = encode(*ckpt.bundle.encoder_tir, tir);
  std::vector<DisparityMap> disps =
      decode_disparity(ckpt.bundle.depth_decoder, pyr, ckpt.bundle.config.d_max);
  const Tensor& d = disps[0].tensor();

  Scalar lo = d[0], hi = d[0], mean = 0;
  for (long i = 0; i < d.numel(); ++i) {
    lo = std::min(lo, d[i]);
    hi = std::max(hi, d[i]);
    mean += d[i];
  }
  mean /= static_cast<Scalar>(d.numel());

  std::filesystem::path out(c.out_dir);
  Tensor scaled = d;
  for (long i = 0; i < scaled.numel(); ++i) scaled[i] *= kDisparityPngScale;
  write_png16(out / "disparity.png", scaled);
  write_colormap_png(out / "disparity_preview.png", d);
  std::cout << "disparity min/mean/max: " << lo << " / " << mean << " / " << hi << "\n";
  std::cout << "wrote " << (out / "disparity.png").string() << " and "
            << (out / "disparity_preview.png").string() << "\n";
  return 0;
}

void add_common_options(CLI::App* cmd, RunConfig& c, std::string& config_path) {
  cmd->add_option("--config", config_path, "JSON config file (defaults < config < env < flags)")
      ->envname("XSDEPTH_CONFIG");
  cmd->add_option("--seed", c.train.seed, "run seed")->envname("XSDEPTH_SEED");
  cmd->add_option("--out", c.out_dir, "output directory")->envname("XSDEPTH_OUT");
  cmd->add_option("--size", c.size, "input size WIDTHxHEIGHT")->envname("XSDEPTH_SIZE");
  cmd->add_option("--device", c.device, "compute device (cpu)")->envname("XSDEPTH_DEVICE");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised VIS-guided cross-spectrum stereo depth estimation"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic stereo corpus");
  add_common_options(synth, cfg, config_path);
  synth->add_option("--scenes", cfg.synth.num_scenes, "train scene count");
  synth->add_option("--test-scenes", cfg.synth.num_test_scenes, "test scene count");
  synth->add_option("--shapes", cfg.synth.num_shapes, "shapes per scene");
  synth->add_option("--octaves", cfg.synth.texture_octaves, "texture noise octaves");
  synth->add_option("--disp-lo", cfg.synth.disparity_lo, "background disparity (fraction)");
  synth->add_option("--disp-hi", cfg.synth.disparity_hi, "max shape disparity (fraction)");
  synth->add_option("--thermal-blur", cfg.synth.thermal.blur_sigma_px, "thermal blur sigma, px");
  synth->add_option("--thermal-gamma", cfg.synth.thermal.contrast_gamma, "thermal gamma");
  synth->add_option("--thermal-noise", cfg.synth.thermal.noise_std, "thermal noise stddev");
  synth->add_flag("--thermal-invert,!--no-thermal-invert", cfg.synth.thermal.invert,
                  "invert thermal polarity");

  CLI::App* train = app.add_subcommand("train", "train the depth framework");
  add_common_options(train, cfg, config_path);
  train->add_option("--phase", cfg.phase, "vis | full");
  train->add_option("--steps", cfg.train.max_steps, "total steps (overrides epochs)");
  train->add_option("--epochs", cfg.train.epochs, "epochs over the source split");
  train->add_option("--lr", cfg.train.learning_rate, "Adam learning rate");
  train->add_option("--synthetic", cfg.data_root, "dataset root used as both source and target");
  train->add_option("--source", cfg.source_root, "source-domain (VIS pairs) dataset root");
  train->add_option("--target", cfg.target_root, "target-domain (TIR-VIS) dataset root");
  train->add_option("--encoder", cfg.encoder, "tiny | resnet18-like");
  train->add_option("--base-channels", cfg.train.network.base_channels, "tiny encoder width");
  train->add_option("--d-max", cfg.train.network.d_max, "disparity ceiling (fraction of width)");
  train->add_option("--log-every", cfg.train.log_every, "log record period");
  train->add_option("--checkpoint-every", cfg.train.checkpoint_every, "checkpoint period");
  train->add_option("--disc-ratio", cfg.train.disc_update_ratio, "discriminator updates per step");
  train->add_option("--lambda-s", cfg.train.weights.lambda_s, "smoothness weight");
  train->add_option("--lambda-lr", cfg.train.weights.lambda_lr, "left-right consistency weight");
  train->add_option("--lambda-v", cfg.train.weights.lambda_v, "VIS loss weight");
  train->add_option("--lambda-ms", cfg.train.weights.lambda_ms, "cross-spectrum loss weight");
  train->add_option("--lambda-cyc", cfg.train.weights.lambda_cyc, "cycle consistency weight");
  train->add_option("--alpha", cfg.train.weights.alpha, "SSIM mix");
  train->add_flag("--unfreeze-decoder", cfg.train.unfreeze_decoder_in_transfer,
                  "let the transfer step update the shared decoder");

  CLI::App* evaluate = app.add_subcommand("evaluate", "run the seven-metric depth evaluation");
  add_common_options(evaluate, cfg, config_path);
  evaluate->add_option("--checkpoint", cfg.checkpoint, "checkpoint path")->envname("XSDEPTH_CKPT");
  evaluate->add_option("--data", cfg.data_root, "dataset root");
  evaluate->add_option("--split", cfg.split, "dataset split (default test)");
  evaluate->add_option("--min-depth", cfg.depth_range.min_m, "evaluation depth floor, m");
  evaluate->add_option("--max-depth", cfg.depth_range.max_m, "evaluation depth cap, m");
  evaluate->add_flag("--dump-depth", cfg.dump_depth, "write colormapped previews per image");

  CLI::App* infer = app.add_subcommand("infer", "predict disparity for one TIR/VIS pair");
  add_common_options(infer, cfg, config_path);
  infer->add_option("--checkpoint", cfg.checkpoint, "checkpoint path")->envname("XSDEPTH_CKPT");
  infer->add_option("--tir", cfg.tir_path, "left TIR image (1-channel PNG)");
  infer->add_option("--vis", cfg.vis_path, "right VIS image (3-channel PNG)");

  // Config file pass: locate --config first so file values sit between the
  // built-in defaults and any explicit flags.
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc)
      config_path = argv[i + 1];
    else if (arg.rfind("--config=", 0) == 0)
      config_path = arg.substr(9);
  }
  if (config_path.empty())
    if (const char* env = std::getenv("XSDEPTH_CONFIG")) config_path = env;
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) {
      std::cerr << "error: cannot open config file: " << config_path << "\n";
      return 1;
    }
    json j = json::parse(is, nullptr, false);
    if (j.is_discarded()) {
      std::cerr << "error: config file is not valid JSON: " << config_path << "\n";
      return 1;
    }
    apply_json(cfg, j);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (evaluate->parsed()) return cmd_evaluate(cfg);
    if (infer->parsed()) return cmd_infer(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
