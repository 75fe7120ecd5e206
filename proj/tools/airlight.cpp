#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "alf/image_io.hpp"
#include "alf/manifest.hpp"
#include "alf/metrics.hpp"
#include "alf/scene.hpp"
#include "alf/solver.hpp"
#include "alf/version.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double elapsed_seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct DehazeOptions {
  std::string input;
  std::string out_dir = ".";
  std::string config_path;
  std::string mode = "alf";
  int order = 2;
  bool cross_terms = false;
  double lambda1 = 0.1;
  double lambda2 = 0.0001;
  double lambda3 = 1.0;
  double lambda4 = 0.1;
  double step = 0.1;
  double step_j = -1.0;
  int iters = 200;
  double tol = 1e-5;
  double t0 = 0.1;
  double omega = 0.95;
  int patch = 15;
  std::string residual = "min-channel";
  std::string airlight;  // dcp only: "r,g,b" override
  int threads = 1;
  uint64_t seed = 0;
  bool no_clamp = false;
};

// Config-file values fill in only the options the command line left untouched,
// so flags > config file > built-in defaults.
void apply_dehaze_config(const CLI::App& sub, DehazeOptions& opt) {
  std::ifstream is(opt.config_path);
  if (!is) {
    throw alf::IoError(alf::IoError::Kind::NotFound,
                       "cannot open config " + opt.config_path);
  }
  auto kv = alf::parse_key_values(is, opt.config_path);
  const auto unset = [&](const char* flag) { return sub.count(flag) == 0; };
  for (const auto& [key, value] : kv) {
    if (key == "mode") {
      if (unset("--mode")) opt.mode = value;
    } else if (key == "order") {
      if (unset("--order")) opt.order = static_cast<int>(alf::detail::parse_uint(key, value));
    } else if (key == "cross_terms") {
      if (unset("--cross-terms")) opt.cross_terms = alf::detail::parse_bool(key, value);
    } else if (key == "lambda1") {
      if (unset("--lambda1")) opt.lambda1 = alf::detail::parse_double(key, value);
    } else if (key == "lambda2") {
      if (unset("--lambda2")) opt.lambda2 = alf::detail::parse_double(key, value);
    } else if (key == "lambda3") {
      if (unset("--lambda3")) opt.lambda3 = alf::detail::parse_double(key, value);
    } else if (key == "lambda4") {
      if (unset("--lambda4")) opt.lambda4 = alf::detail::parse_double(key, value);
    } else if (key == "step") {
      if (unset("--step")) opt.step = alf::detail::parse_double(key, value);
    } else if (key == "step_j") {
      if (unset("--step-j")) opt.step_j = alf::detail::parse_double(key, value);
    } else if (key == "iters") {
      if (unset("--iters")) opt.iters = static_cast<int>(alf::detail::parse_uint(key, value));
    } else if (key == "tol") {
      if (unset("--tol")) opt.tol = alf::detail::parse_double(key, value);
    } else if (key == "t0") {
      if (unset("--t0")) opt.t0 = alf::detail::parse_double(key, value);
    } else if (key == "omega") {
      if (unset("--omega")) opt.omega = alf::detail::parse_double(key, value);
    } else if (key == "patch") {
      if (unset("--patch")) opt.patch = static_cast<int>(alf::detail::parse_uint(key, value));
    } else if (key == "residual") {
      if (unset("--residual")) opt.residual = value;
    } else if (key == "airlight") {
      if (unset("--airlight")) opt.airlight = value;
    } else if (key == "threads") {
      if (unset("--threads")) opt.threads = static_cast<int>(alf::detail::parse_uint(key, value));
    } else if (key == "seed") {
      if (unset("--seed")) opt.seed = alf::detail::parse_uint(key, value);
    } else if (key == "clamp") {
      if (unset("--no-clamp")) opt.no_clamp = !alf::detail::parse_bool(key, value);
    } else {
      throw alf::ConfigError("config: unknown key '" + key + "'");
    }
  }
  if (opt.mode != "alf" && opt.mode != "cbr" && opt.mode != "dcp") {
    throw alf::ConfigError("config: mode must be alf, cbr, or dcp");
  }
  if (opt.residual != "per-channel" && opt.residual != "min-channel") {
    throw alf::ConfigError("config: residual must be per-channel or min-channel");
  }
}

void write_weights_csv(const alf::AirlightField& field, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw alf::IoError(alf::IoError::Kind::Unwritable, "cannot write " + path);
  os << "channel,index,degree_u,degree_v,weight\n";
  const char* names = "rgb";
  char buf[128];
  for (int c = 0; c < 3; ++c) {
    if (field.mode() == alf::AirlightField::Mode::Constant) {
      std::snprintf(buf, sizeof(buf), "%c,0,0,0,%.17g\n", names[c], field.a0()[c]);
      os << buf;
      continue;
    }
    for (int i = 0; i < field.basis().size(); ++i) {
      const auto& m = field.basis().members[i];
      std::snprintf(buf, sizeof(buf), "%c,%d,%d,%d,%.17g\n", names[c], i, m.degree_u,
                    m.degree_v, field.weights()[c][i]);
      os << buf;
    }
  }
}

alf::Rgb parse_rgb_triple(const std::string& key, const std::string& value) {
  const auto list = alf::detail::parse_list(key, value);
  if (list.size() != 3) {
    throw alf::ConfigError(key + " expects exactly three comma-separated values");
  }
  for (double v : list) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw alf::ConfigError(key + " components must be in [0,1]");
    }
  }
  return alf::Rgb{list[0], list[1], list[2]};
}

alf::Rgb max_channel_airlight(const alf::Raster& img) {
  alf::Rgb a{0.0, 0.0, 0.0};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) a[c] = std::max(a[c], img.at(x, y, c));
    }
  }
  return a;
}

int run_dehaze(const CLI::App& sub, DehazeOptions opt) {
  const auto start = Clock::now();
  if (!opt.config_path.empty()) apply_dehaze_config(sub, opt);

  alf::RunManifest manifest;
  manifest.command = "dehaze";
  manifest.seed = opt.seed;
  alf::add_file(manifest.inputs, opt.input);
  if (!opt.config_path.empty()) alf::add_file(manifest.inputs, opt.config_path);

  const alf::Raster I = alf::load_image(opt.input);
  fs::create_directories(opt.out_dir);
  const auto out = [&](const char* name) { return (fs::path(opt.out_dir) / name).string(); };

  alf::Hyperparameters hp;
  hp.lambda1 = opt.lambda1;
  hp.lambda2 = opt.lambda2;
  hp.lambda3 = opt.lambda3;
  hp.lambda4 = opt.lambda4;
  hp.residual = opt.residual == "per-channel" ? alf::ResidualVariant::PerChannel
                                       : alf::ResidualVariant::MinChannel;

  nlohmann::json cfg;
  cfg["input"] = opt.input;
  cfg["mode"] = opt.mode;
  cfg["lambda1"] = opt.lambda1;
  cfg["lambda2"] = opt.lambda2;
  cfg["lambda3"] = opt.lambda3;
  cfg["lambda4"] = opt.lambda4;
  cfg["residual"] = opt.residual;
  cfg["threads"] = opt.threads;

  if (opt.mode == "dcp") {
    const alf::Rgb a0 = opt.airlight.empty()
                            ? max_channel_airlight(I)
                            : parse_rgb_triple("--airlight", opt.airlight);
    const auto field = alf::AirlightField::constant(a0);
    const alf::ScalarMap t = alf::dark_channel_t(I, field, opt.omega, opt.patch);
    const alf::Raster J = alf::recover_direct(I, t, field, opt.t0);

    alf::save_image(J, out("dehazed.png"));
    alf::save_scalar_map(t, out("transmission.pfm"));
    alf::save_scalar_map(t, out("transmission.png"));
    alf::save_image(alf::render_field(field, I.width(), I.height()), out("airlight.png"));

    cfg["t0"] = opt.t0;
    cfg["omega"] = opt.omega;
    cfg["patch"] = opt.patch;
    cfg["airlight"] = {a0.r, a0.g, a0.b};
    for (const char* name : {"dehazed.png", "transmission.pfm", "transmission.png",
                             "airlight.png"}) {
      alf::add_file(manifest.outputs, out(name));
    }
  } else {
    alf::SolverConfig sc;
    sc.hp = hp;
    sc.mode = opt.mode == "cbr" ? alf::SolverMode::Cbr : alf::SolverMode::Alf;
    sc.basis_order = opt.order;
    sc.include_cross_terms = opt.cross_terms;
    sc.step_size = opt.step;
    sc.step_size_j = opt.step_j;
    sc.max_iters = opt.iters;
    sc.convergence_tol = opt.tol;
    sc.clamp_iterates = !opt.no_clamp;
    sc.threads = opt.threads;

    const alf::SolverResult res = alf::run(I, sc);

    alf::save_image(res.dehazed, out("dehazed.png"));
    alf::save_scalar_map(res.transmission, out("transmission.pfm"));
    alf::save_scalar_map(res.transmission, out("transmission.png"));
    alf::save_image(alf::render_field(res.airlight, I.width(), I.height()),
                    out("airlight.png"));
    write_weights_csv(res.airlight, out("weights.csv"));
    alf::energy_trace_csv(res, out("energy.csv"));

    cfg["order"] = opt.order;
    cfg["cross_terms"] = opt.cross_terms;
    cfg["step"] = opt.step;
    cfg["step_j"] = opt.step_j > 0.0 ? opt.step_j : opt.step;
    cfg["iters"] = opt.iters;
    cfg["tol"] = opt.tol;
    cfg["clamp"] = !opt.no_clamp;
    cfg["iterations_run"] = res.iterations_run;
    cfg["converged"] = res.converged;
    for (const char* name : {"dehazed.png", "transmission.pfm", "transmission.png",
                             "airlight.png", "weights.csv", "energy.csv"}) {
      alf::add_file(manifest.outputs, out(name));
    }
  }

  manifest.config = cfg;
  manifest.duration_seconds = elapsed_seconds(start);
  alf::write_manifest(manifest, out("manifest.json"));
  return 0;
}

struct SynthesizeOptions {
  std::string scene;
  std::string out_dir = ".";
  uint64_t seed = 0;
};

int run_synthesize(const CLI::App& sub, const SynthesizeOptions& opt) {
  const auto start = Clock::now();
  alf::SyntheticSceneSpec spec = alf::load_scene_spec(opt.scene);
  if (sub.count("--seed") > 0) spec.seed = opt.seed;

  alf::RunManifest manifest;
  manifest.command = "synthesize";
  manifest.seed = spec.seed;
  alf::add_file(manifest.inputs, opt.scene);
  {
    // Re-walk the config for the referenced files so the manifest records
    // their checksums too.
    std::ifstream is(opt.scene);
    auto kv = alf::parse_key_values(is, opt.scene);
    const auto dir = fs::path(opt.scene).parent_path();
    for (const char* key : {"clear", "depth", "t_map"}) {
      if (kv.count(key)) {
        const fs::path p(kv[key]);
        alf::add_file(manifest.inputs, (p.is_absolute() ? p : dir / p).string());
      }
    }
  }

  const alf::SyntheticScene scene = alf::synthesize(spec);
  fs::create_directories(opt.out_dir);
  const auto out = [&](const char* name) { return (fs::path(opt.out_dir) / name).string(); };

  alf::save_image(scene.hazy, out("hazy.png"));
  alf::save_scalar_map(scene.truth_t, out("truth_t.pfm"));
  alf::save_image(alf::render_field(spec.airlight, scene.hazy.width(), scene.hazy.height()),
                  out("truth_airlight.png"));
  for (const char* name : {"hazy.png", "truth_t.pfm", "truth_airlight.png"}) {
    alf::add_file(manifest.outputs, out(name));
  }

  nlohmann::json cfg;
  cfg["scene"] = opt.scene;
  cfg["noise_sigma"] = spec.noise_sigma;
  cfg["quantize"] = spec.quantize;
  cfg["seed"] = spec.seed;
  if (spec.depth) cfg["beta"] = spec.beta;
  if (spec.airlight.mode() == alf::AirlightField::Mode::Constant) {
    cfg["airlight"] = {spec.airlight.a0().r, spec.airlight.a0().g, spec.airlight.a0().b};
  } else {
    cfg["airlight_order"] = spec.airlight.basis().order;
    cfg["airlight_cross_terms"] = spec.airlight.basis().cross_terms;
  }
  manifest.config = cfg;
  manifest.duration_seconds = elapsed_seconds(start);
  alf::write_manifest(manifest, out("manifest.json"));
  return 0;
}

struct EvalOptions {
  std::string pred;
  std::string truth;
  std::string pred_t;
  std::string truth_t;
  std::string pred_a;
  std::string truth_a;
  std::string mask;
  std::string csv;
};

int run_eval(const EvalOptions& opt) {
  alf::EvalReport report;
  std::optional<alf::Raster> pred;
  if (!opt.pred.empty() || !opt.truth.empty()) {
    if (opt.pred.empty() || opt.truth.empty()) {
      throw alf::ConfigError("eval: --pred and --truth must be given together");
    }
    pred = alf::load_image(opt.pred);
    const alf::Raster truth = alf::load_image(opt.truth);
    report.mse = alf::mse(*pred, truth);
    report.psnr = alf::psnr_from_mse(report.mse);
  }
  if (!opt.pred_t.empty() || !opt.truth_t.empty()) {
    if (opt.pred_t.empty() || opt.truth_t.empty()) {
      throw alf::ConfigError("eval: --pred-t and --truth-t must be given together");
    }
    report.t_mae = alf::mean_abs_diff(alf::load_scalar_map(opt.pred_t),
                                      alf::load_scalar_map(opt.truth_t));
  }
  if (!opt.pred_a.empty() || !opt.truth_a.empty()) {
    if (opt.pred_a.empty() || opt.truth_a.empty()) {
      throw alf::ConfigError("eval: --pred-a and --truth-a must be given together");
    }
    report.a_mae =
        alf::mean_abs_diff(alf::load_image(opt.pred_a), alf::load_image(opt.truth_a));
  }
  if (!opt.mask.empty()) {
    if (!pred) throw alf::ConfigError("eval: --mask requires --pred");
    report.sky_variance = alf::masked_variance(*pred, alf::load_scalar_map(opt.mask));
  }

  alf::print_eval_report(report, std::cout);
  std::cout << alf::eval_csv_header() << "\n" << alf::eval_csv_row(report) << "\n";
  if (!opt.csv.empty()) {
    std::ofstream os(opt.csv, std::ios::binary);
    if (!os) throw alf::IoError(alf::IoError::Kind::Unwritable, "cannot write " + opt.csv);
    os << alf::eval_csv_header() << "\n" << alf::eval_csv_row(report) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-image dehazing via joint airlight-field estimation"};
  app.set_version_flag("--version", alf::kToolVersion);
  app.require_subcommand(1);

  DehazeOptions dh;
  CLI::App* dehaze = app.add_subcommand("dehaze", "estimate transmission, airlight, and "
                                                  "the dehazed image from one hazy input");
  dehaze->add_option("input", dh.input, "hazy input image (PNG or binary PPM)")->required();
  dehaze->add_option("--out-dir", dh.out_dir, "output directory (default .)");
  dehaze->add_option("--config", dh.config_path, "key = value config file");
  dehaze->add_option("--mode", dh.mode, "alf (polynomial airlight field), cbr (constant "
                                        "airlight), or dcp (dark-channel baseline)")
      ->check(CLI::IsMember({"alf", "cbr", "dcp"}));
  dehaze->add_option("--order", dh.order, "airlight polynomial order (alf)");
  dehaze->add_flag("--cross-terms", dh.cross_terms, "include mixed polynomial terms (alf)");
  dehaze->add_option("--lambda1", dh.lambda1, "transmission smoothness weight");
  dehaze->add_option("--lambda2", dh.lambda2, "image smoothness weight");
  dehaze->add_option("--lambda3", dh.lambda3, "haze-level prior weight");
  dehaze->add_option("--lambda4", dh.lambda4, "polynomial coefficient penalty");
  dehaze->add_option("--step", dh.step, "gradient step size");
  dehaze->add_option("--step-j", dh.step_j, "step size for the image update "
                                            "(default: same as --step)");
  dehaze->add_option("--iters", dh.iters, "maximum iterations");
  dehaze->add_option("--tol", dh.tol, "relative energy-change convergence tolerance");
  dehaze->add_option("--t0", dh.t0, "transmission floor for direct recovery (dcp)");
  dehaze->add_option("--omega", dh.omega, "haze retention factor (dcp)");
  dehaze->add_option("--patch", dh.patch, "dark-channel patch size, odd (dcp)");
  dehaze->add_option("--residual", dh.residual,
                     "haze-level residual form: per-channel or min-channel")
      ->check(CLI::IsMember({"per-channel", "min-channel"}));
  dehaze->add_option("--airlight", dh.airlight,
                     "dcp airlight as r,g,b (default: per-channel image max)");
  dehaze->add_option("--threads", dh.threads, "worker threads (0 = hardware)");
  dehaze->add_option("--seed", dh.seed, "seed recorded in the manifest");
  dehaze->add_flag("--no-clamp", dh.no_clamp, "do not clamp iterates to [0,1]");

  SynthesizeOptions sy;
  CLI::App* synthesize = app.add_subcommand("synthesize",
                                            "render a hazy scene from a scene config");
  synthesize->add_option("--scene", sy.scene, "scene config file")->required();
  synthesize->add_option("--out-dir", sy.out_dir, "output directory (default .)");
  synthesize->add_option("--seed", sy.seed, "override the scene's noise seed");

  EvalOptions ev;
  CLI::App* eval = app.add_subcommand("eval", "compare outputs against ground truth");
  eval->add_option("--pred", ev.pred, "predicted (dehazed) image");
  eval->add_option("--truth", ev.truth, "ground-truth clear image");
  eval->add_option("--pred-t", ev.pred_t, "predicted transmission map");
  eval->add_option("--truth-t", ev.truth_t, "ground-truth transmission map");
  eval->add_option("--pred-a", ev.pred_a, "predicted airlight render");
  eval->add_option("--truth-a", ev.truth_a, "ground-truth airlight render");
  eval->add_option("--mask", ev.mask, "binary mask image for the variance score");
  eval->add_option("--csv", ev.csv, "also write the report CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (dehaze->parsed()) return run_dehaze(*dehaze, dh);
    if (synthesize->parsed()) return run_synthesize(*synthesize, sy);
    if (eval->parsed()) return run_eval(ev);
  } catch (const alf::NonFiniteError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const alf::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const alf::DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const alf::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
