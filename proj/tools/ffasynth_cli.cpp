// ffasynth command line: preprocess, synth, saliency, train, translate, evaluate.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ffasynth/config.hpp"
#include "ffasynth/data.hpp"
#include "ffasynth/error.hpp"
#include "ffasynth/metrics.hpp"
#include "ffasynth/saliency.hpp"
#include "ffasynth/trainer.hpp"

namespace fs = std::filesystem;
using namespace ffasynth;

namespace {

enum Exit { ok = 0, usage = 1, data = 2, numeric = 3 };

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path.string() + "'");
  os << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& s) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path.string() + "'");
  os << s;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read config '" + path.string() + "'");
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParameterError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// "512" or "360x288"
std::pair<int, int> parse_extent(const std::string& s, const char* what) {
  int w = 0, h = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%dx%d%c", &w, &h, &tail) == 2) return {w, h};
  if (std::sscanf(s.c_str(), "%d%c", &w, &tail) == 1) return {w, w};
  throw ParameterError(std::string("bad ") + what + " '" + s + "' (expected N or WxH)");
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

// ---- preprocess ----

struct PreprocessArgs {
  std::string pairs_dir, out, patch = "512", stride, roi = "none", exclude;
  double split_ratio = 0.8;
  std::uint64_t seed = 0;
};

int run_preprocess(const PreprocessArgs& a) {
  PatchSpec spec;
  std::tie(spec.width, spec.height) = parse_extent(a.patch, "patch");
  if (a.stride.empty()) {
    spec.stride_x = spec.width;
    spec.stride_y = spec.height;
  } else {
    std::tie(spec.stride_x, spec.stride_y) = parse_extent(a.stride, "stride");
  }
  spec.roi = roi_mode_from_string(a.roi);
  if (!(a.split_ratio > 0.0 && a.split_ratio < 1.0)) throw ParameterError("--split-ratio must lie in (0,1)");

  std::set<std::string> excluded;
  if (!a.exclude.empty()) excluded = read_exclusion_list(a.exclude);
  if (!fs::is_directory(a.pairs_dir)) throw DataError("pairs directory '" + a.pairs_dir + "' not found");
  IngestResult in = ingest_pairs(a.pairs_dir, excluded);
  print_warnings(in.warnings);
  if (in.pairs.empty()) throw DataError("no pairs found in '" + a.pairs_dir + "'");

  DatasetSplit split = split_dataset(std::move(in.pairs), a.split_ratio, a.seed);
  print_warnings(split.warnings);
  auto expand = [&](const std::vector<AlignedPair>& pairs) {
    std::vector<AlignedPair> out;
    for (const auto& p : pairs) {
      auto patches = preprocess_pair(p, spec);
      out.insert(out.end(), std::make_move_iterator(patches.begin()), std::make_move_iterator(patches.end()));
    }
    return out;
  };
  const auto train = expand(split.train);
  const auto test = expand(split.test);
  const fs::path out(a.out);
  write_pairs(out / "train", train);
  write_pairs(out / "test", test);
  write_json(out / "manifest.json", split_manifest(split, spec, train.size(), test.size()));
  std::cout << "sources: " << split.train.size() + split.test.size() << " (train " << split.train.size()
            << ", test " << split.test.size() << ")\npatches: train " << train.size() << ", test "
            << test.size() << '\n';
  return ok;
}

// ---- synth ----

int run_synth(int n, int size, std::uint64_t seed, const std::string& out) {
  const auto pairs = synth_phantom_pairs(n, size, seed);
  write_pairs(out, pairs);
  std::cout << "wrote " << pairs.size() << " phantom pairs to " << out << '\n';
  return ok;
}

// ---- saliency ----

struct SaliencyArgs {
  std::string input, out, raw;
  SaliencyConfig cfg;
  bool color = false;
};

int run_saliency(const SaliencyArgs& a) {
  Image img = load_png(a.input);
  if (img.channels() != 1) img = to_gray(img);
  const SaliencyMap map = compute_saliency(img, a.cfg);
  save_png(saliency_to_visual(map, a.color), a.out);
  if (!a.raw.empty()) write_raw_map(map, a.raw);
  return ok;
}

// ---- train ----

struct TrainArgs {
  std::string data, config, out_dir, val_data;
  bool resume = false;
  std::optional<int> epochs, decay_start, checkpoint_every;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, alpha, beta, gamma;
};

std::vector<AlignedPair> load_pairs(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("data directory '" + dir + "' not found");
  IngestResult in = ingest_pairs(dir);
  print_warnings(in.warnings);
  return std::move(in.pairs);
}

int run_train(const TrainArgs& a) {
  const fs::path out(a.out_dir);
  const fs::path latest = out / "checkpoints" / "latest.ckpt";

  RunConfig cfg;
  std::optional<Trainer> resumed;
  if (a.resume) {
    if (!fs::exists(latest)) throw DataError("nothing to resume: '" + latest.string() + "' not found");
    resumed.emplace(Trainer::load_checkpoint(latest));
    cfg.model = resumed->model_config();
    cfg.train = resumed->train_config();
    const fs::path snapshot = out / "config.json";
    if (fs::exists(snapshot)) cfg.ssim = run_config_from_json(read_json(snapshot)).ssim;
  }
  if (!a.config.empty()) cfg = run_config_from_json(read_json(a.config), cfg);
  TrainConfig& t = cfg.train;
  if (a.epochs) t.epochs = *a.epochs;
  if (a.decay_start) t.decay_start_epoch = *a.decay_start;
  if (a.checkpoint_every) t.checkpoint_every = *a.checkpoint_every;
  if (a.seed) t.seed = *a.seed;
  if (a.lr) t.lr0 = *a.lr;
  if (a.alpha) t.loss_weights.alpha = *a.alpha;
  if (a.beta) t.loss_weights.beta = *a.beta;
  if (a.gamma) t.loss_weights.gamma = *a.gamma;
  t.validate();

  const auto train = load_pairs(a.data);
  if (train.empty()) throw DataError("no pairs found in '" + a.data + "'");
  FitOptions options;
  options.run_dir = out;
  options.ssim = cfg.ssim;
  if (!a.val_data.empty()) options.validation = load_pairs(a.val_data);

  RunLog log;
  if (resumed) {
    if (!(resumed->model_config() == cfg.model)) {
      throw ParameterError("--resume cannot change the network configuration");
    }
    Trainer trainer = Trainer::load_checkpoint(latest, t);
    log = fit(trainer, train, options);
  } else {
    Trainer trainer(cfg.model, t);
    log = fit(trainer, train, options);
  }
  for (const auto& e : log.epochs) {
    std::cout << "epoch " << e.epoch << " lr " << e.lr;
    if (e.val_psnr) std::cout << " val_psnr " << *e.val_psnr << " val_ssim " << *e.val_ssim;
    std::cout << '\n';
  }
  if (!log.iterations.empty()) {
    const auto& r = log.iterations.back().report;
    std::cout << "final step " << log.iterations.back().iteration << ": total " << r.total << " (gan " << r.gan
              << ", pixel " << r.pixel << ", perceptual " << r.perceptual << ", saliency " << r.saliency << ")\n";
  }
  return ok;
}

// ---- translate ----

int run_translate(const std::string& checkpoint, const std::string& input, const std::string& out) {
  if (!fs::exists(checkpoint)) throw DataError("checkpoint '" + checkpoint + "' not found");
  Trainer trainer = Trainer::load_checkpoint(checkpoint);
  auto one = [&](const fs::path& src, const fs::path& dst) {
    Image img = load_png(src);
    save_png(trainer.translate(img), dst);
  };
  if (!fs::is_directory(input)) {
    if (!fs::exists(input)) throw DataError("input '" + input + "' not found");
    one(input, out);
    return ok;
  }
  const std::string suffix = "_struct.png";
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(input)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > suffix.size() && name.ends_with(suffix)) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no *_struct.png files under '" + input + "'");
  for (const auto& f : files) {
    const fs::path rel = fs::relative(f, input);
    std::string name = rel.filename().string();
    name = name.substr(0, name.size() - suffix.size()) + "_ffa.png";
    one(f, fs::path(out) / rel.parent_path() / name);
  }
  std::cout << "translated " << files.size() << " images\n";
  return ok;
}

// ---- evaluate ----

int run_evaluate(const std::string& pred, const std::string& ref, const std::string& mode,
                 const std::string& report) {
  SSIMParams p;
  p.mode = ssim_mode_from_string(mode);
  if (!fs::is_directory(pred)) throw DataError("prediction directory '" + pred + "' not found");
  if (!fs::is_directory(ref)) throw DataError("reference directory '" + ref + "' not found");
  const MetricReport r = evaluate_dataset(pred, ref, p);
  std::cout << r.summary();
  if (!report.empty()) write_text(report, r.to_csv());
  if (r.count == 0) {
    std::cerr << "error: no prediction matched a reference image\n";
    return data;
  }
  return r.errors.empty() ? ok : data;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fundus structure to fluorescein angiography synthesis"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Ingest aligned pairs, split per category, extract patches");
  c_pre->add_option("--pairs-dir", pre.pairs_dir, "Root with <category>/<id>_struct.png and <id>_ffa.png")
      ->required();
  c_pre->add_option("--out", pre.out, "Output root (train/, test/, manifest.json)")->required();
  c_pre->add_option("--patch", pre.patch, "Patch size, N or WxH")->capture_default_str();
  c_pre->add_option("--stride", pre.stride, "Patch stride, N or WxH (default: patch size)");
  c_pre->add_option("--roi", pre.roi, "ROI mask applied to patches")
      ->check(CLI::IsMember({"none", "circle"}))
      ->capture_default_str();
  c_pre->add_option("--split-ratio", pre.split_ratio, "Train fraction per category")->capture_default_str();
  c_pre->add_option("--seed", pre.seed, "Split seed")->capture_default_str();
  c_pre->add_option("--exclude", pre.exclude, "File with one source id per line to skip");

  int synth_n = 8, synth_size = 64;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* c_synth = app.add_subcommand("synth", "Write synthetic phantom pairs");
  c_synth->add_option("--n", synth_n, "Number of pairs")->capture_default_str();
  c_synth->add_option("--size", synth_size, "Image side in pixels (>= 64)")->capture_default_str();
  c_synth->add_option("--seed", synth_seed, "Phantom seed")->capture_default_str();
  c_synth->add_option("--out", synth_out, "Output root (pairs land in synthetic/)")->required();

  SaliencyArgs sal;
  auto* c_sal = app.add_subcommand("saliency", "Compute the saliency map of an image");
  c_sal->add_option("--input", sal.input, "Input PNG (color is averaged to gray)")->required();
  c_sal->add_option("--out", sal.out, "Visualization PNG")->required();
  c_sal->add_option("--a", sal.cfg.a, "Contrast factor")->capture_default_str();
  c_sal->add_option("--median", sal.cfg.median_kernel, "Median (background) kernel size")->capture_default_str();
  c_sal->add_option("--gaussian", sal.cfg.gaussian_kernel, "Gaussian kernel size")->capture_default_str();
  c_sal->add_option("--sigma", sal.cfg.gaussian_sigma, "Gaussian sigma")->capture_default_str();
  c_sal->add_option("--raw", sal.raw, "Also write the raw map (u32 width, u32 height, f32 values, LE)");
  c_sal->add_flag("--color", sal.color, "Blue-white-red visualization instead of gray");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train generator and discriminator");
  c_train->add_option("--data", tr.data, "Training pairs root (<category>/<id>_struct.png ...)")->required();
  c_train->add_option("--config", tr.config, "JSON run config; its values override the defaults");
  c_train->add_option("--out-dir", tr.out_dir, "Run directory (config, logs, checkpoints, samples)")->required();
  c_train->add_flag("--resume", tr.resume, "Continue from <out-dir>/checkpoints/latest.ckpt");
  c_train->add_option("--val-data", tr.val_data, "Validation pairs root, scored after every epoch");
  c_train->add_option("--epochs", tr.epochs, "Override train.epochs (default 200)");
  c_train->add_option("--decay-start", tr.decay_start, "Override train.decay_start_epoch (default 100)");
  c_train->add_option("--lr", tr.lr, "Override train.lr0 (default 2e-4)");
  c_train->add_option("--seed", tr.seed, "Override train.seed (default 0)");
  c_train->add_option("--alpha", tr.alpha, "Override pixel loss weight (default 100)");
  c_train->add_option("--beta", tr.beta, "Override perceptual loss weight (default 0.001)");
  c_train->add_option("--gamma", tr.gamma, "Override saliency loss weight (default 1)");
  c_train->add_option("--checkpoint-every", tr.checkpoint_every,
                      "Override checkpoint cadence in epochs (default 0: final only)");
  c_train->footer("Precedence: built-in defaults < --config file < command-line flags.");

  std::string ckpt, tin, tout;
  auto* c_tr = app.add_subcommand("translate", "Synthesize angiography from structure images");
  c_tr->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
  c_tr->add_option("--input", tin, "Structure PNG, or a directory of *_struct.png")->required();
  c_tr->add_option("--out", tout, "Output PNG, or output root (<id>_ffa.png)")->required();

  std::string pred_dir, ref_dir, ssim_mode = "global", report;
  auto* c_ev = app.add_subcommand("evaluate", "Score predictions against references (PSNR, SSIM)");
  c_ev->add_option("--pred-dir", pred_dir, "Predicted PNGs")->required();
  c_ev->add_option("--ref-dir", ref_dir, "Reference PNGs with the same relative paths")->required();
  c_ev->add_option("--ssim-mode", ssim_mode, "SSIM statistics")
      ->check(CLI::IsMember({"global", "windowed"}))
      ->capture_default_str();
  c_ev->add_option("--report", report, "Per-image CSV (id,mse,psnr,ssim)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ok : usage;
  }

  try {
    if (*c_pre) return run_preprocess(pre);
    if (*c_synth) return run_synth(synth_n, synth_size, synth_seed, synth_out);
    if (*c_sal) return run_saliency(sal);
    if (*c_train) return run_train(tr);
    if (*c_tr) return run_translate(ckpt, tin, tout);
    if (*c_ev) return run_evaluate(pred_dir, ref_dir, ssim_mode, report);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage;
  } catch (const NumericFault& e) {
    std::cerr << "numeric fault in " << e.where() << ": " << e.what() << '\n';
    return numeric;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return data;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return data;
  }
  return usage;
}
