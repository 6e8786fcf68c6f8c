// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Optional arguments select criteria by number, e.g. `acceptance 1 3 7`.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "ffasynth/config.hpp"
#include "ffasynth/data.hpp"
#include "ffasynth/filters.hpp"
#include "ffasynth/losses.hpp"
#include "ffasynth/metrics.hpp"
#include "ffasynth/saliency.hpp"
#include "ffasynth/trainer.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace ffasynth;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail = what;
      pass = false;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- AC-1 ----
Outcome filter_oracles() {
  Outcome o;
  std::mt19937_64 rng(20240101);
  std::uniform_int_distribution<int> kpick(0, 5);
  const int ks[] = {1, 3, 5, 7, 9, 31};
  double worst = 0.0;
  int median_bad = 0;
  for (int t = 0; t < 200; ++t) {
    Image img = oracle::random_image(16, 16, 1, rng);
    const int k = ks[kpick(rng)];
    if (!(median_filter(img, k) == oracle::median(img, k))) ++median_bad;
    const int kg = 2 * (t % 4) + 3;
    const double sigma = 0.8 + 0.1 * (t % 10);
    Image a = gaussian_filter(img, kg, sigma), b = oracle::gaussian(img, kg, sigma);
    for (std::size_t i = 0; i < a.size(); ++i)
      worst = std::max(worst, static_cast<double>(std::abs(a.data()[i] - b.data()[i]) / std::max(std::abs(b.data()[i]), 1e-6f)));
  }
  o.require(median_bad == 0, std::to_string(median_bad) + " median mismatches");
  o.require(worst <= 1e-6, fmt("gaussian rel err %.3g", worst));
  if (o.pass) o.detail = "median exact on 200 images, gaussian max rel err " + fmt("%.2g", worst);
  return o;
}

// ---- AC-2 ----
Outcome saliency_properties() {
  Outcome o;
  SaliencyConfig cfg;
  cfg.median_kernel = 15;
  for (float v : {0.0f, 77.0f / 255.0f, 1.0f}) {
    for (float s : compute_saliency(Image(32, 32, 1, v), cfg).data) o.require(s == 0.0f, "constant image not zero");
  }
  std::mt19937_64 rng(7);
  Image img = oracle::random_image(48, 40, 1, rng);
  SaliencyMap one = compute_saliency(img, cfg);
  for (double a : {2.0, -0.5, 3.7}) {
    SaliencyConfig c = cfg;
    c.a = a;
    SaliencyMap m = compute_saliency(img, c);
    for (std::size_t i = 0; i < m.data.size(); ++i)
      o.require(m.data[i] == static_cast<float>(a) * one.data[i], "a-linearity not exact");
  }
  auto blob = [](double cx, double cy) {
    Image b(64, 64, 1, 0.15f);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        b.at(x, y) += static_cast<float>(0.6 * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / 8.0));
    return b;
  };
  SaliencyMap ma = compute_saliency(blob(28, 29), cfg), mb = compute_saliency(blob(34, 33), cfg);
  double shift_err = 0;
  for (int y = 18; y < 40; ++y)
    for (int x = 18; x < 40; ++x) shift_err = std::max(shift_err, static_cast<double>(std::abs(ma.at(x, y) - mb.at(x + 6, y + 4))));
  o.require(shift_err <= 1e-6, fmt("shift error %.3g", shift_err));

  double worst_ratio = INFINITY;
  int blobs = 0;
  for (int i = 0; blobs < 5 && i < 40; ++i) {
    PhantomRender r = render_phantom(128, 5, i);
    if (!r.blob) continue;
    ++blobs;
    SaliencyMap m = compute_saliency(r.pair.angiography, SaliencyConfig{});
    double in = 0, out = 0;
    int nin = 0, nout = 0;
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) {
        const double d = std::hypot(x + 0.5 - r.blob->cx, y + 0.5 - r.blob->cy);
        if (d <= r.blob->sigma) in += m.at(x, y), ++nin;
        else if (d > r.blob->support_radius()) out += m.at(x, y), ++nout;
      }
    worst_ratio = std::min(worst_ratio, (in / nin) / std::abs(out / nout));
  }
  o.require(blobs == 5, "not enough phantom blobs");
  o.require(worst_ratio > 5.0, fmt("phantom blob contrast ratio %.2f", worst_ratio));
  if (o.pass) o.detail = "shift err " + fmt("%.2g", shift_err) + ", min blob contrast ratio " + fmt("%.1f", worst_ratio);
  return o;
}

// ---- AC-3 ----
Outcome metric_oracles() {
  Outcome o;
  std::mt19937_64 rng(99);
  SSIMParams win;
  win.mode = SSIMParams::Mode::windowed;
  double worst = 0;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-12); };
  for (int t = 0; t < 30; ++t) {
    Image a = oracle::random_image(24, 24, t % 2 ? 3 : 1, rng);
    Image b = a;
    std::normal_distribution<float> n(0.0f, 0.02f * (1 + t % 5));
    for (float& v : b.data()) v = std::clamp(v + n(rng), 0.0f, 1.0f);
    worst = std::max({worst, rel(mse(a, b), oracle::mse(a, b)), rel(psnr(a, b), oracle::psnr(a, b)),
                      rel(ssim(a, b), oracle::ssim_global(a, b)), rel(ssim(a, b, win), oracle::ssim_windowed(a, b))});
    o.require(ssim(a, b) == ssim(b, a) && mse(a, b) == mse(b, a), "metric not symmetric");
    o.require(std::abs(ssim(a, a) - 1.0) < 1e-15 && std::abs(ssim(a, a, win) - 1.0) < 1e-12, "ssim(x,x) != 1");
    o.require(std::isinf(psnr(a, a)), "psnr(x,x) not infinite");
  }
  o.require(worst <= 1e-6, fmt("oracle rel err %.3g", worst));
  Image x(32, 32, 1, 0.4f), y = x;
  for (float& v : y.data()) v += 10.0f / 255.0f;
  const double p = psnr(x, y);
  o.require(std::abs(p - 28.13) <= 0.01, fmt("psnr(x, x+10/255) = %.4f", p));
  Image base = oracle::random_image(32, 32, 1, rng), pattern = oracle::random_image(32, 32, 1, rng);
  double lp = INFINITY, ls = 1.0;
  for (float amp : {0.02f, 0.05f, 0.1f, 0.2f}) {
    Image z = base;
    for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] += amp * (pattern.data()[i] - 0.5f);
    o.require(psnr(base, z) < lp && ssim(base, z) < ls, "metrics not monotone in noise");
    lp = psnr(base, z);
    ls = ssim(base, z);
  }
  if (o.pass) o.detail = "max oracle rel err " + fmt("%.2g", worst) + ", psnr(x, x+10/255) = " + fmt("%.4f dB", p);
  return o;
}

// ---- AC-4 ----
Outcome gradient_checks() {
  Outcome o;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GeneratorConfig gc;
  gc.base_width = 2;
  gc.n_residual_blocks = 1;
  FeatureExtractorConfig fc;
  fc.width_divisor = 16;
  FeatureExtractor fx(fc);
  SaliencyConfig sc;
  sc.median_kernel = 7;

  Tensor x = Tensor::chw(3, 16, 16), target = Tensor::chw(1, 16, 16);
  for (auto& v : x.values()) v = u(rng);
  for (auto& v : target.values()) v = u(rng);
  const Tensor target_features = fx.forward(target);
  const SaliencyMap target_map = compute_saliency(to_image(target), sc);

  auto check = [&](const char* name, std::function<LossValue(const Tensor&)> loss) {
    Generator g(gc, 17);
    LossValue lv = loss(g.forward(x));
    g.params().zero_grad();
    g.backward(lv.grad);
    std::vector<double*> probe;
    std::vector<double> analytic;
    for (auto& p : g.params())
      for (std::size_t i : gradcheck::sample(p.value.size(), 6, rng)) {
        probe.push_back(&p.value[i]);
        analytic.push_back(p.grad[i]);
      }
    auto r = gradcheck::compare(probe, analytic, [&] { return loss(g.forward(x)).value; });
    o.require(r.max_rel < 1e-3, std::string(name) + fmt(" max rel err %.3g", r.max_rel));
    return r.max_rel;
  };
  const double e_pix = check("pixel", [&](const Tensor& out) { return pixel_l1_grad(out, target); });
  const double e_perc = check("perceptual", [&](const Tensor& out) { return perceptual_loss_grad(out, target_features, fx); });
  std::vector<double> frozen;
  {
    Generator g(gc, 17);
    frozen = saliency_loss_grad(g.forward(x), target_map, sc, SaliencyGradMode::detached_background).background;
  }
  const double e_sal = check("saliency", [&](const Tensor& out) {
    SaliencyLossValue s = saliency_loss_grad(out, target_map, sc, SaliencyGradMode::detached_background, frozen);
    return LossValue{s.value, s.grad};
  });
  if (o.pass)
    o.detail = "max rel err pixel " + fmt("%.2g", e_pix) + ", perceptual " + fmt("%.2g", e_perc) + ", saliency " +
               fmt("%.2g", e_sal);
  return o;
}

// ---- AC-5 ----
struct OverfitRun {
  double psnr = 0;
  double pixel_start = 0;
  double pixel_end = 0;
};

OverfitRun overfit_once(const std::vector<AlignedPair>& data) {
  ModelConfig m;
  m.generator.base_width = 8;
  m.generator.n_residual_blocks = 3;
  m.features.width_divisor = 4;
  TrainConfig t;
  t.epochs = 100;
  t.decay_start_epoch = 50;
  t.seed = 1;
  Trainer trainer(m, t);
  RunLog log = fit(trainer, data);
  OverfitRun r;
  for (const auto& p : data) r.psnr += psnr(trainer.translate(p.structure), p.angiography) / data.size();
  const std::size_t n = log.iterations.size();
  for (std::size_t i = 0; i < 10; ++i) {
    r.pixel_start += log.iterations[i].report.pixel / 10;
    r.pixel_end += log.iterations[n - 10 + i].report.pixel / 10;
  }
  return r;
}

Outcome overfit_smoke() {
  Outcome o;
  const auto data = synth_phantom_pairs(4, 64, 7);
  OverfitRun a = overfit_once(data);
  OverfitRun b = overfit_once(data);
  const double drop = 1.0 - a.pixel_end / a.pixel_start;
  o.require(a.psnr > 20.0, fmt("train PSNR %.2f dB", a.psnr));
  o.require(drop >= 0.5, fmt("pixel loss fell only %.0f%%", 100 * drop));
  o.require(std::abs(a.psnr - b.psnr) <= 0.5, fmt("rerun PSNR differs by %.3f dB", std::abs(a.psnr - b.psnr)));
  o.detail = "train PSNR " + fmt("%.2f dB", a.psnr) + ", pixel loss -" + fmt("%.0f%%", 100 * drop) + ", rerun diff " +
             fmt("%.3g dB", std::abs(a.psnr - b.psnr));
  return o;
}

// ---- AC-6 ----
Outcome architecture() {
  Outcome o;
  DiscriminatorConfig d;
  o.require(receptive_field(d) == 70, "receptive field " + std::to_string(receptive_field(d)));
  o.require(oracle::receptive_field(d.kernel, d.strides) == 70, "oracle receptive field");
  std::string sizes;
  for (int n : {64, 128, 256}) {
    int s = n;
    for (int st : d.strides) s = oracle::conv_out(s, 4, st, 1);
    o.require(score_map_size(d, n, n) == std::make_pair(s, s), "score map for " + std::to_string(n));
    sizes += std::to_string(n) + "->" + std::to_string(s) + " ";
  }
  Discriminator disc(DiscriminatorConfig::patch_gan(8), 1);
  Tensor sm = disc.forward(Tensor::chw(3, 64, 64, 0.5), Tensor::chw(1, 64, 64, 0.5));
  o.require(sm.height() == score_map_size(d, 64, 64).first, "discriminator forward extent");
  GeneratorConfig gc;
  gc.base_width = 4;
  gc.n_residual_blocks = 2;
  Generator g(gc, 3);
  std::mt19937_64 rng(1);
  for (auto [h, w] : {std::pair{64, 64}, std::pair{32, 48}}) {
    Image in = oracle::random_image(w, h, 3, rng);
    Image out = g.forward(in);
    o.require(out.width() == w && out.height() == h && out.channels() == 1, "generator extent");
    for (float v : out.data()) o.require(v >= 0.0f && v <= 1.0f, "generator range");
  }
  if (o.pass) o.detail = "receptive field 70, score maps " + sizes + "match";
  return o;
}

// ---- AC-7 ----
Outcome schedule() {
  Outcome o;
  TrainConfig t;
  const double a = lr_schedule(1, t), b = lr_schedule(150, t), c = lr_schedule(200, t);
  o.require(a == 2e-4, fmt("epoch 1 -> %.17g", a));
  o.require(b == 1e-4, fmt("epoch 150 -> %.17g", b));
  o.require(c == 0.0, fmt("epoch 200 -> %.17g", c));
  if (o.pass) o.detail = "1 -> 2e-4, 150 -> 1e-4, 200 -> 0";
  return o;
}

// ---- AC-8 ----
Outcome ablations() {
  Outcome o;
  using nlohmann::json;
  const RunConfig full = run_config_from_json(json::object());
  const RunConfig no_sal = run_config_from_json(json{{"loss_weights", {{"gamma", 0}}}});
  const RunConfig no_patch = run_config_from_json(json{{"discriminator", {{"preset", "imagegan"}}}});
  const json d1 = json::diff(to_json(full), to_json(no_sal));
  const json d2 = json::diff(to_json(full), to_json(no_patch));
  o.require(d1.size() == 1 && d1[0]["path"] == "/loss_weights/gamma", "saliency ablation diff: " + d1.dump());
  bool only_disc = !d2.empty();
  for (const auto& op : d2) only_disc &= op["path"].get<std::string>().rfind("/discriminator/", 0) == 0;
  o.require(only_disc, "discriminator ablation diff: " + d2.dump());
  o.require(full.model.discriminator.is_patch_gan() && !no_patch.model.discriminator.is_patch_gan(),
            "patch flag");
  o.require(receptive_field(no_patch.model.discriminator) >= 256, "regular discriminator does not see the whole input");
  o.require(!(full == no_sal) && !(full == no_patch) && !(no_sal == no_patch), "configs not distinct");

  // each variant must run, at reduced width
  const auto data = synth_phantom_pairs(1, 128, 3);
  for (const RunConfig* cfg : {&full, &no_sal, &no_patch}) {
    ModelConfig m = cfg->model;
    m.generator.base_width = 2;
    m.generator.n_residual_blocks = 1;
    for (int& w : m.discriminator.widths) w = w == 1 ? 1 : std::max(1, w / 16);
    m.features.width_divisor = 16;
    TrainConfig t = cfg->train;
    t.epochs = 1;
    t.decay_start_epoch = 0;
    Trainer trainer(m, t);
    StepResult r = trainer.train_step(data[0], 2e-4);
    o.require(std::isfinite(r.report.total), "ablation step not finite");
    if (cfg == &no_sal) {
      o.require(std::abs(r.report.total - (r.report.gan + 100 * r.report.pixel + 0.001 * r.report.perceptual)) < 1e-9,
                "gamma=0 still weighs saliency");
    }
  }
  if (o.pass) o.detail = "gamma=0 and 7-layer discriminator snapshots differ only in their own keys; all three run";
  return o;
}

// ---- AC-9 ----
std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int sh(const std::string& cmd) {
  const int s = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
}

Outcome cli_determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "ffasynth_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream cfg(root / "run.json");
    cfg << R"({"generator": {"base_width": 4, "n_residual_blocks": 2},
               "discriminator": {"base_width": 8},
               "feature_extractor": {"width_divisor": 8},
               "train": {"epochs": 2, "decay_start_epoch": 1, "seed": 11}})";
  }
  const std::string cli = FFASYNTH_CLI;
  for (const char* tag : {"a", "b"}) {
    const fs::path r = root / tag;
    const std::string R = r.string();
    o.require(sh(cli + " synth --n 6 --size 64 --seed 5 --out " + R + "/phantoms") == 0, "synth failed");
    o.require(sh(cli + " preprocess --pairs-dir " + R + "/phantoms --out " + R + "/data --patch 64 --roi circle --seed 2") == 0,
              "preprocess failed");
    o.require(sh(cli + " train --data " + R + "/data/train --config " + (root / "run.json").string() + " --out-dir " + R + "/run") == 0,
              "train failed");
    o.require(sh(cli + " translate --checkpoint " + R + "/run/checkpoints/latest.ckpt --input " + R + "/data/test --out " + R +
                 "/pred") == 0,
              "translate failed");
    o.require(sh(cli + " evaluate --pred-dir " + R + "/pred --ref-dir " + R + "/data/test --report " + R + "/report.csv") == 0,
              "evaluate failed");
  }
  if (!o.pass) return o;
  int compared = 0;
  std::set<std::string> seen;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), root / "a");
    const fs::path other = root / "b" / rel;
    o.require(fs::exists(other), "missing in rerun: " + rel.string());
    if (fs::exists(other)) o.require(slurp(e.path()) == slurp(other), "differs: " + rel.string());
    ++compared;
  }
  for (const auto& e : fs::recursive_directory_iterator(root / "b"))
    if (e.is_regular_file()) o.require(fs::exists(root / "a" / fs::relative(e.path(), root / "b")), "extra file in rerun");
  for (const char* must : {"data/manifest.json", "run/losses.csv", "run/epochs.csv", "report.csv"})
    o.require(fs::exists(root / "a" / must), std::string("not produced: ") + must);
  if (o.pass) {
    o.detail = std::to_string(compared) + " files byte-identical across two runs";
    fs::remove_all(root);
  }
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const Criterion all[] = {
      {1, "filter oracles", 10, filter_oracles},
      {2, "saliency properties", 30, saliency_properties},
      {3, "metric oracles", 10, metric_oracles},
      {4, "gradient checks", 120, gradient_checks},
      {5, "overfit smoke test", 900 * 2, overfit_smoke},
      {6, "architecture arithmetic", 5, architecture},
      {7, "learning-rate schedule", 1, schedule},
      {8, "ablation configurations", 60, ablations},
      {9, "CLI determinism", 300, cli_determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.pass && s > c.limit_s) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", c.limit_s);
    }
    std::printf("AC-%d %s  %-24s %s (%.1f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), s);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed ? 1 : 0;
}
