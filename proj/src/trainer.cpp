#include "ffasynth/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ffasynth/config.hpp"
#include "ffasynth/error.hpp"
#include "ffasynth/tensor_io.hpp"

namespace ffasynth {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (decay_start_epoch < 0 || decay_start_epoch >= epochs) {
    throw ParameterError("decay_start_epoch must lie in [0, epochs)");
  }
  if (!(lr0 >= 0.0)) throw ParameterError("lr0 must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ParameterError("Adam betas must lie in [0,1)");
  }
  if (!(adam_eps > 0.0)) throw ParameterError("Adam epsilon must be positive");
  if (batch_size != 1) throw ParameterError("only batch_size 1 is supported");
  if (checkpoint_every < 0) throw ParameterError("checkpoint_every must be >= 0");
  if (!(grad_clip >= 0.0)) throw ParameterError("grad_clip must be >= 0");
  if (!(discriminator_lr_scale >= 0.0)) throw ParameterError("discriminator_lr_scale must be >= 0");
  loss_weights.validate();
  saliency.validate();
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 1 || epoch > cfg.epochs) {
    throw ParameterError("epoch " + std::to_string(epoch) + " outside 1.." + std::to_string(cfg.epochs));
  }
  if (epoch <= cfg.decay_start_epoch) return cfg.lr0;
  return cfg.lr0 * static_cast<double>(cfg.epochs - epoch) /
         static_cast<double>(cfg.epochs - cfg.decay_start_epoch);
}

// ---- Adam -----------------------------------------------------------------

Adam::Adam(const ParamSet& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params) {
    m_.emplace_back(p.value.shape(), 0.0);
    v_.emplace_back(p.value.shape(), 0.0);
  }
}

void Adam::step(ParamSet& params, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = params[k];
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

// ---- Trainer --------------------------------------------------------------

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  std::uint64_t out[1];
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  out[0] = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
  return out[0];
}

}  // namespace

std::uint64_t content_hash(const Image& img) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  const int dims[3] = {img.width(), img.height(), img.channels()};
  mix(dims, sizeof dims);
  mix(img.data().data(), img.size() * sizeof(float));
  return h;
}

Trainer::Trainer(ModelConfig model, TrainConfig train)
    : model_(std::move(model)),
      train_(std::move(train)),
      generator_((train_.validate(), model_.generator), derive_seed(train_.seed, 1)),
      discriminator_(model_.discriminator, derive_seed(train_.seed, 2)),
      features_(model_.features),
      g_opt_(generator_.params(), train_.adam_beta1, train_.adam_beta2, train_.adam_eps),
      d_opt_(discriminator_.params(), train_.adam_beta1, train_.adam_beta2, train_.adam_eps),
      dropout_rng_(derive_seed(train_.seed, 3)) {
  if (model_.generator.out_channels != 1) throw ParameterError("generator must produce one channel");
  if (model_.discriminator.in_channels != model_.generator.in_channels + 1) {
    throw ParameterError("discriminator in_channels must equal generator in_channels + 1");
  }
}

const SaliencyMap& Trainer::target_saliency(const Image& angiography) {
  const auto key = content_hash(angiography);
  auto it = saliency_cache_.find(key);
  if (it == saliency_cache_.end()) it = saliency_cache_.emplace(key, compute_saliency(angiography, train_.saliency)).first;
  return it->second;
}

const Tensor& Trainer::target_features(const Image& angiography) {
  const auto key = content_hash(angiography);
  auto it = feature_cache_.find(key);
  if (it == feature_cache_.end()) it = feature_cache_.emplace(key, features_.extract(angiography)).first;
  return it->second;
}

void Trainer::clip(ParamSet& params) const {
  if (train_.grad_clip <= 0.0) return;
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.grad.values()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm <= train_.grad_clip) return;
  const double s = train_.grad_clip / norm;
  for (auto& p : params) p.grad *= s;
}

Trainer::GeneratorObjective Trainer::generator_objective(const AlignedPair& pair, bool adversarial) {
  const Tensor structure = to_tensor(pair.structure);
  const Tensor target = to_tensor(pair.angiography);
  ForwardContext ctx{true, &dropout_rng_};
  GeneratorObjective obj;
  obj.output = generator_.forward(structure, ctx);

  const LossWeights& w = train_.loss_weights;
  double gan = 0.0;
  obj.grad_output = Tensor(obj.output.shape(), 0.0);
  if (adversarial) {
    const Tensor scores = discriminator_.forward(structure, obj.output);
    emit(StepEvent::generator_scored);
    const LossValue g = adversarial_g_loss_grad(scores);
    gan = g.value;
    obj.grad_output += discriminator_.backward(g.grad, false);
  }
  LossValue pix = pixel_l1_grad(obj.output, target);
  LossValue perc = perceptual_loss_grad(obj.output, target_features(pair.angiography), features_);
  SaliencyLossValue sal = saliency_loss_grad(obj.output, target_saliency(pair.angiography), train_.saliency,
                                             train_.grad_mode);
  obj.report = total_loss(gan, pix.value, perc.value, sal.value, w);

  pix.grad *= w.alpha;
  perc.grad *= w.beta;
  sal.grad *= w.gamma;
  obj.grad_output += pix.grad;
  obj.grad_output += perc.grad;
  obj.grad_output += sal.grad;
  return obj;
}

StepResult Trainer::train_step(const AlignedPair& pair, double lr) {
  if (pair.structure.channels() != model_.generator.in_channels || pair.angiography.channels() != 1) {
    throw ParameterError("pair '" + pair.source_id + "' has unexpected channel counts");
  }
  if (pair.structure.width() != pair.angiography.width() || pair.structure.height() != pair.angiography.height()) {
    throw ParameterError("pair '" + pair.source_id + "' is not aligned");
  }
  const Tensor structure = to_tensor(pair.structure);
  const Tensor target = to_tensor(pair.angiography);

  // Discriminator step on the current generator output, which is not differentiated.
  const Tensor fake = generator_.forward(structure, ForwardContext{true, &dropout_rng_});
  discriminator_.params().zero_grad();
  const Tensor real_scores = discriminator_.forward(structure, target);
  const Tensor ones(real_scores.shape(), 0.5);
  DiscriminatorLoss dl_real = adversarial_d_loss_grad(real_scores, ones);
  discriminator_.backward(dl_real.grad_real);
  const Tensor fake_scores = discriminator_.forward(structure, fake);
  DiscriminatorLoss dl_fake = adversarial_d_loss_grad(ones, fake_scores);
  discriminator_.backward(dl_fake.grad_fake);
  StepResult result;
  result.discriminator_loss = adversarial_d_loss(real_scores, fake_scores);
  if (!std::isfinite(result.discriminator_loss)) {
    throw NumericFault("discriminator_loss", "discriminator loss is not finite");
  }
  clip(discriminator_.params());
  d_opt_.step(discriminator_.params(), lr * train_.discriminator_lr_scale);
  if (!discriminator_.params().all_finite()) {
    throw NumericFault("discriminator", "discriminator parameters became non-finite");
  }
  emit(StepEvent::discriminator_updated);

  // Generator step against the updated discriminator.
  generator_.params().zero_grad();
  GeneratorObjective obj = generator_objective(pair, true);
  generator_.backward(obj.grad_output);
  clip(generator_.params());
  g_opt_.step(generator_.params(), lr);
  if (!generator_.params().all_finite()) {
    throw NumericFault("generator", "generator parameters became non-finite");
  }
  emit(StepEvent::generator_updated);
  result.report = obj.report;
  return result;
}

Image Trainer::translate(const Image& structure) {
  Image input = structure;
  if (input.channels() == 1 && model_.generator.in_channels == 3) input = replicate_channels(input, 3);
  return to_image(generator_.forward(to_tensor(input), ForwardContext{false, nullptr}));
}

// ---- checkpoints ----------------------------------------------------------

void Trainer::save_checkpoint(const fs::path& path) const {
  TensorFile file;
  file.header = {{"kind", "checkpoint"},
                 {"epoch", epoch_},
                 {"generator", to_json(model_.generator)},
                 {"discriminator", to_json(model_.discriminator)},
                 {"feature_extractor", to_json(model_.features)},
                 {"train", to_json(train_)},
                 {"adam_steps", {{"generator", g_opt_.steps()}, {"discriminator", d_opt_.steps()}}}};
  append_params(file, generator_.params(), "G/");
  append_params(file, discriminator_.params(), "D/");
  auto moments = [&](const Adam& opt, const ParamSet& ps, const std::string& prefix) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
      file.tensors.emplace_back(prefix + "m/" + ps[i].name, opt.first_moments()[i]);
      file.tensors.emplace_back(prefix + "v/" + ps[i].name, opt.second_moments()[i]);
    }
  };
  moments(g_opt_, generator_.params(), "adamG/");
  moments(d_opt_, discriminator_.params(), "adamD/");
  const fs::path tmp = path.string() + ".tmp";
  write_tensor_file(tmp, file);
  fs::rename(tmp, path);
}

Trainer Trainer::load_checkpoint(const fs::path& path, std::optional<TrainConfig> train_override) {
  if (!fs::exists(path)) throw DataError("checkpoint '" + path.string() + "' not found");
  const TensorFile file = read_tensor_file(path);
  const auto& h = file.header;
  if (h.value("kind", "") != "checkpoint") throw DataError("'" + path.string() + "' is not a checkpoint");
  ModelConfig model;
  TrainConfig train;
  try {
    model.generator = generator_config_from_json(h.at("generator"));
    model.discriminator = discriminator_config_from_json(h.at("discriminator"));
    model.features = feature_config_from_json(h.at("feature_extractor"));
    train = train_config_from_json(h.at("train"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint '" + path.string() + "' has an incomplete header: " + e.what());
  } catch (const ParameterError& e) {
    throw DataError("checkpoint '" + path.string() + "' has an invalid header: " + e.what());
  }
  Trainer t(model, train_override.value_or(train));
  const std::string src = path.string();
  load_params(file, t.generator_.params(), "G/", src);
  load_params(file, t.discriminator_.params(), "D/", src);
  auto restore = [&](Adam& opt, const ParamSet& ps, const std::string& prefix) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const Tensor* m = file.find(prefix + "m/" + ps[i].name);
      const Tensor* v = file.find(prefix + "v/" + ps[i].name);
      if (m == nullptr || v == nullptr || !m->same_shape(ps[i].value) || !v->same_shape(ps[i].value)) {
        throw DataError("'" + src + "' lacks optimizer state for '" + ps[i].name + "'");
      }
      opt.first_moments()[i] = *m;
      opt.second_moments()[i] = *v;
    }
  };
  restore(t.g_opt_, t.generator_.params(), "adamG/");
  restore(t.d_opt_, t.discriminator_.params(), "adamD/");
  const auto steps = h.value("adam_steps", nlohmann::json::object());
  t.g_opt_.set_steps(steps.value("generator", 0LL));
  t.d_opt_.set_steps(steps.value("discriminator", 0LL));
  t.epoch_ = h.value("epoch", 0);
  return t;
}

Image translate(const fs::path& checkpoint, const Image& structure) {
  Trainer t = Trainer::load_checkpoint(checkpoint);
  return t.translate(structure);
}

// ---- run log --------------------------------------------------------------

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string RunLog::losses_csv() const {
  std::ostringstream os;
  os << "iteration,gan,pixel,perceptual,saliency,total\n";
  for (const auto& r : iterations) {
    os << r.iteration << ',' << num(r.report.gan) << ',' << num(r.report.pixel) << ',' << num(r.report.perceptual)
       << ',' << num(r.report.saliency) << ',' << num(r.report.total) << '\n';
  }
  return os.str();
}

std::string RunLog::epochs_csv() const {
  std::ostringstream os;
  os << "epoch,lr,val_psnr,val_ssim\n";
  for (const auto& r : epochs) {
    os << r.epoch << ',' << num(r.lr) << ',' << (r.val_psnr ? num(*r.val_psnr) : "") << ','
       << (r.val_ssim ? num(*r.val_ssim) : "") << '\n';
  }
  return os.str();
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path.string() + "'");
  os << text;
}

void append_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::app);
  if (!os) throw DataError("cannot write '" + path.string() + "'");
  os << text;
}

std::string epoch_tag(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04d", epoch);
  return buf;
}

}  // namespace

RunLog fit(Trainer& trainer, const std::vector<AlignedPair>& train, const FitOptions& options) {
  if (train.empty()) throw ParameterError("training set is empty");
  const TrainConfig& cfg = trainer.train_config();
  RunLog log;

  const bool resumed = trainer.epoch() > 0;
  if (options.run_dir) {
    fs::create_directories(*options.run_dir / "checkpoints");
    RunConfig snapshot{trainer.model_config(), cfg, options.ssim};
    write_text(*options.run_dir / "config.json", to_json(snapshot).dump(2) + "\n");
    const fs::path losses = *options.run_dir / "losses.csv";
    const fs::path epochs = *options.run_dir / "epochs.csv";
    if (!resumed || !fs::exists(losses)) write_text(losses, RunLog{}.losses_csv());
    if (!resumed || !fs::exists(epochs)) write_text(epochs, RunLog{}.epochs_csv());
  }

  const long long per_epoch = static_cast<long long>(train.size());
  for (int epoch = trainer.epoch() + 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    RunLog epoch_log;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const StepResult r = trainer.train_step(train[order[i]], lr);
      epoch_log.iterations.push_back(
          {(epoch - 1) * per_epoch + static_cast<long long>(i) + 1, epoch, r.report, r.discriminator_loss});
    }

    EpochRow row{epoch, lr, std::nullopt, std::nullopt};
    if (!options.validation.empty()) {
      std::vector<MetricRow> rows;
      for (const auto& p : options.validation) {
        const Image out = trainer.translate(p.structure);
        const double m = mse(out, p.angiography);
        rows.push_back({p.source_id, m, psnr_from_mse(m), ssim(out, p.angiography, options.ssim)});
      }
      const MetricReport rep = aggregate(std::move(rows));
      row.val_psnr = rep.mean_psnr;
      row.val_ssim = rep.mean_ssim;
    }
    epoch_log.epochs.push_back(row);
    trainer.set_epoch(epoch);

    if (options.run_dir) {
      const fs::path& dir = *options.run_dir;
      append_text(dir / "losses.csv", epoch_log.losses_csv().substr(RunLog{}.losses_csv().size()));
      append_text(dir / "epochs.csv", epoch_log.epochs_csv().substr(RunLog{}.epochs_csv().size()));
      const bool cadence = cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0;
      if (cadence || epoch == cfg.epochs) {
        trainer.save_checkpoint(dir / "checkpoints" / (epoch_tag(epoch) + ".ckpt"));
        trainer.save_checkpoint(dir / "checkpoints" / "latest.ckpt");
        const auto& samples = options.validation.empty() ? train : options.validation;
        const AlignedPair& sample = samples.front();
        save_png(trainer.translate(sample.structure), dir / "samples" / epoch_tag(epoch) / (sample.source_id + ".png"));
      }
    }
    log.iterations.insert(log.iterations.end(), epoch_log.iterations.begin(), epoch_log.iterations.end());
    log.epochs.push_back(row);
  }
  return log;
}

}  // namespace ffasynth
