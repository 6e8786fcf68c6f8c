#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ffasynth/data.hpp"
#include "ffasynth/losses.hpp"
#include "ffasynth/metrics.hpp"
#include "ffasynth/networks.hpp"
#include "ffasynth/saliency.hpp"

namespace ffasynth {

struct TrainConfig {
  int epochs = 200;
  int decay_start_epoch = 100;
  double lr0 = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 1;
  std::uint64_t seed = 0;
  LossWeights loss_weights;
  SaliencyConfig saliency;
  SaliencyGradMode grad_mode = SaliencyGradMode::detached_background;
  int checkpoint_every = 0;              ///< epochs; 0 writes only the final checkpoint
  double grad_clip = 0.0;                ///< global max-norm; 0 disables
  double discriminator_lr_scale = 1.0;   ///< 0 freezes the discriminator

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Learning rate for a 1-based epoch: lr0 up to decay_start_epoch, then linear to 0 at
/// `epochs`.
double lr_schedule(int epoch, const TrainConfig& cfg);

/// Adam with bias correction; one moment pair per parameter tensor.
class Adam {
 public:
  Adam(const ParamSet& params, double beta1, double beta2, double eps);

  void step(ParamSet& params, double lr);

  long long steps() const noexcept { return t_; }
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }
  std::vector<Tensor>& first_moments() noexcept { return m_; }
  std::vector<Tensor>& second_moments() noexcept { return v_; }
  void set_steps(long long t) noexcept { t_ = t; }

 private:
  double beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

/// Networks of one model.
struct ModelConfig {
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  FeatureExtractorConfig features;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class StepEvent { discriminator_updated, generator_scored, generator_updated };

struct StepResult {
  LossReport report;
  double discriminator_loss = 0.0;
};

/// Owns both networks, their optimizers and the per-target caches.
class Trainer {
 public:
  Trainer(ModelConfig model, TrainConfig train);

  const ModelConfig& model_config() const noexcept { return model_; }
  const TrainConfig& train_config() const noexcept { return train_; }
  Generator& generator() noexcept { return generator_; }
  Discriminator& discriminator() noexcept { return discriminator_; }
  const Generator& generator() const noexcept { return generator_; }
  const Discriminator& discriminator() const noexcept { return discriminator_; }
  Adam& generator_optimizer() noexcept { return g_opt_; }
  Adam& discriminator_optimizer() noexcept { return d_opt_; }

  /// Observer called at each stage of train_step (test hook).
  void set_observer(std::function<void(StepEvent, const Trainer&)> observer) { observer_ = std::move(observer); }

  /// One discriminator Adam step on the adversarial loss with the generator output held
  /// fixed, then one generator Adam step on the combined loss. Throws NumericFault naming
  /// the offending term or network.
  StepResult train_step(const AlignedPair& pair, double lr);

  /// Loss terms and their combined generator-output gradient without updating anything.
  struct GeneratorObjective {
    LossReport report;
    Tensor output;
    Tensor grad_output;
  };
  GeneratorObjective generator_objective(const AlignedPair& pair, bool adversarial = true);

  Image translate(const Image& structure);

  /// Epochs completed so far (restored from checkpoints).
  int epoch() const noexcept { return epoch_; }
  void set_epoch(int e) noexcept { epoch_ = e; }

  void save_checkpoint(const std::filesystem::path& path) const;
  static Trainer load_checkpoint(const std::filesystem::path& path,
                                 std::optional<TrainConfig> train_override = std::nullopt);

 private:
  const SaliencyMap& target_saliency(const Image& angiography);
  const Tensor& target_features(const Image& angiography);
  void clip(ParamSet& params) const;
  void emit(StepEvent e) const {
    if (observer_) observer_(e, *this);
  }

  ModelConfig model_;
  TrainConfig train_;
  Generator generator_;
  Discriminator discriminator_;
  FeatureExtractor features_;
  Adam g_opt_;
  Adam d_opt_;
  std::mt19937_64 dropout_rng_;
  int epoch_ = 0;
  std::unordered_map<std::uint64_t, SaliencyMap> saliency_cache_;
  std::unordered_map<std::uint64_t, Tensor> feature_cache_;
  std::function<void(StepEvent, const Trainer&)> observer_;
};

/// FNV-1a over the pixel bytes and extent.
std::uint64_t content_hash(const Image& img);

struct IterationRow {
  long long iteration = 0;
  int epoch = 0;
  LossReport report;
  double discriminator_loss = 0.0;
};

struct EpochRow {
  int epoch = 0;
  double lr = 0.0;
  std::optional<double> val_psnr;
  std::optional<double> val_ssim;
};

struct RunLog {
  std::vector<IterationRow> iterations;
  std::vector<EpochRow> epochs;

  /// iteration,gan,pixel,perceptual,saliency,total
  std::string losses_csv() const;
  /// epoch,lr,val_psnr,val_ssim
  std::string epochs_csv() const;
};

struct FitOptions {
  std::optional<std::filesystem::path> run_dir;  ///< logs, checkpoints and samples
  std::vector<AlignedPair> validation;
  SSIMParams ssim;
};

/// Runs epochs trainer.epoch()+1 .. epochs, each over all pairs in a shuffle seeded by
/// (seed, epoch). Writes checkpoints at the configured cadence and always at the end.
RunLog fit(Trainer& trainer, const std::vector<AlignedPair>& train, const FitOptions& options = {});

/// Loads a checkpoint and runs the generator (dropout off) on a structure image.
Image translate(const std::filesystem::path& checkpoint, const Image& structure);

}  // namespace ffasynth
