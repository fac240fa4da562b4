#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "skelfont/checkpoint.hpp"
#include "skelfont/data.hpp"
#include "skelfont/losses.hpp"
#include "skelfont/networks.hpp"
#include "skelfont/optim.hpp"

namespace skelfont {

struct TrainConfig {
  std::string profile = "desk";
  int epochs = 5;
  int sg_epochs = 5;
  int batch_size = 1;
  double base_lr = 5e-4;
  int lr_warm_epochs = 8;
  int lr_decay_interval = 5;
  double beta1 = 0.5;
  double beta2 = 0.999;
  LossWeights weights;
  AdvForm adv_form = AdvForm::kLsgan;
  std::uint64_t seed = 0;
  int image_size = 64;
  int checkpoint_every = 0;    // in steps; 0 saves at the end of every epoch
  std::int64_t max_steps = 0;  // 0 runs every epoch
  bool allow_unpaired = false;
  std::string source_style = "source";
  std::string target_style = "target";
  NetConfig net;
  double sg_cycle_weight = 10.0;
  double sg_paired_weight = 10.0;

  void validate() const;  // ConfigError
};

// 64x64 images, bottleneck width 64, 5 epochs for both phases, lr 5e-4.
TrainConfig desk_profile();
// 256x256 images, width 256, 100 joint epochs, 80 skeleton-translator epochs.
TrainConfig paper_profile();
TrainConfig profile_by_name(const std::string& name);

nlohmann::json config_to_json(const TrainConfig& cfg);
// Starts from the profile named by "profile" (default desk) and overrides the
// keys present. Unknown keys are a ConfigError.
TrainConfig config_from_json(const nlohmann::json& j);
TrainConfig load_config(const std::filesystem::path& path);  // ConfigNotFound, ConfigError

// base_lr before lr_warm_epochs; afterwards
//   base_lr * (1 - k / (epochs - lr_warm_epochs)),
//   k = lr_decay_interval * floor((epoch - lr_warm_epochs) / lr_decay_interval),
// clamped at 0.
double lr_at(const TrainConfig& cfg, int epoch);

// ---------------------------------------------------------------------------
// Phase one: skeleton translator.

struct SgLosses {
  double adv = 0, cycle = 0, paired = 0, disc = 0, total = 0;
};

class SgTrainer {
 public:
  explicit SgTrainer(const TrainConfig& cfg);
  SgTrainer(const SgTrainer&) = delete;
  SgTrainer& operator=(const SgTrainer&) = delete;

  // One discriminator then one generator update on an (image, skeleton) pair.
  SgLosses step(const Tensor<float>& img, const Tensor<float>& skel, double lr);

  SkeletonTranslator<float>& model() { return *sg_; }
  const SkeletonTranslator<float>& model() const { return *sg_; }
  std::int64_t steps() const { return steps_; }

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);  // ManifestMismatch on drift

 private:
  TrainConfig cfg_;
  std::unique_ptr<SkeletonTranslator<float>> sg_;
  Adam<float> gen_opt_;
  Adam<float> disc_opt_;
  std::int64_t steps_ = 0;
};

// Mean L1 between SG output and the cached thinned skeleton over both styles
// of a split.
double sg_skeleton_l1(const SkeletonTranslator<float>& sg, const GlyphDataset& data, Split split);

struct SgPretrainReport {
  double initial_dev_l1 = 0;
  double final_dev_l1 = 0;
  std::int64_t steps = 0;
};

// Trains on every (image, skeleton) pair of the train split, both styles.
// Checkpoints go to `out_dir` (if non-empty) after each epoch; a non-finite
// loss aborts with the last good checkpoint left in place.
SgPretrainReport pretrain_sg(const TrainConfig& cfg, const GlyphDataset& data, SgTrainer& trainer,
                             const std::filesystem::path& out_dir = {},
                             std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// Phase two: joint training of G_F, G_B and the four discriminators.

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  // Copies SG weights from a phase-one checkpoint and freezes them.
  void load_sg(const Checkpoint& ckpt);
  void load_sg(const SkeletonTranslator<float>& sg);

  // Discriminator update then generator update. Items are accumulated when
  // more than one batch is given. Throws NonFiniteLoss and leaves every
  // parameter and moment as it was before the call.
  LossBreakdown train_step(std::span<const TrainingBatch> batches);
  LossBreakdown train_step(const TrainingBatch& batch) { return train_step({&batch, 1}); }

  // Loss terms without any update (evaluation).
  LossBreakdown evaluate(const TrainingBatch& batch) const;

  std::int64_t step() const { return step_; }
  int epoch() const { return epoch_; }
  void set_epoch(int epoch) { epoch_ = epoch; }
  double current_lr() const { return lr_at(cfg_, epoch_); }
  const TrainConfig& config() const { return cfg_; }

  Generator<float>& gf() { return *gf_; }
  Generator<float>& gb() { return *gb_; }
  const Generator<float>& gf() const { return *gf_; }
  const Generator<float>& gb() const { return *gb_; }
  const SkeletonTranslator<float>& sg() const { return *sg_; }
  const ParamSet<float>& gen_params() const { return gen_params_; }
  const ParamSet<float>& disc_params() const { return disc_params_; }

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);  // ManifestMismatch on drift

 private:
  struct Forward;
  Forward forward(const TrainingBatch& batch) const;
  Var<float> generator_objective(const Forward& f, bool paired, LossBreakdown& parts) const;
  Var<float> discriminator_objective(const Forward& f) const;

  TrainConfig cfg_;
  std::unique_ptr<Generator<float>> gf_, gb_;
  std::unique_ptr<Discriminator<float>> di_f_, di_b_, ds_f_, ds_b_;
  std::unique_ptr<SkeletonTranslator<float>> sg_;
  ParamSet<float> gen_params_;
  ParamSet<float> disc_params_;
  Adam<float> gen_opt_;
  Adam<float> disc_opt_;
  std::int64_t step_ = 0;
  int epoch_ = 0;
};

nlohmann::json breakdown_to_json(std::int64_t step, const LossBreakdown& b, double lr);

struct RunOptions {
  std::filesystem::path out_dir;          // log.ndjson and checkpoints/
  std::optional<std::filesystem::path> resume;  // joint checkpoint to continue from
  std::ostream* progress = nullptr;
};

struct RunReport {
  std::int64_t steps = 0;
  std::filesystem::path last_checkpoint;
  LossBreakdown last;
};

// Runs joint training for cfg.epochs (or cfg.max_steps) over the train split.
// Checkpoints: <out>/checkpoints/step-NNNNNNNN; the newest is also copied to
// <out>/final at the end.
RunReport run_training(Trainer& trainer, const GlyphDataset& data, const RunOptions& opts);

std::string checkpoint_dir_name(std::int64_t step);

}  // namespace skelfont
