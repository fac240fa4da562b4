#include "skelfont/training.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "skelfont/ops.hpp"

namespace skelfont {
namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorCode::kConfigError, msg);
  };
  require(epochs >= 1, "epochs must be >= 1");
  require(sg_epochs >= 1, "sg_epochs must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(std::isfinite(base_lr) && base_lr > 0, "base_lr must be > 0");
  require(lr_warm_epochs >= 0, "lr_warm_epochs must be >= 0");
  require(lr_decay_interval >= 1, "lr_decay_interval must be >= 1");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "betas must lie in [0, 1)");
  require(image_size >= 8 && image_size % 8 == 0, "image_size must be a positive multiple of 8");
  require(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  require(max_steps >= 0, "max_steps must be >= 0");
  require(net.channels >= 4 && net.channels % 4 == 0, "net.channels must be a multiple of 4");
  require(net.sg_channels >= 4 && net.sg_channels % 4 == 0, "net.sg_channels must be a multiple of 4");
  require(net.res_blocks >= 0, "net.res_blocks must be >= 0");
  require(net.disc_channels >= 1, "net.disc_channels must be >= 1");
  require(sg_cycle_weight >= 0 && sg_paired_weight >= 0, "sg weights must be >= 0");
  require(!source_style.empty() && !target_style.empty() && source_style != target_style,
          "source_style and target_style must be distinct and non-empty");
  weights.validate();
}

TrainConfig desk_profile() { return TrainConfig{}; }

TrainConfig paper_profile() {
  TrainConfig cfg;
  cfg.profile = "paper";
  cfg.base_lr = 1e-4;
  cfg.epochs = 100;
  cfg.sg_epochs = 80;
  cfg.image_size = 256;
  cfg.net.channels = 256;
  return cfg;
}

TrainConfig profile_by_name(const std::string& name) {
  if (name == "desk") return desk_profile();
  if (name == "paper") return paper_profile();
  fail(ErrorCode::kConfigError, "unknown profile '" + name + "' (expected desk or paper)");
}

json config_to_json(const TrainConfig& c) {
  return {{"profile", c.profile},
          {"epochs", c.epochs},
          {"sg_epochs", c.sg_epochs},
          {"batch_size", c.batch_size},
          {"base_lr", c.base_lr},
          {"lr_warm_epochs", c.lr_warm_epochs},
          {"lr_decay_interval", c.lr_decay_interval},
          {"betas", {c.beta1, c.beta2}},
          {"weights",
           {{"lambda1", c.weights.lambda1},
            {"lambda2", c.weights.lambda2},
            {"lambda3", c.weights.lambda3},
            {"lambda4", c.weights.lambda4}}},
          {"adv_form", std::string(adv_form_name(c.adv_form))},
          {"seed", c.seed},
          {"image_size", c.image_size},
          {"checkpoint_every", c.checkpoint_every},
          {"max_steps", c.max_steps},
          {"allow_unpaired", c.allow_unpaired},
          {"source_style", c.source_style},
          {"target_style", c.target_style},
          {"net",
           {{"channels", c.net.channels},
            {"res_blocks", c.net.res_blocks},
            {"disc_channels", c.net.disc_channels},
            {"sg_channels", c.net.sg_channels},
            {"skeleton_encoder", c.net.skeleton_encoder}}},
          {"sg_cycle_weight", c.sg_cycle_weight},
          {"sg_paired_weight", c.sg_paired_weight}};
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::kConfigError, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) fail(ErrorCode::kConfigError, "unknown config key '" + where + key + "'");
  }
}

template <typename V>
void read(const json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}

}  // namespace

TrainConfig config_from_json(const json& j) {
  reject_unknown(j,
                 {"profile", "epochs", "sg_epochs", "batch_size", "base_lr", "lr_warm_epochs",
                  "lr_decay_interval", "betas", "weights", "adv_form", "seed", "image_size",
                  "checkpoint_every", "max_steps", "allow_unpaired", "source_style",
                  "target_style", "net", "sg_cycle_weight", "sg_paired_weight"},
                 "");
  try {
    TrainConfig c = profile_by_name(j.value("profile", std::string("desk")));
    read(j, "epochs", c.epochs);
    read(j, "sg_epochs", c.sg_epochs);
    read(j, "batch_size", c.batch_size);
    read(j, "base_lr", c.base_lr);
    read(j, "lr_warm_epochs", c.lr_warm_epochs);
    read(j, "lr_decay_interval", c.lr_decay_interval);
    if (j.contains("betas")) {
      const auto b = j.at("betas").get<std::vector<double>>();
      if (b.size() != 2) fail(ErrorCode::kConfigError, "betas must have two entries");
      c.beta1 = b[0];
      c.beta2 = b[1];
    }
    if (j.contains("weights")) {
      const json& w = j.at("weights");
      reject_unknown(w, {"lambda1", "lambda2", "lambda3", "lambda4"}, "weights.");
      read(w, "lambda1", c.weights.lambda1);
      read(w, "lambda2", c.weights.lambda2);
      read(w, "lambda3", c.weights.lambda3);
      read(w, "lambda4", c.weights.lambda4);
    }
    if (j.contains("adv_form")) c.adv_form = parse_adv_form(j.at("adv_form").get<std::string>());
    read(j, "seed", c.seed);
    read(j, "image_size", c.image_size);
    read(j, "checkpoint_every", c.checkpoint_every);
    read(j, "max_steps", c.max_steps);
    read(j, "allow_unpaired", c.allow_unpaired);
    read(j, "source_style", c.source_style);
    read(j, "target_style", c.target_style);
    if (j.contains("net")) {
      const json& n = j.at("net");
      reject_unknown(n, {"channels", "res_blocks", "disc_channels", "sg_channels", "skeleton_encoder"},
                     "net.");
      read(n, "channels", c.net.channels);
      read(n, "res_blocks", c.net.res_blocks);
      read(n, "disc_channels", c.net.disc_channels);
      read(n, "sg_channels", c.net.sg_channels);
      read(n, "skeleton_encoder", c.net.skeleton_encoder);
    }
    read(j, "sg_cycle_weight", c.sg_cycle_weight);
    read(j, "sg_paired_weight", c.sg_paired_weight);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfigError, std::string("bad config value: ") + e.what());
  }
}

TrainConfig load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::kConfigNotFound, "config file not found: " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfigError, "malformed config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

double lr_at(const TrainConfig& cfg, int epoch) {
  if (epoch < 0 || epoch >= cfg.epochs) {
    fail(ErrorCode::kInvalidArgument, "epoch " + std::to_string(epoch) + " outside [0, " +
                                          std::to_string(cfg.epochs) + ")");
  }
  if (epoch < cfg.lr_warm_epochs) return cfg.base_lr;
  const int k = cfg.lr_decay_interval * ((epoch - cfg.lr_warm_epochs) / cfg.lr_decay_interval);
  const double span = static_cast<double>(cfg.epochs - cfg.lr_warm_epochs);
  return std::max(0.0, cfg.base_lr * (1.0 - static_cast<double>(k) / span));
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

struct Snapshot {
  std::vector<Tensor<float>> values, m, v;
  std::int64_t t = 0;
};

Snapshot capture(const ParamSet<float>& params, const Adam<float>& opt) {
  Snapshot s;
  for (const auto& p : params.items()) s.values.push_back(p.var.value());
  s.m = opt.first_moments();
  s.v = opt.second_moments();
  s.t = opt.t();
  return s;
}

void restore_snapshot(const Snapshot& s, const ParamSet<float>& params, Adam<float>& opt) {
  const auto& items = params.items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    Var<float> v = items[i].var;
    v.mutable_value() = s.values[i];
  }
  opt.first_moments() = s.m;
  opt.second_moments() = s.v;
  opt.set_t(s.t);
}

bool params_finite(const ParamSet<float>& params) {
  for (const auto& p : params.items()) {
    if (!all_finite(p.var.value())) return false;
  }
  return true;
}

void add_params(Checkpoint& ckpt, const ParamSet<float>& params) {
  for (const auto& p : params.items()) ckpt.tensors.push_back({p.path, p.var.value()});
}

void add_moments(Checkpoint& ckpt, const std::string& prefix, const ParamSet<float>& params,
                 const Adam<float>& opt) {
  const auto& items = params.items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    ckpt.tensors.push_back({prefix + "/m/" + items[i].path, opt.first_moments()[i]});
    ckpt.tensors.push_back({prefix + "/v/" + items[i].path, opt.second_moments()[i]});
  }
}

const Tensor<float>& lookup(const Checkpoint& ckpt, const std::string& path, const Shape& shape) {
  const CheckpointTensor* t = ckpt.find(path);
  if (!t) fail(ErrorCode::kManifestMismatch, "checkpoint lacks tensor " + path);
  if (t->value.shape() != shape) {
    fail(ErrorCode::kManifestMismatch, "tensor " + path + " has shape " +
                                           shape_string(t->value.shape()) + ", model expects " +
                                           shape_string(shape));
  }
  return t->value;
}

void load_params(const Checkpoint& ckpt, const ParamSet<float>& params) {
  for (const auto& p : params.items()) {
    Var<float> v = p.var;
    v.mutable_value() = lookup(ckpt, p.path, p.var.shape());
  }
}

void load_moments(const Checkpoint& ckpt, const std::string& prefix, const ParamSet<float>& params,
                  Adam<float>& opt) {
  const auto& items = params.items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    opt.first_moments()[i] = lookup(ckpt, prefix + "/m/" + items[i].path, items[i].var.shape());
    opt.second_moments()[i] = lookup(ckpt, prefix + "/v/" + items[i].path, items[i].var.shape());
  }
}

// Architecture-defining keys must match between a checkpoint and the model.
void check_compatible(const json& saved, const TrainConfig& cfg) {
  const json now = config_to_json(cfg);
  for (const char* key : {"image_size", "net"}) {
    if (!saved.contains(key) || saved.at(key) != now.at(key)) {
      fail(ErrorCode::kManifestMismatch,
           std::string("checkpoint ") + key + " " + (saved.contains(key) ? saved.at(key).dump() : "missing") +
               " does not match config " + now.at(key).dump());
    }
  }
}

// The translator only depends on image size and its own width; the generator
// settings may differ between an SG checkpoint and the joint model.
void check_sg_compatible(const json& saved, const TrainConfig& cfg) {
  const json now = config_to_json(cfg);
  const bool ok = saved.contains("image_size") && saved.at("image_size") == now.at("image_size") &&
                  saved.contains("net") && saved.at("net").contains("sg_channels") &&
                  saved.at("net").at("sg_channels") == now.at("net").at("sg_channels");
  if (!ok) {
    fail(ErrorCode::kManifestMismatch, "checkpoint translator settings do not match config (image_size " +
                                           now.at("image_size").dump() + ", sg_channels " +
                                           now.at("net").at("sg_channels").dump() + ")");
  }
}

std::int64_t state_int(const json& state, const char* key) {
  if (!state.contains(key)) fail(ErrorCode::kManifestMismatch, std::string("checkpoint state lacks ") + key);
  return state.at(key).get<std::int64_t>();
}

Var<float> scaled(const Var<float>& v, double w) { return ops::scale(v, static_cast<float>(w)); }

}  // namespace

// ---------------------------------------------------------------------------
// Phase one

SgTrainer::SgTrainer(const TrainConfig& cfg)
    : cfg_(cfg),
      sg_(std::make_unique<SkeletonTranslator<float>>(cfg.net, derive_seed(cfg.seed, hash_tag("sg")))) {
  cfg_.validate();
  gen_opt_ = Adam<float>(sg_->gen_params(), {cfg.beta1, cfg.beta2});
  disc_opt_ = Adam<float>(sg_->disc_params(), {cfg.beta1, cfg.beta2});
}

SgLosses SgTrainer::step(const Tensor<float>& img_t, const Tensor<float>& skel_t, double lr) {
  EnableGradGuard grad_on;
  const Var<float> img(img_t), skel(skel_t);
  SkeletonTranslator<float>& sg = *sg_;
  const Var<float> fake_s = sg.to_skel(img);
  const Var<float> fake_i = sg.to_img(skel);

  const Snapshot disc_snap = capture(sg.disc_params(), disc_opt_);
  const Snapshot gen_snap = capture(sg.gen_params(), gen_opt_);
  SgLosses out;
  try {
    sg.disc_params().zero_grad();
    const Var<float> d_loss = ops::add(
        adv_image(*sg.d_skel, skel, fake_s, Side::kDiscriminator),
        adv_image(*sg.d_img, img, fake_i, Side::kDiscriminator));
    out.disc = d_loss.item();
    if (!std::isfinite(out.disc)) fail(ErrorCode::kNonFiniteLoss, "skeleton translator discriminator loss");
    d_loss.backward();
    disc_opt_.step(lr);

    sg.gen_params().zero_grad();
    const Var<float> adv = ops::add(adv_image(*sg.d_skel, Var<float>(), fake_s, Side::kGenerator),
                                    adv_image(*sg.d_img, Var<float>(), fake_i, Side::kGenerator));
    const Var<float> cycle = ops::add(l1_pixel(sg.to_img(fake_s), img), l1_pixel(sg.to_skel(fake_i), skel));
    const Var<float> paired = ops::add(l1_pixel(fake_s, skel), l1_pixel(fake_i, img));
    const Var<float> total =
        ops::add(adv, ops::add(scaled(cycle, cfg_.sg_cycle_weight), scaled(paired, cfg_.sg_paired_weight)));
    out.adv = adv.item();
    out.cycle = cycle.item();
    out.paired = paired.item();
    out.total = total.item();
    if (!std::isfinite(out.total)) fail(ErrorCode::kNonFiniteLoss, "skeleton translator generator loss");
    total.backward();
    gen_opt_.step(lr);
    if (!params_finite(sg.gen_params()) || !params_finite(sg.disc_params())) {
      fail(ErrorCode::kNonFiniteLoss, "skeleton translator parameters became non-finite");
    }
  } catch (const Error&) {
    restore_snapshot(disc_snap, sg.disc_params(), disc_opt_);
    restore_snapshot(gen_snap, sg.gen_params(), gen_opt_);
    throw;
  }
  ++steps_;
  return out;
}

Checkpoint SgTrainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.config = config_to_json(cfg_);
  ckpt.state = {{"phase", "sg"},
                {"step", steps_},
                {"seed", cfg_.seed},
                {"adam_gen_t", gen_opt_.t()},
                {"adam_disc_t", disc_opt_.t()}};
  add_params(ckpt, sg_->gen_params());
  add_params(ckpt, sg_->disc_params());
  add_moments(ckpt, "optim/sg_gen", sg_->gen_params(), gen_opt_);
  add_moments(ckpt, "optim/sg_disc", sg_->disc_params(), disc_opt_);
  return ckpt;
}

void SgTrainer::restore(const Checkpoint& ckpt) {
  check_compatible(ckpt.config, cfg_);
  if (ckpt.state.value("phase", "") != "sg") {
    fail(ErrorCode::kManifestMismatch, "not a skeleton translator checkpoint");
  }
  load_params(ckpt, sg_->gen_params());
  load_params(ckpt, sg_->disc_params());
  load_moments(ckpt, "optim/sg_gen", sg_->gen_params(), gen_opt_);
  load_moments(ckpt, "optim/sg_disc", sg_->disc_params(), disc_opt_);
  gen_opt_.set_t(state_int(ckpt.state, "adam_gen_t"));
  disc_opt_.set_t(state_int(ckpt.state, "adam_disc_t"));
  steps_ = state_int(ckpt.state, "step");
}

double sg_skeleton_l1(const SkeletonTranslator<float>& sg, const GlyphDataset& data, Split split) {
  NoGradGuard no_grad;
  double total = 0;
  std::size_t n = 0;
  for (const GlyphPair& p : data.sources(split)) {
    total += l1_pixel(sg_forward(sg, Var<float>(to_tensor(p.source))), Var<float>(to_tensor(p.source_skeleton))).item();
    ++n;
  }
  for (const GlyphPair& p : data.targets(split)) {
    total += l1_pixel(sg_forward(sg, Var<float>(to_tensor(p.target))), Var<float>(to_tensor(p.target_skeleton))).item();
    ++n;
  }
  if (n == 0) fail(ErrorCode::kEmptyInput, "split '" + std::string(split_name(split)) + "' has no images");
  return total / static_cast<double>(n);
}

SgPretrainReport pretrain_sg(const TrainConfig& cfg, const GlyphDataset& data, SgTrainer& trainer,
                             const fs::path& out_dir, std::ostream* log) {
  cfg.validate();
  std::vector<std::pair<Tensor<float>, Tensor<float>>> pairs;
  for (const GlyphPair& p : data.sources(Split::kTrain)) {
    pairs.emplace_back(to_tensor(p.source), to_tensor(p.source_skeleton));
  }
  for (const GlyphPair& p : data.targets(Split::kTrain)) {
    pairs.emplace_back(to_tensor(p.target), to_tensor(p.target_skeleton));
  }
  if (pairs.empty()) fail(ErrorCode::kConfigError, "no image/skeleton pairs in the train split");
  const bool has_dev = !data.sources(Split::kDev).empty() || !data.targets(Split::kDev).empty();
  const Split eval_split = has_dev ? Split::kDev : Split::kTrain;

  TrainConfig sched = cfg;
  sched.epochs = cfg.sg_epochs;
  SgPretrainReport report;
  report.initial_dev_l1 = sg_skeleton_l1(trainer.model(), data, eval_split);
  const auto per_epoch = static_cast<std::int64_t>(pairs.size());
  const std::int64_t total = per_epoch * cfg.sg_epochs;
  for (std::int64_t s = trainer.steps(); s < total; s = trainer.steps()) {
    const auto epoch = static_cast<int>(s / per_epoch);
    Rng order_rng(derive_seed(cfg.seed, hash_tag("sg-order"), static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order.begin(), order.end());
    const auto& [img, skel] = pairs[order[static_cast<std::size_t>(s % per_epoch)]];
    Rng flip(derive_seed(cfg.seed, hash_tag("sg-flip"), static_cast<std::uint64_t>(s)));
    const double lr = lr_at(sched, epoch);
    const SgLosses l = flip.bernoulli(0.5) ? trainer.step(hflip(img), hflip(skel), lr)
                                           : trainer.step(img, skel, lr);
    if (log) {
      *log << json{{"phase", "sg"}, {"step", s},          {"adv", l.adv},   {"cycle", l.cycle},
                   {"paired", l.paired}, {"disc", l.disc}, {"total", l.total}, {"lr", lr}}.dump()
           << "\n";
    }
    if (!out_dir.empty() && trainer.steps() % per_epoch == 0) write_checkpoint(trainer.checkpoint(), out_dir);
  }
  report.steps = trainer.steps();
  report.final_dev_l1 = sg_skeleton_l1(trainer.model(), data, eval_split);
  return report;
}

// ---------------------------------------------------------------------------
// Phase two

struct Trainer::Forward {
  Var<float> xi, xs, yi;
  Var<float> sg_x, sg_y;  // SG of the real images; constants
  GeneratorOutput<float> out_f, out_b;
  Var<float> sg_fake_y, sg_fake_x;
};

Trainer::Trainer(const TrainConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::uint64_t s = cfg_.seed;
  gf_ = std::make_unique<Generator<float>>(cfg_.net, derive_seed(s, hash_tag("gf")), "gf");
  gb_ = std::make_unique<Generator<float>>(cfg_.net, derive_seed(s, hash_tag("gb")), "gb");
  di_f_ = std::make_unique<Discriminator<float>>(cfg_.net, true, derive_seed(s, hash_tag("di_f")), "di_f");
  di_b_ = std::make_unique<Discriminator<float>>(cfg_.net, true, derive_seed(s, hash_tag("di_b")), "di_b");
  ds_f_ = std::make_unique<Discriminator<float>>(cfg_.net, false, derive_seed(s, hash_tag("ds_f")), "ds_f");
  ds_b_ = std::make_unique<Discriminator<float>>(cfg_.net, false, derive_seed(s, hash_tag("ds_b")), "ds_b");
  sg_ = std::make_unique<SkeletonTranslator<float>>(cfg_.net, derive_seed(s, hash_tag("sg")));
  sg_->set_frozen(true);
  gen_params_.append(gf_->params());
  gen_params_.append(gb_->params());
  for (auto* d : {di_f_.get(), di_b_.get(), ds_f_.get(), ds_b_.get()}) disc_params_.append(d->params());
  gen_opt_ = Adam<float>(gen_params_, {cfg_.beta1, cfg_.beta2});
  disc_opt_ = Adam<float>(disc_params_, {cfg_.beta1, cfg_.beta2});
}

void Trainer::load_sg(const Checkpoint& ckpt) {
  check_sg_compatible(ckpt.config, cfg_);
  load_params(ckpt, sg_->gen_params());
  load_params(ckpt, sg_->disc_params());
  sg_->set_frozen(true);
}

void Trainer::load_sg(const SkeletonTranslator<float>& sg) {
  auto copy = [](const ParamSet<float>& from, const ParamSet<float>& to) {
    if (from.items().size() != to.items().size()) {
      fail(ErrorCode::kManifestMismatch, "skeleton translator layouts differ");
    }
    for (std::size_t i = 0; i < from.items().size(); ++i) {
      if (from.items()[i].var.shape() != to.items()[i].var.shape()) {
        fail(ErrorCode::kManifestMismatch, "skeleton translator shapes differ at " + from.items()[i].path);
      }
      Var<float> v = to.items()[i].var;
      v.mutable_value() = from.items()[i].var.value();
    }
  };
  copy(sg.gen_params(), sg_->gen_params());
  copy(sg.disc_params(), sg_->disc_params());
  sg_->set_frozen(true);
}

Trainer::Forward Trainer::forward(const TrainingBatch& b) const {
  Forward f;
  f.xi = Var<float>(b.x_img);
  f.xs = Var<float>(b.x_skel);
  f.yi = Var<float>(b.y_img);
  {
    NoGradGuard no_grad;
    f.sg_x = sg_forward(*sg_, f.xi);
    f.sg_y = sg_forward(*sg_, f.yi);
  }
  f.out_f = gf_->forward(f.xi, f.xs);
  f.out_b = gb_->forward(f.yi, f.sg_y);
  f.sg_fake_y = sg_forward(*sg_, f.out_f.image);
  f.sg_fake_x = sg_forward(*sg_, f.out_b.image);
  return f;
}

Var<float> Trainer::generator_objective(const Forward& f, bool paired, LossBreakdown& parts) const {
  const LossWeights& w = cfg_.weights;
  const AdvForm form = cfg_.adv_form;
  Var<float> total(Tensor<float>({1}));
  auto accumulate = [&](const Var<float>& term, double weight) {
    total = ops::add(total, scaled(term, weight));
  };
  const Var<float>& fake_y = f.out_f.image;
  const Var<float>& fake_x = f.out_b.image;

  if (w.lambda4 > 0 && paired) {
    const Var<float> pix = ops::add(l1_pixel(fake_y, f.yi), l1_pixel(fake_x, f.xi));
    const Var<float> sc = ops::add(l1_pixel(f.sg_fake_y, f.sg_y), l1_pixel(f.sg_fake_x, f.sg_x));
    parts.pix = pix.item();
    parts.sc = sc.item();
    accumulate(ops::add(pix, sc), w.lambda4);
  }
  if (w.lambda2 > 0) {
    const Var<float> rec_x = generate(*gb_, fake_y, f.sg_fake_y);
    const Var<float> rec_y = generate(*gf_, fake_x, f.sg_fake_x);
    const Var<float> cycle = ops::add(l1_pixel(rec_x, f.xi), l1_pixel(rec_y, f.yi));
    parts.cycle = cycle.item();
    accumulate(cycle, w.lambda2);
  }
  if (w.lambda1 > 0 || w.lambda3 > 0) {
    const DiscriminatorOutput<float> di_f = di_f_->forward(fake_y);
    const DiscriminatorOutput<float> di_b = di_b_->forward(fake_x);
    if (w.lambda1 > 0) {
      const Var<float> adv_i = ops::add(adv_from_scores(Var<float>(), di_f.patch, Side::kGenerator, form),
                                        adv_from_scores(Var<float>(), di_b.patch, Side::kGenerator, form));
      const Var<float> adv_s =
          ops::add(adv_from_scores(Var<float>(), ds_f_->forward(f.sg_fake_y).patch, Side::kGenerator, form),
                   adv_from_scores(Var<float>(), ds_b_->forward(f.sg_fake_x).patch, Side::kGenerator, form));
      parts.adv_i = adv_i.item();
      parts.adv_s = adv_s.item();
      accumulate(ops::add(adv_i, adv_s), w.lambda1);
    }
    if (w.lambda3 > 0) {
      // Generator heads score "input already in my output domain": G_F sees x
      // (no) and y (yes); G_B the mirror. Attention discriminators should
      // call the fakes real members of their domain.
      const auto [f_sram_y, f_cram_y] = gf_->classify(f.yi);
      const auto [b_sram_x, b_cram_x] = gb_->classify(f.xi);
      const Var<float> terms[] = {
          cls_loss(f.out_f.sram_cam.logit, Domain::kSource), cls_loss(f.out_f.cram_cam.logit, Domain::kSource),
          cls_loss(f_sram_y, Domain::kTarget),               cls_loss(f_cram_y, Domain::kTarget),
          cls_loss(f.out_b.sram_cam.logit, Domain::kSource), cls_loss(f.out_b.cram_cam.logit, Domain::kSource),
          cls_loss(b_sram_x, Domain::kTarget),               cls_loss(b_cram_x, Domain::kTarget),
          cls_loss(*di_f.logit, Domain::kTarget),            cls_loss(*di_b.logit, Domain::kTarget)};
      Var<float> cls = terms[0];
      for (std::size_t i = 1; i < std::size(terms); ++i) cls = ops::add(cls, terms[i]);
      parts.cls = cls.item();
      accumulate(cls, w.lambda3);
    }
  }
  return total;
}

Var<float> Trainer::discriminator_objective(const Forward& f) const {
  const LossWeights& w = cfg_.weights;
  const AdvForm form = cfg_.adv_form;
  const Var<float> fake_y = f.out_f.image.detach();
  const Var<float> fake_x = f.out_b.image.detach();
  const DiscriminatorOutput<float> f_real = di_f_->forward(f.yi);
  const DiscriminatorOutput<float> b_real = di_b_->forward(f.xi);
  Var<float> total(Tensor<float>({1}));
  if (w.lambda1 > 0) {
    const Var<float> adv_i =
        ops::add(adv_from_scores(f_real.patch, di_f_->forward(fake_y).patch, Side::kDiscriminator, form),
                 adv_from_scores(b_real.patch, di_b_->forward(fake_x).patch, Side::kDiscriminator, form));
    const Var<float> adv_s = ops::add(
        adv_from_scores(ds_f_->forward(f.sg_y).patch, ds_f_->forward(f.sg_fake_y.detach()).patch,
                        Side::kDiscriminator, form),
        adv_from_scores(ds_b_->forward(f.sg_x).patch, ds_b_->forward(f.sg_fake_x.detach()).patch,
                        Side::kDiscriminator, form));
    total = ops::add(total, scaled(ops::add(adv_i, adv_s), w.lambda1));
  }
  if (w.lambda3 > 0) {
    const Var<float> cls =
        ops::add(ops::add(cls_loss(*f_real.logit, Domain::kTarget),
                          cls_loss(*di_f_->forward(f.xi).logit, Domain::kSource)),
                 ops::add(cls_loss(*b_real.logit, Domain::kTarget),
                          cls_loss(*di_b_->forward(f.yi).logit, Domain::kSource)));
    total = ops::add(total, scaled(cls, w.lambda3));
  }
  return total;
}

LossBreakdown Trainer::train_step(std::span<const TrainingBatch> batches) {
  if (batches.empty()) fail(ErrorCode::kEmptyInput, "train_step needs at least one batch");
  EnableGradGuard grad_on;
  const LossWeights& w = cfg_.weights;
  const double lr = current_lr();
  const float inv = 1.0f / static_cast<float>(batches.size());

  const Snapshot disc_snap = capture(disc_params_, disc_opt_);
  const Snapshot gen_snap = capture(gen_params_, gen_opt_);
  LossBreakdown mean;
  try {
    std::vector<Forward> fw;
    fw.reserve(batches.size());
    for (const TrainingBatch& b : batches) fw.push_back(forward(b));

    if (w.lambda1 > 0 || w.lambda3 > 0) {
      disc_params_.zero_grad();
      for (const Forward& f : fw) {
        const Var<float> d = discriminator_objective(f);
        if (!std::isfinite(d.item())) {
          fail(ErrorCode::kNonFiniteLoss, "discriminator loss is " + std::to_string(d.item()));
        }
        ops::scale(d, inv).backward();
      }
      disc_opt_.step(lr);
    }

    gen_params_.zero_grad();
    for (std::size_t i = 0; i < fw.size(); ++i) {
      LossBreakdown parts;
      const Var<float> g = generator_objective(fw[i], batches[i].paired, parts);
      total_objective(parts, w);  // throws on non-finite terms
      mean.pix += parts.pix / fw.size();
      mean.sc += parts.sc / fw.size();
      mean.cycle += parts.cycle / fw.size();
      mean.cls += parts.cls / fw.size();
      mean.adv_i += parts.adv_i / fw.size();
      mean.adv_s += parts.adv_s / fw.size();
      if (g.requires_grad()) ops::scale(g, inv).backward();
    }
    gen_opt_.step(lr);
    if (!params_finite(gen_params_) || !params_finite(disc_params_)) {
      fail(ErrorCode::kNonFiniteLoss, "parameters became non-finite after the update");
    }
  } catch (const Error&) {
    restore_snapshot(disc_snap, disc_params_, disc_opt_);
    restore_snapshot(gen_snap, gen_params_, gen_opt_);
    throw;
  }
  ++step_;
  return total_objective(mean, w);
}

LossBreakdown Trainer::evaluate(const TrainingBatch& batch) const {
  NoGradGuard no_grad;
  LossBreakdown parts;
  generator_objective(forward(batch), batch.paired, parts);
  return total_objective(parts, cfg_.weights);
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.config = config_to_json(cfg_);
  ckpt.state = {{"phase", "joint"},
                {"step", step_},
                {"epoch", epoch_},
                {"seed", cfg_.seed},
                {"adam_gen_t", gen_opt_.t()},
                {"adam_disc_t", disc_opt_.t()},
                {"sg_frozen", sg_->frozen()}};
  add_params(ckpt, gen_params_);
  add_params(ckpt, disc_params_);
  add_params(ckpt, sg_->gen_params());
  add_params(ckpt, sg_->disc_params());
  add_moments(ckpt, "optim/gen", gen_params_, gen_opt_);
  add_moments(ckpt, "optim/disc", disc_params_, disc_opt_);
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  check_compatible(ckpt.config, cfg_);
  if (ckpt.state.value("phase", "") != "joint") fail(ErrorCode::kManifestMismatch, "not a joint checkpoint");
  load_params(ckpt, gen_params_);
  load_params(ckpt, disc_params_);
  load_params(ckpt, sg_->gen_params());
  load_params(ckpt, sg_->disc_params());
  sg_->set_frozen(true);
  load_moments(ckpt, "optim/gen", gen_params_, gen_opt_);
  load_moments(ckpt, "optim/disc", disc_params_, disc_opt_);
  gen_opt_.set_t(state_int(ckpt.state, "adam_gen_t"));
  disc_opt_.set_t(state_int(ckpt.state, "adam_disc_t"));
  step_ = state_int(ckpt.state, "step");
  epoch_ = static_cast<int>(state_int(ckpt.state, "epoch"));
}

json breakdown_to_json(std::int64_t step, const LossBreakdown& b, double lr) {
  return {{"step", step},   {"pix", b.pix},     {"sc", b.sc},       {"cycle", b.cycle}, {"cls", b.cls},
          {"adv_i", b.adv_i}, {"adv_s", b.adv_s}, {"total", b.total}, {"lr", lr}};
}

std::string checkpoint_dir_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step-%08lld", static_cast<long long>(step));
  return buf;
}

RunReport run_training(Trainer& trainer, const GlyphDataset& data, const RunOptions& opts) {
  const TrainConfig& cfg = trainer.config();
  const auto n = static_cast<std::int64_t>(data.epoch_length(Split::kTrain));
  if (n == 0) fail(ErrorCode::kConfigError, "the train split has no usable pairs");
  if (opts.resume) trainer.restore(read_checkpoint(*opts.resume));

  const std::int64_t b = cfg.batch_size;
  const std::int64_t items = n * cfg.epochs;
  std::int64_t total_steps = (items + b - 1) / b;
  if (cfg.max_steps > 0) total_steps = std::min(total_steps, cfg.max_steps);

  fs::create_directories(opts.out_dir);
  std::ofstream log(opts.out_dir / "log.ndjson", opts.resume ? std::ios::app : std::ios::trunc);
  if (!log) fail(ErrorCode::kIoError, "cannot open training log in " + opts.out_dir.string());

  RunReport report;
  for (std::int64_t s = trainer.step(); s < total_steps; ++s) {
    const auto epoch = static_cast<int>(s * b / n);
    trainer.set_epoch(epoch);
    std::vector<TrainingBatch> batches;
    for (std::int64_t k = s * b; k < std::min((s + 1) * b, items); ++k) {
      batches.push_back(next_batch(data, Split::kTrain, cfg.seed, static_cast<std::uint64_t>(k)));
    }
    report.last = trainer.train_step(batches);
    log << breakdown_to_json(s, report.last, trainer.current_lr()).dump() << "\n";
    log.flush();
    if (opts.progress) {
      *opts.progress << "step " << s << " epoch " << epoch << " total " << report.last.total
                     << " pix " << report.last.pix << "\n";
    }
    const bool epoch_end = ((s + 1) * b) / n != epoch || s + 1 == total_steps;
    const bool save = cfg.checkpoint_every > 0 ? (s + 1) % cfg.checkpoint_every == 0 : epoch_end;
    if (save) {
      report.last_checkpoint = opts.out_dir / "checkpoints" / checkpoint_dir_name(s + 1);
      write_checkpoint(trainer.checkpoint(), report.last_checkpoint);
    }
  }
  report.steps = trainer.step();
  write_checkpoint(trainer.checkpoint(), opts.out_dir / "final");
  return report;
}

}  // namespace skelfont
