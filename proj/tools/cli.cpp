#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "skelfont/evaluation.hpp"
#include "skelfont/synth.hpp"
#include "skelfont/training.hpp"

namespace skelfont::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoError:
    case ErrorCode::kNonFiniteLoss:
    case ErrorCode::kExhaustedSplit:
      return 2;
    default:
      return 1;
  }
}

struct TrainFlags {
  std::string config;
  std::string profile = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> sg_epochs;
  std::optional<std::int64_t> max_steps;
  std::optional<int> checkpoint_every;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON config; keys override the named profile");
    app->add_option("--profile", profile, "desk or paper, used when --config is absent")
        ->capture_default_str();
    app->add_option("--seed", seed, "override the config seed");
    app->add_option("--epochs", epochs, "override joint-training epochs");
    app->add_option("--sg-epochs", sg_epochs, "override skeleton-translator epochs");
    app->add_option("--max-steps", max_steps, "stop after this many steps (0 = all epochs)");
    app->add_option("--checkpoint-every", checkpoint_every, "steps between checkpoints (0 = per epoch)");
  }

  TrainConfig resolve() const {
    TrainConfig cfg = config.empty() ? profile_by_name(profile) : load_config(config);
    if (seed) cfg.seed = *seed;
    if (epochs) cfg.epochs = *epochs;
    if (sg_epochs) cfg.sg_epochs = *sg_epochs;
    if (max_steps) cfg.max_steps = *max_steps;
    if (checkpoint_every) cfg.checkpoint_every = *checkpoint_every;
    cfg.validate();
    return cfg;
  }
};

// Uses <root>/manifest.json when present, otherwise scans the tree in memory.
Manifest dataset_manifest(const fs::path& root, std::uint64_t seed, const std::string& source_style) {
  if (!fs::is_directory(root)) fail(ErrorCode::kMissingFile, "data directory not found: " + root.string());
  if (fs::exists(root / "manifest.json")) return read_manifest(root / "manifest.json");
  return build_manifest(root, {}, seed, source_style).manifest;
}

GlyphDataset open_dataset(const fs::path& root, const TrainConfig& cfg) {
  DatasetOptions opts;
  opts.source_style = cfg.source_style;
  opts.target_style = cfg.target_style;
  opts.image_size = cfg.image_size;
  opts.allow_unpaired = cfg.allow_unpaired;
  return GlyphDataset(root, dataset_manifest(root, cfg.seed, cfg.source_style), opts);
}

std::unique_ptr<Trainer> load_model(const fs::path& dir) {
  const Checkpoint ckpt = read_checkpoint(dir);
  auto trainer = std::make_unique<Trainer>(config_from_json(ckpt.config));
  trainer->restore(ckpt);
  return trainer;
}

Tensor<float> load_gray(const fs::path& path, int size) {
  RasterImage img = to_gray(load_image(path));
  if (img.height() != size || img.width() != size) img = resize(img, size, size);
  return img.pixels();
}

void print_resolved(std::ostream& out, const std::string& command, const json& resolved) {
  out << json{{"command", command}, {"resolved", resolved}}.dump() << "\n";
}

std::vector<Tensor<float>> generate_split(const Trainer& model, const GlyphDataset& data, Split split,
                                          std::vector<std::string>* labels) {
  NoGradGuard no_grad;
  std::vector<Tensor<float>> out;
  for (const GlyphPair& p : data.pairs(split)) {
    out.push_back(generate(model.gf(), Var<float>(to_tensor(p.source)), Var<float>(to_tensor(p.source_skeleton)))
                      .value());
    if (labels) labels->push_back(p.char_id);
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Skeleton-guided glyph style transfer"};
  app.name("skelfont");
  app.require_subcommand(1);

  // skeletonize
  auto* skel = app.add_subcommand("skeletonize", "Thin a PNG or every PNG under a directory");
  std::string skel_in, skel_out, skel_threshold = "0.5", skel_ink = "dark";
  ThinningConfig thin_cfg;
  bool no_pre_close = false;
  skel->add_option("--input", skel_in, "PNG file or directory")->required();
  skel->add_option("--output", skel_out, "PNG file or directory")->required();
  skel->add_option("--threshold", skel_threshold, "binarization threshold in (0,1) or 'otsu'")
      ->capture_default_str();
  skel->add_option("--ink", skel_ink, "dark or light")->capture_default_str();
  skel->add_option("--max-iters", thin_cfg.max_iterations, "thinning iteration cap")->capture_default_str();
  skel->add_option("--dilate", thin_cfg.dilate_radius, "square dilation of the result")
      ->capture_default_str();
  skel->add_flag("--no-close", no_pre_close, "skip the closing pass before thinning");

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Render the synthetic two-style glyph corpus");
  std::string synth_out;
  SynthSpec spec;
  synth->add_option("--output", synth_out, "corpus directory")->required();
  synth->add_option("--glyphs", spec.glyph_count, "number of characters")->capture_default_str();
  synth->add_option("--canvas", spec.canvas, "image size in pixels")->capture_default_str();
  synth->add_option("--seed", spec.seed, "corpus seed")->capture_default_str();

  // pretrain-sg
  auto* pre = app.add_subcommand("pretrain-sg", "Train the image-to-skeleton translator");
  TrainFlags pre_flags;
  std::string pre_data, pre_out = "runs/sg", pre_resume;
  pre_flags.attach(pre);
  pre->add_option("--data", pre_data, "corpus directory")->required();
  pre->add_option("--out", pre_out, "output directory")->capture_default_str();
  pre->add_option("--resume", pre_resume, "skeleton-translator checkpoint to continue from");

  // train
  auto* train = app.add_subcommand("train", "Joint training with a frozen skeleton translator");
  TrainFlags train_flags;
  std::string train_data, train_out = "runs/joint", train_sg, train_resume;
  bool quiet = false;
  train_flags.attach(train);
  train->add_option("--data", train_data, "corpus directory")->required();
  train->add_option("--sg", train_sg, "skeleton-translator checkpoint (required unless --resume)");
  train->add_option("--out", train_out, "output directory")->capture_default_str();
  train->add_option("--resume", train_resume, "joint checkpoint to continue from");
  train->add_flag("--quiet", quiet, "no per-step progress lines");

  // generate
  auto* gen = app.add_subcommand("generate", "Translate one glyph image");
  std::string gen_ckpt, gen_in, gen_skel = "auto", gen_out;
  gen->add_option("--ckpt", gen_ckpt, "joint checkpoint directory")->required();
  gen->add_option("--input", gen_in, "source glyph PNG")->required();
  gen->add_option("--skeleton", gen_skel, "'auto' thins the input; otherwise a skeleton PNG")
      ->capture_default_str();
  gen->add_option("--output", gen_out, "output PNG (default <input>.gen.png)");

  // eval
  auto* ev = app.add_subcommand("eval", "Content accuracy and Frechet feature distance on a split");
  std::string ev_ckpt, ev_data, ev_split = "test", ev_cls = "runs/classifier", ev_report;
  std::uint64_t ev_seed = 0;
  ev->add_option("--ckpt", ev_ckpt, "joint checkpoint directory")->required();
  ev->add_option("--data", ev_data, "corpus directory")->required();
  ev->add_option("--split", ev_split, "train, dev or test")->capture_default_str();
  ev->add_option("--classifier", ev_cls, "classifier checkpoint; trained and saved here when absent")
      ->capture_default_str();
  ev->add_option("--seed", ev_seed, "classifier training seed")->capture_default_str();
  ev->add_option("--report", ev_report, "also write the JSON report to this file");

  // grid
  auto* grid = app.add_subcommand("grid", "Render a source/skeleton/generated/target comparison sheet");
  std::string grid_ckpt, grid_data, grid_split = "test", grid_out = "grid.png";
  int grid_count = 8;
  bool grid_heat = false;
  grid->add_option("--ckpt", grid_ckpt, "joint checkpoint directory")->required();
  grid->add_option("--data", grid_data, "corpus directory")->required();
  grid->add_option("--split", grid_split, "train, dev or test")->capture_default_str();
  grid->add_option("--count", grid_count, "glyphs per row")->capture_default_str();
  grid->add_option("--output", grid_out, "output PNG")->capture_default_str();
  grid->add_flag("--attention", grid_heat, "add rows overlaying the two attention heatmaps");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error_code: INVALID_ARGUMENT\n" << e.what() << "\n";
    return 1;
  }

  try {
    if (*skel) {
      BinarizeOptions bin;
      if (skel_threshold == "otsu") {
        bin.threshold = OtsuThreshold{};
      } else {
        try {
          bin.threshold = std::stof(skel_threshold);
        } catch (const std::exception&) {
          fail(ErrorCode::kInvalidArgument, "--threshold must be a number or 'otsu'");
        }
      }
      if (skel_ink != "dark" && skel_ink != "light") fail(ErrorCode::kInvalidArgument, "--ink must be dark or light");
      bin.ink = skel_ink == "dark" ? Ink::kDark : Ink::kLight;
      thin_cfg.pre_close = !no_pre_close;
      print_resolved(out, "skeletonize",
                     {{"input", skel_in}, {"output", skel_out}, {"threshold", skel_threshold},
                      {"ink", skel_ink}, {"max_iterations", thin_cfg.max_iterations},
                      {"pre_close", thin_cfg.pre_close}, {"dilate_radius", thin_cfg.dilate_radius}});
      if (fs::is_directory(skel_in)) {
        const BatchReport r = batch_skeletonize(skel_in, skel_out, thin_cfg, bin);
        out << json{{"processed", r.processed}, {"warnings", r.warnings}}.dump() << "\n";
      } else {
        const SkeletonResult r = extract_skeleton(load_image(skel_in), thin_cfg, bin);
        if (fs::path(skel_out).has_parent_path()) fs::create_directories(fs::path(skel_out).parent_path());
        save_image(r.image, skel_out);
        out << json{{"processed", 1},
                    {"degenerate_histogram", r.degenerate_histogram},
                    {"iteration_limit_reached", r.iteration_limit_reached}}
                   .dump()
            << "\n";
      }
    } else if (*synth) {
      print_resolved(out, "synth-data",
                     {{"output", synth_out}, {"glyphs", spec.glyph_count}, {"canvas", spec.canvas},
                      {"seed", spec.seed}});
      const SynthReport r = synth_corpus(spec, synth_out);
      out << json{{"glyphs", r.glyphs}, {"images", r.images}, {"skeletons", r.skeletons},
                  {"manifest", r.manifest.string()}}
                 .dump()
          << "\n";
    } else if (*pre) {
      const TrainConfig cfg = pre_flags.resolve();
      print_resolved(out, "pretrain-sg", config_to_json(cfg));
      const GlyphDataset data = open_dataset(pre_data, cfg);
      SgTrainer trainer(cfg);
      if (!pre_resume.empty()) trainer.restore(read_checkpoint(pre_resume));
      fs::create_directories(pre_out);
      std::ofstream log(fs::path(pre_out) / "log.ndjson", pre_resume.empty() ? std::ios::trunc : std::ios::app);
      const SgPretrainReport r = pretrain_sg(cfg, data, trainer, fs::path(pre_out) / "checkpoint", &log);
      out << json{{"steps", r.steps},
                  {"initial_l1", r.initial_dev_l1},
                  {"final_l1", r.final_dev_l1},
                  {"checkpoint", (fs::path(pre_out) / "checkpoint").string()}}
                 .dump()
          << "\n";
    } else if (*train) {
      const TrainConfig cfg = train_flags.resolve();
      print_resolved(out, "train", config_to_json(cfg));
      if (train_sg.empty() && train_resume.empty()) {
        fail(ErrorCode::kInvalidArgument, "train needs --sg (a pretrained skeleton translator) or --resume");
      }
      const GlyphDataset data = open_dataset(train_data, cfg);
      Trainer trainer(cfg);
      if (!train_sg.empty()) trainer.load_sg(read_checkpoint(train_sg));
      RunOptions opts;
      opts.out_dir = train_out;
      if (!train_resume.empty()) opts.resume = fs::path(train_resume);
      opts.progress = quiet ? nullptr : &out;
      const RunReport r = run_training(trainer, data, opts);
      out << json{{"steps", r.steps},
                  {"last", breakdown_to_json(r.steps, r.last, trainer.current_lr())},
                  {"final", (fs::path(train_out) / "final").string()}}
                 .dump()
          << "\n";
    } else if (*gen) {
      const fs::path input(gen_in);
      const fs::path output =
          gen_out.empty() ? input.parent_path() / (input.stem().string() + ".gen.png") : fs::path(gen_out);
      print_resolved(out, "generate",
                     {{"ckpt", gen_ckpt}, {"input", gen_in}, {"skeleton", gen_skel}, {"output", output.string()}});
      const auto model = load_model(gen_ckpt);
      const int size = model->config().image_size;
      const Tensor<float> img = load_gray(input, size);
      Tensor<float> skeleton;
      if (gen_skel == "auto") {
        skeleton = to_tensor(extract_skeleton(RasterImage(img)).image);
      } else {
        skeleton = load_gray(gen_skel, size);
      }
      NoGradGuard no_grad;
      const Var<float> y = generate(model->gf(), Var<float>(img), Var<float>(skeleton));
      if (output.has_parent_path()) fs::create_directories(output.parent_path());
      save_image(to_image(y.value()), output);
      out << json{{"output", output.string()}}.dump() << "\n";
    } else if (*ev) {
      const Split split = parse_split(ev_split);
      print_resolved(out, "eval",
                     {{"ckpt", ev_ckpt}, {"data", ev_data}, {"split", ev_split}, {"classifier", ev_cls},
                      {"seed", ev_seed}});
      const auto model = load_model(ev_ckpt);
      const TrainConfig& cfg = model->config();
      const GlyphDataset data = open_dataset(ev_data, cfg);
      std::optional<GlyphClassifier> cls;
      if (fs::exists(fs::path(ev_cls) / "manifest.json")) {
        cls = GlyphClassifier::from_checkpoint(read_checkpoint(ev_cls));
      } else {
        ClassifierConfig cc;
        cc.image_size = cfg.image_size;
        cc.seed = ev_seed;
        const Manifest manifest = dataset_manifest(ev_data, cfg.seed, cfg.source_style);
        cls = train_classifier(style_samples(ev_data, manifest, cfg.target_style, cfg.image_size), cc);
        write_checkpoint(cls->checkpoint(), ev_cls);
      }
      std::vector<std::string> labels;
      const std::vector<Tensor<float>> generated = generate_split(*model, data, split, &labels);
      std::vector<Tensor<float>> real;
      for (const GlyphPair& p : data.pairs(split)) real.push_back(to_tensor(p.target));
      const double acc = content_accuracy(*cls, generated, labels);
      const double ffd = frechet_distance(feature_stats(*cls, generated), feature_stats(*cls, real));
      const json report = {{"acc_top1", acc},
                           {"ffd", ffd},
                           {"n_images", generated.size()},
                           {"classifier_checkpoint", ev_cls}};
      out << report.dump() << "\n";
      if (!ev_report.empty()) {
        std::ofstream f(ev_report);
        f << report.dump(1) << "\n";
        if (!f) fail(ErrorCode::kIoError, "cannot write " + ev_report);
      }
    } else if (*grid) {
      const Split split = parse_split(grid_split);
      print_resolved(out, "grid",
                     {{"ckpt", grid_ckpt}, {"data", grid_data}, {"split", grid_split}, {"count", grid_count},
                      {"output", grid_out}, {"attention", grid_heat}});
      if (grid_count < 1) fail(ErrorCode::kInvalidArgument, "--count must be >= 1");
      const auto model = load_model(grid_ckpt);
      const GlyphDataset data = open_dataset(grid_data, model->config());
      std::vector<GridRow> rows = {{"src", {}, {}}, {"skel", {}, {}}, {"gen", {}, {}}, {"tgt", {}, {}}};
      GridRow sram_row{"sram", {}, {}}, cram_row{"cram", {}, {}};
      NoGradGuard no_grad;
      const auto& pairs = data.pairs(split);
      for (std::size_t i = 0; i < pairs.size() && static_cast<int>(i) < grid_count; ++i) {
        const GeneratorOutput<float> g =
            model->gf().forward(Var<float>(to_tensor(pairs[i].source)), Var<float>(to_tensor(pairs[i].source_skeleton)));
        const RasterImage generated = to_image(g.image.value());
        rows[0].images.push_back(pairs[i].source);
        rows[1].images.push_back(pairs[i].source_skeleton);
        rows[2].images.push_back(generated);
        rows[3].images.push_back(pairs[i].target);
        sram_row.images.push_back(generated);
        sram_row.heatmaps.push_back(g.sram_cam.heat.value());
        cram_row.images.push_back(generated);
        cram_row.heatmaps.push_back(g.cram_cam.heat.value());
      }
      if (grid_heat) {
        rows.push_back(std::move(sram_row));
        rows.push_back(std::move(cram_row));
      }
      if (fs::path(grid_out).has_parent_path()) fs::create_directories(fs::path(grid_out).parent_path());
      render_grid(rows, grid_out);
      out << json{{"output", grid_out}}.dump() << "\n";
    }
  } catch (const Error& e) {
    err << "error_code: " << error_code_name(e.code()) << "\n" << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error_code: IO_ERROR\n" << e.what() << "\n";
    return 2;
  }
  return 0;
}

int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}

}  // namespace skelfont::cli
