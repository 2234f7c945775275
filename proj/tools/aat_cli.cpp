#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "aat/analysis.hpp"
#include "aat/errors.hpp"
#include "aat/ops.hpp"
#include "aat/run.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string loss;
  std::string attack_norm;
  std::optional<double> eps;
  std::optional<double> alpha;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> subset;
  std::string data_dir;
};

void add_common(CLI::App* cmd, Common& c, bool with_loss) {
  cmd->add_option("--config", c.config, "JSON run configuration");
  cmd->add_option("--preset", c.preset, "named preset used as the base configuration");
  cmd->add_option("--seed", c.seed, "seed for training and evaluation streams");
  cmd->add_option("--out", c.out, "output directory");
  if (with_loss) cmd->add_option("--loss", c.loss, "comma-separated loss terms: st,as,ar,an");
  cmd->add_option("--attack-norm", c.attack_norm, "attack norm: linf or l2");
  cmd->add_option("--eps", c.eps, "attack budget");
  cmd->add_option("--alpha", c.alpha, "attack step size");
  cmd->add_option("--steps", c.steps, "attack iterations");
  cmd->add_option("--subset", c.subset, "number of samples to use (0 = all)");
  cmd->add_option("--data-dir", c.data_dir, "dataset directory (falls back to AAT_DATA_DIR, then ./data)");
}

void override_attack(aat::AttackConfig& a, const Common& c) {
  if (!c.attack_norm.empty()) a.norm = aat::parse_norm(c.attack_norm);
  if (c.eps) a.epsilon = *c.eps;
  if (c.alpha) a.alpha = *c.alpha;
  if (c.steps) a.steps = *c.steps;
  a.validate();
}

// Preset (or `base` when no preset is named), then config file, then flags.
// Everything is validated here, before any file is written.
aat::RunConfig resolve(const Common& c, const std::string& default_preset, bool training,
                       const aat::RunConfig* base = nullptr) {
  auto cfg = base != nullptr && c.preset.empty() ? *base
                                                 : aat::RunConfig::preset(c.preset.empty() ? default_preset : c.preset);
  if (!c.config.empty()) cfg = aat::load_run_config(c.config, cfg);
  if (c.seed) {
    cfg.train.seed = *c.seed;
    cfg.eval.seed = *c.seed;
  }
  if (!c.out.empty()) cfg.paths.out = c.out;
  if (!c.data_dir.empty()) cfg.paths.data_dir = c.data_dir;
  if (!c.loss.empty()) {
    const auto normalization = cfg.train.loss.mask_normalization;
    cfg.train.loss = aat::LossConfig::parse(c.loss);
    cfg.train.loss.mask_normalization = normalization;
  }
  if (training) {
    override_attack(cfg.train.attack_train, c);
    if (c.subset) cfg.data.train_subset = *c.subset;
  } else {
    for (auto& a : cfg.attack_test) override_attack(a, c);
    if (c.subset) cfg.data.test_subset = *c.subset;
  }
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const aat::RunConfig& cfg) {
  const fs::path out = cfg.paths.out;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw aat::IoError("cannot create output directory " + out.string() + ": " + ec.message());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw aat::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw aat::IoError("failed writing " + path.string());
}

void log_line(const aat::Json& j) { std::cout << j.dump() << std::endl; }

// Test data in the model's dataset family; dilemma checkpoints evaluate on a
// fresh dilemma sample.
aat::Dataset test_data_for(const aat::RunConfig& cfg, const aat::Model& model) {
  auto run = cfg;
  if (model.spec().kind == aat::BackboneKind::kMlp) run.data.kind = aat::DataKind::kDilemma;
  return aat::load_test_data(run);
}

struct Resolved {
  aat::RunConfig cfg;
  aat::Model model;
};

// The training configuration stored in the checkpoint is the base unless a
// preset is named.
Resolved resolve_checkpoint(const Common& c, const std::string& checkpoint) {
  if (checkpoint.empty()) throw aat::UsageError("--checkpoint is required");
  auto loaded = aat::load_checkpoint(checkpoint);
  std::optional<aat::RunConfig> stored;
  if (loaded.meta.extra.contains("config")) stored = aat::RunConfig::from_json(loaded.meta.extra["config"]);
  auto cfg = resolve(c, "mnist-aat++-desk", false, stored ? &*stored : nullptr);
  return {std::move(cfg), std::move(loaded.model)};
}

int cmd_train(const Common& c) {
  const auto cfg = resolve(c, "mnist-aat++-desk", true);
  const auto data = aat::load_train_data(cfg);
  const auto out = prepare_out(cfg);
  write_text(out / "config.json", cfg.to_json().dump(2) + "\n");
  std::ofstream log(out / "train_log.jsonl", std::ios::trunc);
  if (!log) throw aat::IoError("cannot write " + (out / "train_log.jsonl").string());
  log_line({{"event", "start"}, {"config", cfg.name}, {"config_hash", cfg.hash()}, {"samples", data.size()}});
  const auto run = aat::run_training(cfg, data, [&](const aat::EpochLog& e) {
    auto j = e.to_json();
    log << j.dump() << "\n";
    log.flush();
    j["seconds"] = e.seconds;
    log_line(j);
  });
  const auto ckpt = out / "model.aatd";
  aat::save_checkpoint(run.model, aat::checkpoint_meta(cfg), ckpt);
  log_line({{"event", "done"}, {"checkpoint", ckpt.string()}});
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, bool json_only) {
  const auto [cfg, model] = resolve_checkpoint(c, checkpoint);
  const auto data = test_data_for(cfg, model);
  const auto report = aat::evaluate(model, data, cfg.eval_options(), fs::path(checkpoint).filename().string());
  const auto out = prepare_out(cfg);
  write_text(out / "eval.json", report.to_json().dump(2) + "\n");
  write_text(out / "eval.txt", report.table());
  if (json_only) {
    std::cout << report.to_json().dump(2) << "\n";
  } else {
    std::cout << report.table();
  }
  return 0;
}

int cmd_attack(const Common& c, const std::string& checkpoint, const std::string& way_name, std::size_t index,
               std::size_t count) {
  const auto way = aat::parse_way(way_name);
  const auto [cfg, model] = resolve_checkpoint(c, checkpoint);
  if (cfg.attack_test.empty()) throw aat::ConfigError("attack_test is empty");
  const auto data = test_data_for(cfg, model);
  if (count == 0 || index + count > data.size()) throw aat::UsageError("--index/--count outside the test set");
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = index + i;
  const auto batch = aat::gather(data, idx);
  const auto& attack = cfg.attack_test.front();
  aat::Rng rng(cfg.eval.seed);
  const auto adv = aat::pgd(model, batch.x, batch.y, way, attack, &rng);
  const auto norms = aat::perturbation_norms(batch.x, adv, attack.norm);
  std::array<std::vector<int>, 3> pred_clean, pred_adv;
  {
    aat::NoGradGuard no_grad;
    const auto logits_clean = model.forward_all(batch.x);
    const auto logits_adv = model.forward_all(adv);
    for (std::size_t w = 0; w < 3; ++w) {
      pred_clean[w] = aat::ops::argmax_rows(logits_clean[static_cast<aat::Way>(w)]);
      pred_adv[w] = aat::ops::argmax_rows(logits_adv[static_cast<aat::Way>(w)]);
    }
  }
  const auto out = prepare_out(cfg);
  aat::Json samples = aat::Json::array();
  for (std::size_t i = 0; i < count; ++i) {
    aat::Json s{{"index", idx[i]}, {"label", batch.y[i]}, {"perturbation", norms[i]}};
    for (auto w : {aat::Way::kStandard, aat::Way::kRobust, aat::Way::kNonRobust}) {
      s["clean"][aat::to_string(w)] = pred_clean[static_cast<std::size_t>(w)][i];
      s["adversarial"][aat::to_string(w)] = pred_adv[static_cast<std::size_t>(w)][i];
    }
    samples.push_back(s);
    if (model.spec().kind == aat::BackboneKind::kSmallCnn) {
      const auto& shape = model.spec().input_shape;
      aat::ImageArtifact image;
      image.channels = shape[0];
      image.height = shape[1];
      image.width = shape[2];
      const auto n = image.channels * image.height * image.width;
      image.pixels.assign(adv.values().begin() + static_cast<std::ptrdiff_t>(i * n),
                          adv.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
      aat::write_image(image, out / ("adv_" + aat::to_string(way) + "_" + std::to_string(idx[i]) +
                                     (image.channels == 1 ? ".pgm" : ".ppm")));
    }
  }
  const aat::Json report{{"attack", aat::to_json(attack)}, {"way", aat::to_string(way)}, {"samples", samples}};
  write_text(out / "attack.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_detect(const Common& c, const std::string& checkpoint, std::optional<std::uint64_t> init_seed,
               bool calibrate_only) {
  auto [cfg, model] = [&] {
    if (!init_seed) return resolve_checkpoint(c, checkpoint);
    auto base = resolve(c, "mnist-aat++-desk", false);
    auto fresh = aat::Model::init(base.model, *init_seed);
    return Resolved{std::move(base), std::move(fresh)};
  }();
  if (cfg.attack_test.empty()) throw aat::ConfigError("attack_test is empty");
  const auto data = test_data_for(cfg, model);
  const auto mixed = aat::build_mixed_set(model, data, cfg.attack_test.front(), cfg.eval.seed, cfg.eval.batch_size);
  const auto report = aat::detection_report(model, mixed, cfg.eval.batch_size);
  aat::Json j{{"attack", aat::to_json(cfg.attack_test.front())},
              {"samples", report.samples},
              {"raw", report.calibration.raw},
              {"calibrated", report.calibration.calibrated}};
  if (!calibrate_only) j["RAD"] = report.rad;
  const auto out = prepare_out(cfg);
  write_text(out / (calibrate_only ? "calibrate.json" : "detect.json"), j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_dilemma(const Common& c, std::optional<double> p, const std::vector<double>& eta, std::optional<std::size_t> n,
                bool json_only) {
  auto cfg = resolve(c, "dilemma-default", false);
  auto spec = cfg.dilemma.spec;
  if (p) spec.p = *p;
  if (!eta.empty()) spec.eta = eta;
  if (c.eps) spec.epsilon = *c.eps;
  spec.validate();
  const auto samples = n.value_or(cfg.dilemma.monte_carlo_samples);
  const auto report = aat::dilemma::run_report(spec, samples, c.seed.value_or(cfg.eval.seed));
  if (!c.out.empty()) {
    const auto out = prepare_out(cfg);
    write_text(out / "dilemma.json", report.to_json().dump(2) + "\n");
  }
  if (json_only) {
    std::cout << report.to_json().dump(2) << "\n";
  } else {
    std::cout << report.table();
  }
  return 0;
}

aat::Tensor<float> single_sample(const aat::Dataset& data, std::size_t index, int* label) {
  if (index >= data.size()) throw aat::UsageError("--index outside the test set");
  const std::vector<std::size_t> idx{index};
  auto batch = aat::gather(data, idx);
  *label = batch.y[0];
  return batch.x;
}

std::string image_ext(const aat::ImageArtifact& image) { return image.channels == 1 ? ".pgm" : ".ppm"; }

int cmd_invert(const Common& c, const std::string& checkpoint, const std::string& branch_name, std::size_t index,
               const aat::InversionOptions& options) {
  const auto branch = branch_name == "robust"      ? aat::Branch::kRobust
                      : branch_name == "nonrobust" ? aat::Branch::kNonRobust
                                                   : throw aat::UsageError("--branch must be robust or nonrobust");
  const auto [cfg, model] = resolve_checkpoint(c, checkpoint);
  const auto data = test_data_for(cfg, model);
  int label = 0;
  const auto x = single_sample(data, index, &label);
  aat::Tensor<float> target;
  {
    aat::NoGradGuard no_grad;
    target = model.encode(x, branch);
  }
  const auto result = aat::invert_representation(model, target, branch, options, index);
  const auto out = prepare_out(cfg);
  const auto name = "invert_" + branch_name + "_" + std::to_string(index) + image_ext(result.image);
  aat::write_image(result.image, out / name);
  aat::Json history = aat::Json::array();
  for (const auto& [step, dist] : result.history) history.push_back({{"step", step}, {"distance", dist}});
  const aat::Json j{{"image", name},
                    {"index", index},
                    {"branch", branch_name},
                    {"initial_distance", result.initial_distance},
                    {"final_distance", result.final_distance},
                    {"final_lr", result.final_lr},
                    {"history", history}};
  write_text(out / ("invert_" + branch_name + "_" + std::to_string(index) + ".json"), j.dump(2) + "\n");
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_grad_viz(const Common& c, const std::string& checkpoint, const std::string& way_name, std::size_t index) {
  const auto way = aat::parse_way(way_name);
  const auto [cfg, model] = resolve_checkpoint(c, checkpoint);
  const auto data = test_data_for(cfg, model);
  int label = 0;
  const auto x = single_sample(data, index, &label);
  const auto image = aat::grad_visual(model, x, label, way, index);
  if (image.degenerate) std::cerr << "warning: zero-variance gradient, writing a mid-gray image\n";
  const auto out = prepare_out(cfg);
  const auto name = "grad_" + aat::to_string(way) + "_" + std::to_string(index) + image_ext(image);
  aat::write_image(image, out / name);
  std::cout << aat::Json{{"image", name}, {"index", index}, {"way", aat::to_string(way)}, {"label", label}}.dump()
            << "\n";
  return 0;
}

int cmd_mnist_import(const std::string& digits_dir, const std::string& out_dir, std::size_t test_count,
                     std::uint64_t seed) {
  const auto all = aat::load_digit_json(digits_dir);
  const auto [train, test] = aat::split_holdout(all, test_count, seed);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw aat::IoError("cannot create " + out_dir + ": " + ec.message());
  const fs::path out = out_dir;
  aat::write_mnist_idx(train, out / "train-images-idx3-ubyte", out / "train-labels-idx1-ubyte");
  aat::write_mnist_idx(test, out / "t10k-images-idx3-ubyte", out / "t10k-labels-idx1-ubyte");
  std::cout << aat::Json{{"train", train.size()}, {"test", test.size()}, {"out", out_dir}}.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-way disentangling adversarial training toolkit"};
  app.require_subcommand(1);

  Common train_c, eval_c, attack_c, detect_c, calib_c, dilemma_c, invert_c, grad_c;
  std::string checkpoint;
  std::string way = "standard";
  std::string branch = "robust";
  std::size_t index = 0, count = 8;
  bool json_only = false;
  std::optional<std::uint64_t> init_seed;
  std::optional<double> p;
  std::vector<double> eta;
  std::optional<std::size_t> n;
  aat::InversionOptions inversion;
  std::string digits_dir, import_out = "data";
  std::size_t test_count = 2000;
  std::uint64_t import_seed = 0;

  auto* train = app.add_subcommand("train", "train a three-way model and write a checkpoint");
  add_common(train, train_c, true);

  auto* eval = app.add_subcommand("eval", "clean, per-way and standard-way adversarial evaluation");
  add_common(eval, eval_c, false);
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  eval->add_flag("--json", json_only, "print the JSON report instead of the table");

  auto* attack = app.add_subcommand("attack", "generate adversarial examples against one way");
  add_common(attack, attack_c, false);
  attack->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  attack->add_option("--way", way, "standard, robust or nonrobust");
  attack->add_option("--index", index, "first test sample");
  attack->add_option("--count", count, "number of samples");

  auto* detect = app.add_subcommand("detect", "adversarial detection rate and calibration on a mixed set");
  add_common(detect, detect_c, false);
  auto* detect_ckpt = detect->add_option("--checkpoint", checkpoint, "model checkpoint");
  detect->add_option("--untrained", init_seed, "use a freshly initialised model with this seed")
      ->excludes(detect_ckpt);

  auto* calibrate = app.add_subcommand("calibrate", "raw versus calibrated accuracy on a mixed set");
  add_common(calibrate, calib_c, false);
  calibrate->add_option("--checkpoint", checkpoint, "model checkpoint")->required();

  auto* dilemma = app.add_subcommand("dilemma", "exact and Monte-Carlo accuracies of h0 and h1");
  add_common(dilemma, dilemma_c, false);
  dilemma->add_option("--p", p, "probability that a feature agrees with the label");
  dilemma->add_option("--eta", eta, "feature magnitudes")->delimiter(',');
  dilemma->add_option("--n", n, "Monte-Carlo sample count");
  dilemma->add_flag("--json", json_only, "print JSON instead of the table");

  auto* invert = app.add_subcommand("invert", "representation inversion from noise");
  add_common(invert, invert_c, false);
  invert->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  invert->add_option("--branch", branch, "robust or nonrobust");
  invert->add_option("--index", index, "test sample whose representation is inverted");
  invert->add_option("--inv-steps", inversion.steps, "gradient steps");
  invert->add_option("--lr", inversion.lr, "initial step size");

  auto* grad = app.add_subcommand("grad-viz", "input-gradient visualization");
  add_common(grad, grad_c, false);
  grad->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  grad->add_option("--way", way, "standard, robust or nonrobust");
  grad->add_option("--index", index, "test sample");

  auto* import = app.add_subcommand("mnist-import", "convert per-digit JSON files into IDX train/test files");
  import->add_option("--digits-dir", digits_dir, "directory holding 0.json .. 9.json")->required();
  import->add_option("--out", import_out, "output directory");
  import->add_option("--test-count", test_count, "samples held out as the test split");
  import->add_option("--seed", import_seed, "shuffle seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(train_c);
    if (*eval) return cmd_eval(eval_c, checkpoint, json_only);
    if (*attack) return cmd_attack(attack_c, checkpoint, way, index, count);
    if (*detect) {
      if (checkpoint.empty() && !init_seed) throw aat::UsageError("detect needs --checkpoint or --untrained SEED");
      return cmd_detect(detect_c, checkpoint, init_seed, false);
    }
    if (*calibrate) return cmd_detect(calib_c, checkpoint, std::nullopt, true);
    if (*dilemma) return cmd_dilemma(dilemma_c, p, eta, n, json_only);
    if (*invert) {
      inversion.seed = invert_c.seed.value_or(0);
      return cmd_invert(invert_c, checkpoint, branch, index, inversion);
    }
    if (*grad) return cmd_grad_viz(grad_c, checkpoint, way, index);
    if (*import) return cmd_mnist_import(digits_dir, import_out, test_count, import_seed);
  } catch (const aat::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
