#include "aat/config.hpp"

#include <fstream>
#include <sstream>

#include "aat/errors.hpp"

namespace aat {

namespace {

std::string to_string(DataKind kind) { return kind == DataKind::kMnist ? "mnist" : "dilemma"; }

DataKind parse_data_kind(const std::string& text, const std::string& path) {
  if (text == "mnist") return DataKind::kMnist;
  if (text == "dilemma") return DataKind::kDilemma;
  throw ConfigError(path + ": unknown data kind '" + text + "' (expected mnist or dilemma)");
}

std::string to_string(MaskNormalization m) { return m == MaskNormalization::kMaskedCount ? "masked" : "batch"; }

MaskNormalization parse_mask_normalization(const std::string& text, const std::string& path) {
  if (text == "masked") return MaskNormalization::kMaskedCount;
  if (text == "batch") return MaskNormalization::kBatchSize;
  throw ConfigError(path + ": unknown mask normalization '" + text + "' (expected masked or batch)");
}

const Json& require_object(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + " must be a JSON object");
  return j;
}

TrainConfig train_from_json(const Json& j, const TrainConfig& base) {
  ObjectReader r(require_object(j, "train"), "train");
  TrainConfig cfg = base;
  cfg.lr = r.number("lr", cfg.lr, 0.0, 100.0);
  cfg.momentum = r.number("momentum", cfg.momentum, 0.0, 0.999999);
  cfg.weight_decay = r.number("weight_decay", cfg.weight_decay, 0.0, 1.0);
  cfg.epochs = r.count("epochs", cfg.epochs, 0, 100000);
  cfg.milestones = r.counts("milestones", cfg.milestones);
  cfg.batch_size = r.count("batch_size", cfg.batch_size, 1, 1 << 20);
  cfg.seed = r.u64("seed", cfg.seed);
  if (r.has("loss")) {
    try {
      const auto normalization = cfg.loss.mask_normalization;
      cfg.loss = LossConfig::parse(r.string("loss", ""));
      cfg.loss.mask_normalization = normalization;
    } catch (const ValidationError& e) {
      throw ConfigError(r.child_path("loss") + ": " + e.what());
    }
  }
  cfg.loss.mask_normalization =
      parse_mask_normalization(r.string("mask_normalization", to_string(cfg.loss.mask_normalization)),
                               r.child_path("mask_normalization"));
  r.finish();
  return cfg;
}

constexpr double kDeskLearningRate = 0.03;

}  // namespace

RunConfig RunConfig::preset(const std::string& name) {
  RunConfig cfg;
  cfg.name = name;
  if (name == "mnist-st-desk" || name == "mnist-aat-desk" || name == "mnist-aat++-desk") {
    cfg.train.lr = kDeskLearningRate;
    cfg.train.loss = name == "mnist-st-desk"    ? LossConfig::standard()
                     : name == "mnist-aat-desk" ? LossConfig::aat()
                                                : LossConfig::aat_plus_plus();
    return cfg;
  }
  if (name == "mnist-full") {
    cfg.train.epochs = 56;
    cfg.train.milestones = {50, 55};
    cfg.data.train_subset = 0;
    return cfg;
  }
  if (name == "dilemma-default") {
    cfg.data.kind = DataKind::kDilemma;
    cfg.model = BackboneSpec::mlp(cfg.dilemma.spec.d(), 2);
    cfg.train.lr = 0.05;
    cfg.train.epochs = 5;
    cfg.train.weight_decay = 0;
    cfg.train.attack_train = AttackConfig{Norm::kLinf, 0.02, 0.005, 10, false, false};
    cfg.attack_test = {AttackConfig{Norm::kLinf, 0.02, 0.005, 20, false, false}};
    cfg.eval.detection = false;
    return cfg;
  }
  std::string known;
  for (const auto& p : preset_names()) known += (known.empty() ? "" : ", ") + p;
  throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

std::vector<std::string> RunConfig::preset_names() {
  return {"mnist-st-desk", "mnist-aat-desk", "mnist-aat++-desk", "mnist-full", "dilemma-default"};
}

RunConfig RunConfig::from_json(const Json& j) { return from_json(j, RunConfig{}); }

RunConfig RunConfig::from_json(const Json& j, const RunConfig& base) {
  ObjectReader r(require_object(j, "config"), "config");
  RunConfig cfg = base;
  cfg.name = r.string("name", cfg.name);
  if (r.has("model")) cfg.model = backbone_from_json(require_object(r.raw("model"), "model"), "model");
  if (r.has("train")) cfg.train = train_from_json(r.raw("train"), cfg.train);
  if (r.has("attack_train")) {
    cfg.train.attack_train = attack_from_json(require_object(r.raw("attack_train"), "attack_train"), "attack_train");
  }
  if (r.has("attack_test")) {
    const auto& list = r.raw("attack_test");
    if (!list.is_array()) throw ConfigError("config.attack_test must be an array of attack objects");
    cfg.attack_test.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto path = "attack_test[" + std::to_string(i) + "]";
      cfg.attack_test.push_back(attack_from_json(require_object(list[i], path), path));
    }
  }
  if (r.has("eval")) {
    ObjectReader e(require_object(r.raw("eval"), "eval"), "eval");
    cfg.eval.standard_way = e.boolean("standard_way", cfg.eval.standard_way);
    cfg.eval.detection = e.boolean("detection", cfg.eval.detection);
    cfg.eval.batch_size = e.count("batch_size", cfg.eval.batch_size, 1, 1 << 20);
    cfg.eval.seed = e.u64("seed", cfg.eval.seed);
    e.finish();
  }
  if (r.has("data")) {
    ObjectReader d(require_object(r.raw("data"), "data"), "data");
    cfg.data.kind = parse_data_kind(d.string("kind", to_string(cfg.data.kind)), d.child_path("kind"));
    cfg.data.train_subset = d.count("train_subset", cfg.data.train_subset, 0, SIZE_MAX);
    cfg.data.test_subset = d.count("test_subset", cfg.data.test_subset, 0, SIZE_MAX);
    cfg.data.subset_seed = d.u64("subset_seed", cfg.data.subset_seed);
    d.finish();
  }
  if (r.has("dilemma")) {
    Json section = require_object(r.raw("dilemma"), "dilemma");
    ObjectReader d(section, "dilemma");
    cfg.dilemma.train_samples = d.count("train_samples", cfg.dilemma.train_samples, 1, SIZE_MAX);
    cfg.dilemma.test_samples = d.count("test_samples", cfg.dilemma.test_samples, 1, SIZE_MAX);
    cfg.dilemma.monte_carlo_samples = d.count("monte_carlo_samples", cfg.dilemma.monte_carlo_samples, 1, SIZE_MAX);
    Json spec = Json::object();
    for (const char* key : {"p", "d", "eta", "epsilon"}) {
      if (section.contains(key)) {
        d.raw(key);
        spec[key] = section[key];
      }
    }
    d.finish();
    Json merged = cfg.dilemma.spec.to_json();
    merged.erase("d");
    merged.update(spec);
    try {
      cfg.dilemma.spec = dilemma::DilemmaSpec::from_json(merged, "dilemma");
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
  }
  if (r.has("paths")) {
    ObjectReader p(require_object(r.raw("paths"), "paths"), "paths");
    cfg.paths.data_dir = p.string("data_dir", cfg.paths.data_dir);
    cfg.paths.out = p.string("out", cfg.paths.out);
    p.finish();
  }
  r.finish();
  cfg.validate();
  return cfg;
}

Json RunConfig::to_json() const {
  Json j;
  j["name"] = name;
  j["model"] = aat::to_json(model);
  j["train"] = {{"lr", train.lr},
                {"momentum", train.momentum},
                {"weight_decay", train.weight_decay},
                {"epochs", train.epochs},
                {"milestones", train.milestones},
                {"batch_size", train.batch_size},
                {"seed", train.seed},
                {"loss", train.loss.describe()},
                {"mask_normalization", to_string(train.loss.mask_normalization)}};
  j["attack_train"] = aat::to_json(train.attack_train);
  j["attack_test"] = Json::array();
  for (const auto& a : attack_test) j["attack_test"].push_back(aat::to_json(a));
  j["eval"] = {{"standard_way", eval.standard_way},
               {"detection", eval.detection},
               {"batch_size", eval.batch_size},
               {"seed", eval.seed}};
  j["data"] = {{"kind", to_string(data.kind)},
               {"train_subset", data.train_subset},
               {"test_subset", data.test_subset},
               {"subset_seed", data.subset_seed}};
  j["dilemma"] = dilemma.spec.to_json();
  j["dilemma"]["train_samples"] = dilemma.train_samples;
  j["dilemma"]["test_samples"] = dilemma.test_samples;
  j["dilemma"]["monte_carlo_samples"] = dilemma.monte_carlo_samples;
  j["paths"] = {{"data_dir", paths.data_dir}, {"out", paths.out}};
  return j;
}

void RunConfig::validate() const {
  auto wrap = [](const char* section, auto&& fn) {
    try {
      fn();
    } catch (const ValidationError& e) {
      throw ConfigError(std::string(section) + ": " + e.what());
    }
  };
  wrap("model", [&] { model.validate(); });
  wrap("train", [&] { train.validate(); });
  for (const auto& a : attack_test) wrap("attack_test", [&] { a.validate(); });
  wrap("dilemma", [&] { dilemma.spec.validate(); });
  if (data.kind == DataKind::kDilemma) {
    if (model.input_numel() != dilemma.spec.d() || model.num_classes != 2) {
      throw ConfigError("model: dilemma data needs input of " + std::to_string(dilemma.spec.d()) +
                        " features and 2 classes");
    }
  }
}

std::string RunConfig::hash() const {
  Json j = to_json();
  j.erase("paths");
  j.erase("name");
  return fnv1a_hex(j.dump());
}

EvalOptions RunConfig::eval_options() const {
  EvalOptions options = eval;
  options.attacks = attack_test;
  return options;
}

RunConfig load_run_config(const std::string& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream text;
  text << in.rdbuf();
  Json j;
  try {
    j = Json::parse(text.str());
  } catch (const Json::exception& e) {
    throw ConfigError(path + ": malformed JSON: " + e.what());
  }
  return RunConfig::from_json(j, base);
}

}  // namespace aat
