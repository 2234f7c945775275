#include "aat/evaluation.hpp"

#include <cstdio>
#include <cstring>
#include <sstream>

#include "aat/errors.hpp"
#include "aat/ops.hpp"

namespace aat {

namespace {

double percent(std::size_t hits, std::size_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

std::size_t count_correct(const std::vector<int>& pred, const Labels& y) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += pred[i] == y[i] ? 1 : 0;
  return hits;
}

void require_nonempty(const Dataset& data, const char* what) {
  if (data.size() == 0) throw ValidationError(std::string(what) + ": empty dataset");
}

// Running FNV-1a over raw float bytes.
struct Digest {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void add(std::span<const float> values) {
    const auto* p = reinterpret_cast<const unsigned char*>(values.data());
    for (std::size_t i = 0; i < values.size_bytes(); ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

}  // namespace

double accuracy(const Model& model, const Dataset& data, Way way, std::size_t batch_size) {
  require_nonempty(data, "accuracy");
  NoGradGuard no_grad;
  std::size_t hits = 0;
  for (const auto& idx : batches(data.size(), batch_size, 0, false)) {
    const auto batch = gather(data, idx);
    hits += count_correct(ops::argmax_rows(model.forward_way(batch.x, way)), batch.y);
  }
  return percent(hits, data.size());
}

WayAccuracy clean_accuracy(const Model& model, const Dataset& data, std::size_t batch_size) {
  require_nonempty(data, "clean_accuracy");
  NoGradGuard no_grad;
  std::array<std::size_t, 3> hits{};
  for (const auto& idx : batches(data.size(), batch_size, 0, false)) {
    const auto batch = gather(data, idx);
    const auto logits = model.forward_all(batch.x);
    for (std::size_t w = 0; w < 3; ++w) hits[w] += count_correct(ops::argmax_rows(logits[static_cast<Way>(w)]), batch.y);
  }
  return {percent(hits[0], data.size()), percent(hits[1], data.size()), percent(hits[2], data.size())};
}

PerWayAdv eval_per_way_adv(const Model& model, const Dataset& data, const AttackConfig& cfg, std::uint64_t seed,
                           std::size_t batch_size) {
  require_nonempty(data, "eval_per_way_adv");
  Rng rng(seed);
  std::size_t robust_hits = 0, nonrobust_hits = 0;
  for (const auto& idx : batches(data.size(), batch_size, 0, false)) {
    const auto batch = gather(data, idx);
    const auto adv_r = pgd(model, batch.x, batch.y, Way::kRobust, cfg, &rng);
    const auto adv_n = pgd(model, batch.x, batch.y, Way::kNonRobust, cfg, &rng);
    NoGradGuard no_grad;
    robust_hits += count_correct(ops::argmax_rows(model.forward_way(adv_r, Way::kRobust)), batch.y);
    nonrobust_hits += count_correct(ops::argmax_rows(model.forward_way(adv_n, Way::kNonRobust)), batch.y);
  }
  return {percent(robust_hits, data.size()), percent(nonrobust_hits, data.size())};
}

StandardWayAdv eval_standard_way_adv(const Model& model, const Dataset& data, const AttackConfig& cfg,
                                     std::uint64_t seed, std::size_t batch_size) {
  require_nonempty(data, "eval_standard_way_adv");
  Rng rng(seed);
  std::array<std::size_t, 3> hits{};
  std::array<Digest, 3> digests;
  for (const auto& idx : batches(data.size(), batch_size, 0, false)) {
    const auto batch = gather(data, idx);
    const auto adv = pgd(model, batch.x, batch.y, Way::kStandard, cfg, &rng);
    NoGradGuard no_grad;
    for (std::size_t w = 0; w < 3; ++w) {
      const auto way = static_cast<Way>(w);
      digests[w].add(adv.values());
      hits[w] += count_correct(ops::argmax_rows(model.forward_way(adv, way)), batch.y);
    }
  }
  StandardWayAdv out;
  out.acc = {percent(hits[0], data.size()), percent(hits[1], data.size()), percent(hits[2], data.size())};
  for (std::size_t w = 0; w < 3; ++w) out.input_digest[w] = digests[w].hex();
  return out;
}

std::vector<int> detect(const Model& model, const Tensor<float>& x) {
  NoGradGuard no_grad;
  const auto robust = ops::argmax_rows(model.forward_way(x, Way::kRobust));
  const auto nonrobust = ops::argmax_rows(model.forward_way(x, Way::kNonRobust));
  std::vector<int> verdict(robust.size());
  for (std::size_t i = 0; i < verdict.size(); ++i) verdict[i] = robust[i] != nonrobust[i] ? 1 : 0;
  return verdict;
}

MixedSet build_mixed_set(const Model& model, const Dataset& natural, const AttackConfig& cfg, std::uint64_t seed,
                         std::size_t batch_size) {
  require_nonempty(natural, "build_mixed_set");
  const std::size_t n = natural.size();
  const std::size_t d = natural.sample_numel();
  Dataset ordered;
  ordered.sample_shape = natural.sample_shape;
  ordered.num_classes = natural.num_classes;
  ordered.split = natural.split + "+adv";
  ordered.images = natural.images;
  ordered.labels = natural.labels;
  ordered.images.reserve(2 * n * d);
  Rng rng(seed);
  for (const auto& idx : batches(n, batch_size, 0, false)) {
    const auto batch = gather(natural, idx);
    const auto adv = pgd(model, batch.x, batch.y, Way::kStandard, cfg, &rng);
    ordered.images.insert(ordered.images.end(), adv.values().begin(), adv.values().end());
    ordered.labels.insert(ordered.labels.end(), batch.y.begin(), batch.y.end());
  }
  std::vector<int> ordered_tags(2 * n, 0);
  std::fill(ordered_tags.begin() + static_cast<std::ptrdiff_t>(n), ordered_tags.end(), 1);

  const auto perm = permutation(2 * n, Rng(seed).fork(7).next());
  MixedSet out;
  out.samples.sample_shape = ordered.sample_shape;
  out.samples.num_classes = ordered.num_classes;
  out.samples.split = ordered.split;
  out.samples.images.resize(ordered.images.size());
  out.samples.labels.resize(2 * n);
  out.tags.resize(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    std::copy_n(ordered.images.data() + perm[i] * d, d, out.samples.images.data() + i * d);
    out.samples.labels[i] = ordered.labels[perm[i]];
    out.tags[i] = ordered_tags[perm[i]];
  }
  return out;
}

double rad_from(std::span<const int> verdicts, std::span<const int> tags) {
  if (verdicts.size() != tags.size()) throw DimensionError("rad: verdict and tag counts differ");
  if (tags.empty()) throw ValidationError("rad: empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < tags.size(); ++i) hits += verdicts[i] == tags[i] ? 1 : 0;
  return percent(hits, tags.size());
}

namespace {

struct MixedPredictions {
  std::vector<int> verdicts, standard, robust;
};

MixedPredictions predict_mixed(const Model& model, const MixedSet& mixed, std::size_t batch_size) {
  if (mixed.tags.size() != mixed.samples.size()) throw DimensionError("mixed set: tag and sample counts differ");
  require_nonempty(mixed.samples, "mixed set");
  NoGradGuard no_grad;
  MixedPredictions out;
  for (const auto& idx : batches(mixed.samples.size(), batch_size, 0, false)) {
    const auto batch = gather(mixed.samples, idx);
    const auto logits = model.forward_all(batch.x);
    const auto s = ops::argmax_rows(logits.standard);
    const auto r = ops::argmax_rows(logits.robust);
    const auto n = ops::argmax_rows(logits.nonrobust);
    for (std::size_t i = 0; i < s.size(); ++i) {
      out.verdicts.push_back(r[i] != n[i] ? 1 : 0);
      out.standard.push_back(s[i]);
      out.robust.push_back(r[i]);
    }
  }
  return out;
}

}  // namespace

double rad(const Model& model, const MixedSet& mixed, std::size_t batch_size) {
  return rad_from(predict_mixed(model, mixed, batch_size).verdicts, mixed.tags);
}

Calibration calibrate_from(std::span<const int> verdicts, std::span<const int> pred_standard,
                           std::span<const int> pred_robust, std::span<const int> labels) {
  const std::size_t n = labels.size();
  if (verdicts.size() != n || pred_standard.size() != n || pred_robust.size() != n) {
    throw DimensionError("calibrate: prediction and label counts differ");
  }
  if (n == 0) throw ValidationError("calibrate: empty set");
  std::size_t raw = 0, calibrated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    raw += pred_standard[i] == labels[i] ? 1 : 0;
    const int chosen = verdicts[i] == 1 ? pred_robust[i] : pred_standard[i];
    calibrated += chosen == labels[i] ? 1 : 0;
  }
  return {percent(raw, n), percent(calibrated, n)};
}

Calibration calibrate(const Model& model, const MixedSet& mixed, std::size_t batch_size) {
  const auto p = predict_mixed(model, mixed, batch_size);
  return calibrate_from(p.verdicts, p.standard, p.robust, mixed.samples.labels);
}

DetectionReport detection_report(const Model& model, const MixedSet& mixed, std::size_t batch_size) {
  const auto p = predict_mixed(model, mixed, batch_size);
  DetectionReport out;
  out.rad = rad_from(p.verdicts, mixed.tags);
  out.calibration = calibrate_from(p.verdicts, p.standard, p.robust, mixed.samples.labels);
  out.samples = mixed.tags.size();
  return out;
}

namespace {

Json way_json(const WayAccuracy& a) { return {{"S", a.standard}, {"R", a.robust}, {"N", a.nonrobust}}; }

WayAccuracy way_from_json(const Json& j) {
  return {j.at("S").get<double>(), j.at("R").get<double>(), j.at("N").get<double>()};
}

std::string cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

Json EvalReport::to_json() const {
  Json j;
  j["label"] = label;
  j["samples"] = samples;
  j["clean"] = way_json(clean);
  j["attacks"] = Json::array();
  for (const auto& a : attacks) {
    Json e;
    e["attack"] = aat::to_json(a.attack);
    e["per_way"] = {{"R", a.per_way.robust}, {"N", a.per_way.nonrobust}, {"DIA", a.per_way.dia()}};
    if (a.standard_way) {
      e["standard_way"] = way_json(*a.standard_way);
      e["standard_way"]["DIA"] = dia(a.standard_way->robust, a.standard_way->nonrobust);
    }
    j["attacks"].push_back(e);
  }
  if (detection) {
    j["detection"] = {{"RAD", detection->rad},
                      {"raw", detection->calibration.raw},
                      {"calibrated", detection->calibration.calibrated},
                      {"samples", detection->samples}};
  }
  return j;
}

EvalReport EvalReport::from_json(const Json& j) {
  try {
    EvalReport r;
    r.label = j.at("label").get<std::string>();
    r.samples = j.at("samples").get<std::size_t>();
    r.clean = way_from_json(j.at("clean"));
    for (const auto& e : j.at("attacks")) {
      AttackEntry a;
      a.attack = attack_from_json(e.at("attack"));
      a.per_way = {e.at("per_way").at("R").get<double>(), e.at("per_way").at("N").get<double>()};
      if (e.contains("standard_way")) a.standard_way = way_from_json(e.at("standard_way"));
      r.attacks.push_back(a);
    }
    if (j.contains("detection")) {
      const auto& d = j.at("detection");
      r.detection = DetectionReport{d.at("RAD").get<double>(),
                                    {d.at("raw").get<double>(), d.at("calibrated").get<double>()},
                                    d.at("samples").get<std::size_t>()};
    }
    return r;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed evaluation report: ") + e.what());
  }
}

std::string EvalReport::table() const {
  std::ostringstream out;
  constexpr std::size_t w = 7;
  out << label << " (" << samples << " samples)\n";
  out << "Standard:" << pad("S", w) << pad("R", w) << pad("N", w) << '\n';
  out << "         " << pad(cell(clean.standard), w) << pad(cell(clean.robust), w) << pad(cell(clean.nonrobust), w)
      << '\n';
  for (const auto& a : attacks) {
    out << "Adversarial (" << a.attack.describe() << ")\n";
    out << "  per-way attack:     " << pad("R", w) << pad("N", w) << pad("DIA", w) << '\n';
    out << "                      " << pad(cell(a.per_way.robust), w) << pad(cell(a.per_way.nonrobust), w)
        << pad(cell(a.per_way.dia()), w) << '\n';
    if (a.standard_way) {
      const auto& s = *a.standard_way;
      out << "  standard-way attack:" << pad("S", w) << pad("R", w) << pad("N", w) << pad("DIA", w) << '\n';
      out << "                      " << pad(cell(s.standard), w) << pad(cell(s.robust), w) << pad(cell(s.nonrobust), w)
          << pad(cell(dia(s.robust, s.nonrobust)), w) << '\n';
    }
  }
  if (detection) {
    out << "Detection (" << detection->samples << " mixed samples)\n";
    out << "                      " << pad("RAD", w) << pad("Raw", w) << pad("Calib", w) << '\n';
    out << "                      " << pad(cell(detection->rad), w) << pad(cell(detection->calibration.raw), w)
        << pad(cell(detection->calibration.calibrated), w) << '\n';
  }
  return out.str();
}

EvalReport evaluate(const Model& model, const Dataset& data, const EvalOptions& options, const std::string& label) {
  EvalReport report;
  report.label = label;
  report.samples = data.size();
  report.clean = clean_accuracy(model, data, options.batch_size);
  for (const auto& cfg : options.attacks) {
    AttackEntry entry;
    entry.attack = cfg;
    entry.per_way = eval_per_way_adv(model, data, cfg, options.seed, options.batch_size);
    if (options.standard_way) {
      entry.standard_way = eval_standard_way_adv(model, data, cfg, options.seed, options.batch_size).acc;
    }
    report.attacks.push_back(entry);
  }
  if (options.detection && !options.attacks.empty()) {
    const auto mixed = build_mixed_set(model, data, options.attacks.front(), options.seed, options.batch_size);
    report.detection = detection_report(model, mixed, options.batch_size);
  }
  return report;
}

}  // namespace aat
