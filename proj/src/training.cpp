#include "aat/training.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "aat/errors.hpp"
#include "aat/ops.hpp"

namespace aat {

LossConfig LossConfig::parse(const std::string& list) {
  LossConfig cfg{false, false, false, false};
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item == "st") {
      cfg.st = true;
    } else if (item == "as") {
      cfg.as = true;
    } else if (item == "ar") {
      cfg.ar = true;
    } else if (item == "an") {
      cfg.an = true;
    } else {
      throw ValidationError("unknown loss term '" + item + "' (expected st, as, ar, an)");
    }
  }
  cfg.validate();
  return cfg;
}

std::string LossConfig::describe() const {
  std::string out;
  for (auto [flag, name] : {std::pair{st, "st"}, {as, "as"}, {ar, "ar"}, {an, "an"}}) {
    if (!flag) continue;
    if (!out.empty()) out += ',';
    out += name;
  }
  return out;
}

void LossConfig::validate() const {
  if (!(st || as || ar || an)) throw ValidationError("loss config enables no term");
}

void TrainConfig::validate() const {
  if (!std::isfinite(lr) || lr < 0) throw ValidationError("lr must be finite and >= 0");
  if (!std::isfinite(momentum) || momentum < 0 || momentum >= 1) throw ValidationError("momentum must be in [0, 1)");
  if (!std::isfinite(weight_decay) || weight_decay < 0) throw ValidationError("weight_decay must be >= 0");
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    if (milestones[i] >= epochs && epochs > 0) {
      throw ValidationError("milestone " + std::to_string(milestones[i]) + " is not below epochs " +
                            std::to_string(epochs));
    }
    if (i > 0 && milestones[i] <= milestones[i - 1]) throw ValidationError("milestones must be strictly increasing");
  }
  attack_train.validate();
  loss.validate();
}

double TrainConfig::lr_at(std::size_t epoch) const {
  double rate = lr;
  for (auto m : milestones) {
    if (epoch >= m) rate *= 0.1;
  }
  return rate;
}

Tensor<float> loss_st(const Model& model, const Tensor<float>& x, const Labels& y) {
  const auto logits = model.forward_all(x);
  return ops::add(ops::add(ops::cross_entropy(logits.standard, y), ops::cross_entropy(logits.robust, y)),
                  ops::cross_entropy(logits.nonrobust, y));
}

namespace {

struct MaskedBatch {
  Tensor<float> x;
  Labels y;
  Labels virtual_y;
};

MaskedBatch select_masked(const Tensor<float>& x, const Labels& y, const PseudoLabels& labels) {
  const std::size_t dim = x.numel() / x.size(0);
  MaskedBatch out;
  std::vector<float> values;
  values.reserve(labels.count * dim);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!labels.misclassified[i]) continue;
    values.insert(values.end(), x.values().begin() + static_cast<std::ptrdiff_t>(i * dim),
                  x.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
    out.y.push_back(y[i]);
    out.virtual_y.push_back(labels.predicted[i]);
  }
  Shape shape = x.shape();
  shape[0] = labels.count;
  out.x = Tensor<float>(std::move(shape), std::move(values));
  return out;
}

// Mean over the masked samples, or their sum over the full batch size.
Tensor<float> masked_cross_entropy(const Tensor<float>& logits, const Labels& labels, std::size_t batch,
                                   MaskNormalization normalization) {
  if (normalization == MaskNormalization::kMaskedCount) return ops::cross_entropy(logits, labels);
  return ops::scale(ops::cross_entropy(logits, labels, ops::Reduction::kSum), 1.0f / static_cast<float>(batch));
}

}  // namespace

AdversarialTerm loss_as(const Model& model, const Tensor<float>& x, const Labels& y, const AttackConfig& attack,
                        MaskNormalization normalization, Rng* rng) {
  AdversarialTerm term;
  term.x_adv = pgd(model, x, y, Way::kStandard, attack, rng);
  term.labels = pseudo_label(model, term.x_adv, y, Way::kStandard);
  if (term.labels.count == 0) {
    term.loss = Tensor<float>::scalar(0.0f);
    return term;
  }
  const auto masked = select_masked(term.x_adv, y, term.labels);
  term.loss = ops::add(
      masked_cross_entropy(model.forward_way(masked.x, Way::kRobust), masked.y, y.size(), normalization),
      masked_cross_entropy(model.forward_way(masked.x, Way::kNonRobust), masked.virtual_y, y.size(), normalization));
  return term;
}

AdversarialTerm loss_ar(const Model& model, const Tensor<float>& x, const Labels& y, const AttackConfig& attack,
                        Rng* rng) {
  AdversarialTerm term;
  term.x_adv = pgd(model, x, y, Way::kRobust, attack, rng);
  term.loss = ops::cross_entropy(model.forward_way(term.x_adv, Way::kRobust), y);
  return term;
}

AdversarialTerm loss_an(const Model& model, const Tensor<float>& x, const Labels& y, const AttackConfig& attack,
                        MaskNormalization normalization, Rng* rng) {
  AdversarialTerm term;
  term.x_adv = pgd(model, x, y, Way::kNonRobust, attack, rng);
  term.labels = pseudo_label(model, term.x_adv, y, Way::kNonRobust);
  if (term.labels.count == 0) {
    term.loss = Tensor<float>::scalar(0.0f);
    return term;
  }
  const auto masked = select_masked(term.x_adv, y, term.labels);
  term.loss = masked_cross_entropy(model.forward_way(masked.x, Way::kNonRobust), masked.virtual_y, y.size(),
                                   normalization);
  return term;
}

LossBreakdown total_loss(const Model& model, const Tensor<float>& x, const Labels& y, const LossConfig& loss,
                         const AttackConfig& attack, Rng* rng) {
  loss.validate();
  LossBreakdown out;
  out.batch = y.size();
  std::vector<Tensor<float>> terms;
  if (loss.st) {
    terms.push_back(loss_st(model, x, y));
    out.st = terms.back().item();
  }
  if (loss.as) {
    auto term = loss_as(model, x, y, attack, loss.mask_normalization, rng);
    out.as = term.loss.item();
    out.as_masked = term.labels.count;
    terms.push_back(term.loss);
  }
  if (loss.ar) {
    auto term = loss_ar(model, x, y, attack, rng);
    out.ar = term.loss.item();
    terms.push_back(term.loss);
  }
  if (loss.an) {
    auto term = loss_an(model, x, y, attack, loss.mask_normalization, rng);
    out.an = term.loss.item();
    out.an_masked = term.labels.count;
    terms.push_back(term.loss);
  }
  out.total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) out.total = ops::add(out.total, terms[i]);
  return out;
}

Sgd::Sgd(std::vector<NamedParam<float>> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
  for (const auto& p : params_) velocity_.emplace_back(p.tensor.numel(), 0.0f);
}

void Sgd::step(double lr) {
  const auto mu = static_cast<float>(momentum_);
  const auto wd = static_cast<float>(weight_decay_);
  const auto rate = static_cast<float>(lr);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& tensor = params_[k].tensor;
    auto values = tensor.mutable_values();
    auto& v = velocity_[k];
    const bool has_grad = tensor.has_grad();
    const std::span<const float> grad = has_grad ? tensor.grad() : std::span<const float>{};
    for (std::size_t i = 0; i < values.size(); ++i) {
      const float g = (has_grad ? grad[i] : 0.0f) + wd * values[i];
      v[i] = mu * v[i] + g;
      values[i] -= rate * v[i];
    }
  }
}

Json EpochLog::to_json() const {
  Json j;
  j["epoch"] = epoch;
  j["lr"] = lr;
  j["loss"] = {{"st", loss_st}, {"as", loss_as}, {"ar", loss_ar}, {"an", loss_an}};
  j["mask_fraction"] = {{"as", as_mask_fraction}, {"an", an_mask_fraction}};
  j["clean_acc"] = {{"S", clean_acc[0]}, {"R", clean_acc[1]}, {"N", clean_acc[2]}};
  return j;
}

namespace {

void check_finite(double value, const char* term, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(value)) {
    throw NumericError("non-finite loss term '" + std::string(term) + "' at epoch " + std::to_string(epoch) +
                       ", batch " + std::to_string(batch));
  }
}

}  // namespace

std::vector<EpochLog> train(Model& model, const Dataset& data, const TrainConfig& cfg, const EpochSink& sink) {
  cfg.validate();
  if (data.size() == 0) throw ValidationError("train: empty dataset");
  if (data.num_classes != model.spec().num_classes) {
    throw ValidationError("train: dataset has " + std::to_string(data.num_classes) + " classes, model has " +
                          std::to_string(model.spec().num_classes));
  }
  Sgd sgd(model.parameters(), cfg.momentum, cfg.weight_decay);
  const Rng root(cfg.seed);
  std::vector<EpochLog> logs;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochLog log;
    log.epoch = epoch + 1;
    log.lr = cfg.lr_at(epoch);
    Rng attack_rng = root.fork(1000 + epoch);
    const auto order = batches(data.size(), cfg.batch_size, root.fork(epoch).next(), true);
    std::array<std::size_t, 3> correct{};
    std::size_t seen = 0, as_masked = 0, an_masked = 0;
    for (std::size_t b = 0; b < order.size(); ++b) {
      const auto batch = gather(data, order[b]);
      {
        NoGradGuard no_grad;
        const auto logits = model.forward_all(batch.x);
        for (std::size_t w = 0; w < 3; ++w) {
          const auto pred = ops::argmax_rows(logits[static_cast<Way>(w)]);
          for (std::size_t i = 0; i < pred.size(); ++i) correct[w] += pred[i] == batch.y[i] ? 1 : 0;
        }
      }
      const auto terms = total_loss(model, batch.x, batch.y, cfg.loss, cfg.attack_train, &attack_rng);
      check_finite(terms.st, "st", log.epoch, b);
      check_finite(terms.as, "as", log.epoch, b);
      check_finite(terms.ar, "ar", log.epoch, b);
      check_finite(terms.an, "an", log.epoch, b);
      model.zero_grad();
      backward(terms.total);
      sgd.step(log.lr);

      log.loss_st += terms.st;
      log.loss_as += terms.as;
      log.loss_ar += terms.ar;
      log.loss_an += terms.an;
      as_masked += terms.as_masked;
      an_masked += terms.an_masked;
      seen += terms.batch;
    }
    const auto n_batches = static_cast<double>(order.size());
    log.loss_st /= n_batches;
    log.loss_as /= n_batches;
    log.loss_ar /= n_batches;
    log.loss_an /= n_batches;
    log.as_mask_fraction = static_cast<double>(as_masked) / static_cast<double>(seen);
    log.an_mask_fraction = static_cast<double>(an_masked) / static_cast<double>(seen);
    for (std::size_t w = 0; w < 3; ++w) log.clean_acc[w] = 100.0 * static_cast<double>(correct[w]) / static_cast<double>(seen);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (sink) sink(log);
    logs.push_back(log);
  }
  model.zero_grad();
  return logs;
}

}  // namespace aat
