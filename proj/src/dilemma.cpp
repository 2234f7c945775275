#include "aat/dilemma.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "aat/errors.hpp"
#include "aat/rng.hpp"

namespace aat::dilemma {

void DilemmaSpec::validate() const {
  if (!(p > 0.5 && p <= 1.0)) throw ValidationError("dilemma.p must lie in (0.5, 1], got " + std::to_string(p));
  if (eta.empty() || eta.size() % 2 == 0) {
    throw ValidationError("dilemma feature count must be odd, got " + std::to_string(eta.size()));
  }
  for (std::size_t i = 0; i < eta.size(); ++i) {
    if (!(eta[i] > 0) || !std::isfinite(eta[i])) {
      throw ValidationError("dilemma.eta[" + std::to_string(i) + "] must be positive and finite");
    }
  }
  if (!(epsilon >= 0) || !std::isfinite(epsilon)) throw ValidationError("dilemma.epsilon must be >= 0");
}

Json DilemmaSpec::to_json() const { return {{"p", p}, {"d", d()}, {"eta", eta}, {"epsilon", epsilon}}; }

DilemmaSpec DilemmaSpec::from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + " must be an object");
  ObjectReader r(j, path);
  DilemmaSpec spec;
  spec.p = r.number("p", spec.p, 0.0, 1.0);
  spec.eta = r.numbers("eta", spec.eta);
  spec.epsilon = r.number("epsilon", spec.epsilon, 0.0, 1e9);
  if (r.has("d")) {
    const auto d = r.count("d", spec.d(), 1, kMaxEnumerationFeatures);
    if (d != spec.eta.size()) throw ConfigError(path + ".d disagrees with the length of " + path + ".eta");
  }
  r.finish();
  spec.validate();
  return spec;
}

LinearSignClassifier LinearSignClassifier::h0(const DilemmaSpec& spec) {
  LinearSignClassifier clf{"h0", {}};
  for (double e : spec.eta) clf.w.push_back(1.0 / e);
  return clf;
}

LinearSignClassifier LinearSignClassifier::h1(const DilemmaSpec& spec) {
  LinearSignClassifier clf{"h1", {}};
  for (double e : spec.eta) clf.w.push_back(e >= 1.0 ? 1.0 : 0.0);
  return clf;
}

int LinearSignClassifier::predict(std::span<const double> x) const {
  double score = 0;
  for (std::size_t i = 0; i < w.size(); ++i) score += w[i] * x[i];
  if (score > 0) return 1;
  if (score < 0) return -1;
  return 0;
}

std::vector<double> worst_case(const LinearSignClassifier& clf, std::span<const double> x, int y, double epsilon) {
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (clf.w[i] > 0) out[i] -= epsilon * y;
    if (clf.w[i] < 0) out[i] += epsilon * y;
  }
  return out;
}

namespace {

void check(const DilemmaSpec& spec, const LinearSignClassifier& clf) {
  spec.validate();
  if (clf.w.size() != spec.d()) {
    throw DimensionError("classifier has " + std::to_string(clf.w.size()) + " weights for " +
                         std::to_string(spec.d()) + " features");
  }
  for (double v : clf.w) {
    if (!std::isfinite(v)) throw ValidationError("classifier weights must be finite");
  }
}

double enumerate(const DilemmaSpec& spec, const LinearSignClassifier& clf, double epsilon) {
  check(spec, clf);
  const std::size_t d = spec.d();
  if (d > kMaxEnumerationFeatures) {
    throw ValidationError("exact enumeration refuses d = " + std::to_string(d) + " (limit " +
                          std::to_string(kMaxEnumerationFeatures) + ")");
  }
  double correct = 0;
  std::vector<double> x(d);
  for (std::uint64_t pattern = 0; pattern < (std::uint64_t{1} << d); ++pattern) {
    double weight = 1.0;
    for (std::size_t i = 0; i < d; ++i) weight *= (pattern >> i) & 1 ? 1.0 - spec.p : spec.p;
    if (weight == 0) continue;
    for (int y : {-1, 1}) {
      for (std::size_t i = 0; i < d; ++i) x[i] = ((pattern >> i) & 1 ? -1.0 : 1.0) * spec.eta[i] * y;
      const auto seen = epsilon > 0 ? worst_case(clf, x, y, epsilon) : x;
      if (clf.predict(seen) == y) correct += 0.5 * weight;
    }
  }
  return correct;
}

}  // namespace

double exact_standard_accuracy(const DilemmaSpec& spec, const LinearSignClassifier& clf) {
  return enumerate(spec, clf, 0.0);
}

double exact_adversarial_accuracy(const DilemmaSpec& spec, const LinearSignClassifier& clf) {
  return enumerate(spec, clf, spec.epsilon);
}

double closed_form_approx(std::size_t d, double p) {
  const std::size_t m = (d + 1) / 2;
  double binom = 1;
  for (std::size_t k = 1; k <= m; ++k) binom = binom * static_cast<double>(d - m + k) / static_cast<double>(k);
  return 1.0 - binom * std::pow(1.0 - p, static_cast<double>(m));
}

Sample sample_dataset(const DilemmaSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  Sample out;
  out.d = spec.d();
  out.x.reserve(n * out.d);
  out.y.reserve(n);
  Rng rng(seed);
  for (std::size_t s = 0; s < n; ++s) {
    const int y = rng.bernoulli(0.5) ? 1 : -1;
    out.y.push_back(y);
    for (std::size_t i = 0; i < out.d; ++i) {
      const double sign = rng.bernoulli(spec.p) ? 1.0 : -1.0;
      out.x.push_back(sign * spec.eta[i] * y);
    }
  }
  return out;
}

double monte_carlo_accuracy(const DilemmaSpec& spec, const LinearSignClassifier& clf, std::size_t n,
                            std::uint64_t seed, bool adversarial) {
  check(spec, clf);
  if (n == 0) throw ValidationError("empty sample");
  const auto sample = sample_dataset(spec, n, seed);
  std::size_t correct = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const auto row = sample.row(s);
    const int y = sample.y[s];
    const int pred = adversarial ? clf.predict(worst_case(clf, row, y, spec.epsilon)) : clf.predict(row);
    correct += pred == y ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

Dataset to_dataset(const Sample& sample) {
  Dataset out;
  out.sample_shape = {1, 1, sample.d};
  out.num_classes = 2;
  out.split = "dilemma";
  out.images.assign(sample.x.begin(), sample.x.end());
  for (int y : sample.y) out.labels.push_back(y > 0 ? 1 : 0);
  return out;
}

namespace {

double halfwidth(double q, std::size_t n) { return 3.0 * std::sqrt(q * (1.0 - q) / static_cast<double>(n)); }

std::size_t support(const LinearSignClassifier& clf) {
  std::size_t k = 0;
  for (double v : clf.w) k += v != 0 ? 1 : 0;
  return k;
}

}  // namespace

Report run_report(const DilemmaSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n == 0) throw ValidationError("empty sample");
  Report report;
  report.spec = spec;
  report.n = n;
  report.seed = seed;
  for (const auto& clf : {LinearSignClassifier::h0(spec), LinearSignClassifier::h1(spec)}) {
    ClassifierReport c;
    c.name = clf.name;
    c.exact_standard = exact_standard_accuracy(spec, clf);
    c.exact_adversarial = exact_adversarial_accuracy(spec, clf);
    c.mc_standard = monte_carlo_accuracy(spec, clf, n, seed, false);
    c.mc_adversarial = monte_carlo_accuracy(spec, clf, n, seed, true);
    c.mc_standard_halfwidth = halfwidth(c.exact_standard, n);
    c.mc_adversarial_halfwidth = halfwidth(c.exact_adversarial, n);
    report.classifiers.push_back(c);
  }
  const auto h1 = LinearSignClassifier::h1(spec);
  report.closed_form_h0 = closed_form_approx(spec.d(), spec.p);
  const auto k = support(h1);
  report.closed_form_h1 = k % 2 == 1 ? closed_form_approx(k, spec.p) : std::nan("");
  return report;
}

Json Report::to_json() const {
  Json j;
  j["spec"] = spec.to_json();
  j["n"] = n;
  j["seed"] = seed;
  j["classifier"] = Json::array();
  j["exact"] = Json::object();
  j["monte_carlo"] = Json::object();
  for (const auto& c : classifiers) {
    j["classifier"].push_back(c.name);
    j["exact"][c.name] = {{"standard", c.exact_standard}, {"adversarial", c.exact_adversarial}};
    j["monte_carlo"][c.name] = {{"standard", c.mc_standard},
                                {"adversarial", c.mc_adversarial},
                                {"standard_3sigma", c.mc_standard_halfwidth},
                                {"adversarial_3sigma", c.mc_adversarial_halfwidth}};
  }
  j["closed_form_approx"] = {{"h0", closed_form_h0},
                             {"h1", std::isnan(closed_form_h1) ? Json(nullptr) : Json(closed_form_h1)},
                             {"note", "1 - C(k,(k+1)/2)(1-p)^((k+1)/2) over the k features a classifier uses; keeps "
                                      "only the smallest losing binomial term without its p-power factor, so it "
                                      "understates the exact enumeration"}};
  return j;
}

std::string Report::table() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "p=%g d=%zu epsilon=%g  Monte-Carlo n=%zu seed=%llu\n", spec.p, spec.d(),
                spec.epsilon, n, static_cast<unsigned long long>(seed));
  out << line;
  std::snprintf(line, sizeof line, "%-4s %12s %12s %18s %18s %12s\n", "clf", "exact std", "exact adv", "MC std (3s)",
                "MC adv (3s)", "closed form");
  out << line;
  for (const auto& c : classifiers) {
    const double closed = c.name == "h0" ? closed_form_h0 : closed_form_h1;
    std::snprintf(line, sizeof line, "%-4s %12.6f %12.6f %9.5f+-%.5f %9.5f+-%.5f %12.6f\n", c.name.c_str(),
                  c.exact_standard, c.exact_adversarial, c.mc_standard, c.mc_standard_halfwidth, c.mc_adversarial,
                  c.mc_adversarial_halfwidth, closed);
    out << line;
  }
  return out.str();
}

}  // namespace aat::dilemma
