#include "aat/model.hpp"

#include <cmath>

#include "aat/errors.hpp"
#include "aat/ops.hpp"

namespace aat {

BackboneSpec BackboneSpec::mnist_cnn() { return BackboneSpec{}; }

BackboneSpec BackboneSpec::mlp(std::size_t features, std::size_t num_classes) {
  BackboneSpec spec;
  spec.kind = BackboneKind::kMlp;
  spec.input_shape = {1, 1, features};
  spec.conv_channels.clear();
  spec.hidden = {32};
  spec.latent_dim = 32;
  spec.num_classes = num_classes;
  return spec;
}

void BackboneSpec::validate() const {
  for (auto extent : input_shape) {
    if (extent == 0) throw ValidationError("backbone input extents must be positive");
  }
  if (latent_dim == 0) throw ValidationError("latent_dim must be positive");
  if (num_classes < 2) throw ValidationError("num_classes must be at least 2");
  if (kind == BackboneKind::kSmallCnn) {
    if (conv_channels.empty()) throw ValidationError("small-cnn needs at least one conv layer");
    if (kernel == 0) throw ValidationError("kernel size must be positive");
    if (!input_scale.empty()) throw ValidationError("input_scale is only supported for the mlp backbone");
    std::size_t h = input_shape[1], w = input_shape[2];
    for (auto channels : conv_channels) {
      if (channels == 0) throw ValidationError("conv channel counts must be positive");
      if (h < kernel || w < kernel) throw ValidationError("input too small for the conv stack");
      h = (h - kernel + 1) / 2;
      w = (w - kernel + 1) / 2;
      if (h == 0 || w == 0) throw ValidationError("conv stack reduces the input to nothing");
    }
  } else {
    for (auto width : hidden) {
      if (width == 0) throw ValidationError("hidden widths must be positive");
    }
    if (!input_scale.empty() && input_scale.size() != input_numel()) {
      throw ValidationError("input_scale has " + std::to_string(input_scale.size()) + " entries for " +
                            std::to_string(input_numel()) + " input features");
    }
  }
}

std::string to_string(BackboneKind kind) { return kind == BackboneKind::kSmallCnn ? "small-cnn" : "mlp"; }

BackboneKind parse_backbone_kind(const std::string& text) {
  if (text == "small-cnn") return BackboneKind::kSmallCnn;
  if (text == "mlp") return BackboneKind::kMlp;
  throw ValidationError("unknown backbone kind '" + text + "' (expected small-cnn or mlp)");
}

std::string to_string(Way way) {
  switch (way) {
    case Way::kStandard:
      return "standard";
    case Way::kRobust:
      return "robust";
    case Way::kNonRobust:
      return "nonrobust";
  }
  throw UsageError("unknown way");
}

Way parse_way(const std::string& text) {
  if (text == "standard" || text == "S") return Way::kStandard;
  if (text == "robust" || text == "R") return Way::kRobust;
  if (text == "nonrobust" || text == "N") return Way::kNonRobust;
  throw UsageError("unknown way '" + text + "' (expected standard, robust or nonrobust)");
}

namespace {

// Uniform in +-sqrt(6 / fan_in).
template <typename T>
Tensor<T> uniform_weight(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<T> values(shape_numel(shape));
  for (auto& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>(std::move(shape), std::move(values), true);
}

template <typename T>
Tensor<T> zero_bias(std::size_t n) {
  return Tensor<T>::zeros({n}, true);
}

}  // namespace

template <typename T>
Encoder<T>::Encoder(const BackboneSpec& spec, Rng& rng, const std::string& prefix) : spec_(spec) {
  spec.validate();
  std::size_t features = 0;
  if (spec.kind == BackboneKind::kSmallCnn) {
    std::size_t channels = spec.input_shape[0];
    std::size_t h = spec.input_shape[1], w = spec.input_shape[2];
    for (std::size_t i = 0; i < spec.conv_channels.size(); ++i) {
      const std::size_t out = spec.conv_channels[i];
      const std::size_t fan_in = channels * spec.kernel * spec.kernel;
      convs_.push_back({prefix + ".conv" + std::to_string(i + 1),
                        uniform_weight<T>({out, channels, spec.kernel, spec.kernel}, fan_in, rng), zero_bias<T>(out)});
      channels = out;
      h = (h - spec.kernel + 1) / 2;
      w = (w - spec.kernel + 1) / 2;
    }
    features = channels * h * w;
  } else {
    features = spec.input_numel();
    input_scale_.assign(spec.input_scale.begin(), spec.input_scale.end());
    for (std::size_t i = 0; i < spec.hidden.size(); ++i) {
      denses_.push_back({prefix + ".fc" + std::to_string(i + 1), uniform_weight<T>({spec.hidden[i], features}, features, rng),
                         zero_bias<T>(spec.hidden[i])});
      features = spec.hidden[i];
    }
  }
  denses_.push_back({prefix + ".latent", uniform_weight<T>({spec.latent_dim, features}, features, rng),
                     zero_bias<T>(spec.latent_dim)});
}

template <typename T>
Tensor<T> Encoder<T>::forward(const Tensor<T>& x) const {
  Tensor<T> h = x;
  for (const auto& conv : convs_) {
    h = ops::max_pool2d(ops::relu(ops::conv2d(h, conv.weight, conv.bias)));
  }
  h = ops::flatten(h);
  if (!input_scale_.empty()) h = ops::scale_features<T>(h, input_scale_);
  for (const auto& dense : denses_) {
    h = ops::relu(ops::linear(h, dense.weight, dense.bias));
  }
  return h;
}

template <typename T>
std::vector<NamedParam<T>> Encoder<T>::parameters() const {
  std::vector<NamedParam<T>> params;
  for (const auto* group : {&convs_, &denses_}) {
    for (const auto& layer : *group) {
      params.push_back({layer.name + ".weight", layer.weight});
      params.push_back({layer.name + ".bias", layer.bias});
    }
  }
  return params;
}

template <typename T>
Encoder<T> Encoder<T>::copy(bool trainable) const {
  Encoder out;
  out.spec_ = spec_;
  out.input_scale_ = input_scale_;
  for (const auto& layer : convs_) {
    out.convs_.push_back({layer.name, Tensor<T>(layer.weight.shape(), {layer.weight.values().begin(), layer.weight.values().end()}, trainable),
                          Tensor<T>(layer.bias.shape(), {layer.bias.values().begin(), layer.bias.values().end()}, trainable)});
  }
  for (const auto& layer : denses_) {
    out.denses_.push_back({layer.name, Tensor<T>(layer.weight.shape(), {layer.weight.values().begin(), layer.weight.values().end()}, trainable),
                           Tensor<T>(layer.bias.shape(), {layer.bias.values().begin(), layer.bias.values().end()}, trainable)});
  }
  return out;
}

template <typename T>
const Tensor<T>& WayLogits<T>::operator[](Way way) const {
  switch (way) {
    case Way::kStandard:
      return standard;
    case Way::kRobust:
      return robust;
    case Way::kNonRobust:
      return nonrobust;
  }
  throw UsageError("unknown way");
}

template <typename T>
ThreeWayModel<T> ThreeWayModel<T>::init(const BackboneSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Rng root(seed);
  Rng robust_rng = root.fork(1);
  Rng nonrobust_rng = root.fork(2);
  Rng head_rng = root.fork(3);
  ThreeWayModel model;
  model.spec_ = spec;
  model.robust_ = Encoder<T>(spec, robust_rng, "robust");
  model.nonrobust_ = Encoder<T>(spec, nonrobust_rng, "nonrobust");
  const std::size_t h = spec.latent_dim;
  model.fc1_weight_ = uniform_weight<T>({h, 2 * h}, 2 * h, head_rng);
  model.fc1_bias_ = zero_bias<T>(h);
  model.fc2_weight_ = uniform_weight<T>({spec.num_classes, h}, h, head_rng);
  model.fc2_bias_ = zero_bias<T>(spec.num_classes);
  return model;
}

template <typename T>
void ThreeWayModel<T>::check_input(const Tensor<T>& x) const {
  const auto& s = x.shape();
  const auto& in = spec_.input_shape;
  if (s.size() != 4 || s[1] != in[0] || s[2] != in[1] || s[3] != in[2]) {
    throw DimensionError("model expects input [N," + std::to_string(in[0]) + "," + std::to_string(in[1]) + "," +
                         std::to_string(in[2]) + "], got " + shape_string(s));
  }
}

template <typename T>
Tensor<T> ThreeWayModel<T>::encode(const Tensor<T>& x, Branch branch) const {
  check_input(x);
  return branch == Branch::kRobust ? robust_.forward(x) : nonrobust_.forward(x);
}

template <typename T>
Tensor<T> ThreeWayModel<T>::head(const Tensor<T>& z_robust, const Tensor<T>& z_nonrobust) const {
  const auto joined = ops::concat(z_robust, z_nonrobust);
  const auto hidden = ops::relu(ops::linear(joined, fc1_weight_, fc1_bias_));
  return ops::linear(hidden, fc2_weight_, fc2_bias_);
}

template <typename T>
Tensor<T> ThreeWayModel<T>::forward_way(const Tensor<T>& x, Way way) const {
  switch (way) {
    case Way::kStandard:
      return head(encode(x, Branch::kRobust), encode(x, Branch::kNonRobust));
    case Way::kRobust: {
      const auto z = encode(x, Branch::kRobust);
      return head(z, ops::zeros_like(z));
    }
    case Way::kNonRobust: {
      const auto z = encode(x, Branch::kNonRobust);
      return head(ops::zeros_like(z), z);
    }
  }
  throw UsageError("unknown way");
}

template <typename T>
WayLogits<T> ThreeWayModel<T>::forward_all(const Tensor<T>& x) const {
  const auto zr = encode(x, Branch::kRobust);
  const auto zn = encode(x, Branch::kNonRobust);
  return {head(zr, zn), head(zr, ops::zeros_like(zn)), head(ops::zeros_like(zr), zn)};
}

template <typename T>
std::vector<NamedParam<T>> ThreeWayModel<T>::parameters() const {
  auto params = robust_.parameters();
  for (auto& p : nonrobust_.parameters()) params.push_back(std::move(p));
  for (auto& p : head_parameters()) params.push_back(std::move(p));
  return params;
}

template <typename T>
std::vector<NamedParam<T>> ThreeWayModel<T>::parameters(Branch branch) const {
  return branch == Branch::kRobust ? robust_.parameters() : nonrobust_.parameters();
}

template <typename T>
std::vector<NamedParam<T>> ThreeWayModel<T>::head_parameters() const {
  return {{"head.fc1.weight", fc1_weight_},
          {"head.fc1.bias", fc1_bias_},
          {"head.fc2.weight", fc2_weight_},
          {"head.fc2.bias", fc2_bias_}};
}

namespace {
template <typename T>
Tensor<T> copy_tensor(const Tensor<T>& t, bool trainable) {
  return Tensor<T>(t.shape(), {t.values().begin(), t.values().end()}, trainable);
}
}  // namespace

template <typename T>
ThreeWayModel<T> ThreeWayModel<T>::clone() const {
  ThreeWayModel out;
  out.spec_ = spec_;
  out.robust_ = robust_.copy(true);
  out.nonrobust_ = nonrobust_.copy(true);
  out.fc1_weight_ = copy_tensor(fc1_weight_, true);
  out.fc1_bias_ = copy_tensor(fc1_bias_, true);
  out.fc2_weight_ = copy_tensor(fc2_weight_, true);
  out.fc2_bias_ = copy_tensor(fc2_bias_, true);
  return out;
}

template <typename T>
ThreeWayModel<T> ThreeWayModel<T>::frozen() const {
  ThreeWayModel out;
  out.spec_ = spec_;
  out.robust_ = robust_.copy(false);
  out.nonrobust_ = nonrobust_.copy(false);
  out.fc1_weight_ = copy_tensor(fc1_weight_, false);
  out.fc1_bias_ = copy_tensor(fc1_bias_, false);
  out.fc2_weight_ = copy_tensor(fc2_weight_, false);
  out.fc2_bias_ = copy_tensor(fc2_bias_, false);
  return out;
}

template <typename T>
void ThreeWayModel<T>::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

template class Encoder<float>;
template class Encoder<double>;
template struct WayLogits<float>;
template struct WayLogits<double>;
template class ThreeWayModel<float>;
template class ThreeWayModel<double>;

}  // namespace aat
