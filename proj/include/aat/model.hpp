#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "aat/rng.hpp"
#include "aat/tensor.hpp"

namespace aat {

enum class BackboneKind { kSmallCnn, kMlp };

// Encoder architecture shared by both branches.
//   small-cnn: [conv(k x k) -> relu -> maxpool2x2] per conv_channels entry,
//              flatten, dense -> latent_dim, relu
//   mlp:       optional fixed per-feature input scale, [dense -> relu] per
//              hidden entry, dense -> latent_dim, relu
struct BackboneSpec {
  BackboneKind kind = BackboneKind::kSmallCnn;
  std::array<std::size_t, 3> input_shape{1, 28, 28};  // C, H, W
  std::vector<std::size_t> conv_channels{16, 32};
  std::size_t kernel = 5;
  std::vector<std::size_t> hidden;
  std::size_t latent_dim = 128;
  std::size_t num_classes = 10;
  std::vector<float> input_scale;  // mlp only; empty means identity

  static BackboneSpec mnist_cnn();
  static BackboneSpec mlp(std::size_t features, std::size_t num_classes);

  std::size_t input_numel() const { return input_shape[0] * input_shape[1] * input_shape[2]; }
  void validate() const;
  bool operator==(const BackboneSpec&) const = default;
};

std::string to_string(BackboneKind kind);
BackboneKind parse_backbone_kind(const std::string& text);

enum class Branch { kRobust, kNonRobust };

// standard: f([z_r, z_n]); robust: f([z_r, 0]); nonrobust: f([0, z_n]).
enum class Way { kStandard, kRobust, kNonRobust };

std::string to_string(Way way);
Way parse_way(const std::string& text);

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const BackboneSpec& spec, Rng& rng, const std::string& prefix);

  Tensor<T> forward(const Tensor<T>& x) const;
  std::vector<NamedParam<T>> parameters() const;
  // Deep copy; parameters require gradients iff `trainable`.
  Encoder copy(bool trainable) const;

 private:
  struct Layer {
    std::string name;
    Tensor<T> weight;
    Tensor<T> bias;
  };
  BackboneSpec spec_;
  std::vector<Layer> convs_;
  std::vector<Layer> denses_;  // the last one maps to the latent width
  std::vector<T> input_scale_;
};

template <typename T>
struct WayLogits {
  Tensor<T> standard;
  Tensor<T> robust;
  Tensor<T> nonrobust;
  const Tensor<T>& operator[](Way way) const;
};

// Two encoders (robust, non-robust) with a shared two-layer classifier head
// over the concatenated representations. Tensors are shared
// handles, so copies are deleted; clone() gives an independent model.
template <typename T>
class ThreeWayModel {
 public:
  static ThreeWayModel init(const BackboneSpec& spec, std::uint64_t seed);

  ThreeWayModel(ThreeWayModel&&) noexcept = default;
  ThreeWayModel& operator=(ThreeWayModel&&) noexcept = default;
  ThreeWayModel(const ThreeWayModel&) = delete;
  ThreeWayModel& operator=(const ThreeWayModel&) = delete;

  const BackboneSpec& spec() const { return spec_; }

  Tensor<T> encode(const Tensor<T>& x, Branch branch) const;
  Tensor<T> head(const Tensor<T>& z_robust, const Tensor<T>& z_nonrobust) const;
  Tensor<T> forward_way(const Tensor<T>& x, Way way) const;
  // All three ways with each encoder evaluated once.
  WayLogits<T> forward_all(const Tensor<T>& x) const;

  // Fixed order: robust encoder, non-robust encoder, head.
  std::vector<NamedParam<T>> parameters() const;
  std::vector<NamedParam<T>> parameters(Branch branch) const;
  std::vector<NamedParam<T>> head_parameters() const;

  ThreeWayModel clone() const;
  // Deep copy whose parameters are constants; gradients only reach inputs.
  ThreeWayModel frozen() const;
  void zero_grad();

 private:
  ThreeWayModel() = default;
  void check_input(const Tensor<T>& x) const;

  BackboneSpec spec_;
  Encoder<T> robust_;
  Encoder<T> nonrobust_;
  Tensor<T> fc1_weight_, fc1_bias_, fc2_weight_, fc2_bias_;
};

extern template class Encoder<float>;
extern template class Encoder<double>;
extern template class ThreeWayModel<float>;
extern template class ThreeWayModel<double>;

using Model = ThreeWayModel<float>;

}  // namespace aat
