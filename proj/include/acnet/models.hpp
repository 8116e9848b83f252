#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "acnet/ops.hpp"
#include "acnet/rng.hpp"
#include "acnet/tensor.hpp"

namespace acnet {

template <typename T>
using NamedParams = std::vector<std::pair<std::string, Tensor<T>>>;

struct GeneratorConfig {
  int base_channels = 8;  // channels of the first convolution
  int n_res_blocks = 8;
  int image_channels = 3;

  void validate() const {
    if (base_channels < 1) throw std::invalid_argument("generator: base_channels must be >= 1");
    if (n_res_blocks < 0) throw std::invalid_argument("generator: n_res_blocks must be >= 0");
  }
};

struct DiscriminatorConfig {
  int base_channels = 8;
  int image_channels = 3;
};

struct EncoderConfig {
  std::vector<int> channels = {16, 32, 64, 128};
  int embedding_dim = 64;
  int image_channels = 3;
};

namespace detail {

template <typename T>
Tensor<T> conv_weight(int out_ch, int in_ch, int k, Rng& rng, T stddev) {
  return Tensor<T>::randn({out_ch, in_ch, k, k}, rng, stddev, /*requires_grad=*/true);
}

}  // namespace detail

// Sketch-to-photo translator. Three downsampling conv blocks, a stack of
// residual blocks, two transposed-conv upsampling blocks, a final wide conv
// and a Tanh squashing the output into [-1, 1]. Instance norm throughout,
// no affine terms, convolutions bias-free.
template <typename T>
class Generator {
 public:
  Generator() = default;

  Generator(GeneratorConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    const int c = cfg.base_channels;
    const T stddev = T(0.02);
    cir1_ = detail::conv_weight<T>(c, cfg.image_channels, 7, rng, stddev);
    cir2_ = detail::conv_weight<T>(2 * c, c, 3, rng, stddev);
    cir3_ = detail::conv_weight<T>(4 * c, 2 * c, 3, rng, stddev);
    res_.resize(cfg.n_res_blocks);
    for (int b = 0; b < cfg.n_res_blocks; ++b) {
      res_[b].first = detail::conv_weight<T>(4 * c, 4 * c, 3, rng, stddev);
      res_[b].second = detail::conv_weight<T>(4 * c, 4 * c, 3, rng, stddev);
    }
    // Transposed-conv weights are laid out [in, out, k, k].
    dir1_ = Tensor<T>::randn({4 * c, 2 * c, 3, 3}, rng, stddev, true);
    dir2_ = Tensor<T>::randn({2 * c, c, 3, 3}, rng, stddev, true);
    dir3_ = detail::conv_weight<T>(cfg.image_channels, c, 7, rng, stddev);
  }

  Tensor<T> forward(const Tensor<T>& image) const {
    check_input(image);
    Tensor<T> h = relu(instance_norm(conv2d(image, cir1_, 1, PadType::kReflect, 3)));
    h = relu(instance_norm(conv2d(h, cir2_, 2, PadType::kZero, 1)));
    h = relu(instance_norm(conv2d(h, cir3_, 2, PadType::kZero, 1)));
    for (const auto& block : res_) {
      Tensor<T> body = relu(instance_norm(conv2d(h, block.first, 1, PadType::kReflect, 1)));
      body = instance_norm(conv2d(body, block.second, 1, PadType::kReflect, 1));
      h = add(h, body);
    }
    h = relu(instance_norm(conv_transpose2d(h, dir1_, 2, 1, 1)));
    h = relu(instance_norm(conv_transpose2d(h, dir2_, 2, 1, 1)));
    h = conv2d(h, dir3_, 1, PadType::kReflect, 3);
    return tanh(h);
  }

  NamedParams<T> parameters() const {
    NamedParams<T> out;
    out.emplace_back("g.cir1.w", cir1_);
    out.emplace_back("g.cir2.w", cir2_);
    out.emplace_back("g.cir3.w", cir3_);
    for (size_t b = 0; b < res_.size(); ++b) {
      out.emplace_back("g.res" + std::to_string(b) + ".conv1.w", res_[b].first);
      out.emplace_back("g.res" + std::to_string(b) + ".conv2.w", res_[b].second);
    }
    out.emplace_back("g.dir1.w", dir1_);
    out.emplace_back("g.dir2.w", dir2_);
    out.emplace_back("g.dir3.w", dir3_);
    return out;
  }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, p] : parameters()) n += p.numel();
    return n;
  }

  const GeneratorConfig& config() const { return cfg_; }

 private:
  void check_input(const Tensor<T>& image) const {
    if (image.rank() != 4 || image.dim(1) != cfg_.image_channels) {
      throw std::invalid_argument("generator: expected [N, " +
                                  std::to_string(cfg_.image_channels) +
                                  ", H, W] input, got " + shape_str(image.shape()));
    }
    const int h = image.dim(2), w = image.dim(3);
    if (h != w) {
      throw std::invalid_argument("generator: input must be square, got " +
                                  std::to_string(h) + "x" + std::to_string(w));
    }
    if (h % 4 != 0) {
      throw std::invalid_argument("generator: input side " + std::to_string(h) +
                                  " must be divisible by 4");
    }
  }

  GeneratorConfig cfg_;
  Tensor<T> cir1_, cir2_, cir3_;
  std::vector<std::pair<Tensor<T>, Tensor<T>>> res_;
  Tensor<T> dir1_, dir2_, dir3_;
};

// Patch discriminator: one conv + LeakyReLU block, three conv + instance
// norm + LeakyReLU blocks, then a 1-channel conv producing the patch logit
// map. No activation on the output; losses work on logits.
template <typename T>
class Discriminator {
 public:
  Discriminator() = default;

  Discriminator(DiscriminatorConfig cfg, Rng& rng) : cfg_(cfg) {
    const int c = cfg.base_channels;
    const T stddev = T(0.02);
    clr_ = detail::conv_weight<T>(c, cfg.image_channels, 4, rng, stddev);
    cilr1_ = detail::conv_weight<T>(2 * c, c, 4, rng, stddev);
    cilr2_ = detail::conv_weight<T>(4 * c, 2 * c, 4, rng, stddev);
    cilr3_ = detail::conv_weight<T>(8 * c, 4 * c, 4, rng, stddev);
    head_ = detail::conv_weight<T>(1, 8 * c, 4, rng, stddev);
  }

  // Spatial schedule: strides 2, 2, 2, 1, 1, all kernel 4 with zero pad 1.
  static int output_side(int side) {
    auto down = [](int s, int stride) { return (s + 2 - 4) / stride + 1; };
    int s = side;
    for (int stride : {2, 2, 2, 1, 1}) {
      s = down(s, stride);
      if (s < 1) return 0;
    }
    return s;
  }

  Tensor<T> forward(const Tensor<T>& image) const {
    if (image.rank() != 4 || image.dim(1) != cfg_.image_channels) {
      throw std::invalid_argument("discriminator: expected [N, " +
                                  std::to_string(cfg_.image_channels) +
                                  ", H, W] input, got " + shape_str(image.shape()));
    }
    if (output_side(std::min(image.dim(2), image.dim(3))) < 1) {
      throw std::invalid_argument("discriminator: input side " +
                                  std::to_string(image.dim(2)) +
                                  " too small for the stride schedule");
    }
    const T slope = T(0.2);
    Tensor<T> h = leaky_relu(conv2d(image, clr_, 2, PadType::kZero, 1), slope);
    h = leaky_relu(instance_norm(conv2d(h, cilr1_, 2, PadType::kZero, 1)), slope);
    h = leaky_relu(instance_norm(conv2d(h, cilr2_, 2, PadType::kZero, 1)), slope);
    h = leaky_relu(instance_norm(conv2d(h, cilr3_, 1, PadType::kZero, 1)), slope);
    return conv2d(h, head_, 1, PadType::kZero, 1);
  }

  NamedParams<T> parameters() const {
    return {{"d.clr.w", clr_},     {"d.cilr1.w", cilr1_}, {"d.cilr2.w", cilr2_},
            {"d.cilr3.w", cilr3_}, {"d.head.w", head_}};
  }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, p] : parameters()) n += p.numel();
    return n;
  }

  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  Tensor<T> clr_, cilr1_, cilr2_, cilr3_, head_;
};

// Embedding backbone: a stack of stride-2 conv + instance norm + ReLU
// blocks, global max pooling, a fully connected projection and L2
// normalization. Every emitted embedding has unit norm.
template <typename T>
class Encoder {
 public:
  Encoder() = default;

  Encoder(EncoderConfig cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.channels.empty()) throw std::invalid_argument("encoder: needs >= 1 block");
    if (cfg.embedding_dim < 1) throw std::invalid_argument("encoder: embedding_dim must be >= 1");
    int in_ch = cfg.image_channels;
    for (int out_ch : cfg.channels) {
      const T stddev = std::sqrt(T(2) / static_cast<T>(in_ch * 9));
      convs_.push_back(detail::conv_weight<T>(out_ch, in_ch, 3, rng, stddev));
      in_ch = out_ch;
    }
    const T fc_std = std::sqrt(T(2) / static_cast<T>(in_ch));
    fc_w_ = Tensor<T>::randn({cfg.embedding_dim, in_ch}, rng, fc_std, true);
    fc_b_ = Tensor<T>::zeros({cfg.embedding_dim}, true);
  }

  Tensor<T> forward(const Tensor<T>& image) const {
    if (image.rank() != 4 || image.dim(1) != cfg_.image_channels) {
      throw std::invalid_argument("encoder: expected [N, " +
                                  std::to_string(cfg_.image_channels) +
                                  ", H, W] input, got " + shape_str(image.shape()));
    }
    Tensor<T> h = image;
    for (const auto& w : convs_) {
      h = relu(instance_norm(conv2d(h, w, 2, PadType::kZero, 1)));
    }
    Tensor<T> pooled = global_max_pool(h);
    return l2_normalize(linear(pooled, fc_w_, fc_b_));
  }

  NamedParams<T> parameters() const {
    NamedParams<T> out;
    for (size_t i = 0; i < convs_.size(); ++i) {
      out.emplace_back("phi.conv" + std::to_string(i) + ".w", convs_[i]);
    }
    out.emplace_back("phi.fc.w", fc_w_);
    out.emplace_back("phi.fc.b", fc_b_);
    return out;
  }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, p] : parameters()) n += p.numel();
    return n;
  }

  int embedding_dim() const { return cfg_.embedding_dim; }
  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  std::vector<Tensor<T>> convs_;
  Tensor<T> fc_w_, fc_b_;
};

template <typename T>
std::vector<Tensor<T>> param_tensors(const NamedParams<T>& named) {
  std::vector<Tensor<T>> out;
  out.reserve(named.size());
  for (const auto& [name, p] : named) out.push_back(p);
  return out;
}

}  // namespace acnet
