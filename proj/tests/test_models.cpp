#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "acnet/losses.hpp"
#include "acnet/models.hpp"
#include "acnet/ops.hpp"
#include "acnet/rng.hpp"

using namespace acnet;

namespace {

// Closed-form parameter counts from the block tables: bias-free convs, no
// norm affine terms. Generator: 7x7 stem, two stride-2 downs, n residual
// blocks with two 3x3 convs at 4c, two stride-2 ups, 7x7 head.
int64_t generator_count(int64_t c, int64_t n) {
  return 3 * c * 49 + c * 2 * c * 9 + 2 * c * 4 * c * 9 +
         n * (2 * 4 * c * 4 * c * 9) + 4 * c * 2 * c * 9 + 2 * c * c * 9 +
         c * 3 * 49;
}

// Discriminator: kernel-4 stack 3->c->2c->4c->8c->1.
int64_t discriminator_count(int64_t c) {
  return 3 * c * 16 + c * 2 * c * 16 + 2 * c * 4 * c * 16 + 4 * c * 8 * c * 16 +
         8 * c * 16;
}

template <typename T>
void zero_params(NamedParams<T> params) {
  for (auto& [name, p] : params) {
    for (auto& v : p.values()) v = T(0);
  }
}

}  // namespace

TEST_CASE("generator: zero weights produce tanh(0) = zeros for any input") {
  Rng rng(1);
  Generator<float> g({.base_channels = 4, .n_res_blocks = 2}, rng);
  zero_params(g.parameters());
  auto x = TensorF::randn({1, 3, 16, 16}, rng, 0.5f);
  auto y = g.forward(x);
  for (float v : y.values()) CHECK(v == doctest::Approx(0.f));
}

TEST_CASE("generator: output matches input shape with values in [-1, 1]") {
  Rng rng(2);
  Generator<float> g({.base_channels = 4, .n_res_blocks = 2}, rng);
  auto x = TensorF::randn({2, 3, 32, 32}, rng, 0.6f);
  auto y = g.forward(x);
  CHECK(y.shape() == x.shape());
  for (float v : y.values()) {
    CHECK(v <= 1.f);
    CHECK(v >= -1.f);
  }
}

TEST_CASE("generator: shape preserving across supported sides") {
  Rng rng(3);
  Generator<float> g({.base_channels = 2, .n_res_blocks = 1}, rng);
  for (int side : {16, 20, 32}) {
    auto x = TensorF::randn({1, 3, side, side}, rng, 0.5f);
    CHECK(g.forward(x).shape() == std::vector<int>{1, 3, side, side});
  }
}

TEST_CASE("generator: rejects non-square and indivisible sides before compute") {
  Rng rng(4);
  Generator<float> g({.base_channels = 2, .n_res_blocks = 0}, rng);
  CHECK_THROWS_AS(g.forward(TensorF::zeros({1, 3, 16, 20})), std::invalid_argument);
  CHECK_THROWS_AS(g.forward(TensorF::zeros({1, 3, 18, 18})), std::invalid_argument);
}

TEST_CASE("generator: zeroed residual bodies leave the block stack as identity") {
  Rng rng(5);
  Generator<float> with_blocks({.base_channels = 4, .n_res_blocks = 3}, rng);
  Rng rng2(6);
  Generator<float> without_blocks({.base_channels = 4, .n_res_blocks = 0}, rng2);
  // Zero the residual convs, then graft the remaining weights onto the
  // block-free net so only the residual stage differs.
  auto a = with_blocks.parameters();
  auto b = without_blocks.parameters();
  for (auto& [name, p] : a) {
    if (name.find(".res") != std::string::npos) {
      for (auto& v : p.values()) v = 0.f;
    }
  }
  for (auto& [name, pb] : b) {
    for (auto& [na, pa] : a) {
      if (na == name) pb.values() = pa.values();
    }
  }
  auto x = TensorF::randn({1, 3, 16, 16}, rng, 0.5f);
  auto ya = with_blocks.forward(x);
  auto yb = without_blocks.forward(x);
  for (size_t i = 0; i < ya.values().size(); ++i) {
    CHECK(ya.values()[i] == doctest::Approx(yb.values()[i]).epsilon(1e-5));
  }
}

TEST_CASE("parameter counts match the closed-form block tables") {
  Rng rng(7);
  Generator<float> g({.base_channels = 8, .n_res_blocks = 8}, rng);
  Discriminator<float> d({.base_channels = 8}, rng);
  CHECK(g.parameter_count() == generator_count(8, 8));
  CHECK(d.parameter_count() == discriminator_count(8));
  for (int c : {4, 16, 32}) {
    Generator<float> gc({.base_channels = c, .n_res_blocks = 6}, rng);
    Discriminator<float> dc({.base_channels = c}, rng);
    CHECK(gc.parameter_count() == generator_count(c, 6));
    CHECK(dc.parameter_count() == discriminator_count(c));
  }
}

TEST_CASE("discriminator: hand-traced spatial schedule") {
  // side -> conv(4, s2, p1) x3 -> conv(4, s1, p1) x2
  struct Row {
    int in, out;
  };
  const Row table[] = {{64, 6}, {32, 2}, {24, 1}, {128, 14}};
  for (const auto& row : table) CHECK(Discriminator<float>::output_side(row.in) == row.out);

  Rng rng(8);
  Discriminator<float> d({.base_channels = 4}, rng);
  auto x = TensorF::randn({2, 3, 64, 64}, rng, 0.5f);
  auto y = d.forward(x);
  CHECK(y.shape() == std::vector<int>{2, 1, 6, 6});
}

TEST_CASE("discriminator: zero weights give zero logits (sigmoid 0.5)") {
  Rng rng(9);
  Discriminator<float> d({.base_channels = 4}, rng);
  zero_params(d.parameters());
  auto x = TensorF::randn({1, 3, 32, 32}, rng, 0.5f);
  auto logits = d.forward(x);
  for (float v : logits.values()) CHECK(v == doctest::Approx(0.f));
}

TEST_CASE("discriminator: rejects inputs below the minimum side") {
  Rng rng(10);
  Discriminator<float> d({.base_channels = 4}, rng);
  CHECK_THROWS_AS(d.forward(TensorF::zeros({1, 3, 16, 16})), std::invalid_argument);
  CHECK_NOTHROW(d.forward(TensorF::zeros({1, 3, 24, 24})));
}

TEST_CASE("discriminator: patch response follows a texture shift") {
  Rng rng(11);
  Discriminator<float> d({.base_channels = 4}, rng);
  const int side = 64;
  std::vector<float> patch(3 * 16 * 16);
  Rng prng(12);
  for (auto& v : patch) v = static_cast<float>(prng.uniform(0.4, 1.0));
  auto place = [&](int top, int left) {
    auto img = TensorF::filled({1, 3, side, side}, -0.9f);
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j)
          img.values()[(c * side + top + i) * side + left + j] =
              patch[(c * 16 + i) * 16 + j];
    return img;
  };
  auto argmax2d = [](const TensorF& t) {
    int best = 0;
    for (size_t i = 1; i < t.values().size(); ++i) {
      if (std::abs(t.values()[i]) > std::abs(t.values()[best])) best = static_cast<int>(i);
    }
    const int w = t.dim(3);
    return std::pair<int, int>(best / w, best % w);
  };
  auto [r0, c0] = argmax2d(d.forward(place(16, 16)));
  auto [r1, c1] = argmax2d(d.forward(place(16, 24)));  // 8 px right = 1 patch cell
  CHECK(r1 == r0);
  CHECK(c1 == c0 + 1);
}

TEST_CASE("encoder: embeddings are unit-norm at the configured dimension") {
  Rng rng(13);
  Encoder<float> phi({.channels = {8, 16}, .embedding_dim = 24}, rng);
  auto x = TensorF::randn({3, 3, 32, 32}, rng, 0.5f);
  auto e = phi.forward(x);
  CHECK(e.shape() == std::vector<int>{3, 24});
  for (int r = 0; r < 3; ++r) {
    double sq = 0;
    for (int c = 0; c < 24; ++c) sq += e.values()[r * 24 + c] * e.values()[r * 24 + c];
    CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("encoder: deterministic on identical inputs") {
  Rng rng(14);
  Encoder<float> phi({.channels = {8, 16}, .embedding_dim = 16}, rng);
  auto x = TensorF::randn({1, 3, 32, 32}, rng, 0.5f);
  auto a = phi.forward(x);
  auto b = phi.forward(x.clone());
  CHECK(a.values() == b.values());
}

TEST_CASE("encoder: proxy-similarity gradient reaches the input image") {
  Rng rng(15);
  Encoder<double> phi({.channels = {4, 8}, .embedding_dim = 8}, rng);
  auto x = TensorD::randn({1, 3, 16, 16}, rng, 0.5, /*requires_grad=*/true);
  ProxyBank<double> bank({0, 1, 2}, 8, 0.05, rng);
  auto loss = normsoftmax_loss(phi.forward(x), {1}, bank);
  loss.backward();
  double norm = 0;
  for (double v : x.grad()) norm += v * v;
  CHECK(norm > 0.0);
}

TEST_CASE("generator end-to-end differentiability through the encoder") {
  Rng rng(16);
  Generator<double> g({.base_channels = 2, .n_res_blocks = 1}, rng);
  Encoder<double> phi({.channels = {4}, .embedding_dim = 4}, rng);
  ProxyBank<double> bank({0, 1}, 4, 0.05, rng);
  auto s = TensorD::randn({1, 3, 8, 8}, rng, 0.5);
  auto loss = normsoftmax_loss(phi.forward(g.forward(s)), {0}, bank);
  loss.backward();
  double total = 0;
  for (const auto& [name, p] : g.parameters()) {
    for (double v : p.grad()) total += std::abs(v);
  }
  CHECK(total > 0.0);
}
