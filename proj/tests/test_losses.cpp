#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "acnet/losses.hpp"
#include "acnet/ops.hpp"
#include "acnet/rng.hpp"
#include "test_util.hpp"

using namespace acnet;

namespace {

const double kLog2 = std::log(2.0);

// Independent scalar references, written as plain loops.
double bce_d_oracle(const std::vector<double>& real, const std::vector<double>& fake) {
  double acc_r = 0, acc_f = 0;
  for (double v : real) acc_r += -std::log(1.0 / (1.0 + std::exp(-v)));
  for (double v : fake) acc_f += -std::log(1.0 - 1.0 / (1.0 + std::exp(-v)));
  return acc_r / real.size() + acc_f / fake.size();
}

double normsoftmax_oracle(const std::vector<double>& emb, int dim,
                          const std::vector<int>& labels,
                          const std::vector<double>& proxies, int n_classes,
                          const std::vector<int>& label_rows, double t) {
  const int batch = static_cast<int>(labels.size());
  double total = 0;
  for (int i = 0; i < batch; ++i) {
    std::vector<double> sims(n_classes);
    for (int z = 0; z < n_classes; ++z) {
      double dot = 0;
      for (int c = 0; c < dim; ++c) dot += emb[i * dim + c] * proxies[z * dim + c];
      sims[z] = dot / t;
    }
    double m = sims[0];
    for (double s : sims) m = std::max(m, s);
    double lse = 0;
    for (double s : sims) lse += std::exp(s - m);
    lse = m + std::log(lse);
    total += lse - sims[label_rows[i]];
  }
  return total / batch;
}

ProxyBank<double> make_bank(const std::vector<int>& labels, int dim, double t,
                            uint64_t seed) {
  Rng rng(seed);
  return ProxyBank<double>(labels, dim, t, rng);
}

TensorD unit_rows(std::vector<int> shape, Rng& rng) {
  auto raw = TensorD::randn(shape, rng);
  auto normed = l2_normalize(raw);
  return TensorD::from_data(shape, normed.values());
}

}  // namespace

// ---------------------------------------------------------------------------
// adversarial losses
// ---------------------------------------------------------------------------

TEST_CASE("adversarial_loss_d: zero logits give 2 log 2") {
  auto real = TensorD::zeros({1, 1, 2, 2});
  auto fake = TensorD::zeros({1, 1, 2, 2});
  CHECK(adversarial_loss_d(real, fake).item() == doctest::Approx(2 * kLog2));
}

TEST_CASE("adversarial_loss_d: perfect discriminator limit goes to 0") {
  auto real = TensorD::filled({1, 1, 2, 2}, 30.0);
  auto fake = TensorD::filled({1, 1, 2, 2}, -30.0);
  CHECK(adversarial_loss_d(real, fake).item() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("adversarial_loss_d matches the per-patch oracle on random maps") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto real = TensorD::randn({2, 1, 3, 3}, rng, 2.0);
    auto fake = TensorD::randn({2, 1, 3, 3}, rng, 2.0);
    const double got = adversarial_loss_d(real, fake).item();
    const double want = bce_d_oracle(real.values(), fake.values());
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("adversarial_loss_d rejects shape mismatches") {
  CHECK_THROWS_AS(
      adversarial_loss_d(TensorD::zeros({1, 1, 2, 2}), TensorD::zeros({1, 1, 3, 3})),
      std::invalid_argument);
}

TEST_CASE("adversarial_loss_g: zero logits give log 2, fooled limit gives 0") {
  auto zero = TensorD::zeros({1, 1, 2, 2});
  CHECK(adversarial_loss_g(zero).item() == doctest::Approx(kLog2));
  auto fooled = TensorD::filled({1, 1, 2, 2}, 30.0);
  CHECK(adversarial_loss_g(fooled).item() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("adversarial_loss_g gradient is -sigmoid(-logit)/N per patch") {
  Rng rng(2);
  auto fake = TensorD::randn({1, 1, 2, 2}, rng, 1.5, true);
  auto make_loss = [&]() { return adversarial_loss_g(fake); };
  CHECK(testutil::grad_check(fake, make_loss) < 1e-3);
  fake.zero_grad();
  make_loss().backward();
  for (size_t i = 0; i < fake.values().size(); ++i) {
    const double expected = -sigmoid_scalar(-fake.values()[i]) / 4.0;
    CHECK(fake.grad()[i] == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("adversarial losses sit at 3 log 2 at the sigma = 0.5 fixed point") {
  auto zero = TensorD::zeros({1, 1, 4, 4});
  const double combined =
      adversarial_loss_d(zero, zero).item() + adversarial_loss_g(zero).item();
  CHECK(combined == doctest::Approx(3 * kLog2));
}

TEST_CASE("minimax generator variant decreases as fakes fool the discriminator") {
  auto low = TensorD::filled({1, 1, 2, 2}, -3.0);
  auto high = TensorD::filled({1, 1, 2, 2}, 3.0);
  const double lv = adversarial_loss_g(low, GanLossVariant::kMinimax).item();
  const double hv = adversarial_loss_g(high, GanLossVariant::kMinimax).item();
  CHECK(lv == doctest::Approx(std::log(1.0 - sigmoid_scalar(-3.0))));
  CHECK(hv < lv);
}

// ---------------------------------------------------------------------------
// identity loss
// ---------------------------------------------------------------------------

TEST_CASE("identity_loss: identical inputs give 0, constant offset gives it back") {
  Rng rng(3);
  auto a = TensorD::randn({1, 3, 4, 4}, rng);
  CHECK(identity_loss(a, a).item() == doctest::Approx(0.0));
  auto b = add_scalar(a, 0.5);
  CHECK(identity_loss(b, a).item() == doctest::Approx(0.5));
}

TEST_CASE("identity_loss matches an elementwise oracle and checks shapes") {
  Rng rng(4);
  auto a = TensorD::randn({2, 3, 3, 3}, rng);
  auto b = TensorD::randn({2, 3, 3, 3}, rng);
  double want = 0;
  for (size_t i = 0; i < a.values().size(); ++i)
    want += std::abs(a.values()[i] - b.values()[i]);
  want /= a.numel();
  CHECK(identity_loss(a, b).item() == doctest::Approx(want).epsilon(1e-9));
  CHECK_THROWS_AS(identity_loss(a, TensorD::zeros({1, 3, 3, 3})), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// normsoftmax
// ---------------------------------------------------------------------------

TEST_CASE("normsoftmax: aligned embedding among 2 orthogonal proxies at t=0.05") {
  auto bank = make_bank({0, 1}, 2, 0.05, 5);
  bank.proxies().values() = {1.0, 0.0, 0.0, 1.0};
  auto x = TensorD::from_data({1, 2}, {1.0, 0.0});
  const double loss = normsoftmax_loss(x, {0}, bank).item();
  CHECK(loss == doctest::Approx(std::log(1.0 + std::exp(-20.0))).epsilon(1e-6));
  CHECK(loss > 0.0);
}

TEST_CASE("normsoftmax: equidistant embedding gives log K") {
  auto bank = make_bank({0, 1, 2, 3}, 4, 0.05, 6);
  bank.proxies().values() = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  auto x = TensorD::from_data({1, 4}, {0.5, 0.5, 0.5, 0.5});
  CHECK(normsoftmax_loss(x, {2}, bank).item() == doctest::Approx(std::log(4.0)));
}

TEST_CASE("normsoftmax: unknown label is a lookup error") {
  auto bank = make_bank({0, 1}, 4, 0.05, 7);
  auto x = TensorD::from_data({1, 4}, {1, 0, 0, 0});
  CHECK_THROWS_AS(normsoftmax_loss(x, {5}, bank), std::out_of_range);
}

TEST_CASE("normsoftmax matches the scalar oracle on random batches") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto bank = make_bank({0, 1, 2, 3}, 8, 0.05, 100 + trial);
    auto emb = unit_rows({5, 8}, rng);
    std::vector<int> labels = {0, 2, 1, 3, 2};
    std::vector<int> rows;
    for (int l : labels) rows.push_back(bank.row(l));
    const double got = normsoftmax_loss(emb, labels, bank).item();
    const double want = normsoftmax_oracle(emb.values(), 8, labels,
                                           bank.proxies().values(), 4, rows, 0.05);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
    CHECK(got >= 0.0);
  }
}

TEST_CASE("normsoftmax gradients w.r.t. embedding and proxies pass FD") {
  Rng rng(9);
  auto bank = make_bank({0, 1, 2}, 6, 0.05, 10);
  auto emb = TensorD::randn({4, 6}, rng, 1.0, true);
  std::vector<int> labels = {0, 1, 2, 1};
  auto make_loss = [&]() { return normsoftmax_loss(l2_normalize(emb), labels, bank); };
  CHECK(testutil::grad_check(emb, make_loss) < 1e-3);
  CHECK(testutil::grad_check(bank.proxies(), make_loss) < 1e-3);
}

TEST_CASE("normsoftmax is invariant under a common rotation") {
  Rng rng(11);
  const int dim = 5;
  // Random orthogonal matrix via Gram-Schmidt on a random square matrix.
  std::vector<std::vector<double>> q(dim, std::vector<double>(dim));
  for (auto& row : q)
    for (auto& v : row) v = rng.normal();
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < i; ++j) {
      double dot = 0;
      for (int c = 0; c < dim; ++c) dot += q[i][c] * q[j][c];
      for (int c = 0; c < dim; ++c) q[i][c] -= dot * q[j][c];
    }
    double norm = 0;
    for (int c = 0; c < dim; ++c) norm += q[i][c] * q[i][c];
    norm = std::sqrt(norm);
    for (int c = 0; c < dim; ++c) q[i][c] /= norm;
  }
  auto rotate = [&](const std::vector<double>& v, int rows) {
    std::vector<double> out(v.size());
    for (int r = 0; r < rows; ++r)
      for (int i = 0; i < dim; ++i) {
        double acc = 0;
        for (int c = 0; c < dim; ++c) acc += q[i][c] * v[r * dim + c];
        out[r * dim + i] = acc;
      }
    return out;
  };
  auto bank = make_bank({0, 1, 2}, dim, 0.05, 12);
  Rng erng(13);
  auto emb = unit_rows({3, dim}, erng);
  std::vector<int> labels = {2, 0, 1};
  const double before = normsoftmax_loss(emb, labels, bank).item();
  auto bank_rot = make_bank({0, 1, 2}, dim, 0.05, 12);
  bank_rot.proxies().values() = rotate(bank.proxies().values(), 3);
  auto emb_rot = TensorD::from_data({3, dim}, rotate(emb.values(), 3));
  const double after = normsoftmax_loss(emb_rot, labels, bank_rot).item();
  CHECK(after == doctest::Approx(before).epsilon(1e-9));
}

TEST_CASE("chainer loss equals normsoftmax on the same embeddings") {
  Rng rng(14);
  auto bank = make_bank({0, 1}, 4, 0.05, 15);
  auto emb = unit_rows({2, 4}, rng);
  std::vector<int> labels = {1, 0};
  CHECK(chainer_loss(emb, labels, bank).item() ==
        doctest::Approx(normsoftmax_loss(emb, labels, bank).item()));
}

TEST_CASE("combined_normsoftmax: equal embeddings triple the single term") {
  Rng rng(16);
  auto bank = make_bank({0, 1, 2}, 6, 0.05, 17);
  auto emb = unit_rows({3, 6}, rng);
  std::vector<int> labels = {0, 1, 2};
  const double single = normsoftmax_loss(emb, labels, bank).item();
  const double combined = combined_normsoftmax(emb, emb, emb, labels, bank).item();
  CHECK(combined == doctest::Approx(3 * single).epsilon(1e-9));
}

TEST_CASE("combined_normsoftmax: dropping the sketch term") {
  Rng rng(18);
  auto bank = make_bank({0, 1}, 4, 0.05, 19);
  auto sk = unit_rows({2, 4}, rng);
  auto sy = unit_rows({2, 4}, rng);
  auto ph = unit_rows({2, 4}, rng);
  std::vector<int> labels = {0, 1};
  CombinedNormTerms no_sketch{.chainer = true, .sketch = false, .photo = true};
  const double got = combined_normsoftmax(sk, sy, ph, labels, bank, no_sketch).item();
  const double want = normsoftmax_loss(sy, labels, bank).item() +
                      normsoftmax_loss(ph, labels, bank).item();
  CHECK(got == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("combined_normsoftmax matches term-wise oracles on a random batch") {
  Rng rng(20);
  auto bank = make_bank({0, 1, 2, 3}, 8, 0.05, 21);
  auto sk = unit_rows({4, 8}, rng);
  auto sy = unit_rows({4, 8}, rng);
  auto ph = unit_rows({4, 8}, rng);
  std::vector<int> labels = {3, 1, 0, 2};
  std::vector<int> rows;
  for (int l : labels) rows.push_back(bank.row(l));
  double want = 0;
  for (const auto* e : {&sy, &sk, &ph}) {
    want += normsoftmax_oracle(e->values(), 8, labels, bank.proxies().values(), 4, rows,
                               0.05);
  }
  CHECK(combined_normsoftmax(sk, sy, ph, labels, bank).item() ==
        doctest::Approx(want).epsilon(1e-9));
}

// ---------------------------------------------------------------------------
// total objective
// ---------------------------------------------------------------------------

TEST_CASE("total_objective: weights zero reduces to the adversarial value") {
  auto adv = TensorD::from_data({1}, {0.37});
  auto norm = TensorD::from_data({1}, {5.0});
  auto ide = TensorD::from_data({1}, {2.0});
  CHECK(total_objective(adv, norm, ide, LossWeights<double>{0, 0, 0.2}).item() ==
        doctest::Approx(0.37));
}

TEST_CASE("total_objective: unit components at defaults give 11.1") {
  auto one = TensorD::from_data({1}, {1.0});
  CHECK(total_objective(one, one, one, LossWeights<double>{}).item() ==
        doctest::Approx(11.1));
}

TEST_CASE("total_objective is linear with coefficients (1, lambda, gamma)") {
  Rng rng(22);
  for (auto [lambda, gamma] : std::vector<std::pair<double, double>>{
           {0.1, 10.0}, {1.0, 1.0}, {10.0, 0.1}}) {
    const double a = rng.uniform(), n = rng.uniform(), i = rng.uniform();
    auto at = TensorD::from_data({1}, {a});
    auto nt = TensorD::from_data({1}, {n});
    auto it = TensorD::from_data({1}, {i});
    const double got =
        total_objective(at, nt, it, LossWeights<double>{lambda, gamma, 0.2}).item();
    CHECK(got == doctest::Approx(a + lambda * n + gamma * i).epsilon(1e-12));
  }
  CHECK_THROWS_AS(total_objective(TensorD::zeros({1}), TensorD::zeros({1}),
                                  TensorD::zeros({1}), LossWeights<double>{-1, 0.1, 0.2}),
                  std::invalid_argument);
}

// ---------------------------------------------------------------------------
// triplet loss
// ---------------------------------------------------------------------------

TEST_CASE("triplet_hinge: satisfied triplet gives 0, collapsed gives margin") {
  auto a = TensorD::from_data({1, 2}, {1.0, 0.0});
  auto n = TensorD::from_data({1, 2}, {0.0, 1.0});  // d(a,n) = 2 >= margin
  CHECK(triplet_hinge(a, a, n, 0.2).item() == doctest::Approx(0.0));
  CHECK(triplet_hinge(a, a, a, 0.2).item() == doctest::Approx(0.2));
}

TEST_CASE("triplet_loss matches an exhaustive mining oracle") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const int batch = 8, dim = 4;
    auto emb = unit_rows({batch, dim}, rng);
    std::vector<int> labels(batch);
    for (auto& l : labels) l = rng.uniform_int(3);
    const double margin = 0.2;

    // Oracle: full pairwise distances, batch-hard mining, hinge mean.
    const auto& e = emb.values();
    auto dist2 = [&](int i, int j) {
      double acc = 0;
      for (int c = 0; c < dim; ++c) {
        const double d = e[i * dim + c] - e[j * dim + c];
        acc += d * d;
      }
      return acc;
    };
    double total = 0;
    int active = 0;
    for (int a = 0; a < batch; ++a) {
      double worst_pos = -1, best_neg = 1e300;
      for (int j = 0; j < batch; ++j) {
        if (j == a) continue;
        if (labels[j] == labels[a]) {
          worst_pos = std::max(worst_pos, dist2(a, j));
        } else {
          best_neg = std::min(best_neg, dist2(a, j));
        }
      }
      if (worst_pos < 0 || best_neg > 1e299) continue;
      total += std::max(0.0, worst_pos - best_neg + margin);
      ++active;
    }
    const double want = active > 0 ? total / active : 0.0;
    // The library computes squared distances as 2 - 2 cos on unit rows; the
    // oracle uses literal differences, so allow float-level slack.
    CHECK(triplet_loss(emb, labels, margin).item() ==
          doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("triplet_loss: no valid anchors yields zero") {
  auto emb = TensorD::from_data({2, 2}, {1.0, 0.0, 0.0, 1.0});
  CHECK(triplet_loss(emb, {0, 0}, 0.2).item() == doctest::Approx(0.0));  // no negatives
}

TEST_CASE("triplet_loss gradient passes FD away from mining ties") {
  Rng rng(24);
  auto emb = TensorD::randn({6, 4}, rng, 1.0, true);
  std::vector<int> labels = {0, 0, 1, 1, 2, 2};
  auto make_loss = [&]() { return triplet_loss(l2_normalize(emb), labels, 0.2); };
  CHECK(testutil::grad_check(emb, make_loss) < 1e-3);
}

TEST_CASE("proxy bank: rows stay unit-norm after renormalize") {
  Rng rng(25);
  ProxyBank<float> bank({0, 1, 2, 3, 4}, 16, 0.05f, rng);
  auto& v = bank.proxies().values();
  for (auto& x : v) x *= 3.7f;
  bank.renormalize();
  for (int r = 0; r < 5; ++r) {
    double sq = 0;
    for (int c = 0; c < 16; ++c) sq += v[r * 16 + c] * v[r * 16 + c];
    CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(bank.row(3) == 3);
  CHECK_THROWS_AS(bank.row(9), std::out_of_range);
}
