// Copyright 2026 The amp-motion Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "amp/errors.hpp"
#include "amp/random.hpp"
#include "amp/tensor.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace amp
{
namespace
{

using test::grad_check;
using test::random_tensor;

constexpr double kTol = 1e-4;
constexpr std::size_t kProbes = 24;

// A fixed random projection turns any tensor into a scalar with non-trivial upstream grads.
Tensor project(const Tensor & x, const Tensor & w)
{
  return sum(mul(x, w));
}

void expect_grad_ok(const test::GradCheckResult & r)
{
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(TensorGrad, Elementwise)
{
  Rng rng(1);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({3, 4}, rng);
  auto w = random_tensor({3, 4}, rng, 1.0, false);
  expect_grad_ok(grad_check([&] { return project(add(a, b), w); }, {a, b}, kProbes, rng));
  expect_grad_ok(grad_check([&] { return project(sub(a, b), w); }, {a, b}, kProbes, rng));
  expect_grad_ok(grad_check([&] { return project(mul(a, b), w); }, {a, b}, kProbes, rng));
  expect_grad_ok(grad_check([&] { return project(scale(a, -1.7), w); }, {a}, kProbes, rng));
  expect_grad_ok(grad_check([&] { return project(relu(a), w); }, {a}, kProbes, rng));
  expect_grad_ok(grad_check([&] { return mean(mul(a, a)); }, {a}, kProbes, rng));
}

TEST(TensorGrad, ShapeOps)
{
  Rng rng(2);
  auto a = random_tensor({4, 3}, rng);
  auto b = random_tensor({4, 2}, rng);
  auto c = random_tensor({2, 3}, rng);
  auto bias = random_tensor({3}, rng);
  auto w43 = random_tensor({4, 3}, rng, 1.0, false);
  auto w45 = random_tensor({4, 5}, rng, 1.0, false);
  auto w63 = random_tensor({6, 3}, rng, 1.0, false);
  auto w53 = random_tensor({5, 3}, rng, 1.0, false);
  auto w42 = random_tensor({4, 2}, rng, 1.0, false);
  auto w26 = random_tensor({2, 6}, rng, 1.0, false);
  const std::vector<double> factors{0.5, -2.0, 1.5, 3.0};
  const std::vector<std::size_t> idx{3, 0, 3, 1, 2};

  expect_grad_ok(grad_check([&] { return project(add_bias(a, bias), w43); }, {a, bias}, kProbes, rng));
  expect_grad_ok(grad_check([&] { return project(scale_rows(a, factors), w43); }, {a}, kProbes, rng));
  expect_grad_ok(grad_check(
    [&] {
      const std::vector<Tensor> parts{a, b};
      return project(concat_cols(parts), w45);
    },
    {a, b}, kProbes, rng));
  expect_grad_ok(grad_check(
    [&] {
      const std::vector<Tensor> parts{a, c};
      return project(concat_rows(parts), w63);
    },
    {a, c}, kProbes, rng));
  expect_grad_ok(grad_check([&] { return project(gather_rows(a, idx), w53); }, {a}, kProbes, rng));
  expect_grad_ok(grad_check([&] { return project(slice_cols(a, 1, 3), w42); }, {a}, kProbes, rng));
  expect_grad_ok(grad_check([&] { return project(reshape(a, {2, 6}), w26); }, {a}, kProbes, rng));
}

TEST(TensorGrad, MatmulSoftmaxLayerNorm)
{
  Rng rng(3);
  auto a = random_tensor({3, 5}, rng);
  auto b = random_tensor({5, 4}, rng);
  auto w34 = random_tensor({3, 4}, rng, 1.0, false);
  expect_grad_ok(grad_check([&] { return project(matmul(a, b), w34); }, {a, b}, kProbes, rng));

  auto x = random_tensor({3, 4}, rng);
  expect_grad_ok(grad_check([&] { return project(softmax(x, 1), w34); }, {x}, kProbes, rng));
  expect_grad_ok(grad_check([&] { return project(softmax(x, 0), w34); }, {x}, kProbes, rng));

  auto gamma = random_tensor({4}, rng);
  auto beta = random_tensor({4}, rng);
  expect_grad_ok(grad_check([&] { return project(layer_norm(x, gamma, beta), w34); }, {x, gamma, beta}, kProbes, rng));
}

TEST(TensorGrad, Losses)
{
  Rng rng(4);
  auto logits = random_tensor({5, 3}, rng);
  const std::vector<int> labels{0, 2, -1, 1, 2};
  expect_grad_ok(grad_check([&] { return cross_entropy(logits, labels); }, {logits}, kProbes, rng));

  auto pred = random_tensor({2, 6}, rng);
  std::vector<double> target(12);
  std::vector<double> weights(12);
  for (std::size_t i = 0; i < 12; ++i) {
    // Offsets keep every residual away from the Huber transition at |r| = 1.
    target[i] = pred.at(i) + (i % 2 ? 0.4 : -2.5);
    weights[i] = (i % 5 == 0) ? 0.0 : 0.3 + 0.1 * static_cast<double>(i);
  }
  expect_grad_ok(grad_check([&] { return smooth_l1(pred, target, weights); }, {pred}, kProbes, rng));
}

TEST(TensorGrad, AttentionRopeSegmentMax)
{
  Rng rng(5);
  const std::vector<std::size_t> offsets{0, 3, 3, 7};
  auto q = random_tensor({7, 4}, rng);
  auto k = random_tensor({7, 4}, rng);
  auto v = random_tensor({7, 4}, rng);
  auto w34 = random_tensor({3, 4}, rng, 1.0, false);
  expect_grad_ok(grad_check([&] { return project(pair_attention(q, k, v, offsets, 2), w34); }, {q, k, v}, kProbes, rng));

  const std::vector<double> pos{0.0, 1.0, 3.0, 7.5, 2.0, 4.0, 9.0};
  auto w74 = random_tensor({7, 4}, rng, 1.0, false);
  expect_grad_ok(grad_check([&] { return project(rope(q, pos, 2, 100.0), w74); }, {q}, kProbes, rng));

  // Distinct values per column make the max unique, so the numerical derivative exists.
  std::vector<double> vals(7 * 3);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    vals[i] = std::sin(1.3 * static_cast<double>(i)) * 3.0;
  }
  auto x = Tensor::from({7, 3}, vals, true);
  auto w33 = random_tensor({3, 3}, rng, 1.0, false);
  expect_grad_ok(grad_check([&] { return project(segment_max(x, offsets), w33); }, {x}, kProbes, rng));
}

TEST(Tensor, MatmulAgainstNaiveSum)
{
  Rng rng(6);
  auto a = random_tensor({4, 7}, rng, 1.0, false);
  auto b = random_tensor({7, 3}, rng, 1.0, false);
  auto c = matmul(a, b);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < 7; ++p) {
        s += a.at(i, p) * b.at(p, j);
      }
      EXPECT_NEAR(c.at(i, j), s, 1e-12);
    }
  }
}

TEST(Tensor, MatmulRowIndependentOfBatch)
{
  Rng rng(7);
  auto a = random_tensor({6, 9}, rng, 1.0, false);
  auto b = random_tensor({9, 5}, rng, 1.0, false);
  auto full = matmul(a, b);
  const std::vector<std::size_t> one{4};
  auto single = matmul(gather_rows(a, one), b);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_EQ(full.at(4, j), single.at(0, j));
  }
}

TEST(Tensor, ShapeErrors)
{
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({2, 3});
  EXPECT_THROW(matmul(a, b), ShapeError);
  EXPECT_THROW(add(a, Tensor::zeros({3, 2})), ShapeError);
  EXPECT_THROW(backward(a), UsageError);
  EXPECT_THROW(rope(Tensor::zeros({1, 3}), std::vector<double>{0.0}, 3), ConfigError);
}

TEST(Tensor, SoftmaxRowsSumToOneAndStable)
{
  auto x = Tensor::from({2, 3}, {1000.0, 1001.0, 1002.0, -5.0, 0.0, 5.0});
  auto s = softmax(x, 1);
  for (std::size_t r = 0; r < 2; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_TRUE(std::isfinite(s.at(r, c)));
      total += s.at(r, c);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Tensor, EmptyAttentionGroupGivesZeros)
{
  Rng rng(8);
  auto q = random_tensor({2, 4}, rng);
  const std::vector<std::size_t> offsets{0, 0, 2};
  auto out = pair_attention(q, q, q, offsets, 2);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(out.at(0, c), 0.0);
  }
}

TEST(Tensor, LeafGradsAccumulateAndTapeVisitsOnce)
{
  auto x = Tensor::from({1}, {3.0}, true);
  auto y = add(mul(x, x), x);  // x reused: dy/dx = 2x + 1
  backward(sum(y));
  EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
  backward(sum(y));
  EXPECT_DOUBLE_EQ(x.grad()[0], 14.0);
  x.zero_grad();
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Tensor, NoGradGuardRecordsNothing)
{
  auto x = Tensor::from({2}, {1.0, 2.0}, true);
  NoGradGuard guard;
  auto y = mul(x, x);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, DropoutZeroRateIsIdentityAndKeepsExpectation)
{
  Rng rng(9);
  auto x = Tensor::full({1, 20000}, 1.0);
  auto same = dropout(x, 0.0, rng);
  EXPECT_EQ(same.at(0), 1.0);
  auto d = dropout(x, 0.25, rng);
  double total = 0.0;
  for (double v : d.data()) {
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-12);
    total += v;
  }
  EXPECT_NEAR(total / 20000.0, 1.0, 0.03);
}

}  // namespace
}  // namespace amp
