#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"
#include "nsx/tensor/adam.hpp"
#include "nsx/tensor/ops.hpp"
#include "nsx/tensor/parameters.hpp"
#include "nsx/tensor/random.hpp"

namespace nsx {
namespace {

using testing::expect_gradcheck;
using testing::random64;
using V = std::vector<Tensor64>;

// Direct-loop oracles, written independently of the im2col/GEMM paths.
std::vector<double> conv2d_oracle(const Tensor64& x, const Tensor64& w, const Tensor64& b, int s, int p) {
  const Index n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const Index cout = w.dim(0), k = w.dim(2);
  const Index oh = (h + 2 * p - k) / s + 1, ow = (wd + 2 * p - k) / s + 1;
  std::vector<double> out(static_cast<std::size_t>(n * cout * oh * ow), 0.0);
  for (Index in = 0; in < n; ++in)
    for (Index co = 0; co < cout; ++co)
      for (Index oy = 0; oy < oh; ++oy)
        for (Index ox = 0; ox < ow; ++ox) {
          double acc = b.defined() ? b.at(co) : 0.0;
          for (Index ci = 0; ci < cin; ++ci)
            for (Index ky = 0; ky < k; ++ky)
              for (Index kx = 0; kx < k; ++kx) {
                const Index iy = oy * s - p + ky, ix = ox * s - p + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += x.at(((in * cin + ci) * h + iy) * wd + ix) * w.at(((co * cin + ci) * k + ky) * k + kx);
              }
          out[static_cast<std::size_t>(((in * cout + co) * oh + oy) * ow + ox)] = acc;
        }
  return out;
}

// Scatter-add: every input pixel stamps its kernel into the output.
std::vector<double> deconv_oracle(const Tensor64& x, const Tensor64& w, int s, int p, int op) {
  const bool per_sample = w.rank() == 5;
  const Index n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const Index cout = w.dim(per_sample ? 2 : 1), k = w.dim(per_sample ? 3 : 2);
  const Index oh = (h - 1) * s - 2 * p + k + op, ow = (wd - 1) * s - 2 * p + k + op;
  std::vector<double> out(static_cast<std::size_t>(n * cout * oh * ow), 0.0);
  for (Index in = 0; in < n; ++in)
    for (Index ci = 0; ci < cin; ++ci)
      for (Index iy = 0; iy < h; ++iy)
        for (Index ix = 0; ix < wd; ++ix)
          for (Index co = 0; co < cout; ++co)
            for (Index ky = 0; ky < k; ++ky)
              for (Index kx = 0; kx < k; ++kx) {
                const Index oy = iy * s - p + ky, ox = ix * s - p + kx;
                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                const Index widx = per_sample ? (((in * cin + ci) * cout + co) * k + ky) * k + kx
                                              : ((ci * cout + co) * k + ky) * k + kx;
                out[static_cast<std::size_t>(((in * cout + co) * oh + oy) * ow + ox)] +=
                    x.at(((in * cin + ci) * h + iy) * wd + ix) * w.at(widx);
              }
  return out;
}

void expect_near_all(std::span<const double> got, const std::vector<double>& want, double tol = 1e-12) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "index " << i;
}

// Values bounded away from zero so kinks stay outside the FD stencil.
Tensor64 away_from_zero(Shape shape, Rng& rng) {
  auto t = random64(std::move(shape), rng, 0.1, 1.0);
  for (auto& v : t.mutable_data()) {
    if (rng.uniform() < 0.5) v = -v;
  }
  return t;
}

TEST(TensorBasics, AddElementwise) {
  const auto r = add(Tensor::from({1, 2}), Tensor::from({3, 4}));
  EXPECT_EQ(r.shape(), Shape{2});
  EXPECT_FLOAT_EQ(r.at(0), 4);
  EXPECT_FLOAT_EQ(r.at(1), 6);
}

TEST(TensorBasics, ConstructionChecksSizes) {
  EXPECT_THROW(Tensor(Shape{2, 3}, std::vector<float>(5)), ShapeError);
  EXPECT_THROW(Tensor(Shape{0, 3}), ShapeError);
  EXPECT_EQ(Tensor(Shape{2, 3}).numel(), 6);
}

TEST(TensorBasics, MismatchedShapesNameTheOp) {
  try {
    add(Tensor(Shape{2}), Tensor(Shape{3}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("add"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[2]"), std::string::npos);
  }
  EXPECT_THROW(matmul(Tensor(Shape{2, 3}), Tensor(Shape{2, 3})), ShapeError);
  EXPECT_THROW(conv2d(Tensor(Shape{1, 2, 4, 4}), Tensor(Shape{1, 3, 3, 3}), Tensor(), {}), ShapeError);
  EXPECT_THROW(concat_channels<float>({Tensor(Shape{1, 2, 4, 4}), Tensor(Shape{1, 2, 3, 4})}), ShapeError);
}

TEST(TensorBasics, ScalarRightOperandBroadcasts) {
  const auto r = mul(Tensor::from({1, 2, 3}), Tensor::scalar(2));
  EXPECT_FLOAT_EQ(r.at(2), 6);
}

TEST(Conv, AllOnesCountsTaps) {
  const auto r = conv2d(Tensor(Shape{1, 1, 4, 4}, 1.0f), Tensor(Shape{1, 1, 3, 3}, 1.0f), Tensor(), {1, 0});
  ASSERT_EQ(r.shape(), (Shape{1, 1, 2, 2}));
  for (float v : r.data()) EXPECT_FLOAT_EQ(v, 9.0f);
}

TEST(Conv, MatchesDirectOracle) {
  Rng rng(1);
  for (auto [s, p, k] : {std::tuple{1, 0, 3}, {2, 1, 3}, {2, 2, 5}, {1, 2, 5}, {3, 1, 3}}) {
    const auto x = random64({2, 3, 9, 7}, rng);
    const auto w = random64({5, 3, k, k}, rng);
    const auto b = random64({5}, rng);
    const auto r = conv2d(x, w, b, {s, p});
    EXPECT_EQ(r.dim(2), (9 + 2 * p - k) / s + 1);
    EXPECT_EQ(r.dim(3), (7 + 2 * p - k) / s + 1);
    expect_near_all(r.data(), conv2d_oracle(x, w, b, s, p));
  }
}

TEST(ConvTranspose, TwoByTwoToThreeByThreeMatchesScatterAdd) {
  const Tensor64 x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  const Tensor64 w(Shape{1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto r = conv2d_transpose(x, w, Tensor64(), {2, 1, 0});
  ASSERT_EQ(r.shape(), (Shape{1, 1, 3, 3}));
  expect_near_all(r.data(), deconv_oracle(x, w, 2, 1, 0));
}

TEST(ConvTranspose, RandomConfigurationsMatchScatterAdd) {
  Rng rng(2);
  for (auto [s, p, k, op] : {std::tuple{2, 2, 5, 1}, {1, 2, 5, 0}, {2, 1, 3, 1}, {2, 0, 2, 0}, {3, 1, 3, 2}}) {
    const auto x = random64({2, 3, 5, 4}, rng);
    const auto w = random64({3, 4, k, k}, rng);
    const auto r = conv2d_transpose(x, w, Tensor64(), {s, p, op});
    EXPECT_EQ(r.dim(2), (5 - 1) * s - 2 * p + k + op);
    expect_near_all(r.data(), deconv_oracle(x, w, s, p, op));

    const auto ws = random64({2, 3, 4, k, k}, rng);
    expect_near_all(conv2d_transpose(x, ws, Tensor64(), {s, p, op}).data(), deconv_oracle(x, ws, s, p, op));
  }
}

TEST(ConvTranspose, OutputPaddingMustBeBelowStride) {
  EXPECT_THROW(conv2d_transpose(Tensor(Shape{1, 1, 2, 2}), Tensor(Shape{1, 1, 3, 3}), Tensor(), {1, 1, 1}),
               ShapeError);
}

TEST(ConvTranspose, ShapeRoundTripProperty) {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const int s = 1 + static_cast<int>(rng.below(3));
    const int p = static_cast<int>(rng.below(3));
    const Index k = 2 * p + s;  // the extent identity needs k = 2p + s
    const Index h = 2 * s * (1 + static_cast<Index>(rng.below(4)));
    const Index w = 2 * s * (1 + static_cast<Index>(rng.below(4)));
    const Tensor x(Shape{1, 2, h, w}, 0.5f);
    const auto down = conv2d(x, Tensor(Shape{3, 2, k, k}, 0.1f), Tensor(), {s, p});
    const auto up = conv2d_transpose(down, Tensor(Shape{3, 2, k, k}, 0.1f), Tensor(), {s, p, 0});
    EXPECT_EQ(up.dim(2), h) << "s=" << s << " p=" << p << " k=" << k;
    EXPECT_EQ(up.dim(3), w);
  }
  // The codec's 5x5/stride-2/pad-2 layers need output_padding 1 to restore even extents.
  for (Index h : {8, 16, 32}) {
    const auto down = conv2d(Tensor(Shape{1, 1, h, h}), Tensor(Shape{1, 1, 5, 5}), Tensor(), {2, 2});
    const auto up = conv2d_transpose(down, Tensor(Shape{1, 1, 5, 5}), Tensor(), {2, 2, 1});
    EXPECT_EQ(up.dim(2), h);
  }
}

TEST(MaskedConv, OutputIgnoresCurrentAndFuturePixels) {
  Rng rng(4);
  const auto w = random64({3, 2, 5, 5}, rng);
  const auto b = random64({3}, rng);
  const auto x = random64({1, 2, 6, 7}, rng);
  const auto base = masked_conv2d(x, w, b);
  for (Index y = 0; y < 6; ++y) {
    for (Index xx = 0; xx < 7; ++xx) {
      // Perturb everything at or after (y, xx) in raster order.
      auto x2 = x.detach();
      auto d = x2.mutable_data();
      for (Index c = 0; c < 2; ++c)
        for (Index yy = 0; yy < 6; ++yy)
          for (Index xq = 0; xq < 7; ++xq)
            if (yy > y || (yy == y && xq >= xx)) d[(c * 6 + yy) * 7 + xq] += rng.uniform(-5, 5);
      const auto r = masked_conv2d(x2, w, b);
      for (Index c = 0; c < 3; ++c) EXPECT_EQ(r.at((c * 6 + y) * 7 + xx), base.at((c * 6 + y) * 7 + xx));
    }
  }
}

TEST(MaskedConv, PointEvaluationIsBitExact) {
  Rng rng(5);
  const auto w = uniform_tensor<float>({4, 3, 5, 5}, -1, 1, rng);
  const auto b = uniform_tensor<float>({4}, -1, 1, rng);
  const auto x = uniform_tensor<float>({2, 3, 5, 6}, -3, 3, rng);
  const auto full = masked_conv2d(x, w, b);
  std::vector<float> out(4);
  for (Index n = 0; n < 2; ++n)
    for (Index y = 0; y < 5; ++y)
      for (Index xx = 0; xx < 6; ++xx) {
        masked_conv2d_at(x, w, b, n, y, xx, std::span<float>(out));
        for (Index c = 0; c < 4; ++c) EXPECT_EQ(out[c], full.at(((n * 4 + c) * 5 + y) * 6 + xx));
      }
}

TEST(Backward, SumOfSquares) {
  auto w = Tensor::from({1, 2, 3});
  w.set_requires_grad(true);
  sum(mul(w, w)).backward();
  ASSERT_TRUE(w.has_grad());
  EXPECT_FLOAT_EQ(w.grad()[0], 2);
  EXPECT_FLOAT_EQ(w.grad()[1], 4);
  EXPECT_FLOAT_EQ(w.grad()[2], 6);
}

TEST(Backward, NonScalarLossRejected) {
  auto w = Tensor::from({1, 2});
  w.set_requires_grad(true);
  EXPECT_THROW(square(w).backward(), ShapeError);
}

TEST(Backward, DetachedBranchGetsNoGradient) {
  auto w = Tensor::from({1, 2});
  w.set_requires_grad(true);
  auto frozen = Tensor::from({3, 4});
  auto cut = w.detach();
  sum(add(mul(w, frozen), mul(cut, cut))).backward();
  EXPECT_FALSE(frozen.has_grad());
  EXPECT_FALSE(cut.has_grad());
  EXPECT_FLOAT_EQ(w.grad()[0], 3);
  EXPECT_FLOAT_EQ(w.grad()[1], 4);
}

TEST(Backward, UnreachedParameterKeepsZeroGradient) {
  auto a = Tensor::from({1});
  auto b = Tensor::from({1});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  b.mutable_grad();  // allocated but not reached
  sum(square(a)).backward();
  EXPECT_FLOAT_EQ(b.grad()[0], 0);
}

TEST(Backward, NoGradGuardSkipsTape) {
  auto w = Tensor::from({1});
  w.set_requires_grad(true);
  NoGradGuard guard;
  EXPECT_FALSE(square(w).requires_grad());
}

TEST(Backward, SharedSubexpressionAccumulates) {
  auto w = Tensor::from({3});
  w.set_requires_grad(true);
  const auto y = square(w);
  sum(add(y, y)).backward();
  EXPECT_FLOAT_EQ(w.grad()[0], 12);
}

TEST(Backward, TapeReplayIsBitIdentical) {
  auto run = [] {
    Rng rng(11);
    auto x = uniform_tensor<float>({2, 3, 8, 8}, -1, 1, rng);
    auto w = uniform_tensor<float>({4, 3, 3, 3}, -1, 1, rng);
    auto w2 = uniform_tensor<float>({4, 2, 5, 5}, -1, 1, rng);
    w.set_requires_grad(true);
    w2.set_requires_grad(true);
    const auto y = conv2d_transpose(relu(conv2d(x, w, Tensor(), {2, 1})), w2, Tensor(), {2, 2, 1});
    const auto loss = mean(square(y));
    loss.backward();
    std::vector<float> all(y.data().begin(), y.data().end());
    all.insert(all.end(), w.grad().begin(), w.grad().end());
    all.insert(all.end(), w2.grad().begin(), w2.grad().end());
    return all;
  };
  EXPECT_EQ(run(), run());
}

// --- finite-difference checks, one per differentiable op -------------------

struct GradCase {
  const char* name;
  testing::Fn64 f;
  std::function<V(Rng&)> inputs;
};

class OpGradient : public ::testing::TestWithParam<GradCase> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const auto& c = GetParam();
  for (std::uint64_t trial = 0; trial < 3; ++trial) {
    Rng rng(100 + trial);
    SCOPED_TRACE(trial);
    expect_gradcheck(c.f, c.inputs(rng), trial);
  }
}

std::vector<GradCase> grad_cases() {
  auto r = [](Shape s) { return [s](Rng& rng) { return V{random64(s, rng)}; }; };
  auto r2 = [](Shape a, Shape b) { return [a, b](Rng& rng) { return V{random64(a, rng), random64(b, rng)}; }; };
  auto pos = [](Shape s) { return [s](Rng& rng) { return V{random64(s, rng, 0.5, 2.0)}; }; };
  auto kinked = [](Shape s) { return [s](Rng& rng) { return V{away_from_zero(s, rng)}; }; };
  return {
      {"add", [](const V& v) { return add(v[0], v[1]); }, r2({2, 3}, {2, 3})},
      {"add_scalar_operand", [](const V& v) { return add(v[0], v[1]); }, r2({2, 3}, {1})},
      {"sub", [](const V& v) { return sub(v[0], v[1]); }, r2({6}, {6})},
      {"mul", [](const V& v) { return mul(v[0], v[1]); }, r2({2, 4}, {2, 4})},
      {"mul_scalar_operand", [](const V& v) { return mul(v[0], v[1]); }, r2({5}, {1})},
      {"div",
       [](const V& v) { return div(v[0], v[1]); },
       [](Rng& rng) { return V{random64({7}, rng), random64({7}, rng, 0.5, 2.0)}; }},
      {"add_scalar", [](const V& v) { return add_scalar(v[0], 0.7); }, r({4})},
      {"scale", [](const V& v) { return scale(v[0], -1.5); }, r({4})},
      {"add_prefix", [](const V& v) { return add_prefix(v[0], v[1]); }, r2({2, 3, 4}, {2, 3})},
      {"mul_prefix", [](const V& v) { return mul_prefix(v[0], v[1]); }, r2({2, 3, 4}, {2})},
      {"relu", [](const V& v) { return relu(v[0]); }, kinked({10})},
      {"leaky_relu", [](const V& v) { return leaky_relu(v[0], 0.2); }, kinked({10})},
      {"abs", [](const V& v) { return abs(v[0]); }, kinked({10})},
      {"square", [](const V& v) { return square(v[0]); }, r({10})},
      {"sqrt", [](const V& v) { return sqrt(v[0]); }, pos({10})},
      {"exp", [](const V& v) { return exp(v[0]); }, r({10})},
      {"log", [](const V& v) { return log(v[0]); }, pos({10})},
      {"tanh", [](const V& v) { return tanh(v[0]); }, r({10})},
      {"sigmoid", [](const V& v) { return sigmoid(v[0]); }, r({10})},
      {"softplus", [](const V& v) { return softplus(v[0]); }, r({10})},
      {"clamp",
       [](const V& v) { return clamp(v[0], -0.05, 0.05); },
       kinked({12})},
      {"sum", [](const V& v) { return sum(v[0]); }, r({3, 4})},
      {"mean", [](const V& v) { return mean(v[0]); }, r({3, 4})},
      {"reshape", [](const V& v) { return reshape(v[0], Shape{4, 3}); }, r({3, 4})},
      {"matmul", [](const V& v) { return matmul(v[0], v[1]); }, r2({3, 4}, {4, 5})},
      {"bmm", [](const V& v) { return bmm(v[0], v[1]); }, r2({2, 3, 2}, {2, 2, 4})},
      {"linear",
       [](const V& v) { return linear(v[0], v[1], v[2]); },
       [](Rng& rng) { return V{random64({2, 4}, rng), random64({3, 4}, rng), random64({3}, rng)}; }},
      {"conv2d",
       [](const V& v) { return conv2d(v[0], v[1], v[2], {2, 1}); },
       [](Rng& rng) { return V{random64({2, 2, 5, 4}, rng), random64({3, 2, 3, 3}, rng), random64({3}, rng)}; }},
      {"conv2d_same",
       [](const V& v) { return conv2d(v[0], v[1], Tensor64(), {1, 2}); },
       [](Rng& rng) { return V{random64({1, 2, 4, 4}, rng), random64({2, 2, 5, 5}, rng)}; }},
      {"conv2d_transpose",
       [](const V& v) { return conv2d_transpose(v[0], v[1], v[2], {2, 2, 1}); },
       [](Rng& rng) { return V{random64({2, 2, 3, 2}, rng), random64({2, 2, 5, 5}, rng), random64({2}, rng)}; }},
      {"conv2d_transpose_per_sample",
       [](const V& v) { return conv2d_transpose(v[0], v[1], Tensor64(), {1, 1, 0}); },
       [](Rng& rng) { return V{random64({2, 2, 3, 3}, rng), random64({2, 2, 1, 3, 3}, rng)}; }},
      {"masked_conv2d",
       [](const V& v) { return masked_conv2d(v[0], v[1], v[2]); },
       [](Rng& rng) { return V{random64({1, 2, 4, 4}, rng), random64({2, 2, 5, 5}, rng), random64({2}, rng)}; }},
      {"global_avg_pool", [](const V& v) { return global_avg_pool(v[0]); }, r({2, 3, 3, 2})},
      {"concat_channels", [](const V& v) { return concat_channels(V{v[0], v[1]}); }, r2({2, 1, 2, 2}, {2, 3, 2, 2})},
      {"slice_channels", [](const V& v) { return slice_channels(v[0], 1, 3); }, r({2, 4, 2, 2})},
      {"concat_batch", [](const V& v) { return concat_batch(V{v[0], v[1]}); }, r2({1, 2, 2, 2}, {2, 2, 2, 2})},
      {"slice_batch", [](const V& v) { return slice_batch(v[0], 1, 2); }, r({3, 2, 2, 2})},
      {"mse", [](const V& v) { return mse(v[0], v[1]); }, r2({2, 8}, {2, 8})},
      {"composition",
       [](const V& v) {
         const auto h = relu(conv2d(v[0], v[1], Tensor64(), {2, 1}));
         return sum(sqrt(add_scalar(square(conv2d_transpose(h, v[2], Tensor64(), {2, 1, 1})), 0.5)));
       },
       [](Rng& rng) {
         return V{random64({1, 2, 4, 4}, rng), random64({3, 2, 3, 3}, rng), random64({3, 2, 3, 3}, rng)};
       }},
  };
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::ValuesIn(grad_cases()),
                         [](const auto& info) { return std::string(info.param.name); });

TEST(GradCheck, DetectsAWrongBackward) {
  // x^2 with a backward claiming 2.1x.
  const testing::Fn64 wrong = [](const V& v) {
    std::vector<double> out(v[0].data().begin(), v[0].data().end());
    for (auto& x : out) x *= x;
    return Tensor64::make_result(v[0].shape(), std::move(out), "bad_square", {v[0]}, [](detail::Node<double>& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.1 * self.parents[0]->data[i] * self.grad[i];
    });
  };
  Rng rng(1);
  const auto r = testing::gradcheck(wrong, {random64({6}, rng)});
  EXPECT_GT(r.max_rel_error, 1e-2);
  EXPECT_GT(r.jvp_rel_error, 1e-2);
}

// --- optimizer ---------------------------------------------------------------

TEST(Adam, FirstStepMovesByLearningRate) {
  auto w = Tensor::from({1});
  w.set_requires_grad(true);
  Adam opt({w}, {.lr = 0.1});
  sum(square(w)).backward();
  opt.step();
  EXPECT_NEAR(w.at(0), 0.9, 1e-6);
}

TEST(Adam, ConvergesOnShiftedQuadratic) {
  auto w = Tensor::from({0});
  w.set_requires_grad(true);
  Adam opt({w}, {.lr = 0.1});
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    sum(square(add_scalar(w, -3.0f))).backward();
    opt.step();
  }
  EXPECT_LT(std::abs(w.at(0) - 3.0f), 1e-2);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  auto w = Tensor::from({1.5f, -2.0f});
  w.set_requires_grad(true);
  Adam opt({w}, {.lr = 0.1});
  w.mutable_grad();
  for (int i = 0; i < 3; ++i) opt.step();
  EXPECT_EQ(w.at(0), 1.5f);
  EXPECT_EQ(w.at(1), -2.0f);
}

TEST(Adam, MissingGradientIsAnError) {
  auto w = Tensor::from({1});
  w.set_requires_grad(true);
  Adam opt({w}, {.lr = 0.1});
  EXPECT_THROW(opt.step(), std::logic_error);
}

// --- checkpoints -------------------------------------------------------------

ParameterStore sample_store(std::uint64_t seed) {
  Rng rng(seed);
  ParameterStore store;
  store.add("encoder.conv0.weight", uniform_tensor<float>({2, 3, 3, 3}, -1, 1, rng));
  store.add("encoder.conv0.bias", uniform_tensor<float>({2}, -1, 1, rng));
  store.add("head.w", uniform_tensor<float>({5, 1}, -1, 1, rng));
  return store;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto a = sample_store(1);
  auto b = sample_store(2);
  b.load_bytes(a.to_bytes());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto x = a.parameters()[i].tensor.data();
    const auto y = b.parameters()[i].tensor.data();
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
  }
  EXPECT_EQ(a.to_bytes(), b.to_bytes());
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "nsx_ckpt_test.bin";
  const auto a = sample_store(3);
  a.save(path);
  auto b = sample_store(4);
  b.load(path);
  EXPECT_EQ(a.to_bytes(), b.to_bytes());
  std::filesystem::remove(path);
}

TEST(Checkpoint, HeaderLayout) {
  const auto bytes = sample_store(1).to_bytes();
  ASSERT_GE(bytes.size(), 14u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "NSYNCKPT");
  EXPECT_EQ(bytes[8] | bytes[9] << 8, 1);
  EXPECT_EQ(bytes[10] | bytes[11] << 8 | bytes[12] << 16 | bytes[13] << 24, 3);
}

TEST(Checkpoint, RejectsMalformedInput) {
  auto store = sample_store(1);
  const auto good = store.to_bytes();
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(store.load_bytes(bad_magic), CheckpointError);
  EXPECT_THROW(store.load_bytes(std::span(good).first(good.size() - 1)), CheckpointError);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(store.load_bytes(trailing), CheckpointError);

  ParameterStore other;
  other.add("encoder.conv0.weight", Tensor(Shape{2, 3, 3, 3}));
  EXPECT_THROW(other.load_bytes(good), CheckpointError);
}

TEST(Checkpoint, FailedLoadLeavesValuesUntouched) {
  auto store = sample_store(1);
  const auto before = store.to_bytes();
  auto corrupt = sample_store(2).to_bytes();
  corrupt.resize(corrupt.size() - 4);
  EXPECT_THROW(store.load_bytes(corrupt), CheckpointError);
  EXPECT_EQ(store.to_bytes(), before);
}

TEST(Parameters, NamesAreUnique) {
  ParameterStore store;
  store.add("a", Tensor(Shape{1}));
  EXPECT_THROW(store.add("a", Tensor(Shape{1})), std::invalid_argument);
}

TEST(Parameters, SelectByPrefix) {
  const auto store = sample_store(1);
  const std::vector<std::string> prefixes{"encoder."};
  EXPECT_EQ(store.select(prefixes).size(), 2u);
}

TEST(RngTest, SeededStreamsRepeat) {
  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  Rng c(9);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

}  // namespace
}  // namespace nsx
