#include <cmath>
#include <cstring>
#include <numeric>

#include "test_util.hpp"

namespace clad {
namespace {

using testing::random_tensor;
using testing::TempDir;

// Reduces any tensor to a scalar with fixed random weights so every output
// coordinate contributes a distinct gradient.
Tensor weighted_sum(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, random_tensor(y.shape(), rng)));
}

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  EXPECT_THROW(Tensor({0, 2}, {}), DimensionError);
}

TEST(Tensor, CopiesShareStorageButCloneDoesNot) {
  Tensor a = Tensor::vector({1.0, 2.0});
  Tensor alias = a;
  Tensor copy = a.clone();
  a.mutable_data()[0] = 5.0;
  EXPECT_EQ(alias[0], 5.0);
  EXPECT_EQ(copy[0], 1.0);
}

TEST(Ops, MatmulHandExample) {
  const Tensor a({2, 2}, {1, 2, 3, 4});
  const Tensor b({2, 1}, {1, 1});
  const Tensor c = matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(c.values(), (std::vector<double>{3, 7}));
}

TEST(Ops, MatmulInnerDimensionMismatch) {
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
}

TEST(Ops, SoftmaxOfZerosIsUniform) {
  const Tensor s = softmax_lastdim(Tensor::zeros({3}));
  for (double v : s.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Ops, SoftmaxRowsArePositiveAndSumToOne) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor s = softmax_lastdim(random_tensor({4, 6}, rng, -30.0, 30.0));
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 6; ++c) {
        EXPECT_GT(s[r * 6 + c], 0.0);
        total += s[r * 6 + c];
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Ops, AddZerosIsIdentity) {
  Rng rng(3);
  const Tensor x = random_tensor({3, 4}, rng);
  EXPECT_EQ(add(x, Tensor::zeros_like(x)).values(), x.values());
}

TEST(Ops, BroadcastAddAndIncompatibleShapes) {
  const Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor b = Tensor::vector({10, 20, 30});
  EXPECT_EQ(add(x, b).values(), (std::vector<double>{11, 22, 33, 14, 25, 36}));
  EXPECT_THROW(add(x, Tensor::vector({1, 2})), DimensionError);
}

TEST(Ops, ConvSamePaddingMatchesDirectSum) {
  Rng rng(5);
  const Tensor x = random_tensor({2, 5, 3}, rng);
  const Tensor w = random_tensor({3, 3, 4}, rng);
  const Tensor y = conv1d_same(x, w);
  ASSERT_EQ(y.shape(), (Shape{2, 5, 4}));
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t t = 0; t < 5; ++t) {
      for (std::size_t o = 0; o < 4; ++o) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
          const long src = static_cast<long>(t) + static_cast<long>(k) - 1;
          if (src < 0 || src >= 5) continue;
          for (std::size_t i = 0; i < 3; ++i) acc += x[(b * 5 + src) * 3 + i] * w[(k * 3 + i) * 4 + o];
        }
        EXPECT_NEAR(y[(b * 5 + t) * 4 + o], acc, 1e-12);
      }
    }
  }
}

TEST(Ops, LayerNormRowsHaveZeroMeanUnitVariance) {
  Rng rng(8);
  const Tensor y = layer_norm(random_tensor({3, 16}, rng, -4.0, 4.0), 0.0);
  for (std::size_t r = 0; r < 3; ++r) {
    double m = 0.0, v = 0.0;
    for (std::size_t c = 0; c < 16; ++c) m += y[r * 16 + c];
    m /= 16.0;
    for (std::size_t c = 0; c < 16; ++c) v += (y[r * 16 + c] - m) * (y[r * 16 + c] - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 16.0, 1.0, 1e-10);
  }
}

TEST(Ops, NonFiniteResultIsNumericError) {
  const Tensor big = Tensor::vector({800.0});
  try {
    exp(big);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.op(), "exp");
  }
}

TEST(Losses, MseOfIdenticalInputsIsZero) {
  Rng rng(1);
  const Tensor x = random_tensor({4, 3}, rng);
  EXPECT_EQ(mse(x, x).item(), 0.0);
}

TEST(Losses, KlOfShiftedMeanIsHalfSquare) {
  const Tensor kl = gaussian_kl_to_std_normal(Tensor::vector({2.0}), Tensor::vector({0.0}));
  EXPECT_DOUBLE_EQ(kl.item(), 2.0);
}

TEST(Losses, KlNonNegativeAndZeroOnlyAtStandardNormal) {
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const double kl =
        gaussian_kl_to_std_normal(random_tensor({3, 2}, rng, -3, 3), random_tensor({3, 2}, rng, -3, 3)).item();
    EXPECT_GT(kl, 0.0);
  }
  EXPECT_EQ(gaussian_kl_to_std_normal(Tensor::zeros({3, 2}), Tensor::zeros({3, 2})).item(), 0.0);
}

TEST(Losses, CrossEntropyOfUniformLogitsIsLogClassCount) {
  const Tensor logits = Tensor::full({3, 4}, 0.7);
  EXPECT_NEAR(cross_entropy(logits, {0, 2, 3}).item(), std::log(4.0), 1e-15);
  EXPECT_THROW(cross_entropy(logits, {0, 4, 1}), LabelError);
}

TEST(Losses, BceRequiresTargetsInUnitInterval) {
  EXPECT_THROW(bce_with_logits(Tensor::zeros({2}), Tensor::vector({0.5, 1.5})), PreconditionError);
}

TEST(Backward, SquareGradient) {
  Tensor x = Tensor::vector({3.0}, true);
  backward(sum(mul(x, x)));
  EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(Backward, ConstantLossGivesZeroGrads) {
  Tensor x = Tensor::vector({1.0, -2.0}, true);
  backward(sum(scale(x, 0.0)));
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, LinearRegressionMatchesNormalEquationGradient) {
  Rng rng(4);
  const Tensor X = random_tensor({6, 3}, rng);
  const Tensor y = random_tensor({6, 1}, rng);
  Tensor w = random_tensor({3, 1}, rng);
  w.set_requires_grad(true);
  backward(mse(matmul(X, w), y));
  // d/dw (1/n)||Xw - y||^2 = (2/n) X^T (Xw - y)
  std::vector<double> resid(6);
  for (std::size_t i = 0; i < 6; ++i) {
    double p = 0.0;
    for (std::size_t j = 0; j < 3; ++j) p += X[i * 3 + j] * w[j];
    resid[i] = p - y[i];
  }
  for (std::size_t j = 0; j < 3; ++j) {
    double g = 0.0;
    for (std::size_t i = 0; i < 6; ++i) g += X[i * 3 + j] * resid[i];
    EXPECT_NEAR(w.grad()[j], 2.0 * g / 6.0, 1e-14);
  }
}

TEST(Backward, NonScalarLossAndMissingGraph) {
  Tensor x = Tensor::vector({1.0, 2.0}, true);
  EXPECT_THROW(backward(mul(x, x)), PreconditionError);
  EXPECT_THROW(backward(sum(Tensor::vector({1.0, 2.0}))), StateError);
}

TEST(Backward, LeafGradientsAccumulateAcrossPasses) {
  Tensor x = Tensor::vector({2.0}, true);
  backward(sum(mul(x, x)));
  backward(sum(mul(x, x)));
  EXPECT_EQ(x.grad()[0], 8.0);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  Tensor x = Tensor::vector({2.0}, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = mul(x, x);
  }
  EXPECT_TRUE(y.is_leaf());
  EXPECT_FALSE(y.requires_grad());
}

// Inputs per primitive; the first `inputs` entries are each checked in turn.
std::vector<Tensor> primitive_inputs(PrimitiveKind kind, Rng& rng) {
  switch (kind) {
    case PrimitiveKind::Matmul: return {random_tensor({2, 3}, rng), random_tensor({3, 4}, rng)};
    case PrimitiveKind::Conv1dSame: return {random_tensor({2, 4, 3}, rng), random_tensor({3, 3, 2}, rng)};
    case PrimitiveKind::Add:
    case PrimitiveKind::Mul: return {random_tensor({2, 3}, rng), random_tensor({3}, rng)};
    case PrimitiveKind::Concat: return {random_tensor({2, 3}, rng), random_tensor({2, 2}, rng)};
    case PrimitiveKind::LayerNorm: return {random_tensor({2, 5}, rng, -2, 2)};
    default: return {random_tensor({2, 4}, rng, -2, 2)};
  }
}

TEST(GradCheck, EveryPrimitiveOnTwentySeededInputs) {
  for (PrimitiveKind kind : kAllPrimitives) {
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
      Rng rng(derive_seed(100, static_cast<std::uint64_t>(kind), trial));
      const std::vector<Tensor> inputs = primitive_inputs(kind, rng);
      for (std::size_t slot = 0; slot < inputs.size(); ++slot) {
        auto fn = [&](const Tensor& x) {
          std::vector<Tensor> args = inputs;
          args[slot] = x;
          return weighted_sum(apply_primitive(kind, args), trial);
        };
        worst = std::max(worst, grad_check(fn, inputs[slot]));
      }
    }
    EXPECT_LT(worst, 1e-5) << to_string(kind);
  }
}

TEST(GradCheck, EveryLossOnTwentySeededInputs) {
  const LossKind kinds[] = {LossKind::Mse, LossKind::BceWithLogits, LossKind::CrossEntropy, LossKind::GaussianKl};
  for (LossKind kind : kinds) {
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
      Rng rng(derive_seed(200, static_cast<std::uint64_t>(kind), trial));
      const Tensor pred = random_tensor({3, 4}, rng, -2, 2);
      Tensor target = random_tensor({3, 4}, rng, kind == LossKind::BceWithLogits ? 0.0 : -2.0, kind == LossKind::BceWithLogits ? 1.0 : 2.0);
      if (kind == LossKind::CrossEntropy) target = Tensor::vector({0, 3, 1});
      worst = std::max(worst, grad_check([&](const Tensor& x) { return apply_loss(kind, x, target); }, pred));
      if (kind == LossKind::Mse || kind == LossKind::GaussianKl) {
        worst = std::max(worst, grad_check([&](const Tensor& t) { return apply_loss(kind, pred, t); }, target));
      }
    }
    EXPECT_LT(worst, 1e-5) << to_string(kind);
  }
}

TEST(GradCheck, SumOfSquaresIsTight) {
  Rng rng(9);
  EXPECT_LT(grad_check([](const Tensor& x) { return sum(mul(x, x)); }, random_tensor({5}, rng)), 1e-8);
}

TEST(GradCheck, CrossEntropyThroughSoftmaxChain) {
  Rng rng(10);
  const Tensor point = random_tensor({3, 5}, rng);
  auto fn = [](const Tensor& x) { return cross_entropy(gelu(softmax_lastdim(x)), {1, 4, 0}); };
  EXPECT_LT(grad_check(fn, point), 1e-5);
}

TEST(GradCheck, RejectsZeroEps) {
  EXPECT_THROW(grad_check([](const Tensor& x) { return sum(x); }, Tensor::vector({1.0}), 0.0), PreconditionError);
}

TEST(GradCheck, FlagsAWrongBackward) {
  // exp whose gradient is deliberately scaled: the checker must notice.
  auto broken = [](const Tensor& x) {
    Tensor y = exp(x);
    if (y.requires_grad()) {
      auto& impl = y.impl();
      auto original = impl.backward_fn;
      impl.backward_fn = [original](detail::TensorImpl& self) {
        for (double& g : self.grad) g *= 2.0;
        original(self);
      };
    }
    return sum(y);
  };
  EXPECT_GT(grad_check(broken, Tensor::vector({0.3, -0.2})), 0.1);
}

TEST(AdamW, ZeroGradAndNoDecayLeavesParamsUnchanged) {
  ParamStore store;
  store.add("w", Tensor::vector({1.5, -2.0}));
  store.zero_grads();
  const auto before = store.checksum();
  adamw_step(store, 0.1, 0.0);
  EXPECT_EQ(store.checksum(), before);
}

TEST(AdamW, SingleStepMatchesHandComputedMoments) {
  ParamStore store;
  Tensor& w = store.add("w", Tensor::vector({1.0}));
  backward(scale(sum(w), 0.5));  // grad 0.5
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  adamw_step(store, lr, 0.0, {b1, b2}, eps);
  const double m_hat = ((1 - b1) * 0.5) / (1 - b1);
  const double v_hat = ((1 - b2) * 0.25) / (1 - b2);
  EXPECT_DOUBLE_EQ(w[0], 1.0 - lr * m_hat / (std::sqrt(v_hat) + eps));
}

TEST(AdamW, DecoupledDecayShrinksParamWithZeroGrad) {
  ParamStore store;
  Tensor& w = store.add("w", Tensor::vector({2.0}));
  store.zero_grads();
  adamw_step(store, 0.1, 0.5);
  EXPECT_DOUBLE_EQ(w[0], 2.0 - 0.1 * 0.5 * 2.0);
}

TEST(AdamW, MissingGradientNamesParameter) {
  ParamStore store;
  store.add("layer.weight", Tensor::vector({1.0}));
  try {
    adamw_step(store, 0.1, 0.0);
    FAIL() << "expected StateError";
  } catch (const StateError& e) {
    EXPECT_NE(std::string(e.what()).find("layer.weight"), std::string::npos);
  }
}

TEST(AdamW, BitReproducible) {
  auto run = [] {
    ParamStore store;
    Rng rng(21);
    Tensor& w = store.add("w", random_tensor({4, 3}, rng));
    const Tensor x = random_tensor({5, 4}, rng);
    for (int i = 0; i < 10; ++i) {
      store.zero_grads();
      backward(mean(mul(matmul(x, w), matmul(x, w))));
      adamw_step(store, 0.01, 0.1);
    }
    return store.checksum();
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  Rng rng(1);
  std::vector<NamedTensor> tensors = {{"a.weight", random_tensor({3, 2}, rng, -1e6, 1e6)},
                                      {"b", Tensor::vector({-0.0, 1e-308, 3.141592653589793})}};
  save_checkpoint(dir / "x.ckpt", tensors);
  const auto back = load_checkpoint(dir / "x.ckpt");
  ASSERT_EQ(back.size(), tensors.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].name, tensors[i].name);
    EXPECT_EQ(back[i].value.shape(), tensors[i].value.shape());
    EXPECT_EQ(std::memcmp(back[i].value.values().data(), tensors[i].value.values().data(),
                          tensors[i].value.numel() * sizeof(double)),
              0);
  }
}

TEST(Checkpoint, CorruptInputsAreFormatErrors) {
  const std::string good = encode_checkpoint({{"w", Tensor::vector({1.0, 2.0})}});
  EXPECT_THROW(decode_checkpoint("NOTACKPT" + good.substr(8)), FormatError);
  EXPECT_THROW(decode_checkpoint(good.substr(0, good.size() - 3)), FormatError);
  EXPECT_THROW(decode_checkpoint(good + "x"), FormatError);
  std::string wrong_version = good;
  wrong_version[8] = 9;
  EXPECT_THROW(decode_checkpoint(wrong_version), FormatError);
}

TEST(Checkpoint, RestoreChecksShapes) {
  ParamStore store;
  store.add("w", Tensor::zeros({2, 2}));
  EXPECT_THROW(restore_params(store, {{"w", Tensor::zeros({4})}}), DimensionError);
  EXPECT_THROW(restore_params(store, {{"other", Tensor::zeros({2, 2})}}), FormatError);
}

}  // namespace
}  // namespace clad
