#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "vivqa/core/errors.hpp"
#include "vivqa/core/grad_check.hpp"
#include "vivqa/core/ops.hpp"
#include "vivqa/core/rng.hpp"
#include "vivqa/core/tensor.hpp"

using namespace vivqa;

namespace {

constexpr double kGradTol = 1e-4;
constexpr int kSeeds = 20;

// Weighted sum with fixed pseudo-random weights, so every output element
// contributes a distinct coefficient to the scalar under test.
Tensor reduce(const Tensor& y, std::uint64_t seed = 99) {
    RngStream rng(seed);
    Tensor w = Tensor::uniform(y.shape(), rng, -1.0, 1.0);
    return ops::sum(ops::mul(y, w));
}

void expect_values(const Tensor& t, std::vector<double> want, double tol = 0.0) {
    ASSERT_EQ(t.numel(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(t.data()[i], want[i], tol) << "index " << i;
}

void check_all_seeds(const std::function<double(RngStream&)>& one) {
    for (int s = 0; s < kSeeds; ++s) {
        RngStream rng(1000 + s);
        EXPECT_LE(one(rng), kGradTol) << "seed " << s;
    }
}

}  // namespace

TEST(Matmul, IdentityAndHandValue) {
    Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor b = Tensor::from({2, 2}, {3, 4, 5, 6});
    expect_values(ops::matmul(eye, b), {3, 4, 5, 6});
    Tensor c = ops::matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4}));
    EXPECT_EQ(c.shape(), (Shape{1, 1}));
    EXPECT_EQ(c.item(), 11.0);
}

TEST(Matmul, GradOfSumIsColumnSumsOfB) {
    Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    Tensor b = Tensor::from({3, 2}, {1, -2, 0.5, 3, -1, 4});
    backward(ops::sum(ops::matmul(a, b)));
    // d/dA_ij sum(AB) = sum_k B_jk
    expect_values(a, {1, 2, 3, 4, 5, 6});
    const std::vector<double> row = {-1, 3.5, 3};
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(a.grad()[i * 3 + j], row[j]);
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
    try {
        ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
        FAIL();
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    }
}

TEST(MapBinary, Examples) {
    Tensor x = Tensor::from({2}, {1.5, -2});
    expect_values(ops::mul(x, Tensor::zeros({2})), {0, 0});
    expect_values(ops::add(Tensor::from({2}, {1, 2}), Tensor::from({2}, {3, 4})), {4, 6});
    expect_values(ops::mul(Tensor::from({2}, {0.5, -1}), Tensor::from({2}, {0.5, 0.5})), {0.25, -0.5});
    expect_values(ops::sub(Tensor::from({2}, {1, 2}), Tensor::from({2}, {3, 5})), {-2, -3});
    EXPECT_THROW(ops::add(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
}

TEST(Concat, PaperShapeAndIdentity) {
    Tensor a = Tensor::zeros({32, 768});
    EXPECT_EQ(ops::concat({a, a}, 0).shape(), (Shape{64, 768}));
    RngStream rng(1);
    Tensor x = Tensor::randn({3, 4}, rng);
    Tensor y = ops::concat({x}, 0);
    EXPECT_EQ(y.to_vector(), x.to_vector());
    EXPECT_THROW(ops::concat({Tensor::zeros({2, 3}), Tensor::zeros({2, 4})}, 0), ShapeError);
}

TEST(Concat, BackwardSendsOnesToBothParts) {
    Tensor a = Tensor::full({1, 3}, 1.0, true);
    Tensor b = Tensor::full({1, 3}, 2.0, true);
    backward(ops::sum(ops::concat({a, b}, 0)));
    for (double g : a.grad()) EXPECT_EQ(g, 1.0);
    for (double g : b.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Concat, SliceRoundTripIsBitwise) {
    RngStream rng(7);
    for (std::size_t axis = 0; axis < 3; ++axis) {
        Tensor a = Tensor::randn({2, 3, 4}, rng);
        Shape sb = a.shape();
        sb[axis] = 5;
        Tensor b = Tensor::randn(sb, rng);
        Tensor c = ops::concat({a, b}, axis);
        const std::size_t n = a.dim(axis);
        EXPECT_EQ(ops::slice(c, axis, 0, n).to_vector(), a.to_vector());
        EXPECT_EQ(ops::slice(c, axis, n, n + 5).to_vector(), b.to_vector());
    }
}

TEST(Permute, PaperShapeAndInverse) {
    EXPECT_EQ(ops::permute(Tensor::zeros({2560, 1, 32}), {2, 1, 0}).shape(), (Shape{32, 1, 2560}));
    RngStream rng(3);
    Tensor x = Tensor::randn({2, 3, 4, 5}, rng);
    EXPECT_EQ(ops::permute(x, {0, 1, 2, 3}).to_vector(), x.to_vector());
    const std::vector<std::size_t> axes = {2, 0, 3, 1};
    std::vector<std::size_t> inverse(4);
    for (std::size_t i = 0; i < 4; ++i) inverse[axes[i]] = i;
    Tensor p = ops::permute(x, axes);
    EXPECT_EQ(p.shape(), (Shape{4, 2, 5, 3}));
    EXPECT_EQ(ops::permute(p, inverse).to_vector(), x.to_vector());
    EXPECT_THROW(ops::permute(x, {0, 0, 1, 2}), ArgumentError);
    EXPECT_THROW(ops::permute(x, {0, 1, 2}), ArgumentError);
}

TEST(Flatten, ShapesAndMultiset) {
    EXPECT_EQ(ops::flatten(Tensor::zeros({32, 1, 768}), 0).shape(), (Shape{32, 768}));
    EXPECT_EQ(ops::flatten(Tensor::zeros({5, 1}), 0).shape(), (Shape{5, 1}));
    RngStream rng(4);
    Tensor x = Tensor::randn({3, 4, 5}, rng);
    for (std::size_t keep = 0; keep < 3; ++keep) {
        Tensor f = ops::flatten(x, keep);
        EXPECT_EQ(f.shape(), (Shape{x.dim(keep), 60 / x.dim(keep)}));
        auto a = f.to_vector();
        auto b = x.to_vector();
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        EXPECT_EQ(a, b);
    }
    EXPECT_THROW(ops::flatten(Tensor::zeros({4}), 0), ShapeError);
}

TEST(AdaptivePool, HandExampleAndPaperShape) {
    expect_values(ops::adaptive_avg_pool(Tensor::from({4}, {1, 2, 3, 4}), {2}), {1.5, 3.5});
    EXPECT_EQ(ops::adaptive_avg_pool(Tensor::zeros({2560, 7, 7}), {1, 32}).shape(), (Shape{2560, 1, 32}));
    EXPECT_THROW(ops::adaptive_avg_pool(Tensor::zeros({4}), {0}), ArgumentError);
}

TEST(AdaptivePool, ConstantsStayConstant) {
    for (std::size_t n : {1u, 3u, 7u}) {
        for (std::size_t m : {1u, 2u, 7u, 32u}) {
            Tensor y = ops::adaptive_avg_pool(Tensor::full({2, n, n}, 0.375), {m, m});
            for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.375);
        }
    }
}

// Brute force: enumerate every input index and test membership in the bin
// by the defining inequalities i*n <= j*m and j*m < (i+1)*n, in integers.
TEST(AdaptivePool, MatchesBruteForceBinEnumeration) {
    RngStream rng(11);
    for (std::size_t n = 1; n <= 40; ++n) {
        Tensor x = Tensor::uniform({n}, rng, -1.0, 1.0);
        for (std::size_t m = 1; m <= 40; ++m) {
            Tensor y = ops::adaptive_avg_pool(x, {m});
            ASSERT_EQ(y.numel(), m);
            for (std::size_t i = 0; i < m; ++i) {
                double total = 0.0;
                std::size_t count = 0;
                for (std::size_t j = 0; j < n; ++j) {
                    // j >= floor(i*n/m)  <=>  (j+1)*m > i*n ; j < ceil((i+1)*n/m)  <=>  j*m < (i+1)*n
                    if ((j + 1) * m > i * n && j * m < (i + 1) * n) {
                        total += x.data()[j];
                        ++count;
                    }
                }
                ASSERT_GT(count, 0u);
                EXPECT_NEAR(y.data()[i], total / static_cast<double>(count), 1e-15) << "n=" << n << " m=" << m;
            }
        }
    }
}

TEST(Activations, Examples) {
    expect_values(ops::softmax(Tensor::from({2}, {0, 0}), 0), {0.5, 0.5});
    expect_values(ops::tanh(Tensor::from({1}, {0})), {0});
    expect_values(ops::gelu(Tensor::from({1}, {0})), {0});
    // exact form: 1 * Phi(1)
    EXPECT_NEAR(ops::gelu(Tensor::from({1}, {1.0})).item(), 0.8413447460685429, 1e-15);
    RngStream rng(5);
    Tensor x = Tensor::randn({6, 9}, rng, 30.0);
    for (std::size_t axis : {0u, 1u}) {
        Tensor s = ops::softmax(x, axis);
        const std::size_t rows = axis == 1 ? 6 : 9;
        for (std::size_t r = 0; r < rows; ++r) {
            double total = 0.0;
            for (std::size_t c = 0; c < (axis == 1 ? 9u : 6u); ++c) {
                total += axis == 1 ? s.at({r, c}) : s.at({c, r});
            }
            EXPECT_NEAR(total, 1.0, 1e-6);
        }
    }
    EXPECT_THROW(ops::softmax(x, 2), ArgumentError);
}

TEST(Activations, SoftmaxIsStableForHugeLogits) {
    Tensor s = ops::softmax(Tensor::from({3}, {1000, 1000, -1000}), 0);
    expect_values(s, {0.5, 0.5, 0.0}, 1e-15);
}

TEST(LayerNorm, Examples) {
    Tensor g = Tensor::full({2}, 1.0);
    Tensor b = Tensor::zeros({2});
    expect_values(ops::layer_norm(Tensor::from({1, 2}, {1, 3}), g, b, 1e-12), {-1, 1}, 1e-9);
    expect_values(ops::layer_norm(Tensor::full({1, 2}, 4.0), g, b), {0, 0});
    RngStream rng(6);
    Tensor x = Tensor::randn({4, 8}, rng, 3.0);
    Tensor beta = Tensor::randn({8}, rng);
    Tensor y = ops::layer_norm(x, Tensor::full({8}, 1.0), beta);
    const double beta_mean = std::accumulate(beta.data().begin(), beta.data().end(), 0.0) / 8.0;
    for (std::size_t r = 0; r < 4; ++r) {
        double m = 0.0;
        for (std::size_t c = 0; c < 8; ++c) m += y.at({r, c});
        EXPECT_NEAR(m / 8.0, beta_mean, 1e-12);
    }
    EXPECT_THROW(ops::layer_norm(x, Tensor::full({7}, 1.0), Tensor::zeros({7})), ShapeError);
}

TEST(Embedding, Examples) {
    RngStream rng(8);
    Tensor table = Tensor::randn({5, 3}, rng, 1.0, true);
    const std::vector<std::size_t> zero = {0};
    Tensor row = ops::embedding_lookup(table, zero);
    EXPECT_EQ(row.to_vector(), ops::slice(table, 0, 0, 1).to_vector());

    const std::vector<std::size_t> empty;
    EXPECT_EQ(ops::embedding_lookup(table, empty).shape(), (Shape{0, 3}));

    const std::vector<std::size_t> twice = {2, 2};
    backward(ops::sum(ops::embedding_lookup(table, twice)));
    for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_EQ(table.grad()[2 * 3 + c], 2.0);
        EXPECT_EQ(table.grad()[0 * 3 + c], 0.0);
    }

    const std::vector<std::size_t> bad = {1, 7};
    try {
        ops::embedding_lookup(table, bad);
        FAIL();
    } catch (const IndexError& e) {
        EXPECT_NE(std::string(e.what()).find('7'), std::string::npos);
    }
}

TEST(CrossEntropy, Examples) {
    EXPECT_NEAR(ops::cross_entropy(Tensor::full({4}, 0.3), 2).item(), std::log(4.0), 1e-15);
    EXPECT_NEAR(ops::cross_entropy(Tensor::from({2}, {10, -10}), 0).item(), std::log1p(std::exp(-20.0)), 1e-24);
    EXPECT_NEAR(ops::cross_entropy(Tensor::from({2}, {10, -10}), 1).item(), 20.0 + std::log1p(std::exp(-20.0)), 1e-13);
    EXPECT_NEAR(ops::cross_entropy(Tensor::from({2}, {10, -10}), 0).item(), 2.06e-9, 0.01e-9);
    EXPECT_THROW(ops::cross_entropy(Tensor::zeros({3}), 3), IndexError);
}

TEST(CrossEntropy, GradientSumsToZero) {
    for (int s = 0; s < kSeeds; ++s) {
        RngStream rng(s);
        Tensor logits = Tensor::randn({7}, rng, 5.0, true);
        backward(ops::cross_entropy(logits, static_cast<std::size_t>(s % 7)));
        double total = 0.0;
        for (double g : logits.grad()) total += g;
        EXPECT_NEAR(total, 0.0, 1e-9);
    }
}

TEST(DropPath, IdentityCases) {
    RngStream rng(1);
    Tensor x = Tensor::randn({3, 4}, rng);
    RngStream draws(2);
    Tensor a = ops::drop_path(x, 0.0, true, draws);
    Tensor b = ops::drop_path(x, 0.3, false, draws);
    EXPECT_TRUE(a.same_storage(x));
    EXPECT_TRUE(b.same_storage(x));
    EXPECT_EQ(draws.counter(), 0u);
    EXPECT_THROW(ops::drop_path(x, 1.0, true, draws), ArgumentError);
    EXPECT_THROW(ops::drop_path(x, -0.1, true, draws), ArgumentError);
}

TEST(DropPath, MonteCarloMeanIsPreserved) {
    RngStream rng(2024);
    Tensor one = Tensor::full({1}, 1.0);
    double total = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double v = ops::drop_path(one, 0.3, true, rng).item();
        EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.7) < 1e-15);
        total += v;
    }
    EXPECT_NEAR(total / n, 1.0, 0.02);
}

TEST(Backward, Examples) {
    Tensor x = Tensor::from({3}, {1, -2, 0.5}, true);
    backward(ops::sum(x));
    expect_values(Tensor::from({3}, x.to_vector()), {1, -2, 0.5});
    for (double g : x.grad()) EXPECT_EQ(g, 1.0);

    Tensor y = Tensor::from({3}, {1, -2, 0.5}, true);
    backward(ops::sum(ops::mul(y, y)));
    EXPECT_EQ(y.grad()[0], 2.0);
    EXPECT_EQ(y.grad()[1], -4.0);
    EXPECT_EQ(y.grad()[2], 1.0);
}

TEST(Backward, TwiceIsUsageError) {
    Tensor x = Tensor::from({2}, {1, 2}, true);
    Tensor loss = ops::sum(ops::mul(x, x));
    backward(loss);
    EXPECT_THROW(backward(loss), UsageError);
}

TEST(Backward, NonScalarIsArgumentError) {
    Tensor x = Tensor::from({2}, {1, 2}, true);
    EXPECT_THROW(backward(ops::scale(x, 2.0)), ArgumentError);
}

TEST(Backward, SharedSubgraphAccumulates) {
    Tensor x = Tensor::from({1}, {3.0}, true);
    Tensor y = ops::mul(x, x);
    backward(ops::sum(ops::add(y, ops::scale(y, 2.0))));  // 3x^2
    EXPECT_DOUBLE_EQ(x.grad()[0], 18.0);
}

TEST(Tape, FrozenInputsAreNotRecorded) {
    Tape::current().clear();
    Tensor a = Tensor::from({2}, {1, 2});
    Tensor b = ops::mul(a, a);
    EXPECT_EQ(Tape::current().size(), 0u);
    Tensor c = Tensor::from({2}, {1, 2}, true);
    {
        NoGradGuard guard;
        ops::mul(c, c);
        EXPECT_EQ(Tape::current().size(), 0u);
    }
    ops::mul(c, c);
    EXPECT_EQ(Tape::current().size(), 1u);
    Tape::current().clear();
}

TEST(Tape, EachNodeVisitedOnce) {
    Tape::current().clear();
    Tensor x = Tensor::from({2}, {1, 2}, true);
    Tensor y = ops::mul(x, x);
    Tensor z = ops::add(y, y);
    backward(ops::sum(z));
    EXPECT_EQ(Tape::current().last_backward_visits(), 3u);
}

TEST(Rng, DeterministicAndSplitIndependent) {
    RngStream a(42);
    RngStream b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
    RngStream base(42);
    RngStream s1 = base.split("model");
    RngStream s2 = base.split("model");
    RngStream s3 = base.split("data");
    EXPECT_EQ(base.counter(), 0u);
    EXPECT_EQ(s1.next_u64(), s2.next_u64());
    EXPECT_NE(base.split("model").next_u64(), s3.next_u64());
    auto perm = RngStream(5).permutation(50);
    auto sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}

TEST(Determinism, SameSeedSameForwardBackwardBitwise) {
    auto run = [] {
        RngStream rng(77);
        Tensor w = Tensor::randn({5, 4}, rng, 1.0, true);
        Tensor x = Tensor::randn({3, 5}, rng);
        Tensor h = ops::gelu(ops::matmul(x, w));
        Tensor loss = ops::cross_entropy(ops::flatten(h, 0), 2);
        backward(loss);
        std::vector<double> out = w.grad().size() ? std::vector<double>(w.grad().begin(), w.grad().end())
                                                  : std::vector<double>();
        out.push_back(loss.item());
        return out;
    };
    EXPECT_EQ(run(), run());
}

// --------------------------------------------------------------------------
// Gradient checks, every differentiable op, 20 seeds each.

// Exact when every perturbed sum is representable: small integers and a
// power-of-two step.
TEST(GradCheck, SumIsExact) {
    Tensor x = Tensor::from({3, 4}, {1, -2, 3, 0, 5, 7, -1, 2, 4, 4, -3, 6});
    EXPECT_EQ(grad_check([](const Tensor& t) { return ops::sum(t); }, x, 1.0 / 65536.0), 0.0);
    RngStream rng(1);
    Tensor y = Tensor::randn({3, 4}, rng);
    EXPECT_LE(grad_check([](const Tensor& t) { return ops::sum(t); }, y), 1e-9);
}

TEST(GradCheck, CrossEntropyOfMatmul) {
    check_all_seeds([](RngStream& rng) {
        Tensor a = Tensor::randn({4, 4}, rng);
        Tensor b = Tensor::randn({4, 4}, rng);
        const double ea = grad_check([&](const Tensor& t) { return ops::cross_entropy(ops::matmul(t, b), 5); }, a);
        const double eb = grad_check([&](const Tensor& t) { return ops::cross_entropy(ops::matmul(a, t), 9); }, b);
        return std::max(ea, eb);
    });
}

TEST(GradCheck, LayerNormReduced) {
    check_all_seeds([](RngStream& rng) {
        Tensor x = Tensor::randn({8}, rng, 2.0);
        Tensor g = Tensor::randn({8}, rng);
        Tensor b = Tensor::randn({8}, rng);
        const double ex = grad_check([&](const Tensor& t) { return reduce(ops::layer_norm(t, g, b)); }, x);
        const double eg = grad_check([&](const Tensor& t) { return reduce(ops::layer_norm(x, t, b)); }, g);
        const double eb = grad_check([&](const Tensor& t) { return reduce(ops::layer_norm(x, g, t)); }, b);
        return std::max({ex, eg, eb});
    });
}

TEST(GradCheck, MapBinary) {
    check_all_seeds([](RngStream& rng) {
        Tensor a = Tensor::randn({3, 4}, rng);
        Tensor b = Tensor::randn({3, 4}, rng);
        double worst = 0.0;
        for (auto op : {ops::BinaryOp::add, ops::BinaryOp::sub, ops::BinaryOp::mul}) {
            worst = std::max(worst, grad_check([&](const Tensor& t) { return reduce(ops::map_binary(t, b, op)); }, a));
            worst = std::max(worst, grad_check([&](const Tensor& t) { return reduce(ops::map_binary(a, t, op)); }, b));
        }
        return worst;
    });
}

TEST(GradCheck, LinearAndBias) {
    check_all_seeds([](RngStream& rng) {
        Tensor x = Tensor::randn({3, 5}, rng);
        Tensor w = Tensor::randn({5, 2}, rng);
        Tensor b = Tensor::randn({2}, rng);
        double worst = grad_check([&](const Tensor& t) { return reduce(ops::linear(t, w, b)); }, x);
        worst = std::max(worst, grad_check([&](const Tensor& t) { return reduce(ops::linear(x, t, b)); }, w));
        worst = std::max(worst, grad_check([&](const Tensor& t) { return reduce(ops::linear(x, w, t)); }, b));
        Tensor y = Tensor::randn({2, 3, 2}, rng);
        worst = std::max(worst, grad_check([&](const Tensor& t) { return reduce(ops::add_row_bias(y, t)); }, b));
        worst = std::max(worst, grad_check([&](const Tensor& t) { return reduce(ops::scale(t, -1.7)); }, x));
        return worst;
    });
}

TEST(GradCheck, Reshaping) {
    check_all_seeds([](RngStream& rng) {
        Tensor x = Tensor::randn({2, 3, 4}, rng);
        Tensor other = Tensor::randn({2, 2, 4}, rng);
        double worst = grad_check([](const Tensor& t) { return reduce(ops::permute(t, {2, 0, 1})); }, x);
        worst = std::max(worst, grad_check([](const Tensor& t) { return reduce(ops::flatten(t, 1)); }, x));
        worst = std::max(worst, grad_check([](const Tensor& t) { return reduce(ops::reshape(t, {6, 4})); }, x));
        worst = std::max(worst, grad_check([](const Tensor& t) { return reduce(ops::slice(t, 2, 1, 3)); }, x));
        worst = std::max(worst, grad_check([&](const Tensor& t) { return reduce(ops::concat({t, other}, 1)); }, x));
        Tensor m = Tensor::randn({3, 5}, rng);
        worst = std::max(worst, grad_check([](const Tensor& t) { return reduce(ops::transpose(t)); }, m));
        return worst;
    });
}

TEST(GradCheck, AdaptivePoolDownAndUp) {
    check_all_seeds([](RngStream& rng) {
        Tensor x = Tensor::randn({2, 7, 5}, rng);
        double worst = grad_check([](const Tensor& t) { return reduce(ops::adaptive_avg_pool(t, {3, 11})); }, x);
        worst = std::max(worst, grad_check([](const Tensor& t) { return reduce(ops::adaptive_avg_pool(t, {1, 2})); }, x));
        return worst;
    });
}

TEST(GradCheck, Activations) {
    check_all_seeds([](RngStream& rng) {
        Tensor x = Tensor::randn({3, 5}, rng, 2.0);
        double worst = grad_check([](const Tensor& t) { return reduce(ops::softmax(t, 1)); }, x);
        worst = std::max(worst, grad_check([](const Tensor& t) { return reduce(ops::softmax(t, 0)); }, x));
        worst = std::max(worst, grad_check([](const Tensor& t) { return reduce(ops::gelu(t)); }, x));
        worst = std::max(worst, grad_check([](const Tensor& t) { return reduce(ops::tanh(t)); }, x));
        return worst;
    });
}

TEST(GradCheck, EmbeddingWithRepeats) {
    check_all_seeds([](RngStream& rng) {
        Tensor table = Tensor::randn({6, 3}, rng);
        const std::vector<std::size_t> ids = {1, 4, 1, 0, 5, 1};
        return grad_check([&](const Tensor& t) { return reduce(ops::embedding_lookup(t, ids)); }, table);
    });
}

TEST(GradCheck, MaskedSoftmax) {
    check_all_seeds([](RngStream& rng) {
        Tensor s = Tensor::randn({4, 5}, rng);
        const std::vector<bool> mask = {true, true, false, true, false};
        return grad_check([&](const Tensor& t) { return reduce(ops::softmax(ops::mask_columns(t, mask), 1)); }, s);
    });
}

TEST(GradCheck, DropPathWithFixedDraw) {
    check_all_seeds([](RngStream& rng) {
        Tensor x = Tensor::randn({3, 4}, rng);
        const std::uint64_t key = rng.next_u64();
        return grad_check(
            [&](const Tensor& t) {
                RngStream draw(key);  // same mask on every evaluation
                return reduce(ops::drop_path(t, 0.3, true, draw));
            },
            x);
    });
}

TEST(MaskColumns, MasksWithNegativeInfinity) {
    Tensor s = ops::mask_columns(Tensor::zeros({2, 3}), {true, false, true});
    EXPECT_EQ(s.at({1, 1}), -std::numeric_limits<double>::infinity());
    expect_values(ops::softmax(s, 1), {0.5, 0, 0.5, 0.5, 0, 0.5});
    EXPECT_THROW(ops::mask_columns(Tensor::zeros({2, 3}), {true}), ShapeError);
}
