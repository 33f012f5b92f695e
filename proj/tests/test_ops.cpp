#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dpe/batchnorm.hpp"
#include "dpe/conv.hpp"
#include "dpe/gradcheck.hpp"
#include "dpe/ops.hpp"

using namespace dpe;

namespace {

// Independent oracle: brute-force stride-2 2x2 valid convolution,
// y[n,o,h,w] = sum_{c,i,j} w[o,c,i,j] * x[n,c,2h+i,2w+j], no bias.
template <typename S>
Tensor<S> conv_stride2_k2_ref(const Tensor<S>& x, const Tensor<S>& w) {
    const int64_t n = x.shape().dim(0), c = x.shape().dim(1);
    const int64_t h = x.shape().dim(2), ww = x.shape().dim(3);
    const int64_t o = w.shape().dim(0);
    Tensor<S> y = Tensor<S>::zeros(Shape({n, o, h / 2, ww / 2}));
    for (int64_t in = 0; in < n; ++in)
        for (int64_t io = 0; io < o; ++io)
            for (int64_t oh = 0; oh < h / 2; ++oh)
                for (int64_t ow = 0; ow < ww / 2; ++ow) {
                    S acc = 0;
                    for (int64_t ic = 0; ic < c; ++ic)
                        for (int64_t i = 0; i < 2; ++i)
                            for (int64_t j = 0; j < 2; ++j)
                                acc += w.at(io, ic, i, j) * x.at(in, ic, 2 * oh + i, 2 * ow + j);
                    y.mutable_data()[static_cast<size_t>(
                        y.shape().offset(in, io, oh, ow))] = acc;
                }
    return y;
}

template <typename S>
double inner(const Tensor<S>& a, const Tensor<S>& b) {
    double acc = 0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        acc += static_cast<double>(a.data()[static_cast<size_t>(i)]) *
               static_cast<double>(b.data()[static_cast<size_t>(i)]);
    }
    return acc;
}

template <typename S>
ConvParams<S> conv_from(Shape wshape, std::vector<S> w, int64_t out_ch) {
    ConvParams<S> p;
    p.weight = Tensor<S>::from_values(std::move(wshape), std::move(w));
    p.bias = Tensor<S>::zeros(Shape({out_ch}));
    return p;
}

}  // namespace

TEST_CASE("conv2d 1x1 scales values") {
    auto x = Tensor<float>::from_values(Shape({1, 1, 2, 2}), {1, 2, 3, 4});
    auto p = conv_from<float>(Shape({1, 1, 1, 1}), {2.0f}, 1);
    auto y = conv2d<float>(nullptr, x, p);
    CHECK(y.shape() == Shape({1, 1, 2, 2}));
    CHECK(y.data() == std::vector<float>{2, 4, 6, 8});
}

TEST_CASE("conv2d 3x3 identity kernel is the identity map") {
    // single channel
    auto x = Tensor<float>::from_values(Shape({1, 1, 2, 2}), {1, -2, 3, 4});
    std::vector<float> w(9, 0.0f);
    w[4] = 1.0f;  // center tap
    auto p = conv_from<float>(Shape({1, 1, 3, 3}), w, 1);
    CHECK(conv2d<float>(nullptr, x, p).data() == x.data());

    // multi-channel per-channel identity
    SeededRng rng(3);
    auto xc = random_normal<float>(Shape({2, 3, 4, 4}), rng);
    std::vector<float> wc(3 * 3 * 9, 0.0f);
    for (int64_t c = 0; c < 3; ++c) wc[static_cast<size_t>((c * 3 + c) * 9 + 4)] = 1.0f;
    auto pc = conv_from<float>(Shape({3, 3, 3, 3}), wc, 3);
    CHECK(conv2d<float>(nullptr, xc, pc).data() == xc.data());
}

TEST_CASE("conv2d 3x3 all-ones kernel on constant input counts the padded window") {
    auto x = Tensor<float>::ones(Shape({1, 1, 3, 3}));
    auto p = conv_from<float>(Shape({1, 1, 3, 3}), std::vector<float>(9, 1.0f), 1);
    auto y = conv2d<float>(nullptr, x, p);
    CHECK(y.data() == std::vector<float>{4, 6, 4, 6, 9, 6, 4, 6, 4});
}

TEST_CASE("conv2d contract violations") {
    auto x = Tensor<float>::ones(Shape({1, 2, 4, 4}));
    SeededRng rng(1);
    auto p3 = make_conv<float>(rng, 4, 3, 3);  // expects 3 input channels
    CHECK_THROWS_AS(conv2d<float>(nullptr, x, p3), Error);
    auto p5 = conv_from<float>(Shape({1, 2, 5, 5}), std::vector<float>(50, 0.0f), 1);
    CHECK_THROWS_AS(conv2d<float>(nullptr, x, p5), Error);  // unsupported kernel
}

TEST_CASE("conv2d is linear in x when bias is zero") {
    SeededRng rng(11);
    auto p = make_conv<float>(rng, 3, 2, 3);
    p.bias = Tensor<float>::zeros(Shape({3}));
    auto x1 = random_normal<float>(Shape({1, 2, 5, 5}), rng);
    auto x2 = random_normal<float>(Shape({1, 2, 5, 5}), rng);
    const float alpha = 0.7f, beta = -1.3f;
    auto mix = Tensor<float>::zeros(x1.shape());
    mix.mutable_array() = alpha * x1.array() + beta * x2.array();
    auto lhs = conv2d<float>(nullptr, mix, p);
    auto y1 = conv2d<float>(nullptr, x1, p);
    auto y2 = conv2d<float>(nullptr, x2, p);
    for (int64_t i = 0; i < lhs.numel(); ++i) {
        const float rhs = alpha * y1.data()[static_cast<size_t>(i)] +
                          beta * y2.data()[static_cast<size_t>(i)];
        CHECK(lhs.data()[static_cast<size_t>(i)] == doctest::Approx(rhs).epsilon(1e-5));
    }
}

TEST_CASE("conv_transpose2d single pixel broadcast") {
    auto x = Tensor<float>::from_values(Shape({1, 1, 1, 1}), {1.0f});
    auto p = conv_from<float>(Shape({1, 1, 2, 2}), {1, 1, 1, 1}, 1);
    auto y = conv_transpose2d<float>(nullptr, x, p);
    CHECK(y.shape() == Shape({1, 1, 2, 2}));
    CHECK(y.data() == std::vector<float>{1, 1, 1, 1});
}

TEST_CASE("conv_transpose2d places strided taps") {
    auto x = Tensor<float>::from_values(Shape({1, 1, 2, 2}), {1, 2, 3, 4});
    auto p = conv_from<float>(Shape({1, 1, 2, 2}), {1, 0, 0, 0}, 1);
    auto y = conv_transpose2d<float>(nullptr, x, p);
    CHECK(y.shape() == Shape({1, 1, 4, 4}));
    // inputs land at even (row, col), zero elsewhere
    std::vector<float> expect = {1, 0, 2, 0, 0, 0, 0, 0, 3, 0, 4, 0, 0, 0, 0, 0};
    CHECK(y.data() == expect);
}

TEST_CASE("conv_transpose2d is the adjoint of the stride-2 convolution") {
    SeededRng rng(2718);
    for (int trial = 0; trial < 100; ++trial) {
        const int64_t n = 1 + static_cast<int64_t>(rng.uniform_index(2));
        const int64_t c = 1 + static_cast<int64_t>(rng.uniform_index(3));
        const int64_t o = 1 + static_cast<int64_t>(rng.uniform_index(3));
        const int64_t h = 2 * (1 + static_cast<int64_t>(rng.uniform_index(4)));
        const int64_t w = 2 * (1 + static_cast<int64_t>(rng.uniform_index(4)));
        auto x = random_normal<float>(Shape({n, c, h, w}), rng);
        auto kernel = random_normal<float>(Shape({o, c, 2, 2}), rng);
        auto y = random_normal<float>(Shape({n, o, h / 2, w / 2}), rng);

        auto cx = conv_stride2_k2_ref(x, kernel);  // oracle side
        ConvParams<float> p;                       // same buffer, adjoint side
        p.weight = kernel;
        p.bias = Tensor<float>::zeros(Shape({c}));
        auto ty = conv_transpose2d<float>(nullptr, y, p);

        const double lhs = inner(cx, y);
        const double rhs = inner(x, ty);
        const double scale = std::max(1.0, std::max(std::abs(lhs), std::abs(rhs)));
        CHECK(std::abs(lhs - rhs) / scale < 1e-4);
    }
}

TEST_CASE("conv_transpose2d channel mismatch") {
    SeededRng rng(5);
    auto p = make_conv_transpose<float>(rng, 4, 2);
    CHECK_THROWS_AS(conv_transpose2d<float>(nullptr, Tensor<float>::ones(Shape({1, 3, 2, 2})), p),
                    Error);
}

TEST_CASE("batch_norm zero-variance channel maps to zero") {
    auto p = make_batch_norm<float>(1);
    auto x = Tensor<float>::full(Shape({2, 1, 2, 2}), 3.7f);
    auto y = batch_norm<float>(nullptr, x, p, true);
    for (float v : y.data()) CHECK(v == doctest::Approx(0.0f).epsilon(1e-6));
}

TEST_CASE("batch_norm hand normalization of {0,2} with eps") {
    auto p = make_batch_norm<float>(1);
    auto x = Tensor<float>::from_values(Shape({2, 1, 1, 1}), {0.0f, 2.0f});
    auto y = batch_norm<float>(nullptr, x, p, true);
    // mu = 1, biased var = 1: outputs -,+ 1/sqrt(1 + 1e-5)
    const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(y.data()[0] == doctest::Approx(-expect).epsilon(1e-6));
    CHECK(y.data()[1] == doctest::Approx(+expect).epsilon(1e-6));
    // running stats moved toward the batch stats with momentum 0.1
    CHECK(p.running_mean.data()[0] == doctest::Approx(0.1f * 1.0f).epsilon(1e-6));
    CHECK(p.running_var.data()[0] == doctest::Approx(0.9f * 1.0f + 0.1f * 1.0f).epsilon(1e-6));
}

TEST_CASE("batch_norm eval with identity statistics is near-identity") {
    auto p = make_batch_norm<float>(2);
    SeededRng rng(8);
    auto x = random_normal<float>(Shape({1, 2, 3, 3}), rng);
    auto y = batch_norm<float>(nullptr, x, p, false);
    for (int64_t i = 0; i < x.numel(); ++i) {
        CHECK(y.data()[static_cast<size_t>(i)] ==
              doctest::Approx(x.data()[static_cast<size_t>(i)]).epsilon(1e-4));
    }
    CHECK_THROWS_AS(batch_norm<float>(nullptr, Tensor<float>::ones(Shape({1, 3, 2, 2})), p, true),
                    Error);
}

TEST_CASE("batch_norm train output is standardized when variance dominates eps") {
    SeededRng rng(31);
    auto p = make_batch_norm<double>(3);
    auto x = random_normal<double>(Shape({4, 3, 8, 8}), rng, 2.0);
    auto y = batch_norm<double>(nullptr, x, p, true);
    const int64_t hw = 64, n = 4, m = n * hw;
    for (int64_t c = 0; c < 3; ++c) {
        double sum = 0, ss = 0;
        for (int64_t in = 0; in < n; ++in)
            for (int64_t i = 0; i < hw; ++i) {
                const double v = y.data()[static_cast<size_t>((in * 3 + c) * 64 + i)];
                sum += v;
                ss += v * v;
            }
        const double mean = sum / m;
        const double var = ss / m - mean * mean;
        CHECK(std::abs(mean) < 1e-5);
        CHECK(var > 1.0 - 1e-3);
        CHECK(var <= 1.0);
    }
}

TEST_CASE("relu basics") {
    auto x = Tensor<float>::from_values(Shape({3}), {-1.0f, 0.0f, 2.0f});
    CHECK(relu<float>(nullptr, x).data() == std::vector<float>{0, 0, 2});
    auto pos = Tensor<float>::from_values(Shape({3}), {0.5f, 1.0f, 7.0f});
    CHECK(relu<float>(nullptr, pos).data() == pos.data());
}

TEST_CASE("max_pool2 values and backward routing") {
    auto x = Tensor<float>::from_values(Shape({1, 1, 2, 2}), {1, 2, 3, 4});
    CHECK(max_pool2<float>(nullptr, x).data() == std::vector<float>{4});

    auto c = Tensor<float>::full(Shape({1, 2, 4, 4}), 1.5f);
    auto pooled = max_pool2<float>(nullptr, c);
    CHECK(pooled.shape() == Shape({1, 2, 2, 2}));
    for (float v : pooled.data()) CHECK(v == 1.5f);

    CHECK_THROWS_AS(max_pool2<float>(nullptr, Tensor<float>::ones(Shape({1, 1, 3, 4}))), Error);

    // gradient of mean(pool(x)) lands only on window maxima
    auto xd = Tensor<double>::from_values(Shape({1, 1, 2, 4}), {1, 9, 2, 3, 4, 5, 8, 7});
    xd.set_requires_grad(true);
    Tape<double> tape;
    auto grads = tape.backward(reduce_mean(&tape, max_pool2(&tape, xd)));
    auto g = grads.grad(xd);
    CHECK(g.data() == std::vector<double>{0, 0.5, 0, 0, 0, 0, 0.5, 0});

    // ties route to the first window position in row-major order
    auto tie = Tensor<double>::from_values(Shape({1, 1, 2, 2}), {2, 2, 2, 2});
    tie.set_requires_grad(true);
    Tape<double> tape2;
    auto g2 = tape2.backward(reduce_mean(&tape2, max_pool2(&tape2, tie))).grad(tie);
    CHECK(g2.data() == std::vector<double>{1, 0, 0, 0});
}

TEST_CASE("concat_channels shapes and slicing recovery") {
    SeededRng rng(4);
    auto a = random_normal<float>(Shape({1, 2, 4, 4}), rng);
    auto b = random_normal<float>(Shape({1, 3, 4, 4}), rng);
    auto c = concat_channels<float>(nullptr, a, b);
    CHECK(c.shape() == Shape({1, 5, 4, 4}));
    for (int64_t ch = 0; ch < 2; ++ch)
        for (int64_t h = 0; h < 4; ++h)
            for (int64_t w = 0; w < 4; ++w) CHECK(c.at(0, ch, h, w) == a.at(0, ch, h, w));
    for (int64_t ch = 0; ch < 3; ++ch)
        for (int64_t h = 0; h < 4; ++h)
            for (int64_t w = 0; w < 4; ++w) CHECK(c.at(0, 2 + ch, h, w) == b.at(0, ch, h, w));

    CHECK_THROWS_AS(concat_channels<float>(nullptr, a, Tensor<float>::ones(Shape({1, 1, 2, 2}))),
                    Error);
    CHECK_THROWS_AS(concat_channels<float>(nullptr, a, Tensor<float>::ones(Shape({2, 1, 4, 4}))),
                    Error);
}

TEST_CASE("sigmoid values and identities") {
    auto zero = Tensor<float>::zeros(Shape({1}));
    CHECK(sigmoid<float>(nullptr, zero).item() == doctest::Approx(0.5));

    SeededRng rng(6);
    auto x = random_normal<float>(Shape({1, 1, 4, 4}), rng, 3.0);
    auto s = sigmoid<float>(nullptr, x);
    auto neg = Tensor<float>::zeros(x.shape());
    neg.mutable_array() = -x.array();
    auto sneg = sigmoid<float>(nullptr, neg);
    for (int64_t i = 0; i < x.numel(); ++i) {
        CHECK(s.data()[static_cast<size_t>(i)] ==
              doctest::Approx(1.0f - sneg.data()[static_cast<size_t>(i)]).epsilon(1e-5));
    }

    // gradient at 0 is exactly 1/4
    auto z = Tensor<double>::zeros(Shape({1})).set_requires_grad(true);
    Tape<double> tape;
    auto g = tape.backward(reduce_sum(&tape, sigmoid(&tape, z))).grad(z);
    CHECK(g.data()[0] == doctest::Approx(0.25).epsilon(1e-12));
    const double err = finite_difference_check(
        [](Tape<double>* t, const Tensor<double>& v) { return reduce_sum(t, sigmoid(t, v)); },
        Tensor<double>::zeros(Shape({1})), 1e-5);
    CHECK(err < 1e-9);
}

TEST_CASE("bce_with_logits values") {
    auto z = Tensor<float>::zeros(Shape({1}));
    auto half = Tensor<float>::full(Shape({1}), 0.5f);
    CHECK(bce_with_logits<float>(nullptr, z, half).item() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-6));

    auto big = Tensor<float>::full(Shape({1}), 40.0f);
    auto one = Tensor<float>::ones(Shape({1}));
    const float saturated = bce_with_logits<float>(nullptr, big, one).item();
    CHECK(saturated >= 0.0f);
    CHECK(saturated < 1e-6f);

    CHECK_THROWS_AS(bce_with_logits<float>(nullptr, z, Tensor<float>::ones(Shape({2}))), Error);
    CHECK_THROWS_AS(bce_with_logits<float>(nullptr, z, Tensor<float>::full(Shape({1}), 1.5f)),
                    Error);
}

TEST_CASE("bce_with_logits matches the naive formula for moderate logits") {
    SeededRng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        auto z = random_uniform<double>(Shape({1, 1, 2, 4}), rng, -10.0, 10.0);
        auto t = random_uniform<double>(Shape({1, 1, 2, 4}), rng, 0.0, 1.0);
        double naive = 0;
        for (int64_t i = 0; i < z.numel(); ++i) {
            const double zi = z.data()[static_cast<size_t>(i)];
            const double ti = t.data()[static_cast<size_t>(i)];
            const double s = 1.0 / (1.0 + std::exp(-zi));
            naive += -(ti * std::log(s) + (1.0 - ti) * std::log(1.0 - s));
        }
        naive /= static_cast<double>(z.numel());
        CHECK(bce_with_logits<double>(nullptr, z, t).item() ==
              doctest::Approx(naive).epsilon(1e-6));
    }
}
