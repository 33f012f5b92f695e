#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dpe/autodiff.hpp"
#include "dpe/blocks.hpp"
#include "dpe/gradcheck.hpp"
#include "dpe/ops.hpp"
#include "dpe/rng.hpp"
#include "dpe/tensor.hpp"
#include "dpe/tensor_io.hpp"

using namespace dpe;

TEST_CASE("shape invariants") {
    CHECK(Shape({1, 2, 3, 4}).numel() == 24);
    CHECK(Shape({5}).rank() == 1);
    CHECK_THROWS_AS(Shape({1, 2, 3, 4, 5}), Error);  // rank > 4
    CHECK_THROWS_AS(Shape({0, 2}), Error);           // extent < 1
    CHECK_THROWS_AS(Shape({-3}), Error);
    // element count must not overflow the index type
    CHECK_THROWS_AS(Shape({int64_t(1) << 40, int64_t(1) << 40}), Error);
}

TEST_CASE("tensor construction") {
    auto z = Tensor<float>::full(Shape({1, 1, 2, 2}), 0.0f);
    CHECK(z.numel() == 4);
    for (float v : z.data()) CHECK(v == 0.0f);
    CHECK_FALSE(z.requires_grad());

    auto t = Tensor<float>::from_values(Shape({1, 1, 1, 3}), {1.0f, 2.0f, 3.0f});
    CHECK(t.data()[0] == 1.0f);
    CHECK(t.data()[1] == 2.0f);
    CHECK(t.data()[2] == 3.0f);

    CHECK_THROWS_AS(Tensor<float>::from_values(Shape({1, 1, 2, 2}), {1.0f, 2.0f, 3.0f}), Error);
    CHECK_THROWS_AS(Tensor<float>::full(Shape({2}), std::nanf("")), Error);
}

TEST_CASE("elementwise add") {
    auto a = Tensor<float>::from_values(Shape({2}), {1.0f, 2.0f});
    auto b = Tensor<float>::from_values(Shape({2}), {3.0f, 4.0f});
    auto c = add<float>(nullptr, a, b);
    CHECK(c.data()[0] == 4.0f);
    CHECK(c.data()[1] == 6.0f);

    auto zeros = Tensor<float>::zeros(a.shape());
    auto same = add<float>(nullptr, a, zeros);
    CHECK(same.data() == a.data());

    CHECK_THROWS_AS(add<float>(nullptr, a, Tensor<float>::zeros(Shape({3}))), Error);

    // non-finite results are an error, never silent
    auto big = Tensor<float>::full(Shape({2}), 3e38f);
    CHECK_THROWS_AS(add<float>(nullptr, big, big), Error);
}

TEST_CASE("add gradient is all-ones, against central differences") {
    SeededRng rng(7);
    auto a = random_normal<double>(Shape({1, 1, 3, 3}), rng);
    auto b = random_normal<double>(Shape({1, 1, 3, 3}), rng);

    Tape<double> tape;
    auto al = a.clone().set_requires_grad(true);
    auto loss = reduce_sum(&tape, add(&tape, al, b));
    auto grads = tape.backward(loss);
    auto ga = grads.grad(al);
    for (double g : ga.data()) CHECK(g == doctest::Approx(1.0).epsilon(1e-12));

    const double err = finite_difference_check(
        [&](Tape<double>* t, const Tensor<double>& v) { return reduce_sum(t, add(t, v, b)); },
        a, 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("reduce_mean values and gradient") {
    auto t = Tensor<float>::from_values(Shape({4}), {1.0f, 2.0f, 3.0f, 4.0f});
    CHECK(reduce_mean<float>(nullptr, t).item() == doctest::Approx(2.5));

    auto c = Tensor<float>::full(Shape({2, 3}), 1.25f);
    CHECK(reduce_mean<float>(nullptr, c).item() == doctest::Approx(1.25));

    SeededRng rng(9);
    auto x = random_normal<double>(Shape({1, 1, 2, 4}), rng);
    const double err = finite_difference_check(
        [](Tape<double>* t, const Tensor<double>& v) { return reduce_mean(t, v); }, x, 1e-5);
    CHECK(err < 1e-10);

    Tape<double> tape;
    auto xl = x.clone().set_requires_grad(true);
    auto grads = tape.backward(reduce_mean(&tape, xl));
    auto gx = grads.grad(xl);
    for (double g : gx.data()) CHECK(g == doctest::Approx(1.0 / 8).epsilon(1e-12));
}

TEST_CASE("backward: mean over (1,1,2,2) gives 0.25 everywhere") {
    auto x = Tensor<double>::from_values(Shape({1, 1, 2, 2}), {1.0, -2.0, 3.0, 0.5});
    x.set_requires_grad(true);
    Tape<double> tape;
    auto grads = tape.backward(reduce_mean(&tape, x));
    auto gx = grads.grad(x);
    for (double g : gx.data()) CHECK(g == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("backward: diamond graph accumulates both paths") {
    SeededRng rng(21);
    // keep |x| >= 0.3 so the relu branch is differentiable at every entry
    auto x = random_uniform<double>(Shape({1, 1, 2, 3}), rng, 0.3, 1.2);
    for (size_t i = 1; i < x.mutable_data().size(); i += 2) x.mutable_data()[i] *= -1.0;
    x.set_requires_grad(true);

    Tape<double> tape;
    auto y = add(&tape, relu(&tape, x), sigmoid(&tape, x));
    auto grads = tape.backward(reduce_sum(&tape, y));
    auto g = grads.grad(x);
    for (int64_t i = 0; i < x.numel(); ++i) {
        const double xi = x.data()[static_cast<size_t>(i)];
        const double s = 1.0 / (1.0 + std::exp(-xi));
        const double expect = (xi > 0 ? 1.0 : 0.0) + s * (1.0 - s);
        CHECK(g.data()[static_cast<size_t>(i)] == doctest::Approx(expect).epsilon(1e-12));
    }

    const double err = finite_difference_check(
        [](Tape<double>* t, const Tensor<double>& v) {
            return reduce_sum(t, add(t, relu(t, v), sigmoid(t, v)));
        },
        x, 1e-5);
    CHECK(err < 1e-8);

    // the same tensor used twice accumulates additively
    Tape<double> tape2;
    auto x2 = Tensor<double>::from_values(Shape({2}), {1.5, -0.5}).set_requires_grad(true);
    auto grads2 = tape2.backward(reduce_sum(&tape2, add(&tape2, x2, x2)));
    auto g2 = grads2.grad(x2);
    for (double gi : g2.data()) CHECK(gi == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("backward errors") {
    auto x = Tensor<double>::from_values(Shape({1, 1, 2, 2}), {1.0, 2.0, 3.0, 4.0});
    x.set_requires_grad(true);
    Tape<double> tape;
    auto y = add(&tape, x, x);
    CHECK_THROWS_AS(tape.backward(y), Error);  // not scalar
    auto off_graph = Tensor<double>::scalar(1.0);
    CHECK_THROWS_AS(tape.backward(off_graph), Error);  // not on graph
}

TEST_CASE("backward: unused leaf has zero gradient") {
    auto x = Tensor<double>::from_values(Shape({2}), {1.0, 2.0}).set_requires_grad(true);
    auto unused = Tensor<double>::from_values(Shape({2}), {5.0, 6.0}).set_requires_grad(true);
    Tape<double> tape;
    auto grads = tape.backward(reduce_mean(&tape, x));
    CHECK_FALSE(grads.has(unused));
    auto gu = grads.grad(unused);
    for (double g : gu.data()) CHECK(g == 0.0);
}

TEST_CASE("finite_difference_check contracts") {
    SeededRng rng(33);
    auto x = random_normal<double>(Shape({1, 1, 3, 3}), rng);

    // linear function: exact
    const double lin_err = finite_difference_check(
        [](Tape<double>* t, const Tensor<double>& v) { return reduce_mean(t, v); }, x, 1e-5);
    CHECK(lin_err < 1e-10);

    // mean(relu(x)) with entries away from zero
    auto xs = random_uniform<double>(Shape({1, 1, 3, 3}), rng, 0.3, 1.5);
    for (size_t i = 0; i < xs.mutable_data().size(); i += 2) xs.mutable_data()[i] *= -1.0;
    const double relu_err = finite_difference_check(
        [](Tape<double>* t, const Tensor<double>& v) { return reduce_mean(t, relu(t, v)); },
        xs, 1e-5);
    CHECK(relu_err < 1e-6);

    // BCE through a one-block network
    SeededRng wrng(5);
    auto block = make_single_block<double>(wrng, 1);
    auto targets = random_uniform<double>(Shape({1, 1, 4, 4}), wrng, 0.1, 0.9);
    auto x1 = random_normal<double>(Shape({1, 1, 4, 4}), rng);
    const double net_err = finite_difference_check(
        [&](Tape<double>* t, const Tensor<double>& v) {
            return bce_with_logits(t, single_block_forward(t, v, block, true), targets);
        },
        x1, 1e-5);
    CHECK(net_err < 1e-5);

    // contract violations
    CHECK_THROWS_AS(finite_difference_check(
                        [](Tape<double>* t, const Tensor<double>& v) { return add(t, v, v); },
                        x, 1e-5),
                    Error);  // non-scalar f
    CHECK_THROWS_AS(finite_difference_check(
                        [](Tape<double>* t, const Tensor<double>& v) { return reduce_mean(t, v); },
                        x, 1e-2),
                    Error);  // eps out of range
}

TEST_CASE("tape replay determinism") {
    SeededRng rng(77);
    auto x = random_normal<float>(Shape({1, 2, 4, 4}), rng);
    auto run = [&]() {
        Tape<float> tape;
        auto xl = x.clone().set_requires_grad(true);
        auto y = relu(&tape, add(&tape, xl, x));
        auto loss = reduce_mean(&tape, y);
        auto grads = tape.backward(loss);
        return std::make_pair(loss.item(), grads.grad(xl).data());
    };
    auto [l1, g1] = run();
    auto [l2, g2] = run();
    CHECK(l1 == l2);
    CHECK(g1 == g2);
}

TEST_CASE("seeded rng is reproducible and forks diverge") {
    SeededRng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    SeededRng c(42);
    SeededRng f0 = c.fork(0), f1 = c.fork(1);
    CHECK(f0.next_u64() != f1.next_u64());
    SeededRng d(43);
    CHECK(SeededRng(42).uniform() != d.uniform());
    SeededRng u(7);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("DPET tensor file round trip is bit-exact") {
    SeededRng rng(123);
    auto t = random_normal<float>(Shape({2, 3, 4, 5}), rng);
    const std::string path = "tensor_roundtrip.dpet";
    write_tensor_file(path, t);
    auto back = read_tensor_file(path);
    CHECK(back.shape() == t.shape());
    CHECK(back.data() == t.data());

    // re-serialization produces identical bytes
    std::ostringstream s1(std::ios::binary), s2(std::ios::binary);
    write_tensor(s1, t);
    write_tensor(s2, back);
    CHECK(s1.str() == s2.str());

    // corrupt magic
    {
        std::ofstream os("tensor_bad.dpet", std::ios::binary);
        os << "NOPE" << std::string(16, '\0');
    }
    CHECK_THROWS_AS(read_tensor_file("tensor_bad.dpet"), Error);

    // truncated payload
    {
        std::ostringstream full(std::ios::binary);
        write_tensor(full, t);
        std::ofstream os("tensor_trunc.dpet", std::ios::binary);
        os << full.str().substr(0, full.str().size() / 2);
    }
    CHECK_THROWS_AS(read_tensor_file("tensor_trunc.dpet"), Error);
    std::remove(path.c_str());
    std::remove("tensor_bad.dpet");
    std::remove("tensor_trunc.dpet");
}
