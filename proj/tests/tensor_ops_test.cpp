#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "avtca/errors.hpp"
#include "avtca/gradcheck.hpp"
#include "avtca/io.hpp"
#include "avtca/ops.hpp"
#include "test_util.hpp"

using namespace avtca;
using namespace avtca::ops;
using testutil::approx_equal;
using testutil::dot_with;
using testutil::random_param;
using testutil::random_tensor;

TEST_CASE("matmul examples") {
    // identity @ M = M
    auto I = TensorD::from({2, 2}, {1, 0, 0, 1});
    auto M = TensorD::from({2, 2}, {1, 2, 3, 4});
    CHECK(approx_equal(matmul(I, M), {1, 2, 3, 4}, 0.0));

    // [[1,2]] @ [[3],[4]] = [[11]]
    auto a = TensorD::from({1, 2}, {1, 2});
    auto b = TensorD::from({2, 1}, {3, 4});
    CHECK(matmul(a, b).item() == doctest::Approx(11.0));

    // zero matrix annihilates
    auto z = TensorD::zeros({2, 2});
    CHECK(approx_equal(matmul(z, M), {0, 0, 0, 0}, 0.0));

    CHECK_THROWS_AS(matmul(TensorD::zeros({2, 3}), TensorD::zeros({2, 3})), ShapeError);
    try {
        matmul(TensorD::zeros({2, 3}), TensorD::zeros({2, 3}));
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("(2,3)") != std::string::npos);  // names both shapes
    }
}

TEST_CASE("matmul broadcasts leading batch extents") {
    RngState rng(7);
    auto a = random_tensor<double>({3, 2, 4}, rng);
    auto b = random_tensor<double>({4, 5}, rng);
    auto y = matmul(a, b);
    REQUIRE(y.shape() == Shape{3, 2, 5});
    // batch slice 1 equals the unbatched product
    auto a1 = slice(a, {{1, 2}, {0, 2}, {0, 4}});
    auto y1 = matmul(reshape(a1, {2, 4}), b);
    for (int i = 0; i < 10; ++i)
        CHECK(y.data()[10 + i] == doctest::Approx(y1.data()[i]));
}

TEST_CASE("conv1d examples") {
    auto x = TensorD::from({1, 1, 3}, {1, 2, 3});
    auto pick = TensorD::from({1, 1, 3}, {0, 1, 0});
    auto y = conv1d(x, pick, TensorD(), 1, 0);
    REQUIRE(y.shape() == Shape{1, 1, 1});
    CHECK(y.item() == doctest::Approx(2.0));

    auto diff = TensorD::from({1, 1, 3}, {1, 0, -1});
    CHECK(conv1d(x, diff, TensorD(), 1, 0).item() == doctest::Approx(-2.0));

    auto zeros = TensorD::zeros({1, 1, 3});
    CHECK(approx_equal(conv1d(x, zeros, TensorD(), 1, 0), {0.0}, 0.0));

    // kernel larger than padded input
    CHECK_THROWS_AS(conv1d(x, TensorD::zeros({1, 1, 5}), TensorD(), 1, 0), ShapeError);
}

TEST_CASE("conv1d identity kernel reproduces input with same padding") {
    RngState rng(3);
    auto x = random_tensor<double>({2, 1, 7}, rng);
    auto w = TensorD::from({1, 1, 3}, {0, 1, 0});
    auto y = conv1d(x, w, TensorD(), 1, same_padding(3));
    REQUIRE(y.shape() == x.shape());
    for (size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d examples") {
    auto x = TensorD::from({1, 1, 2, 2}, {1, 2, 3, 4});
    auto unit = TensorD::from({1, 1, 1, 1}, {1});
    CHECK(approx_equal(conv2d(x, unit, TensorD(), 1, 0), {1, 2, 3, 4}, 0.0));

    auto ones = TensorD::from({1, 1, 2, 2}, {1, 1, 1, 1});
    CHECK(conv2d(x, ones, TensorD(), 1, 0).item() == doctest::Approx(10.0));

    // depthwise with per-channel identity kernels
    auto x2 = TensorD::from({1, 2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    auto wd = TensorD::from({2, 1, 1, 1}, {1, 1});
    auto yd = conv2d(x2, wd, TensorD(), 1, 0, 1, true);
    for (size_t i = 0; i < x2.data().size(); ++i) CHECK(yd.data()[i] == x2.data()[i]);

    // depthwise demands C_out == C_in
    CHECK_THROWS_AS(conv2d(x2, TensorD::zeros({3, 1, 1, 1}), TensorD(), 1, 0, 1, true),
                    ConfigError);
}

TEST_CASE("batch_norm examples") {
    std::vector<double> rm(1, 0.0), rv(1, 1.0);
    auto gamma = TensorD::from({1}, {1.0});
    auto beta = TensorD::from({1}, {0.0});

    // constant input, train mode -> zeros (epsilon guards the zero variance)
    auto c = TensorD::full({4, 1, 3}, 2.5);
    auto y = batch_norm(c, gamma, beta, rm, rv, 1, Mode::kTrain, 1e-5, 0.1);
    for (double v : y.data()) CHECK(v == doctest::Approx(0.0));

    // gamma = 0, beta = 5 -> all fives
    auto g0 = TensorD::from({1}, {0.0});
    auto b5 = TensorD::from({1}, {5.0});
    auto y2 = batch_norm(c, g0, b5, rm, rv, 1, Mode::kTrain, 1e-5, 0.1);
    for (double v : y2.data()) CHECK(v == doctest::Approx(5.0));

    // [-1, 1] normalizes to itself up to epsilon scaling
    auto pm = TensorD::from({2, 1, 1}, {-1.0, 1.0});
    auto y3 = batch_norm(pm, gamma, beta, rm, rv, 1, Mode::kTrain, 1e-5, 0.1);
    CHECK(y3.data()[0] == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(y3.data()[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("batch_norm train statistics invariant") {
    RngState rng(11);
    auto x = random_tensor<double>({8, 3, 5}, rng);
    std::vector<double> rm(3, 0.0), rv(3, 1.0);
    auto gamma = TensorD::from({3}, {1, 1, 1});
    auto beta = TensorD::from({3}, {0, 0, 0});
    auto y = batch_norm(x, gamma, beta, rm, rv, 1, Mode::kTrain, 1e-5, 0.1);
    for (int c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        int n = 0;
        for (int b = 0; b < 8; ++b)
            for (int l = 0; l < 5; ++l) {
                mean += y.data()[(b * 3 + c) * 5 + l];
                ++n;
            }
        mean /= n;
        for (int b = 0; b < 8; ++b)
            for (int l = 0; l < 5; ++l) {
                double d = y.data()[(b * 3 + c) * 5 + l] - mean;
                var += d * d;
            }
        var /= n;
        CHECK(std::abs(mean) < 1e-5);
        CHECK(std::abs(var - 1.0) < 1e-3);
    }
}

TEST_CASE("batch_norm eval uses running statistics") {
    std::vector<double> rm(2, 0.0), rv(2, 1.0);
    auto gamma = TensorD::from({2}, {1, 1});
    auto beta = TensorD::from({2}, {0, 0});
    RngState rng(5);
    auto x = random_tensor<double>({6, 2, 4}, rng);
    batch_norm(x, gamma, beta, rm, rv, 1, Mode::kTrain, 1e-5, 0.1);
    CHECK(rm[0] != 0.0);  // running stats moved
    auto z = TensorD::zeros({1, 2, 1});
    auto y = batch_norm(z, gamma, beta, rm, rv, 1, Mode::kEval, 1e-5, 0.1);
    for (int c = 0; c < 2; ++c)
        CHECK(y.data()[c] == doctest::Approx(-rm[c] / std::sqrt(rv[c] + 1e-5)));
}

TEST_CASE("activation examples") {
    auto x = TensorD::from({3}, {-1, 0, 2});
    CHECK(approx_equal(relu(x), {0, 0, 2}, 0.0));

    CHECK(gelu(TensorD::scalar(0.0)).item() == doctest::Approx(0.0));

    // tanh-approximation formula evaluated straight-line here
    double xv = 3.0;
    double inner = std::sqrt(2.0 / M_PI) * (xv + 0.044715 * xv * xv * xv);
    double expect = 0.5 * xv * (1.0 + std::tanh(inner));
    CHECK(gelu(TensorD::scalar(3.0)).item() == doctest::Approx(expect).epsilon(1e-12));
    CHECK(gelu(TensorD::scalar(3.0)).item() == doctest::Approx(2.9964).epsilon(2e-4));
}

TEST_CASE("pool examples") {
    auto x = TensorD::from({1, 1, 4}, {1, 3, 2, 5});
    CHECK(approx_equal(maxpool1d(x, 2, 2), {3, 5}, 0.0));

    auto c = TensorD::full({2, 3, 4, 4}, 7.5);
    auto g = global_avg_pool(c);
    REQUIRE(g.shape() == Shape{2, 3, 1, 1});
    for (double v : g.data()) CHECK(v == doctest::Approx(7.5));

    // global max of an ascending row is its last element
    auto asc = TensorD::from({1, 1, 6}, {0, 1, 2, 3, 4, 5});
    CHECK(maxpool1d(asc, 6, 1).item() == doctest::Approx(5.0));

    CHECK_THROWS_AS(maxpool1d(x, 5, 1), ShapeError);
}

TEST_CASE("fully_connected examples") {
    auto I = TensorD::from({2, 2}, {1, 0, 0, 1});
    auto x = TensorD::from({1, 2}, {3, 4});
    CHECK(approx_equal(fully_connected(x, I, TensorD()), {3, 4}, 0.0));

    auto w = TensorD::from({2, 1}, {1, 1});
    auto b = TensorD::from({1}, {0.5});
    auto ones = TensorD::from({1, 2}, {1, 1});
    CHECK(fully_connected(ones, w, b).item() == doctest::Approx(2.5));

    auto zero = TensorD::zeros({1, 2});
    CHECK(fully_connected(zero, w, b).item() == doctest::Approx(0.5));

    CHECK_THROWS_AS(fully_connected(TensorD::zeros({1, 3}), w, b), ShapeError);
}

TEST_CASE("softmax examples") {
    auto u = softmax(TensorD::from({3}, {0, 0, 0}), 0);
    for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0));

    auto y = softmax(TensorD::from({3}, {std::log(2.0), 0, 0}), 0);
    CHECK(y.data()[0] == doctest::Approx(0.5));
    CHECK(y.data()[1] == doctest::Approx(0.25));
    CHECK(y.data()[2] == doctest::Approx(0.25));

    // extreme spread must not overflow
    auto s = softmax(TensorD::from({2}, {3.0, 1003.0}), 0);
    CHECK(s.data()[0] == doctest::Approx(0.0));
    CHECK(s.data()[1] == doctest::Approx(1.0));
}

TEST_CASE("softmax rows sum to one across random inputs") {
    RngState rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        int rows = 1 + static_cast<int>(rng.below(4));
        int cols = 1 + static_cast<int>(rng.below(8));
        auto x = random_tensor<double>({rows, cols}, rng, -50.0, 50.0);
        auto y = softmax(x, 1);
        for (int r = 0; r < rows; ++r) {
            double total = 0.0;
            for (int c = 0; c < cols; ++c) {
                double v = y.data()[r * cols + c];
                CHECK(v >= 0.0);
                total += v;
            }
            CHECK(std::abs(total - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("dropout examples") {
    RngState rng(1);
    auto x = TensorD::from({4}, {1, 2, 3, 4});
    auto y = dropout(x, 0.0, rng, Mode::kTrain);
    for (size_t i = 0; i < 4; ++i) CHECK(y.data()[i] == x.data()[i]);

    auto ye = dropout(x, 0.7, rng, Mode::kEval);
    for (size_t i = 0; i < 4; ++i) CHECK(ye.data()[i] == x.data()[i]);

    // same RngState -> bit-identical masks
    RngState r1(99, 5), r2(99, 5);
    auto big = random_tensor<double>({64}, rng);
    auto m1 = dropout(big, 0.5, r1, Mode::kTrain);
    auto m2 = dropout(big, 0.5, r2, Mode::kTrain);
    for (size_t i = 0; i < 64; ++i) CHECK(m1.data()[i] == m2.data()[i]);
    CHECK(r1.counter == r2.counter);

    CHECK_THROWS_AS(dropout(x, 1.0, rng, Mode::kTrain), ConfigError);
}

TEST_CASE("reshape op examples") {
    RngState rng(8);
    auto x = random_tensor<double>({2, 3, 4}, rng);
    auto p = permute(x, {0, 2, 1});
    REQUIRE(p.shape() == Shape{2, 4, 3});
    CHECK(p.data()[0 * 12 + 1 * 3 + 2] == x.data()[0 * 12 + 2 * 4 + 1]);

    auto a = random_tensor<double>({1, 2, 28, 28}, rng);
    auto b = random_tensor<double>({1, 2, 28, 28}, rng);
    auto cat = concat<double>({a, b}, 1);
    REQUIRE(cat.shape() == Shape{1, 4, 28, 28});

    auto ones = TensorD::full({2, 3, 4}, 1.0);
    auto same = mul(x, ones);
    for (size_t i = 0; i < x.data().size(); ++i) CHECK(same.data()[i] == x.data()[i]);
}

TEST_CASE("permute composed with its inverse is the identity") {
    RngState rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        Shape shape = {1 + static_cast<int>(rng.below(3)), 1 + static_cast<int>(rng.below(4)),
                       1 + static_cast<int>(rng.below(3)), 1 + static_cast<int>(rng.below(2))};
        auto x = random_tensor<double>(shape, rng);
        std::vector<int> perm = {0, 1, 2, 3};
        for (int i = 3; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
        std::vector<int> inv(4);
        for (int i = 0; i < 4; ++i) inv[perm[i]] = i;
        auto back = permute(permute(x, perm), inv);
        REQUIRE(back.shape() == x.shape());
        for (size_t i = 0; i < x.data().size(); ++i) CHECK(back.data()[i] == x.data()[i]);
    }
}

TEST_CASE("concat of slices reconstructs the tensor bit-exactly") {
    RngState rng(17);
    auto x = random_tensor<double>({2, 6, 3}, rng);
    auto first = slice(x, {{0, 2}, {0, 2}, {0, 3}});
    auto mid = slice(x, {{0, 2}, {2, 5}, {0, 3}});
    auto last = slice(x, {{0, 2}, {5, 6}, {0, 3}});
    auto whole = concat<double>({first, mid, last}, 1);
    REQUIRE(whole.shape() == x.shape());
    for (size_t i = 0; i < x.data().size(); ++i) CHECK(whole.data()[i] == x.data()[i]);

    CHECK_THROWS_AS(slice(x, {{0, 2}, {2, 2}, {0, 3}}), ShapeError);
    CHECK_THROWS_AS(concat<double>({x, random_tensor<double>({2, 6, 4}, rng)}, 1), ShapeError);
}

TEST_CASE("grad_check examples") {
    // f(theta) = theta^2 at theta = 3: analytic 6 matches central difference
    RngState rng(4);
    auto theta = random_param<double>("theta", {1}, rng);
    theta->value.mutable_data()[0] = 3.0;
    auto f = [&]() { return square(theta->value); };
    auto report = grad_check<double>(f, {theta}, 1e-5, 1e-6);
    CHECK(report.max_rel_err < 1e-8);

    // constant function: zero gradient everywhere
    auto c = random_param<double>("c", {3}, rng);
    auto fc = [&]() { return TensorD::scalar(2.0); };
    auto rc = grad_check<double>(fc, {c}, 1e-5, 1e-9);
    CHECK(rc.max_rel_err == 0.0);

    // corrupted gradient is caught and names the element
    auto bad = random_param<double>("bad", {2}, rng);
    bool first_call = true;
    auto fbad = [&]() {
        // report a wrong analytic gradient by scaling the loss only on the
        // first (analytic) evaluation
        auto l = sum_all(square(bad->value));
        if (first_call) {
            first_call = false;
            return scale(l, 2.0);
        }
        return l;
    };
    CHECK_THROWS_AS(grad_check<double>(fbad, {bad}, 1e-5, 1e-4), GradCheckFailure);
}

TEST_CASE("grad_check: two-layer net with cross-entropy") {
    RngState rng(21);
    auto w1 = random_param<double>("w1", {4, 6}, rng);
    auto b1 = random_param<double>("b1", {6}, rng, -0.1, 0.1);
    auto w2 = random_param<double>("w2", {6, 3}, rng);
    auto b2 = random_param<double>("b2", {3}, rng, -0.1, 0.1);
    auto x = random_tensor<double>({5, 4}, rng);
    auto onehot = TensorD::zeros({5, 3});
    for (int i = 0; i < 5; ++i) onehot.mutable_data()[i * 3 + i % 3] = 1.0;

    auto f = [&]() {
        auto h = gelu(fully_connected(x, w1->value, b1->value));
        auto logits = fully_connected(h, w2->value, b2->value);
        auto probs = softmax(logits, 1);
        auto lp = log(clamp(probs, 1e-12, 1.0));
        return neg(scale(sum_all(mul(onehot, lp)), 1.0 / 5.0));
    };
    auto report = grad_check<double>(f, {w1, b1, w2, b2}, 1e-5, 1e-4);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("every op passes grad_check on randomized shapes") {
    RngState rng(31);
    auto run = [&](const char* name, auto make_loss,
                   std::vector<std::shared_ptr<Parameter<double>>> params) {
        INFO(name);
        auto report = grad_check<double>(make_loss, params, 1e-5, 1e-4);
        CHECK(report.max_rel_err < 1e-4);
    };

    {
        auto a = random_param<double>("a", {2, 3, 4}, rng);
        auto b = random_param<double>("b", {2, 4, 2}, rng);
        auto coeff = random_tensor<double>({2, 3, 2}, rng);
        run("matmul", [&]() { return dot_with(matmul(a->value, b->value), coeff); }, {a, b});
    }
    {
        auto x = random_param<double>("x", {2, 3, 8}, rng);
        auto w = random_param<double>("w", {4, 3, 3}, rng);
        auto b = random_param<double>("b", {4}, rng);
        auto coeff = random_tensor<double>({2, 4, 4}, rng);
        run("conv1d",
            [&]() { return dot_with(conv1d(x->value, w->value, b->value, 2, 1), coeff); },
            {x, w, b});
    }
    {
        auto x = random_param<double>("x", {2, 2, 6, 6}, rng);
        auto w = random_param<double>("w", {3, 2, 3, 3}, rng);
        auto b = random_param<double>("b", {3}, rng);
        auto coeff = random_tensor<double>({2, 3, 3, 3}, rng);
        run("conv2d",
            [&]() { return dot_with(conv2d(x->value, w->value, b->value, 2, 1), coeff); },
            {x, w, b});
    }
    {
        auto x = random_param<double>("x", {1, 3, 7, 7}, rng);
        auto w = random_param<double>("w", {3, 1, 3, 3}, rng);
        auto coeff = random_tensor<double>({1, 3, 7, 7}, rng);
        run("conv2d depthwise dilated",
            [&]() {
                return dot_with(conv2d(x->value, w->value, TensorD(), 1, 2, 2, true), coeff);
            },
            {x, w});
    }
    {
        auto x = random_param<double>("x", {4, 3, 5}, rng);
        auto gamma = random_param<double>("gamma", {3}, rng, 0.5, 1.5);
        auto beta = random_param<double>("beta", {3}, rng, -0.5, 0.5);
        auto coeff = random_tensor<double>({4, 3, 5}, rng);
        run("batch_norm train",
            [&]() {
                std::vector<double> rm(3, 0.0), rv(3, 1.0);
                return dot_with(batch_norm(x->value, gamma->value, beta->value, rm, rv, 1,
                                           Mode::kTrain, 1e-5, 0.1),
                                coeff);
            },
            {x, gamma, beta});
        std::vector<double> rm = {0.1, -0.2, 0.3}, rv = {1.1, 0.9, 1.4};
        run("batch_norm eval",
            [&]() {
                return dot_with(batch_norm(x->value, gamma->value, beta->value, rm, rv, 1,
                                           Mode::kEval, 1e-5, 0.1),
                                coeff);
            },
            {x, gamma, beta});
    }
    {
        auto x = random_param<double>("x", {2, 3, 4}, rng);
        auto coeff = random_tensor<double>({2, 3, 4}, rng);
        run("gelu", [&]() { return dot_with(gelu(x->value), coeff); }, {x});
        run("sigmoid", [&]() { return dot_with(sigmoid(x->value), coeff); }, {x});
        // relu kink: keep inputs away from zero
        for (auto& v : x->value.mutable_data())
            if (std::abs(v) < 0.05) v = 0.1;
        run("relu", [&]() { return dot_with(relu(x->value), coeff); }, {x});
    }
    {
        auto x = random_param<double>("x", {2, 2, 6}, rng);
        auto coeff = random_tensor<double>({2, 2, 3}, rng);
        run("maxpool1d", [&]() { return dot_with(maxpool1d(x->value, 2, 2), coeff); }, {x});
    }
    {
        auto x = random_param<double>("x", {2, 2, 4, 4}, rng);
        auto cmax = random_tensor<double>({2, 2, 2, 2}, rng);
        auto cavg = random_tensor<double>({2, 2, 2, 2}, rng);
        auto cgap = random_tensor<double>({2, 2, 1, 1}, rng);
        run("maxpool2d", [&]() { return dot_with(maxpool2d(x->value, 2, 2), cmax); }, {x});
        run("avgpool2d", [&]() { return dot_with(avgpool2d(x->value, 2, 2), cavg); }, {x});
        run("global_avg_pool", [&]() { return dot_with(global_avg_pool(x->value), cgap); }, {x});
    }
    {
        auto x = random_param<double>("x", {3, 5}, rng);
        auto coeff = random_tensor<double>({3, 5}, rng);
        run("softmax", [&]() { return dot_with(softmax(x->value, 1), coeff); }, {x});
    }
    {
        auto x = random_param<double>("x", {2, 3, 4}, rng);
        auto cperm = random_tensor<double>({4, 2, 3}, rng);
        auto cslice = random_tensor<double>({2, 2, 2}, rng);
        run("permute", [&]() { return dot_with(permute(x->value, {2, 0, 1}), cperm); }, {x});
        run("slice",
            [&]() { return dot_with(slice(x->value, {{0, 2}, {1, 3}, {2, 4}}), cslice); }, {x});
        auto creshape = random_tensor<double>({6, 4}, rng);
        run("reshape", [&]() { return dot_with(reshape(x->value, {6, 4}), creshape); }, {x});
    }
    {
        auto a = random_param<double>("a", {2, 1, 4}, rng);
        auto b = random_param<double>("b", {1, 3, 4}, rng);
        auto coeff = random_tensor<double>({2, 3, 4}, rng);
        run("add broadcast", [&]() { return dot_with(add(a->value, b->value), coeff); }, {a, b});
        run("mul broadcast", [&]() { return dot_with(mul(a->value, b->value), coeff); }, {a, b});
        auto bpos = random_param<double>("bpos", {1, 3, 4}, rng, 0.5, 2.0);
        run("div broadcast", [&]() { return dot_with(div(a->value, bpos->value), coeff); },
            {a, bpos});
    }
    {
        auto a = random_param<double>("a", {2, 2, 3}, rng);
        auto b = random_param<double>("b", {2, 3, 3}, rng);
        auto coeff = random_tensor<double>({2, 5, 3}, rng);
        run("concat",
            [&]() { return dot_with(concat<double>({a->value, b->value}, 1), coeff); }, {a, b});
    }
    {
        auto x = random_param<double>("x", {3, 4}, rng);
        auto csum = random_tensor<double>({3, 1}, rng);
        run("sum keepdims", [&]() { return dot_with(sum(x->value, {1}, true), csum); }, {x});
        auto cmean = random_tensor<double>({4}, rng);
        run("mean", [&]() { return dot_with(mean(x->value, {0}, false), cmean); }, {x});
        auto cmax = random_tensor<double>({3}, rng);
        run("max_reduce", [&]() { return dot_with(max_reduce(x->value, 1, false), cmax); }, {x});
    }
}

TEST_CASE("AVT1 round trip") {
    RngState rng(77);
    auto x = random_tensor<float>({3, 2, 5}, rng);
    auto path = std::filesystem::temp_directory_path() / "avtca_io_test.avt1";
    io::save_tensor(path.string(), x);
    auto y = io::load_tensor<float>(path.string());
    REQUIRE(y.shape() == x.shape());
    for (size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(io::read_avt1_file("/nonexistent/avtca.avt1"), DataError);
}

TEST_CASE("gradient accumulates across shared subexpressions") {
    RngState rng(55);
    auto x = random_param<double>("x", {3}, rng);
    // f = sum(x*x + x): df/dx = 2x + 1
    auto f = [&]() { return sum_all(add(square(x->value), x->value)); };
    x->value.zero_grad();
    auto loss = f();
    backward(loss);
    for (int i = 0; i < 3; ++i)
        CHECK(x->value.grad()[i] == doctest::Approx(2.0 * x->value.data()[i] + 1.0));
}
