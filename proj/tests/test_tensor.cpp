#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "msnet/error.hpp"
#include "msnet/gradcheck.hpp"
#include "msnet/ops.hpp"
#include "msnet/tensor.hpp"

using namespace msnet;

namespace {

Tensor uniform(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (double& x : v) x = dist(rng);
    return Tensor::from_values(shape, std::move(v));
}

}  // namespace

TEST_CASE("conv2d box sum") {
    Tensor in = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor b = Tensor::zeros({1});
    Tensor out = conv2d(in, w, b, 1, 1);
    CHECK(out.shape() == Shape{1, 1, 3, 3});
    CHECK(out.at4(0, 0, 1, 1) == doctest::Approx(9.0));
    CHECK(out.at4(0, 0, 0, 0) == doctest::Approx(4.0));
    CHECK(out.at4(0, 0, 0, 2) == doctest::Approx(4.0));
    CHECK(out.at4(0, 0, 2, 2) == doctest::Approx(4.0));
    CHECK(out.at4(0, 0, 0, 1) == doctest::Approx(6.0));
}

TEST_CASE("conv2d identity kernel is bit-exact") {
    std::mt19937_64 rng(11);
    Tensor in = uniform({2, 3, 6, 6}, rng);
    std::vector<double> wv(3 * 3 * 3 * 3, 0.0);
    // center tap of the matching channel only
    for (int c = 0; c < 3; ++c) wv[(static_cast<std::size_t>(c) * 3 + c) * 9 + 4] = 1.0;
    Tensor w = Tensor::from_values({3, 3, 3, 3}, std::move(wv));
    Tensor b = Tensor::zeros({3});
    Tensor out = conv2d(in, w, b, 1, 1);
    REQUIRE(out.shape() == in.shape());
    for (std::size_t i = 0; i < in.values().size(); ++i) CHECK(out.values()[i] == in.values()[i]);
}

TEST_CASE("conv2d rejects channel mismatch with a descriptive error") {
    Tensor in = Tensor::zeros({1, 2, 4, 4});
    Tensor w = Tensor::zeros({3, 4, 3, 3});
    Tensor b = Tensor::zeros({3});
    CHECK_THROWS_WITH_AS(conv2d(in, w, b, 1, 1),
                         doctest::Contains("input channels"), Error);
}

TEST_CASE("conv2d input gradient matches finite differences") {
    std::mt19937_64 rng(7);
    Tensor in = uniform({1, 2, 4, 4}, rng);
    Tensor w = uniform({3, 2, 3, 3}, rng);
    Tensor b = uniform({3}, rng, -0.5, 0.5);
    auto report = gradcheck([&](const Tensor& x) { return conv2d(x, w, b, 1, 1); }, in, 1e-5, 1e-6);
    CHECK(report.pass);
    CHECK(report.max_rel_error < 1e-6);
    CHECK(report.excluded == 0);
}

TEST_CASE("relu forward and backward") {
    Tensor x = Tensor::from_values({3}, {-1.0, 0.0, 2.0});
    Tensor y = relu(x);
    CHECK(y.values() == std::vector<double>{0.0, 0.0, 2.0});

    Tensor pos = Tensor::from_values({4}, {0.5, 1.0, 0.0, 3.0});
    CHECK(relu(pos).values() == pos.values());

    Tensor leaf = Tensor::from_values({2}, {-1.0, 2.0}, true);
    backward(sum(relu(leaf)));
    CHECK(leaf.grad() == std::vector<double>{0.0, 1.0});
}

TEST_CASE("sub_abs basics") {
    Tensor a = Tensor::from_values({2}, {1.0, 3.0});
    Tensor b = Tensor::from_values({2}, {2.0, 1.0});
    CHECK(sub_abs(a, b).values() == std::vector<double>{1.0, 2.0});
    CHECK(sub_abs(b, a).values() == sub_abs(a, b).values());

    Tensor same = Tensor::from_values({3}, {0.5, -0.25, 4.0});
    Tensor zeroed = sub_abs(same, same);
    for (double v : zeroed.values()) CHECK(v == 0.0);

    Tensor c = Tensor::from_values({2}, {1.0, 3.0});
    Tensor d = Tensor::from_values({3}, {1.0, 2.0, 3.0});
    CHECK_THROWS_AS(sub_abs(c, d), Error);
}

TEST_CASE("sub_abs symmetry property") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor a = uniform({2, 1, 3, 3}, rng);
        Tensor b = uniform({2, 1, 3, 3}, rng);
        CHECK(sub_abs(a, b).values() == sub_abs(b, a).values());
    }
}

TEST_CASE("sub_abs gradient away from zero differences") {
    std::mt19937_64 rng(3);
    Tensor b = uniform({2, 2}, rng);
    Tensor a = add_scalar(b, 0.7).detached_copy();  // constant positive offset, no kinks
    auto report = gradcheck([&](const Tensor& x) { return sub_abs(x, b); }, a, 1e-5, 1e-6);
    CHECK(report.pass);
    CHECK(report.excluded == 0);
}

TEST_CASE("add, sum and mean") {
    Tensor x = Tensor::from_values({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor zero = Tensor::zeros({2, 2});
    CHECK(add(x, zero).values() == x.values());
    CHECK(sum(Tensor::full({2, 2}, 1.0)).item() == 4.0);

    Tensor leaf = Tensor::from_values({4}, {1.0, 2.0, 3.0, 4.0}, true);
    backward(mean(leaf));
    for (double g : leaf.grad()) CHECK(g == doctest::Approx(0.25));
}

TEST_CASE("sigmoid values and symmetry") {
    CHECK(sigmoid(Tensor::zeros({1})).item() == 0.5);
    std::mt19937_64 rng(5);
    Tensor x = uniform({32}, rng, -20.0, 20.0);
    Tensor s1 = sigmoid(x);
    Tensor s2 = sigmoid(mul_scalar(x, -1.0));
    for (std::size_t i = 0; i < s1.values().size(); ++i)
        CHECK(std::fabs(s1.values()[i] + s2.values()[i] - 1.0) < 1e-12);
    // stays finite at large magnitudes
    Tensor big = Tensor::from_values({2}, {700.0, -700.0});
    CHECK(sigmoid(big).values()[0] == doctest::Approx(1.0));
    CHECK(sigmoid(big).values()[1] == doctest::Approx(0.0));
}

TEST_CASE("sigmoid gradient at 0.3") {
    Tensor x = Tensor::from_values({1}, {0.3});
    auto report = gradcheck([](const Tensor& t) { return sigmoid(t); }, x, 1e-5, 1e-8);
    CHECK(report.pass);
}

TEST_CASE("maxpool2 forward, ties and errors") {
    Tensor x = Tensor::from_values({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    CHECK(maxpool2(x).values() == std::vector<double>{4.0});

    // constant input: gradient goes to the first window position
    Tensor flat = Tensor::full({1, 1, 2, 2}, 3.0, true);
    backward(sum(maxpool2(flat)));
    CHECK(flat.grad() == std::vector<double>{1.0, 0.0, 0.0, 0.0});

    CHECK_THROWS_WITH_AS(maxpool2(Tensor::zeros({1, 1, 3, 4})), doctest::Contains("odd"), Error);
}

TEST_CASE("maxpool2 gradient on tie-free input") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor x;
        for (;;) {
            x = uniform({1, 1, 4, 4}, rng);
            bool ok = true;
            for (int oy = 0; oy < 2; ++oy)
                for (int ox = 0; ox < 2; ++ox) {
                    double best = -10, second = -10;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const double v = x.at4(0, 0, 2 * oy + dy, 2 * ox + dx);
                            if (v > best) {
                                second = best;
                                best = v;
                            } else if (v > second)
                                second = v;
                        }
                    if (best - second < 1e-3) ok = false;
                }
            if (ok) break;
        }
        auto report = gradcheck([](const Tensor& t) { return maxpool2(t); }, x, 1e-5, 1e-6);
        CHECK(report.pass);
    }
}

TEST_CASE("avgpool_window semantics") {
    // k=1 is the identity
    std::mt19937_64 rng(13);
    Tensor x = uniform({1, 1, 4, 4}, rng);
    CHECK(avgpool_window(x, 1).values() == x.values());

    // 3x3 ones with k=3: center sees the full window, corners 4 of 9
    Tensor ones = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor pooled = avgpool_window(ones, 3);
    CHECK(pooled.at4(0, 0, 1, 1) == doctest::Approx(1.0));
    CHECK(pooled.at4(0, 0, 0, 0) == doctest::Approx(4.0 / 9.0));
    CHECK(pooled.at4(0, 0, 2, 2) == doctest::Approx(4.0 / 9.0));
    CHECK(pooled.at4(0, 0, 0, 1) == doctest::Approx(6.0 / 9.0));

    // constant input far from borders keeps the constant
    Tensor big = Tensor::full({1, 1, 7, 7}, 2.5);
    CHECK(avgpool_window(big, 3).at4(0, 0, 3, 3) == doctest::Approx(2.5));

    CHECK_THROWS_AS(avgpool_window(x, 2), Error);

    auto report = gradcheck([](const Tensor& t) { return avgpool_window(t, 3); }, x, 1e-5, 1e-7);
    CHECK(report.pass);
}

TEST_CASE("upsample2 forward and gradient") {
    Tensor x = Tensor::from_values({1, 1, 1, 1}, {1.0});
    Tensor up = upsample2(x);
    CHECK(up.shape() == Shape{1, 1, 2, 2});
    for (double v : up.values()) CHECK(v == 1.0);

    // a sum downstream sends each source pixel 4x its broadcast weight
    Tensor leaf = Tensor::from_values({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0}, true);
    backward(sum(mul_scalar(upsample2(leaf), 0.5)));
    for (double g : leaf.grad()) CHECK(g == doctest::Approx(4.0 * 0.5));

    std::mt19937_64 rng(17);
    Tensor r = uniform({1, 1, 2, 2}, rng);
    auto report = gradcheck([](const Tensor& t) { return upsample2(t); }, r, 1e-5, 1e-8);
    CHECK(report.pass);
}

TEST_CASE("backward basics") {
    Tensor x = Tensor::from_values({3}, {1.0, -2.0, 3.0}, true);
    backward(sum(x));
    CHECK(x.grad() == std::vector<double>{1.0, 1.0, 1.0});

    x.zero_grad();
    backward(sum(relu(x)));
    CHECK(x.grad() == std::vector<double>{1.0, 0.0, 1.0});

    CHECK_THROWS_WITH_AS(backward(x), doctest::Contains("scalar"), Error);
}

TEST_CASE("backward accumulates across calls without zero_grad") {
    Tensor x = Tensor::from_values({2}, {1.0, 2.0}, true);
    Tensor loss = sum(mul_scalar(x, 3.0));
    backward(loss);
    backward(loss);
    CHECK(x.grad() == std::vector<double>{6.0, 6.0});
    x.zero_grad();
    CHECK(x.grad() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("backward visits each node exactly once") {
    Tensor x = Tensor::from_values({2}, {1.0, 2.0}, true);
    Tensor shared = relu(x);
    Tensor left = mul_scalar(shared, 2.0);
    Tensor right = mul_scalar(shared, 3.0);
    Tensor loss = sum(add(left, right));
    auto stats = backward(loss);
    // nodes: loss, add, left, right, shared, x
    CHECK(stats.nodes_visited == 6);
    CHECK(shared.backward_visits() == 1);
    CHECK(left.backward_visits() == 1);
    CHECK(x.backward_visits() == 1);
    // both branches reached x through the shared node exactly once
    CHECK(x.grad() == std::vector<double>{5.0, 5.0});
}

TEST_CASE("composite conv-relu-mean graph matches finite differences") {
    std::mt19937_64 rng(23);
    Tensor w = uniform({2, 1, 3, 3}, rng);
    Tensor b = uniform({2}, rng, -0.1, 0.1);
    Tensor in = uniform({1, 1, 4, 4}, rng);
    auto fn = [&](const Tensor& x) { return mean(relu(conv2d(x, w, b, 1, 1))); };
    auto report = gradcheck(fn, in, 1e-5, 1e-5);
    CHECK(report.pass);
}

TEST_CASE("gradcheck classifications") {
    // linear graph: error near machine epsilon
    std::mt19937_64 rng(29);
    Tensor x = uniform({4}, rng);
    auto linear = gradcheck([](const Tensor& t) { return mul_scalar(add_scalar(t, 1.0), 2.0); }, x,
                            1e-5, 1e-9);
    CHECK(linear.pass);
    CHECK(linear.max_rel_error < 1e-9);

    // conv2d graph: strictly below 1e-6
    Tensor in = uniform({1, 2, 4, 4}, rng);
    Tensor w = uniform({2, 2, 3, 3}, rng);
    Tensor b = uniform({2}, rng, -0.5, 0.5);
    auto conv = gradcheck([&](const Tensor& t) { return conv2d(t, w, b, 1, 1); }, in, 1e-5, 1e-6);
    CHECK(conv.pass);

    // sub_abs at a zero-difference point is flagged as excluded
    Tensor a = Tensor::from_values({3}, {1.0, 2.0, 3.0});
    Tensor same = a.detached_copy();
    auto kinked = gradcheck([&](const Tensor& t) { return sub_abs(t, same); }, a, 1e-5, 1e-6);
    CHECK(kinked.excluded == 3);
    CHECK(kinked.checked == 0);
}

TEST_CASE("tensor invariants") {
    Tensor t = Tensor::zeros({2, 3, 4, 4}, true);
    CHECK(t.numel() == 96);
    CHECK(static_cast<std::int64_t>(t.values().size()) == shape_numel(t.shape()));
    t.zero_grad();
    CHECK(t.grad().size() == t.values().size());
    for (double g : t.grad()) CHECK(g == 0.0);

    CHECK_THROWS_AS(Tensor::from_values({2, 2}, {1.0}), Error);
    CHECK_THROWS_AS(Tensor::zeros({0, 2}), Error);
}
