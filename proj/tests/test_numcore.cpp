#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "alm/errors.hpp"
#include "alm/fdcheck.hpp"
#include "alm/graph.hpp"
#include "alm/rng.hpp"
#include "alm/tensor.hpp"

using namespace alm;

namespace {
Tensor random_tensor(std::vector<std::int64_t> shape, Rng& rng, double std_dev = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.normal(0.0, std_dev);
    return t;
}
}  // namespace

TEST_CASE("tensor shape/data invariant") {
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
    CHECK(Tensor({2, 2}, {1, 2, 3, 4}).at(1, 0) == 3.0);
}

TEST_CASE("matmul: identity case") {
    Rng rng(1);
    Tensor m = random_tensor({3, 5}, rng);
    Graph g;
    Var out = g.matmul(g.constant(Tensor::identity(3)), g.constant(m));
    for (std::size_t i = 0; i < m.data.size(); ++i)
        CHECK(out.val().data[i] == doctest::Approx(m.data[i]).epsilon(1e-15));
}

TEST_CASE("matmul: hand arithmetic oracle") {
    Graph g;
    Var a = g.constant(Tensor({2, 2}, {1, 2, 3, 4}));
    Var b = g.constant(Tensor({2, 1}, {5, 6}));
    Var c = g.matmul(a, b);
    CHECK(c.val().data[0] == 17.0);
    CHECK(c.val().data[1] == 39.0);
}

TEST_CASE("matmul: shape mismatch reports both shapes") {
    Graph g;
    Var a = g.constant(Tensor({2, 3}));
    Var b = g.constant(Tensor({4, 5}));
    try {
        g.matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x5]") != std::string::npos);
    }
}

TEST_CASE("matmul gradient: d sum(A*B) / dA == ones * B^T") {
    Rng rng(7);
    Parameter A("A", random_tensor({3, 4}, rng));
    Parameter B("B", random_tensor({4, 2}, rng));
    Graph g;
    Var loss = g.sum(g.matmul(g.leaf(A), g.leaf(B)));
    g.backward(loss);
    // expected: ones(3x2) * B^T
    Tensor ones({3, 2});
    ones.fill(1.0);
    Tensor expected({3, 4});
    gemm(false, true, ones, B.value, expected, false);
    for (std::size_t i = 0; i < expected.data.size(); ++i)
        CHECK(A.grad.data[i] == doctest::Approx(expected.data[i]).epsilon(1e-12));
}

TEST_CASE("softmax: symmetry and shift invariance") {
    Graph g;
    Var s = g.softmax_rows(g.constant(Tensor({1, 2}, {0.0, 0.0})));
    CHECK(s.val().data[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s.val().data[1] == doctest::Approx(0.5).epsilon(1e-15));

    Rng rng(3);
    Tensor x = random_tensor({4, 6}, rng);
    Tensor shifted = x;
    for (std::int64_t i = 0; i < 4; ++i)
        for (std::int64_t j = 0; j < 6; ++j) shifted.at(i, j) += 13.75;
    Graph g2;
    Var a = g2.softmax_rows(g2.constant(x));
    Var b = g2.softmax_rows(g2.constant(shifted));
    for (std::size_t i = 0; i < a.val().data.size(); ++i)
        CHECK(a.val().data[i] == doctest::Approx(b.val().data[i]).epsilon(1e-12));
}

TEST_CASE("softmax: closed form and row sums") {
    Graph g;
    Var s = g.softmax_rows(g.constant(Tensor({1, 2}, {std::log(1.0), std::log(3.0)})));
    CHECK(s.val().data[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(s.val().data[1] == doctest::Approx(0.75).epsilon(1e-14));

    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t m = 1 + static_cast<std::int64_t>(rng.uniform_below(6));
        const std::int64_t n = 1 + static_cast<std::int64_t>(rng.uniform_below(9));
        Graph g2;
        Var y = g2.softmax_rows(g2.constant(random_tensor({m, n}, rng, 4.0)));
        for (std::int64_t i = 0; i < m; ++i) {
            double sum = 0.0;
            for (std::int64_t j = 0; j < n; ++j) sum += y.val().at(i, j);
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("softmax: NaN input rejected") {
    Graph g;
    Tensor bad({1, 2}, {0.0, std::nan("")});
    Var c = g.constant(bad);
    CHECK_THROWS_AS(g.softmax_rows(c), ModelError);
}

TEST_CASE("layer_norm: constant vector hits the epsilon floor") {
    Graph g;
    Parameter gain("g", Tensor::full({1, 4}, 1.0));
    Parameter bias("b", Tensor::full({1, 4}, 0.0));
    Var out = g.layer_norm(g.constant(Tensor::full({1, 4}, 3.25)), g.leaf(gain), g.leaf(bias));
    for (double v : out.val().data) CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("layer_norm: [1,3] closed form") {
    Graph g;
    Parameter gain("g", Tensor::full({1, 2}, 1.0));
    Parameter bias("b", Tensor::full({1, 2}, 0.0));
    Var out = g.layer_norm(g.constant(Tensor({1, 2}, {1.0, 3.0})), g.leaf(gain), g.leaf(bias));
    // mean 2, var 1: out = +-1/sqrt(1+1e-5)
    const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(out.val().data[0] == doctest::Approx(-expect).epsilon(1e-12));
    CHECK(out.val().data[1] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(std::abs(out.val().data[0]) - 1.0) < 1e-4);
}

TEST_CASE("layer_norm: zero-bias output has zero mean") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Graph g;
        Parameter gain("g", random_tensor({1, 8}, rng));
        Parameter bias("b", Tensor::full({1, 8}, 0.0));
        Tensor x = random_tensor({3, 8}, rng, 2.0);
        Var out = g.layer_norm(g.constant(x), g.leaf(gain), g.leaf(bias));
        // with gain=1 rows have mean ~0; with arbitrary gain, check the xhat
        // property through gain=1 case separately
        Graph g2;
        Parameter ones("g1", Tensor::full({1, 8}, 1.0));
        Var out2 = g2.layer_norm(g2.constant(x), g2.leaf(ones), g2.leaf(bias));
        for (std::int64_t i = 0; i < 3; ++i) {
            double mean = 0.0;
            for (std::int64_t j = 0; j < 8; ++j) mean += out2.val().at(i, j);
            mean /= 8.0;
            CHECK(std::abs(mean) <= 1e-10);
        }
    }
}

TEST_CASE("cross_entropy: uniform logits give ln V") {
    Graph g;
    Tensor logits({3, 16});
    logits.fill(0.37);
    Var ce = g.cross_entropy(g.constant(logits), {1, 5, 9}, {1, 1, 1});
    CHECK(ce.val().data[0] == doctest::Approx(std::log(16.0)).epsilon(1e-12));
}

TEST_CASE("cross_entropy: loss vanishes with growing margin") {
    double prev = 1e9;
    for (double margin : {2.0, 5.0, 10.0, 20.0}) {
        Graph g;
        Tensor logits({1, 8});
        logits.data[3] = margin;
        Var ce = g.cross_entropy(g.constant(logits), {3}, {1});
        CHECK(ce.val().data[0] < prev);
        prev = ce.val().data[0];
    }
    CHECK(prev < 1e-8);
}

TEST_CASE("cross_entropy: against independent log-sum-exp summation") {
    Rng rng(17);
    Tensor logits = random_tensor({5, 12}, rng, 3.0);
    std::vector<int> targets;
    std::vector<std::uint8_t> mask;
    for (int i = 0; i < 5; ++i) {
        targets.push_back(static_cast<int>(rng.uniform_below(12)));
        mask.push_back(i % 2 == 0 ? 1 : 0);
    }
    Graph g;
    Var ce = g.cross_entropy(g.constant(logits), targets, mask);
    // independent direct summation (no max subtraction, long double)
    long double total = 0.0L;
    int count = 0;
    for (int i = 0; i < 5; ++i) {
        if (!mask[i]) continue;
        long double denom = 0.0L;
        for (int j = 0; j < 12; ++j) denom += std::exp(static_cast<long double>(logits.at(i, j)));
        total += -(static_cast<long double>(logits.at(i, targets[i])) - std::log(denom));
        ++count;
    }
    const double expected = static_cast<double>(total / count);
    CHECK(std::abs(ce.val().data[0] - expected) <= 1e-10);
}

TEST_CASE("cross_entropy: error paths") {
    Graph g;
    Tensor logits({2, 4});
    Var c = g.constant(logits);
    CHECK_THROWS_AS(g.cross_entropy(c, {0, 1}, {0, 0}), ModelError);  // all masked
    Graph g2;
    Var c2 = g2.constant(logits);
    CHECK_THROWS_AS(g2.cross_entropy(c2, {0, 7}, {1, 1}), ModelError);  // target out of range
}

TEST_CASE("fd check: x*x at 3 has gradient 6") {
    Parameter x("x", Tensor({1, 1}, {3.0}));
    auto loss = [&](bool with_grad) {
        Graph g;
        Var v = g.leaf(x);
        Var l = g.sum(g.mul(v, v));
        if (with_grad) g.backward(l);
        return l.val().data[0];
    };
    const auto res = finite_difference_check(loss, {&x}, 1e-5);
    CHECK(res.max_rel_err < 1e-8);
    CHECK(x.grad.data[0] == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("fd check: rejects non-finite loss") {
    Parameter x("x", Tensor({1, 1}, {3.0}));
    auto loss = [&](bool) { return std::nan(""); };
    CHECK_THROWS_AS(finite_difference_check(loss, {&x}), ModelError);
}

TEST_CASE("fd check: composite op soup over 5 seeds") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        Parameter w1("w1", random_tensor({6, 4}, rng, 0.5));
        Parameter w2("w2", random_tensor({3, 6}, rng, 0.5));
        Parameter gain("g", Tensor::full({1, 6}, 1.0));
        Parameter bias("b", random_tensor({1, 6}, rng, 0.1));
        Tensor x = random_tensor({5, 4}, rng);
        std::vector<int> targets = {0, 1, 2, 1, 0};
        std::vector<std::uint8_t> mask = {1, 1, 0, 1, 1};
        auto loss = [&](bool with_grad) {
            Graph g;
            Var h = g.matmul_nt(g.constant(x), g.leaf(w1));
            h = g.layer_norm(h, g.leaf(gain), g.leaf(bias));
            h = g.gelu(h);
            Var att = g.softmax_rows(g.matmul_nt(h, h));
            h = g.matmul(att, h);
            Var logits = g.matmul_nt(h, g.leaf(w2));
            Var l = g.cross_entropy(logits, targets, mask);
            if (with_grad) g.backward(l);
            return l.val().data[0];
        };
        const auto res = finite_difference_check(loss, {&w1, &w2, &gain, &bias}, 1e-5, 24,
                                                 Rng(seed * 31));
        CHECK(res.max_rel_err <= 1e-4);
    }
}

TEST_CASE("backward: reverse topo, single visit, populated grads") {
    Rng rng(23);
    Parameter a("a", random_tensor({2, 3}, rng));
    Parameter b("b", random_tensor({3, 2}, rng));
    Graph g;
    Var va = g.leaf(a);
    Var vb = g.leaf(b);
    Var prod = g.matmul(va, vb);
    Var s = g.sum(prod);
    g.backward(s);
    CHECK(g.backward_visits(s) == 1);
    CHECK(g.backward_visits(prod) == 1);
    CHECK(g.backward_visits(va) == 1);
    CHECK(g.backward_visits(vb) == 1);
    CHECK(g.node_has_grad(va));
    CHECK(g.node_has_grad(vb));
    // every requires-grad leaf reachable from the loss got a populated grad
    bool a_nonzero = false;
    for (double v : a.grad.data) a_nonzero |= (v != 0.0);
    CHECK(a_nonzero);
}

TEST_CASE("determinism: identical seed gives bit-identical forward") {
    auto run = [] {
        Rng rng(99);
        Tensor x = random_tensor({8, 8}, rng);
        Graph g;
        Var h = g.softmax_rows(g.constant(x));
        Var s = g.sum(g.gelu(h));
        return s.val().data[0];
    };
    const double v1 = run();
    const double v2 = run();
    CHECK(std::memcmp(&v1, &v2, sizeof(double)) == 0);
}

TEST_CASE("rng: streams are independent and serializable") {
    Rng a = Rng::stream(42, "alpha");
    Rng b = Rng::stream(42, "beta");
    CHECK(a.next_u64() != b.next_u64());
    Rng c = Rng::stream(42, "alpha");
    c.next_u64();
    Rng d = Rng::stream(42, "alpha");
    d.next_u64();
    CHECK(c == d);
    c.normal();
    const std::string blob = c.serialize();
    Rng e;
    e.deserialize(blob);
    CHECK(e == c);
    CHECK(e.normal() == c.normal());
}
