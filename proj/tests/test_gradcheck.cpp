#include <doctest.h>

#include <cmath>

#include "onnseg/gradcheck.hpp"
#include "onnseg/rng.hpp"

using namespace onnseg;

namespace {

TensorPtr randn(Shape4 s, Rng& rng, bool rg = true) {
    auto t = Tensor::zeros(s, rg);
    for (double& v : t->data) v = rng.uniform(-1.0, 1.0);
    return t;
}

} // namespace

TEST_CASE("linear closure is exact to 1e-10") {
    Rng rng(0);
    auto w = randn({1, 1, 1, 8}, rng);
    auto x = randn({1, 1, 1, 8}, rng, false);
    auto f = [&](Tape& tape) { return reduce_sum(tape, mul(tape, w, x)); };
    auto rep = grad_check(f, {{"w", w}});
    CHECK(rep.max_rel_err <= 1e-10);
}

TEST_CASE("sigmoid-of-conv closure passes at 1e-6") {
    Rng rng(1);
    auto x = randn({1, 2, 6, 6}, rng);
    auto w = randn({3, 2, 3, 3}, rng);
    auto b = randn({1, 3, 1, 1}, rng);
    auto f = [&](Tape& tape) {
        return reduce_sum(tape, activation(tape, conv2d(tape, x, w, b, 1, 1), Act::Sigmoid));
    };
    auto rep = grad_check(f, {{"x", x}, {"w", w}, {"b", b}});
    CHECK(rep.max_rel_err <= 1e-6);
}

TEST_CASE("injected x2 backward bug is flagged with error near 1") {
    Rng rng(2);
    auto x = randn({1, 1, 1, 4}, rng);
    auto f = [&](Tape& tape) {
        auto out = Tensor::zeros(x->shape);
        out->requires_grad = true;
        out->tape_node = true;
        for (std::size_t i = 0; i < x->data.size(); ++i) out->data[i] = x->data[i];
        TensorPtr xc = x, oc = out;
        tape.record(out, [xc, oc]() {
            xc->ensure_grad();
            for (std::size_t i = 0; i < xc->data.size(); ++i)
                xc->grad[i] += 2.0 * oc->grad[i]; // the bug: doubled gradient
        });
        return reduce_sum(tape, out);
    };
    auto rep = grad_check(f, {{"x", x}});
    CHECK(rep.max_rel_err == doctest::Approx(0.5).epsilon(0.05)); // |2-1|/max(2,1)
    CHECK_FALSE(rep.passed(1e-6));
}

TEST_CASE("non-deterministic closure rejected") {
    Rng rng(3);
    auto x = randn({1, 1, 1, 2}, rng);
    int calls = 0;
    auto f = [&](Tape& tape) {
        ++calls;
        auto noisy = affine(tape, x, 1.0, calls * 1e-3);
        return reduce_sum(tape, noisy);
    };
    CHECK_THROWS_AS(grad_check(f, {{"x", x}}), DeterminismError);
}

TEST_CASE("all core ops pass finite differences on seeds 0..4") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        CAPTURE(seed);
        Rng rng(seed);

        SUBCASE("conv2d stride 2 pad 1") {
            auto x = randn({2, 3, 8, 8}, rng);
            auto w = randn({2, 3, 3, 3}, rng);
            auto b = randn({1, 2, 1, 1}, rng);
            auto f = [&](Tape& t) { return reduce_sum(t, conv2d(t, x, w, b, 2, 1)); };
            CHECK(grad_check(f, {{"x", x}, {"w", w}, {"b", b}}).max_rel_err <= 1e-6);
        }
        SUBCASE("batchnorm train and eval") {
            auto x = randn({2, 3, 5, 5}, rng);
            auto bn = BatchNormState::make(3);
            for (double& v : bn.running_var->data) v = 0.5 + rng.uniform();
            for (double& v : bn.running_mean->data) v = rng.uniform(-0.3, 0.3);
            for (bool training : {true, false}) {
                CAPTURE(training);
                auto f = [&](Tape& t) {
                    BatchNormState local = bn; // keep running stats fixed across evals
                    local.running_mean = Tensor::from({1, 3, 1, 1}, bn.running_mean->data);
                    local.running_var = Tensor::from({1, 3, 1, 1}, bn.running_var->data);
                    auto s = activation(t, batchnorm2d(t, x, local, training), Act::Sigmoid);
                    // centered so the loss stays O(1); a large loss value floors the
                    // attainable finite-difference accuracy at ulp(loss)/(2h*grad)
                    return reduce_sum(t, affine(t, s, 1.0, -0.5));
                };
                auto rep = grad_check(f, {{"x", x}, {"gamma", bn.gamma}, {"beta", bn.beta}});
                CHECK(rep.max_rel_err <= 1e-6);
            }
        }
        SUBCASE("activations") {
            for (auto kind : {Act::Relu, Act::Sigmoid, Act::Tanh}) {
                auto x = randn({1, 2, 4, 4}, rng);
                // keep relu away from the kink
                if (kind == Act::Relu)
                    for (double& v : x->data)
                        if (std::fabs(v) < 1e-3) v = 0.1;
                auto f = [&](Tape& t) {
                    return reduce_sum(t, pow_elem(t, activation(t, x, kind), 2));
                };
                CHECK(grad_check(f, {{"x", x}}).max_rel_err <= 1e-6);
            }
        }
        SUBCASE("pooling") {
            auto x = randn({2, 2, 4, 4}, rng);
            for (auto kind : {PoolKind::Avg, PoolKind::Max}) {
                auto f = [&](Tape& t) {
                    return reduce_sum(t, pow_elem(t, pool_global(t, x, kind), 2));
                };
                CHECK(grad_check(f, {{"x", x}}).max_rel_err <= 1e-6);
            }
            auto fwin = [&](Tape& t) {
                auto mp = pool2d(t, x, PoolKind::Max, 3, 2, 1);
                auto ap = pool2d(t, mp, PoolKind::Avg, 2, 2, 0);
                return reduce_sum(t, ap);
            };
            CHECK(grad_check(fwin, {{"x", x}}).max_rel_err <= 1e-6);
        }
        SUBCASE("elementwise with broadcast") {
            // inputs bounded away from the points where the true gradient
            // vanishes (a=0, b=-1), which finite differences cannot resolve
            auto a = randn({2, 3, 4, 4}, rng);
            for (double& v : a->data) v = 0.75 + 0.5 * v;
            auto b = randn({2, 3, 1, 1}, rng);
            for (double& v : b->data) v = 0.5 * v;
            auto f = [&](Tape& t) {
                auto m = mul(t, a, b);
                auto s = add(t, m, a);
                return reduce_sum(t, affine(t, pow_elem(t, s, 2), 1.0, -0.6));
            };
            CHECK(grad_check(f, {{"a", a}, {"b", b}}).max_rel_err <= 1e-6);
        }
        SUBCASE("power chain") {
            auto x = randn({1, 1, 3, 3}, rng);
            for (double& v : x->data) v = 0.3 + 0.5 * std::fabs(v); // keep away from 0
            auto f = [&](Tape& t) { return reduce_sum(t, pow_elem(t, x, 3)); };
            CHECK(grad_check(f, {{"x", x}}).max_rel_err <= 1e-6);
        }
        SUBCASE("upsample2x both modes") {
            auto x = randn({1, 2, 3, 3}, rng);
            for (auto mode : {UpMode::Nearest, UpMode::Bilinear}) {
                auto f = [&](Tape& t) {
                    return reduce_sum(t, pow_elem(t, upsample2x(t, x, mode), 2));
                };
                CHECK(grad_check(f, {{"x", x}}).max_rel_err <= 1e-6);
            }
        }
        SUBCASE("concat and scalar division") {
            auto a = randn({1, 2, 3, 3}, rng);
            auto b = randn({1, 3, 3, 3}, rng);
            auto f = [&](Tape& t) {
                auto cat = concat_channels(t, {a, b});
                auto num = reduce_sum(t, pow_elem(t, cat, 2));
                auto den = affine(t, reduce_sum(t, pow_elem(t, cat, 4)), 1.0, 5.0);
                return sdiv(t, num, den);
            };
            CHECK(grad_check(f, {{"a", a}, {"b", b}}).max_rel_err <= 1e-6);
        }
        SUBCASE("conv against finite differences rel 1e-6") {
            auto x = randn({1, 1, 5, 5}, rng);
            auto k = randn({1, 1, 3, 3}, rng);
            auto f = [&](Tape& t) { return reduce_sum(t, conv2d(t, x, k, nullptr, 1, 0)); };
            CHECK(grad_check(f, {{"x", x}, {"k", k}}).max_rel_err <= 1e-6);
        }
    }
}

TEST_CASE("sampled gradcheck checks a subset deterministically") {
    Rng rng(4);
    auto x = randn({1, 2, 8, 8}, rng);
    auto f = [&](Tape& t) { return reduce_sum(t, pow_elem(t, x, 2)); };
    GradCheckOptions opt;
    opt.max_elements_per_tensor = 5;
    opt.sample_seed = 42;
    auto rep = grad_check(f, {{"x", x}}, opt);
    CHECK(rep.items[0].elements_checked <= 5);
    CHECK(rep.items[0].elements_checked >= 1);
    CHECK(rep.max_rel_err <= 1e-7);
}
