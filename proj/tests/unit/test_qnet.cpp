#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qnrl/errors.hpp"
#include "qnrl/qnet.hpp"

using namespace qnrl;
using qnrl::testing::Gen;
using qnrl::testing::rel_error;

namespace {

NetworkSpec spec_of(std::vector<std::size_t> layers) {
    NetworkSpec s;
    s.layer_sizes = std::move(layers);
    return s;
}

}  // namespace

TEST_SUITE("qnet") {
    TEST_CASE("num_params") {
        CHECK(num_params(spec_of({2, 3, 2})) == 17);
        CHECK(num_params(spec_of({1, 1})) == 2);
        CHECK(num_params(spec_of({4, 8, 8, 3})) == testing::count_params_by_enumeration({4, 8, 8, 3}));
        CHECK(num_params(spec_of({4, 8, 8, 3})) == 139);

        Gen gen(11);
        for (int t = 0; t < 50; ++t) {
            const auto layers = gen.layers(2, 5, 12);
            CHECK(num_params(spec_of(layers)) == testing::count_params_by_enumeration(layers));
        }
    }

    TEST_CASE("spec validation") {
        CHECK_THROWS_AS(spec_of({3}).validate(), InvalidInput);
        CHECK_THROWS_AS(spec_of({3, 0, 2}).validate(), InvalidInput);
        CHECK_NOTHROW(spec_of({3, 2}).validate());
    }

    TEST_CASE("init_weights") {
        const NetworkSpec s = spec_of({2, 3, 2});
        CHECK(init_weights(s, 5) == init_weights(s, 5));
        CHECK(init_weights(s, 5) != init_weights(s, 6));

        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const ParamVector w = init_weights(s, seed);
            REQUIRE(w.size() == 17);
            for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(w[i]) <= 1.0 / std::sqrt(2.0));
            for (std::size_t i = 6; i < 9; ++i) CHECK(w[i] == 0.0);
            for (std::size_t i = 9; i < 15; ++i) CHECK(std::abs(w[i]) <= 1.0 / std::sqrt(3.0));
            for (std::size_t i = 15; i < 17; ++i) CHECK(w[i] == 0.0);
        }
    }

    TEST_CASE("forward examples") {
        const NetworkSpec s = spec_of({2, 3, 2});
        const ParamVector zero(17, 0.0);
        CHECK(forward(s, zero, std::vector<double>{0.3, -2.0}) == QValues{0.0, 0.0});

        const NetworkSpec lin = spec_of({2, 1});
        CHECK(forward(lin, ParamVector{1.0, 1.0, 0.0}, std::vector<double>{3.0, 4.0}) == QValues{7.0});
    }

    TEST_CASE("forward matches the per-neuron oracle") {
        Gen gen(3);
        for (int t = 0; t < 200; ++t) {
            const auto layers = gen.layers(2, 5, 8);
            const NetworkSpec s = spec_of(layers);
            const ParamVector w = gen.vector(num_params(s));
            const std::vector<double> x = gen.vector(layers.front());
            const QValues q = forward(s, w, x);
            CHECK(rel_error(q, testing::naive_forward(layers, w, x), 1e-12) < 1e-12);
            CHECK(forward(s, w, x) == q);
        }
    }

    TEST_CASE("grad_q examples") {
        const NetworkSpec lin = spec_of({2, 1});
        CHECK(grad_q(lin, ParamVector{0.5, -0.25, 2.0}, std::vector<double>{3.0, 4.0}, 0) == ParamVector{3.0, 4.0, 1.0});

        // Zero input with zero hidden biases: first-layer weights get no gradient.
        const NetworkSpec s = spec_of({3, 4, 2});
        Gen gen(8);
        ParamVector w = gen.vector(num_params(s));
        for (std::size_t i = 12; i < 16; ++i) w[i] = 0.0;
        const ParamVector g = grad_q(s, w, std::vector<double>(3, 0.0), 1);
        for (std::size_t i = 0; i < 12; ++i) CHECK(g[i] == 0.0);
    }

    TEST_CASE("grad_q matches central differences") {
        Gen gen(21);
        int checked = 0;
        while (checked < 150) {
            const auto layers = gen.layers(2, 4, 8);
            const NetworkSpec s = spec_of(layers);
            const ParamVector w = gen.vector(num_params(s));
            const std::vector<double> x = gen.vector(layers.front());
            if (!testing::away_from_kinks(layers, w, x, 1e-3)) continue;
            const std::size_t a = gen.index(layers.back());
            const ParamVector g = grad_q(s, w, x, a);
            const ParamVector fd = testing::central_differences(
                [&](std::span<const double> v) { return testing::naive_forward(layers, v, x)[a]; }, w, 1e-5);
            CHECK(rel_error(g, fd, 1e-8) < 1e-6);
            ++checked;
        }
    }

    TEST_CASE("value_and_accumulate_grad weights the gradient by the forward value") {
        const NetworkSpec s = spec_of({3, 5, 2});
        Gen gen(4);
        const ParamVector w = gen.vector(num_params(s));
        const std::vector<double> x = gen.vector(3);
        ParamVector acc(num_params(s), 1.0);
        const double q = value_and_accumulate_grad(s, w, x, 1, [](double v) { return 2.0 * v; }, acc);
        CHECK(q == doctest::Approx(forward(s, w, x)[1]).epsilon(1e-14));
        const ParamVector g = grad_q(s, w, x, 1);
        for (std::size_t i = 0; i < acc.size(); ++i) CHECK(acc[i] == doctest::Approx(1.0 + 2.0 * q * g[i]));
    }

    TEST_CASE("dimension errors") {
        const NetworkSpec s = spec_of({2, 3, 2});
        CHECK_THROWS_AS(forward(s, ParamVector(16, 0.0), std::vector<double>{1.0, 2.0}), InvalidInput);
        CHECK_THROWS_AS(forward(s, ParamVector(17, 0.0), std::vector<double>{1.0}), InvalidInput);
        CHECK_THROWS_AS(grad_q(s, ParamVector(18, 0.0), std::vector<double>{1.0, 2.0}, 0), InvalidInput);
        CHECK_THROWS_AS(grad_q(s, ParamVector(17, 0.0), std::vector<double>{1.0, 2.0}, 2), InvalidInput);
    }
}
