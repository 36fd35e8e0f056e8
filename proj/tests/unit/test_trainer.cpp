#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qnrl/errors.hpp"
#include "qnrl/io.hpp"
#include "qnrl/trainer.hpp"

using namespace qnrl;
using qnrl::testing::Gen;
using qnrl::testing::rel_error;

namespace {

NetworkSpec spec_of(std::vector<std::size_t> layers) {
    NetworkSpec s;
    s.layer_sizes = std::move(layers);
    return s;
}

// Terminal transitions only: the targets are the rewards, so the batch loss of
// a linear network is an exact quadratic in w.
ExperienceMemory supervised_batch(Gen& gen, std::size_t size, std::size_t dim, std::size_t actions) {
    ExperienceMemory m(size);
    for (std::size_t i = 0; i < size; ++i) {
        Experience e;
        for (std::size_t j = 0; j < dim; ++j) e.s.push_back(gen.index(2) == 0 ? 0.5 : -0.5);
        e.s_next = e.s;
        e.a = gen.index(actions);
        e.r = gen.uniform(-1.0, 1.0);
        e.terminal = true;
        m.push(std::move(e));
    }
    return m;
}

// Hessian of the supervised quadratic applied to v, written out per sample.
ParamVector supervised_hessian_times(const ExperienceMemory& m, std::size_t dim, std::size_t actions,
                                     std::span<const double> v) {
    ParamVector out((dim + 1) * actions, 0.0);
    const std::size_t bias0 = dim * actions;
    for (const Experience& e : m.items()) {
        double phi_v = v[bias0 + e.a];
        for (std::size_t j = 0; j < dim; ++j) phi_v += e.s[j] * v[e.a * dim + j];
        for (std::size_t j = 0; j < dim; ++j) out[e.a * dim + j] += e.s[j] * phi_v;
        out[bias0 + e.a] += phi_v;
    }
    for (double& x : out) x /= static_cast<double>(m.size());
    return out;
}

TrainConfig small_config() {
    TrainConfig c;
    c.batch_size = 64;
    c.lbfgs_memory = 5;
    c.total_steps = 2000;
    c.test_interval = 500;
    c.seed = 3;
    return c;
}

}  // namespace

TEST_SUITE("trainer") {
    TEST_CASE("epsilon schedule") {
        CHECK(epsilon_schedule(0, 1000, 1.0, 0.1) == 1.0);
        CHECK(epsilon_schedule(1000, 1000, 1.0, 0.1) == doctest::Approx(0.1).epsilon(1e-15));
        CHECK(epsilon_schedule(500, 1000, 1.0, 0.1) == doctest::Approx(0.55).epsilon(1e-15));
        CHECK(epsilon_schedule(5000, 1000, 1.0, 0.1) == 0.1);
        CHECK(epsilon_schedule(7, 0, 1.0, 0.1) == 0.1);
    }

    TEST_CASE("epsilon greedy") {
        Rng rng(1);
        CHECK(epsilon_greedy(std::vector<double>{1.0, 3.0, 2.0}, 0.0, rng) == 1);
        CHECK(epsilon_greedy(std::vector<double>{2.0, 2.0}, 0.0, rng) == 0);

        std::vector<int> counts(4, 0);
        const int draws = 10000;
        for (int i = 0; i < draws; ++i) ++counts[epsilon_greedy(std::vector<double>{0.0, 9.0, 0.0, 0.0}, 1.0, rng)];
        const double expected = draws / 4.0;
        const double sigma = std::sqrt(draws * 0.25 * 0.75);
        for (int c : counts) CHECK(std::abs(c - expected) <= 3.0 * sigma);
    }

    TEST_CASE("td targets") {
        const NetworkSpec s = spec_of({3, 4, 2});
        Gen gen(2);
        const ParamVector w = gen.vector(num_params(s));
        Experience term{{0.1, 0.2, 0.3}, 0, 1.0, {0.3, 0.2, 0.1}, true};
        CHECK(td_target(term, s, w, 0.9) == 1.0);

        Experience live{{0.1, 0.2, 0.3}, 1, 0.7, {0.3, 0.2, 0.1}, false};
        CHECK(td_target(live, s, w, 0.0) == 0.7);
        live.r = 0.5;
        CHECK(td_target(live, s, ParamVector(num_params(s), 0.0), 0.9) == 0.5);

        const QValues qn = testing::naive_forward(s.layer_sizes, w, live.s_next);
        CHECK(td_target(live, s, w, 0.9) == doctest::Approx(0.5 + 0.9 * std::max(qn[0], qn[1])).epsilon(1e-14));
    }

    TEST_CASE("batch loss examples") {
        const NetworkSpec s = spec_of({2, 3, 2});
        Gen gen(6);
        const ParamVector w = gen.vector(num_params(s));

        ExperienceMemory exact(5);
        for (int i = 0; i < 5; ++i) {
            Experience e{gen.vector(2), gen.index(2), 0.0, gen.vector(2), true};
            e.r = forward(s, w, e.s)[e.a];
            exact.push(std::move(e));
        }
        CHECK(batch_loss(s, w, w, exact, 0.9) == 0.0);
        for (double v : overlap_gradient(s, w, w, exact, 0.9)) CHECK(v == 0.0);

        ExperienceMemory one(1);
        one.push({{0.4, 0.2}, 1, 1.0, {0.0, 0.0}, true});
        CHECK(batch_loss(s, ParamVector(num_params(s), 0.0), w, one, 0.9) == 0.5);

        CHECK_THROWS_AS(batch_loss(s, w, w, ExperienceMemory(3), 0.9), InvalidInput);
        CHECK_THROWS_AS(overlap_gradient(s, w, w, ExperienceMemory(3), 0.9), InvalidInput);
    }

    TEST_CASE("batch loss matches the per-sample oracle") {
        Gen gen(17);
        for (int t = 0; t < 100; ++t) {
            const auto layers = gen.layers(2, 4, 6);
            const NetworkSpec s = spec_of(layers);
            const ParamVector w = gen.vector(num_params(s));
            const ParamVector wt = gen.vector(num_params(s));
            const ExperienceMemory m = gen.batch(1 + gen.index(32), layers.front(), layers.back());
            const double discount = gen.uniform(0.0, 0.99);
            CHECK(rel_error(batch_loss(s, w, wt, m, discount), testing::naive_batch_loss(layers, w, wt, m, discount)) <
                  1e-12);
        }
    }

    TEST_CASE("overlap gradient closed form for a linear net") {
        const NetworkSpec s = spec_of({3, 1});
        const ParamVector w{0.5, -1.0, 2.0, 0.25};
        ExperienceMemory m(1);
        m.push({{1.0, 2.0, -1.0}, 0, 3.0, {0.0, 0.0, 0.0}, true});
        const double q = 0.5 - 2.0 - 2.0 + 0.25;
        const ParamVector g = overlap_gradient(s, w, w, m, 0.9);
        const ParamVector expected{-(3.0 - q) * 1.0, -(3.0 - q) * 2.0, -(3.0 - q) * -1.0, -(3.0 - q)};
        CHECK(rel_error(g, expected) < 1e-15);
    }

    TEST_CASE("overlap gradient matches central differences") {
        Gen gen(23);
        int checked = 0;
        while (checked < 100) {
            const auto layers = gen.layers(2, 4, 8);
            const NetworkSpec s = spec_of(layers);
            if (num_params(s) > 1000) continue;
            const ParamVector w = gen.vector(num_params(s));
            const ParamVector wt = gen.vector(num_params(s));
            const ExperienceMemory m = gen.batch(1 + gen.index(32), layers.front(), layers.back());
            bool smooth = true;
            for (const Experience& e : m.items()) smooth = smooth && testing::away_from_kinks(layers, w, e.s, 1e-3);
            if (!smooth) continue;
            const ParamVector g = overlap_gradient(s, w, wt, m, 0.9);
            const ParamVector fd = testing::central_differences(
                [&](std::span<const double> v) { return testing::naive_batch_loss(layers, v, wt, m, 0.9); }, w, 1e-5);
            CHECK(rel_error(g, fd, 1e-8) < 1e-6);
            ++checked;
        }
    }

    TEST_CASE("combined gradient, overlap y and sgd step") {
        const ParamVector g{1.0, -2.0, 4.0};
        CHECK(combined_gradient(g, g) == g);
        CHECK(combined_gradient(g, ParamVector{-1.0, 2.0, -4.0}) == ParamVector{0.0, 0.0, 0.0});
        CHECK(combined_gradient(ParamVector{1.0, 3.0}, ParamVector{3.0, 1.0}) == ParamVector{2.0, 2.0});
        CHECK_THROWS_AS(combined_gradient(ParamVector{1.0}, g), InvalidInput);

        CHECK(overlap_y(g, g) == ParamVector{0.0, 0.0, 0.0});
        CHECK(overlap_y(ParamVector{2.0, 0.0}, ParamVector{1.0, 1.0}) == ParamVector{1.0, -1.0});
        CHECK_THROWS_AS(overlap_y(ParamVector{1.0}, g), InvalidInput);

        CHECK(sgd_step(g, ParamVector{0.0, 0.0, 0.0}, 0.1) == g);
        CHECK(sgd_step(ParamVector{1.0, 1.0}, ParamVector{1.0, -1.0}, 0.5) == ParamVector{0.5, 1.5});
        CHECK_THROWS_AS(sgd_step(g, ParamVector{1.0}, 0.1), InvalidInput);
        CHECK_THROWS_AS(sgd_step(g, g, 0.0), InvalidInput);

        // Gradient of 0.5 |w|^2 is w.
        Gen gen(1);
        ParamVector w = gen.vector(6);
        for (int k = 0; k < 20; ++k) {
            const double before = norm2(w);
            w = sgd_step(w, w, 0.3);
            CHECK(norm2(w) == doctest::Approx(0.7 * before).epsilon(1e-14));
        }
    }

    TEST_CASE("overlap y is the Hessian action on a quadratic loss") {
        Gen gen(31);
        for (int t = 0; t < 50; ++t) {
            const std::size_t dim = 1 + gen.index(5);
            const std::size_t actions = 1 + gen.index(3);
            const NetworkSpec s = spec_of({dim, actions});
            const ExperienceMemory m = supervised_batch(gen, 1 + gen.index(40), dim, actions);
            const ParamVector w = gen.vector(num_params(s));
            const ParamVector step = gen.vector(num_params(s), 0.3);
            const ParamVector y = overlap_y(overlap_gradient(s, add_scaled(w, 1.0, step), w, m, 0.9),
                                            overlap_gradient(s, w, w, m, 0.9));
            CHECK(rel_error(y, supervised_hessian_times(m, dim, actions, step), 1e-12) < 1e-8);
        }
    }

    TEST_CASE("optimization step on a supervised quadratic") {
        Gen gen(41);
        const std::size_t dim = 3;
        const std::size_t actions = 2;
        const NetworkSpec s = spec_of({dim, actions});
        TrainConfig c;
        c.batch_size = 64;
        c.lbfgs_memory = 5;
        const ExperienceMemory batch = supervised_batch(gen, c.batch_size, dim, actions);

        TrainerState st = TrainerState::initial(s, c);
        CHECK(st.w == init_weights(s, c.seed));
        CHECK(st.w_target == st.w);
        CHECK_FALSE(st.prev_overlap_grad);
        CHECK_THROWS_AS(optimization_step(st, s, c), InvalidInput);

        for (int k = 0; k < 2; ++k) {
            st.memory = batch;
            const ParamVector w_before = st.w;
            const double loss_before = batch_loss(s, st.w, st.w_target, batch, c.discount);
            StepResult r = optimization_step(std::move(st), s, c);
            st = std::move(r.state);
            CHECK(r.record.k == static_cast<std::size_t>(k));
            CHECK(r.record.loss == doctest::Approx(loss_before).epsilon(1e-14));
            CHECK(r.record.alpha == 1.0);
            CHECK(r.record.wolfe_satisfied);
            CHECK(r.record.pair_accepted);
            CHECK(r.record.loss_next < r.record.loss);
            CHECK(r.record.loss_next == doctest::Approx(batch_loss(s, st.w, w_before, batch, c.discount)).epsilon(1e-13));
            CHECK(st.memory.empty());
            CHECK(st.k == static_cast<std::size_t>(k + 1));
            CHECK(st.w_target == w_before);
            REQUIRE(st.prev_overlap_grad);
            CHECK(rel_error(*st.prev_overlap_grad, overlap_gradient(s, st.w, w_before, batch, c.discount), 1e-12) <
                  1e-12);

            const ParamVector s_k = subtract(st.w, w_before);
            CHECK(rel_error(st.mem.latest().s, s_k) < 1e-15);
            CHECK(rel_error(st.mem.latest().y, supervised_hessian_times(batch, dim, actions, s_k), 1e-12) < 1e-8);
        }
    }

    TEST_CASE("a vanishing step yields a rejected pair") {
        Gen gen(43);
        const NetworkSpec s = spec_of({3, 2});
        TrainConfig c;
        c.batch_size = 16;
        c.wolfe.alpha_init = 1e-20;
        c.wolfe.alpha_min = 1e-20;
        TrainerState st = TrainerState::initial(s, c);
        st.memory = supervised_batch(gen, c.batch_size, 3, 2);
        const LbfgsMemory before = st.mem;
        const StepResult r = optimization_step(std::move(st), s, c);
        CHECK_FALSE(r.record.pair_accepted);
        CHECK(r.state.mem == before);
    }

    TEST_CASE("training loop contracts") {
        const GridWorld env = default_gridworld();
        const NetworkSpec s = spec_of({env.num_cells(), 8, kNumActions});
        TrainConfig c = small_config();
        c.grad_norm_stop_threshold = 0.0;

        std::size_t steps_seen = 0;
        ParamVector prev_w = init_weights(s, c.seed);
        TrainOptions opt;
        opt.on_step = [&](const TrainerState& st, const TrainLogRecord&) {
            CHECK(st.memory.empty());
            CHECK(st.w_target == prev_w);
            prev_w = st.w;
            ++steps_seen;
        };
        const TrainRun run = train(c, env, s, opt);
        CHECK(run.records.size() == c.total_steps / c.batch_size);
        CHECK(steps_seen == run.records.size());
        CHECK(run.env_steps == c.total_steps);
        CHECK(run.stop_reason == StopReason::total_steps);

        std::size_t scores = 0;
        for (const TrainLogRecord& rec : run.records) {
            CHECK(rec.alpha >= c.wolfe.alpha_min);
            CHECK(rec.alpha <= c.wolfe.alpha_init);
            CHECK(rec.directional_derivative < 0.0);
            CHECK(rec.loss >= 0.0);
            CHECK((rec.wolfe_satisfied || rec.floor_hit));
            if (rec.wolfe_satisfied)
                CHECK(rec.loss_next <= rec.loss + c.wolfe.c1 * rec.alpha * rec.directional_derivative);
            if (rec.test_score) ++scores;
        }
        // The evaluation at the final env step has no later update to attach to.
        CHECK(scores == c.total_steps / c.test_interval - 1);
        CHECK(run.last_test_score);

        const TrainRun again = train(c, env, s);
        REQUIRE(again.records.size() == run.records.size());
        for (std::size_t i = 0; i < run.records.size(); ++i)
            CHECK(format_log_row(again.records[i]) == format_log_row(run.records[i]));
        CHECK(again.final_weights == run.final_weights);
    }

    TEST_CASE("gradient threshold stops training") {
        const GridWorld env = default_gridworld();
        TrainConfig c = small_config();
        c.grad_norm_stop_threshold = 1e9;
        const TrainRun run = train(c, env, default_network(env));
        CHECK(run.records.size() == 1);
        CHECK(run.stop_reason == StopReason::grad_norm);
    }

    TEST_CASE("sgd baseline") {
        const GridWorld env = default_gridworld();
        TrainConfig c = small_config();
        c.optimizer = OptimizerKind::sgd;
        c.batch_size = 100;
        std::size_t max_memory = 0;
        TrainOptions opt;
        opt.on_step = [&](const TrainerState& st, const TrainLogRecord& rec) {
            max_memory = std::max(max_memory, st.memory.size());
            CHECK(rec.alpha == c.sgd_learning_rate);
        };
        const TrainRun run = train(c, env, default_network(env), opt);
        CHECK(max_memory == c.batch_size);
        CHECK(run.records.size() == (c.total_steps - c.sgd_batch_size) / c.sgd_update_frequency + 1);
    }

    TEST_CASE("config validation") {
        TrainConfig c;
        CHECK_NOTHROW(c.validate());
        c.batch_size = 0;
        CHECK_THROWS_AS(c.validate(), InvalidInput);
        c = {};
        c.eps_end = 0.5;
        c.eps_start = 0.2;
        CHECK_THROWS_AS(c.validate(), InvalidInput);
        c = {};
        c.discount = 1.5;
        CHECK_THROWS_AS(c.validate(), InvalidInput);
        c = {};
        c.lbfgs_memory = 0;
        CHECK_THROWS_AS(c.validate(), InvalidInput);
        const GridWorld env = default_gridworld();
        CHECK_THROWS_AS(train(TrainConfig{}, env, spec_of({5, 4})), InvalidInput);
    }

    TEST_CASE("optimality gap and policy agreement") {
        const GridWorld env = default_gridworld();
        const TabularQ oracle = value_iteration(env, 0.95, 1e-12);
        const NetworkSpec s = default_network(env);

        CHECK(q_optimality_gap(s, ParamVector(num_params(s), 0.0), oracle, env) == oracle.max_abs());

        // A linear net on one-hot features is a table: copy Q* into it.
        ParamVector w(num_params(s), 0.0);
        for (std::size_t i = 0; i < env.num_cells(); ++i)
            for (std::size_t a = 0; a < kNumActions; ++a) w[a * env.num_cells() + i] = oracle(i, a);
        CHECK(q_optimality_gap(s, w, oracle, env) <= 1e-15);
        CHECK(policy_agreement(s, w, oracle, env) == 1.0);

        ParamVector flipped = w;
        for (std::size_t i = 0; i < env.num_cells(); ++i)
            for (std::size_t a = 0; a < kNumActions; ++a) flipped[a * env.num_cells() + i] = -oracle(i, a);
        CHECK(policy_agreement(s, flipped, oracle, env) < 0.5);
    }
}
