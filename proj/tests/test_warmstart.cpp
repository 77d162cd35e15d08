#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "hyperbandit/errors.hpp"
#include "hyperbandit/warmstart.hpp"
#include "oracles.hpp"

using namespace hyperbandit;

namespace {

SyntheticConfig small_config() {
    SyntheticConfig c;
    c.user_dim = 4;
    c.observed_dim = 3;
    c.latent_dim = 2;
    c.num_users = 6;
    c.num_items = 30;
    c.candidate_size = 5;
    c.seed = 7;
    return c;
}

std::vector<std::size_t> iota(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

std::vector<std::size_t> true_top_k(const SyntheticPeriodicEnv& env, std::size_t user, TimePeriod p,
                                    std::vector<std::size_t> pool, std::size_t k) {
    std::stable_sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
        return env.true_reward(user, a, p) > env.true_reward(user, b, p);
    });
    pool.resize(k);
    return pool;
}

/// Returns scripted replies in order and counts calls.
struct ScriptedTransport {
    std::vector<std::string> replies;
    std::shared_ptr<std::size_t> calls = std::make_shared<std::size_t>(0);
    std::shared_ptr<std::string> last_prompt = std::make_shared<std::string>();

    std::string operator()(const std::string& prompt) {
        *last_prompt = prompt;
        const std::size_t i = (*calls)++;
        return replies.at(std::min(i, replies.size() - 1));
    }
};

HyperBanditPolicy policy_for(const SyntheticPeriodicEnv& env) {
    std::vector<Vector> feats;
    for (std::size_t i = 0; i < env.num_items(); ++i) feats.push_back(env.item_features(i));
    return HyperBanditPolicy({0.1, 1.0, env.config().observed_dim, env.config().latent_dim, EmbeddingMode::Euler},
                             feats);
}

HyperNetwork net_for(const SyntheticPeriodicEnv& env, std::uint64_t seed) {
    const PreferenceShape shape{env.config().observed_dim, env.config().latent_dim, env.config().user_dim, 0};
    return init_xavier(hypernet_layer_sizes(4, std::vector<std::size_t>{8}, shape), shape, seed);
}

std::vector<InteractionRecord> oracle_records(const SyntheticPeriodicEnv& env, double eps, std::size_t periods) {
    OracleProvider provider(env, eps, 3);
    SimulationSpec spec;
    spec.users = iota(env.num_users());
    for (std::size_t p = 0; p < periods; ++p) spec.periods.push_back(TimePeriod(static_cast<int>(p)));
    spec.pool = [](std::size_t u, TimePeriod p) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < 12; ++i) pool.push_back((u * 7 + static_cast<std::size_t>(p.value()) * 3 + i * 2) % 30);
        return pool;
    };
    spec.k = 2;
    spec.candidate_size = 5;
    spec.seed = 11;
    return simulate_interactions(provider, spec);
}

}  // namespace

TEST_CASE("render_prompt") {
    const PromptBundle bundle = PromptBundle::defaults();
    PromptBindings b{{"profile", "likes coffee"}, {"history", ""}, {"time", describe_period(TimePeriod(7))},
                     {"k", "5"}};
    std::string cands;
    for (int i = 0; i < 25; ++i) cands += (i ? "," : "") + std::to_string(100 + i);
    b["candidates"] = cands;

    const std::string text = render_prompt(bundle, PromptKind::Simulation, b);
    CHECK(text == render_prompt(bundle, PromptKind::Simulation, b));
    for (int i = 0; i < 25; ++i) CHECK(text.find(std::to_string(100 + i)) != std::string::npos);
    CHECK(text.find("Tuesday afternoon") != std::string::npos);
    CHECK(text.find("SELECTED: id1,id2,...") != std::string::npos);
    CHECK(text.find('{') == std::string::npos);

    b.erase("time");
    try {
        render_prompt(bundle, PromptKind::Simulation, b);
        FAIL("expected MissingBinding");
    } catch (const MissingBinding& e) {
        CHECK(std::string(e.what()).find("time") != std::string::npos);
    }
    CHECK_NOTHROW(render_prompt(bundle, PromptKind::UserProfile, {{"history", ""}}));
    CHECK_THROWS_AS(render_prompt(bundle, PromptKind::ItemAttribute, {{"item", "x"}}), MissingBinding);
}

TEST_CASE("describe_period") {
    CHECK(describe_period(TimePeriod(0)) == "Monday morning");
    CHECK(describe_period(TimePeriod(34)) == "Sunday late hours");
}

TEST_CASE("parse_selected") {
    CHECK(parse_selected("SELECTED: 1,2,3") == std::vector<std::string>{"1", "2", "3"});
    CHECK(parse_selected("thinking...\n  SELECTED: a , b\nbye") == std::vector<std::string>{"a", "b"});
    try {
        parse_selected("I pick 1 and 2");
        FAIL("expected MalformedResponse");
    } catch (const MalformedResponse& e) {
        CHECK(e.raw() == "I pick 1 and 2");
    }
}

TEST_CASE("external provider over a mock transport") {
    SimulationRequest req;
    req.user = 0;
    req.period = TimePeriod(3);
    req.pool = {4, 8, 15, 16, 23, 42};
    req.k = 3;

    SUBCASE("loopback") {
        ScriptedTransport t{{"SELECTED: 15,4,42"}};
        ExternalLlmProvider p(t, PromptBundle::defaults());
        CHECK(p.select_top_k(req) == std::vector<std::size_t>{15, 4, 42});
        CHECK(*t.calls == 1);
        CHECK(t.last_prompt->find("4,8,15,16,23,42") != std::string::npos);
    }
    SUBCASE("ids outside the pool are dropped and a short answer is re-asked") {
        ScriptedTransport t{{"SELECTED: 99,15,15", "SELECTED: 7,8,16"}};
        ExternalLlmProvider p(t, PromptBundle::defaults(), 3);
        CHECK(p.select_top_k(req) == std::vector<std::size_t>{15, 8, 16});
        CHECK(*t.calls == 2);
    }
    SUBCASE("retries are bounded") {
        ScriptedTransport t{{"SELECTED: 99"}};
        ExternalLlmProvider p(t, PromptBundle::defaults(), 2);
        CHECK_THROWS_AS(p.select_top_k(req), RetryExhausted);
        CHECK(*t.calls == 3);
    }
    SUBCASE("transport and format errors surface") {
        ExternalLlmProvider broken([](const std::string&) -> std::string { throw TransportError("down"); },
                                   PromptBundle::defaults());
        CHECK_THROWS_AS(broken.select_top_k(req), TransportError);
        ExternalLlmProvider chatty([](const std::string&) { return std::string("no idea"); }, PromptBundle::defaults());
        CHECK_THROWS_AS(chatty.select_top_k(req), MalformedResponse);
    }
    SUBCASE("custom id names") {
        ScriptedTransport t{{"SELECTED: item-16,item-4,item-8"}};
        ExternalLlmProvider p(t, PromptBundle::defaults(), 0, [](std::size_t i) { return "item-" + std::to_string(i); });
        CHECK(p.select_top_k(req) == std::vector<std::size_t>{16, 4, 8});
    }
}

TEST_CASE("oracle provider") {
    const SyntheticPeriodicEnv env(small_config());
    SimulationRequest req;
    req.user = 2;
    req.period = TimePeriod(9);
    req.pool = {1, 3, 5, 7, 9, 11, 13, 17, 19, 23};
    req.k = 2;

    OracleProvider exact(env, 0.0, 1);
    CHECK(exact.select_top_k(req) == true_top_k(env, 2, TimePeriod(9), req.pool, 2));

    OracleProvider noisy(env, 0.4, 1), again(env, 0.4, 1);
    CHECK(noisy.select_top_k(req) == again.select_top_k(req));

    SimulationRequest whole = req;
    whole.k = whole.pool.size();
    const auto all = OracleProvider(env, 1.0, 1).select_top_k(whole);
    CHECK(std::set<std::size_t>(all.begin(), all.end()) == std::set<std::size_t>(req.pool.begin(), req.pool.end()));

    CHECK_THROWS_AS(OracleProvider(env, 1.5, 1), BadConfig);
    SimulationRequest big = req;
    big.k = 11;
    CHECK_THROWS_AS(exact.select_top_k(big), BadConfig);
}

TEST_CASE("full corruption: overlap with the true top-k") {
    // k = 2 from n items, every slot swapped for an item outside the current
    // pick. Slot 0 always leaves the true top-2. Slot 1 draws from n - 2 items
    // of which one (the evicted best) is a true top item, so E[overlap] = 1/(n-2),
    // below the k²/n of a uniform pick.
    const SyntheticPeriodicEnv env(small_config());
    const std::size_t n = 10;
    double overlap = 0.0;
    const int draws = 4000;
    for (int d = 0; d < draws; ++d) {
        SimulationRequest req;
        req.user = static_cast<std::size_t>(d) % 6;
        req.period = TimePeriod(d % 35);
        for (std::size_t i = 0; i < n; ++i) req.pool.push_back((static_cast<std::size_t>(d) + 3 * i) % 30);
        req.k = 2;
        const auto top = true_top_k(env, req.user, req.period, req.pool, 2);
        const auto got = OracleProvider(env, 1.0, 100 + static_cast<std::uint64_t>(d)).select_top_k(req);
        CHECK(got.size() == 2);
        CHECK(got[0] != got[1]);
        for (std::size_t x : got) overlap += std::count(top.begin(), top.end(), x);
    }
    const double mean = overlap / draws, want = 1.0 / (n - 2);
    const double sd = std::sqrt(want * (1 - want) / draws);
    CHECK(std::fabs(mean - want) < 4 * sd);
    CHECK(mean < 4.0 / n);
}

TEST_CASE("simulate_interactions") {
    const SyntheticPeriodicEnv env(small_config());
    const auto recs = oracle_records(env, 0.0, 4);
    CHECK(recs.size() == 6 * 4 * 2);
    std::set<std::tuple<std::size_t, int, std::size_t>> seen;
    for (const auto& r : recs) {
        CHECK_NOTHROW(validate_record(r));
        CHECK(r.candidates.size() == 5);
        CHECK(r.reward == 1.0);
        seen.emplace(r.user, r.period.value(), r.chosen);
        // ε = 0: the positive is at least as good as every negative in its record.
        for (std::size_t c : r.candidates)
            CHECK(env.true_reward(r.user, r.chosen, r.period) >= env.true_reward(r.user, c, r.period));
    }
    CHECK(seen.size() == recs.size());
    CHECK(recs == oracle_records(env, 0.0, 4));

    SUBCASE("single user, period and k = 1") {
        OracleProvider provider(env, 0.0, 3);
        SimulationSpec spec;
        spec.users = {1};
        spec.periods = {TimePeriod(20)};
        spec.pool = [](std::size_t, TimePeriod) { return iota(8); };
        spec.k = 1;
        spec.candidate_size = 5;
        const auto one = simulate_interactions(provider, spec);
        REQUIRE(one.size() == 1);
        CHECK(one[0].candidates.size() == 5);
        CHECK(one[0].chosen == true_top_k(env, 1, TimePeriod(20), iota(8), 1)[0]);

        spec.pool = [](std::size_t, TimePeriod) { return iota(4); };
        CHECK_THROWS_AS(simulate_interactions(provider, spec), BadConfig);
    }
}

TEST_CASE("partition_buffers") {
    const SyntheticPeriodicEnv env(small_config());
    const auto recs = oracle_records(env, 0.0, 3);
    const auto bufs = partition_buffers(recs, 10, 4);
    REQUIRE(bufs.size() == 4);
    CHECK(bufs.back().size() == recs.size() - 30);
    std::size_t total = 0;
    std::vector<InteractionRecord> flat;
    for (const auto& b : bufs) {
        total += b.size();
        flat.insert(flat.end(), b.begin(), b.end());
    }
    CHECK(total == recs.size());
    CHECK(std::is_permutation(flat.begin(), flat.end(), recs.begin()));
    CHECK(partition_buffers(recs, 10, 4) == bufs);
    CHECK(partition_buffers({}, 10, 4).empty());
    CHECK_THROWS_AS(partition_buffers(recs, 0, 4), BadConfig);
}

TEST_CASE("llm_start") {
    const SyntheticPeriodicEnv env(small_config());
    TrainOptions train;
    train.max_epochs = 5;
    train.seed = 2;

    SUBCASE("zero buffers leave the initial state") {
        HyperBanditPolicy policy = policy_for(env);
        HyperNetwork hn = net_for(env, 1);
        const HyperBanditPolicy p0 = policy;
        const HyperNetwork h0 = hn;
        const auto res = llm_start(policy, hn, {}, env, train);
        CHECK(policy == p0);
        CHECK(hn == h0);
        CHECK(res.interactions == 0);
        CHECK(res.hypernetwork == h0);
        for (std::size_t i = 0; i < env.num_items(); ++i) CHECK(res.arms[i] == p0.arm(i));
    }
    SUBCASE("touched arms narrow the exploration term") {
        const auto bufs = partition_buffers(oracle_records(env, 0.1, 35), 40, 5);
        HyperBanditPolicy policy = policy_for(env);
        HyperNetwork hn = net_for(env, 1);
        const HyperBanditPolicy cold = policy;
        const auto res = llm_start(policy, hn, bufs, env, train);
        CHECK(res.interactions == 6 * 35 * 2);

        std::mt19937_64 g(5);
        std::size_t touched = 0;
        for (std::size_t i = 0; i < env.num_items(); ++i) {
            const ArmStats& a = res.arms[i];
            CHECK(a == policy.arm(i));
            bool nonzero = false;
            for (double v : a.phi.data()) {
                CHECK(std::isfinite(v));
                nonzero |= v != 0.0;
            }
            if (!nonzero) continue;
            ++touched;
            for (int q = 0; q < 20; ++q) {
                const Vector p = oracle::random_vector(g, 2);
                CHECK(exploration_quadratic(a.phi, 1.0, p) <= exploration_quadratic(cold.arm(i).phi, 1.0, p) + 1e-9);
            }
            // Φ is PSD: x^T Φ x ≥ 0.
            const Vector x = oracle::random_vector(g, 2);
            CHECK(bilinear(x, a.phi, x) >= -1e-9);
        }
        CHECK(touched > 0);
        CHECK_FALSE(hn == net_for(env, 1));

        // Bit-identical when repeated.
        HyperBanditPolicy policy2 = policy_for(env);
        HyperNetwork hn2 = net_for(env, 1);
        const auto res2 = llm_start(policy2, hn2, bufs, env, train);
        CHECK(res2.hypernetwork == res.hypernetwork);
        CHECK(res2.arms == res.arms);
    }
    SUBCASE("empty buffer") {
        HyperBanditPolicy policy = policy_for(env);
        HyperNetwork hn = net_for(env, 1);
        const std::vector<std::vector<InteractionRecord>> bufs{{}};
        CHECK_THROWS_AS(llm_start(policy, hn, bufs, env, train), EmptyBuffer);
    }
}
