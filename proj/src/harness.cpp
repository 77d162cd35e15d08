#include "hyperbandit/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "hyperbandit/csv.hpp"
#include "hyperbandit/errors.hpp"
#include "hyperbandit/warmstart.hpp"

namespace hyperbandit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

/// Reads keys from one JSON object and rejects any it did not consume.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError("'" + name_ + "' must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("'" + name_ + "." + key + "': " + e.what());
        }
    }

    std::optional<json> raw(const char* key) {
        seen_.insert(key);
        if (!j_.contains(key)) return std::nullopt;
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.contains(key)) throw ConfigError("unknown key '" + name_ + "." + key + "'");
    }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

template <class E>
E parse_enum(const std::string& where, const std::string& value, std::initializer_list<std::pair<const char*, E>> options) {
    for (const auto& [name, e] : options)
        if (value == name) return e;
    std::string allowed;
    for (const auto& [name, e] : options) allowed += std::string(allowed.empty() ? "" : "|") + name;
    throw ConfigError("'" + where + "' must be one of " + allowed + ", got '" + value + "'");
}

template <class E>
std::string enum_name(E value, std::initializer_list<std::pair<const char*, E>> options) {
    for (const auto& [name, e] : options)
        if (e == value) return name;
    return "?";
}

const std::initializer_list<std::pair<const char*, PolicyKind>> kPolicyKinds = {
    {"hyperbandit", PolicyKind::HyperBandit}, {"linucb", PolicyKind::LinUcb},
    {"restart_ucb", PolicyKind::RestartUcb},  {"random", PolicyKind::Random},
    {"oracle", PolicyKind::Oracle}};
const std::initializer_list<std::pair<const char*, EmbeddingMode>> kEmbeddings = {
    {"euler", EmbeddingMode::Euler}, {"one_hot", EmbeddingMode::OneHot}};
const std::initializer_list<std::pair<const char*, LabelRule>> kLabelRules = {
    {"click", LabelRule::Click}, {"reward", LabelRule::Reward}};
const std::initializer_list<std::pair<const char*, WarmStartMode>> kWarmModes = {
    {"off", WarmStartMode::Off}, {"oracle", WarmStartMode::Oracle}, {"external", WarmStartMode::External}};
const std::initializer_list<std::pair<const char*, EnvironmentKind>> kEnvKinds = {
    {"synthetic", EnvironmentKind::Synthetic}, {"replay", EnvironmentKind::Replay}};
const std::initializer_list<std::pair<const char*, RewardMode>> kRewardModes = {
    {"real", RewardMode::Real}, {"bernoulli", RewardMode::Bernoulli}};

}  // namespace

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    if (schedule.batch_steps == 0) throw ConfigError("schedule.batch_steps must be positive");
    if (policy.kind == PolicyKind::RestartUcb && policy.restart_interval && *policy.restart_interval == 0)
        throw ConfigError("policy.restart_interval must be >= 1");
    if (!(policy.alpha >= 0.0)) throw ConfigError("policy.alpha must be >= 0");
    if (!(policy.lambda > 0.0)) throw ConfigError("policy.lambda must be > 0");
    if (!(warm_start.corruption >= 0.0 && warm_start.corruption <= 1.0))
        throw ConfigError("warm_start.corruption must be in [0, 1]");
    if (warm_start.mode != WarmStartMode::Off && policy.kind != PolicyKind::HyperBandit)
        throw ConfigError("warm start applies to the hyperbandit policy only");
    if (warm_start.mode != WarmStartMode::Off && warm_start.k == 0) throw ConfigError("warm_start.k must be >= 1");
    try {
        train.validate();
    } catch (const BadConfig& e) {
        throw ConfigError(std::string("train: ") + e.what());
    }
    if (environment.kind == EnvironmentKind::Replay &&
        (environment.log.empty() || environment.user_features.empty() || environment.item_features.empty()))
        throw ConfigError("replay environment needs log, user_features and item_features");
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    Section root(j, "config");
    int version = 0;
    root.get("schema_version", version);
    if (version != ExperimentConfig::kSchemaVersion)
        throw ConfigError("schema_version must be " + std::to_string(ExperimentConfig::kSchemaVersion));

    if (auto env = root.raw("environment")) {
        Section s(*env, "environment");
        std::string kind = "synthetic";
        s.get("kind", kind);
        cfg.environment.kind = parse_enum("environment.kind", kind, kEnvKinds);
        auto& sc = cfg.environment.synthetic;
        s.get("user_dim", sc.user_dim);
        s.get("observed_dim", sc.observed_dim);
        s.get("latent_dim", sc.latent_dim);
        s.get("num_users", sc.num_users);
        s.get("num_items", sc.num_items);
        s.get("rank", sc.rank);
        s.get("period_similarity", sc.period_similarity);
        s.get("noise_sigma", sc.noise_sigma);
        s.get("period_noise_sigma", sc.period_noise_sigma);
        s.get("candidate_size", sc.candidate_size);
        s.get("steps_per_period", sc.steps_per_period);
        std::string reward_mode = "real";
        s.get("reward_mode", reward_mode);
        sc.reward_mode = parse_enum("environment.reward_mode", reward_mode, kRewardModes);
        s.get("latent_drift_interval", sc.latent_drift_interval);
        s.get("latent_drift_scale", sc.latent_drift_scale);
        std::string log, users, items;
        s.get("log", log);
        s.get("user_features", users);
        s.get("item_features", items);
        cfg.environment.log = log;
        cfg.environment.user_features = users;
        cfg.environment.item_features = items;
        s.finish();
    }
    if (auto pol = root.raw("policy")) {
        Section s(*pol, "policy");
        std::string kind = "hyperbandit", embedding = "euler", label = "reward";
        s.get("kind", kind);
        cfg.policy.kind = parse_enum("policy.kind", kind, kPolicyKinds);
        s.get("alpha", cfg.policy.alpha);
        s.get("lambda", cfg.policy.lambda);
        s.get("rank", cfg.policy.rank);
        s.get("latent_dim", cfg.policy.latent_dim);
        s.get("embedding", embedding);
        cfg.policy.embedding = parse_enum("policy.embedding", embedding, kEmbeddings);
        s.get("hidden_layers", cfg.policy.hidden_layers);
        s.get("train_hypernet", cfg.policy.train_hypernet);
        s.get("label_rule", label);
        cfg.policy.label_rule = parse_enum("policy.label_rule", label, kLabelRules);
        if (auto h = s.raw("restart_interval"); h && !h->is_null()) {
            if (!h->is_number_unsigned()) throw ConfigError("'policy.restart_interval' must be a positive integer or null");
            cfg.policy.restart_interval = h->get<std::size_t>();
        }
        s.finish();
    }
    if (auto sched = root.raw("schedule")) {
        Section s(*sched, "schedule");
        s.get("total_steps", cfg.schedule.total_steps);
        s.get("batch_steps", cfg.schedule.batch_steps);
        s.finish();
    }
    if (auto train = root.raw("train")) {
        Section s(*train, "train");
        s.get("learning_rate", cfg.train.learning_rate);
        s.get("adam_beta1", cfg.train.adam_beta1);
        s.get("adam_beta2", cfg.train.adam_beta2);
        s.get("adam_epsilon", cfg.train.adam_epsilon);
        s.get("max_epochs", cfg.train.max_epochs);
        s.get("patience", cfg.train.patience);
        s.get("validation_fraction", cfg.train.validation_fraction);
        s.get("batch_size", cfg.train.batch_size);
        s.finish();
    }
    if (auto warm = root.raw("warm_start")) {
        Section s(*warm, "warm_start");
        std::string mode = "off";
        s.get("mode", mode);
        cfg.warm_start.mode = parse_enum("warm_start.mode", mode, kWarmModes);
        s.get("corruption", cfg.warm_start.corruption);
        s.get("k", cfg.warm_start.k);
        s.get("pool_size", cfg.warm_start.pool_size);
        s.get("buffer_size", cfg.warm_start.buffer_size);
        s.finish();
    }
    root.get("seeds", cfg.seeds);
    std::string out = cfg.output_dir.string();
    root.get("output_dir", out);
    cfg.output_dir = out;
    root.finish();
    cfg.validate();
    return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
    const auto& sc = cfg.environment.synthetic;
    json j;
    j["schema_version"] = ExperimentConfig::kSchemaVersion;
    j["environment"] = {
        {"kind", enum_name(cfg.environment.kind, kEnvKinds)},
        {"user_dim", sc.user_dim},
        {"observed_dim", sc.observed_dim},
        {"latent_dim", sc.latent_dim},
        {"num_users", sc.num_users},
        {"num_items", sc.num_items},
        {"rank", sc.rank},
        {"period_similarity", sc.period_similarity},
        {"noise_sigma", sc.noise_sigma},
        {"period_noise_sigma", sc.period_noise_sigma},
        {"candidate_size", sc.candidate_size},
        {"steps_per_period", sc.steps_per_period},
        {"reward_mode", enum_name(sc.reward_mode, kRewardModes)},
        {"latent_drift_interval", sc.latent_drift_interval},
        {"latent_drift_scale", sc.latent_drift_scale},
        {"log", cfg.environment.log.string()},
        {"user_features", cfg.environment.user_features.string()},
        {"item_features", cfg.environment.item_features.string()},
    };
    j["policy"] = {
        {"kind", enum_name(cfg.policy.kind, kPolicyKinds)},
        {"alpha", cfg.policy.alpha},
        {"lambda", cfg.policy.lambda},
        {"rank", cfg.policy.rank},
        {"latent_dim", cfg.policy.latent_dim},
        {"embedding", enum_name(cfg.policy.embedding, kEmbeddings)},
        {"hidden_layers", cfg.policy.hidden_layers},
        {"train_hypernet", cfg.policy.train_hypernet},
        {"label_rule", enum_name(cfg.policy.label_rule, kLabelRules)},
        {"restart_interval", cfg.policy.restart_interval ? json(*cfg.policy.restart_interval) : json(nullptr)},
    };
    j["schedule"] = {{"total_steps", cfg.schedule.total_steps}, {"batch_steps", cfg.schedule.batch_steps}};
    j["train"] = {
        {"learning_rate", cfg.train.learning_rate}, {"adam_beta1", cfg.train.adam_beta1},
        {"adam_beta2", cfg.train.adam_beta2},       {"adam_epsilon", cfg.train.adam_epsilon},
        {"max_epochs", cfg.train.max_epochs},       {"patience", cfg.train.patience},
        {"validation_fraction", cfg.train.validation_fraction}, {"batch_size", cfg.train.batch_size},
    };
    j["warm_start"] = {
        {"mode", enum_name(cfg.warm_start.mode, kWarmModes)}, {"corruption", cfg.warm_start.corruption},
        {"k", cfg.warm_start.k}, {"pool_size", cfg.warm_start.pool_size},
        {"buffer_size", cfg.warm_start.buffer_size},
    };
    j["seeds"] = cfg.seeds;
    j["output_dir"] = cfg.output_dir.string();
    return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    ExperimentConfig cfg = config_from_json(j);
    const auto base = path.parent_path();
    auto resolve = [&](std::filesystem::path& p) {
        if (!p.empty() && p.is_relative()) p = base / p;
    };
    resolve(cfg.environment.log);
    resolve(cfg.environment.user_features);
    resolve(cfg.environment.item_features);
    return cfg;
}

std::string policy_name(const PolicySpec& spec) {
    switch (spec.kind) {
        case PolicyKind::HyperBandit: {
            std::string name = "hyperbandit";
            if (spec.rank > 0) name += "_rank" + std::to_string(spec.rank);
            if (spec.latent_dim == 0) name += "_no_rr";
            if (!spec.train_hypernet) name += "_no_hn";
            return name;
        }
        case PolicyKind::LinUcb: return "linucb";
        case PolicyKind::RestartUcb:
            return spec.restart_interval ? "restart_ucb_h" + std::to_string(*spec.restart_interval) : "restart_ucb_hinf";
        case PolicyKind::Random: return "random";
        case PolicyKind::Oracle: return "oracle";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Running

std::unique_ptr<Environment> make_environment(const EnvironmentSpec& spec, std::uint64_t seed) {
    if (spec.kind == EnvironmentKind::Synthetic) {
        SyntheticConfig sc = spec.synthetic;
        sc.seed = seed;
        try {
            return std::make_unique<SyntheticPeriodicEnv>(sc);
        } catch (const BadConfig& e) {
            throw ConfigError(e.what());
        }
    }
    FeatureBundle bundle{FeatureTable::load(spec.user_features), FeatureTable::load(spec.item_features)};
    return std::make_unique<ReplayEnv>(spec.log, std::move(bundle));
}

namespace {

class Runner {
public:
    virtual ~Runner() = default;
    virtual std::size_t choose(const StepContext& ctx) = 0;
    virtual void learn(const StepContext& ctx, std::size_t chosen, double reward) = 0;
    /// Called after each batch; returns true if it trained something.
    virtual bool end_batch(std::size_t batch) {
        (void)batch;
        return false;
    }
    virtual void finish(MetricsLog& log) { (void)log; }
};

std::vector<Vector> all_item_features(const Environment& env) {
    std::vector<Vector> out;
    out.reserve(env.num_items());
    for (std::size_t i = 0; i < env.num_items(); ++i) out.push_back(env.item_features(i));
    return out;
}

class HyperBanditRunner final : public Runner {
public:
    HyperBanditRunner(const ExperimentConfig& cfg, Environment& env, std::uint64_t seed)
        : cfg_(cfg), env_(env), seed_(seed),
          policy_(HyperBanditConfig{cfg.policy.alpha, cfg.policy.lambda, env.observed_dim(), cfg.policy.latent_dim,
                                    cfg.policy.embedding},
                  all_item_features(env)) {
        const PreferenceShape shape{env.observed_dim(), cfg.policy.latent_dim, env.user_dim(), cfg.policy.rank};
        hn_ = init_xavier(hypernet_layer_sizes(embedding_dim(cfg.policy.embedding), cfg.policy.hidden_layers, shape),
                          shape, mix_seed(seed, 0x4e));
        train_ = cfg.train;
        train_.loss.embedding = cfg.policy.embedding;
        train_.loss.label_rule = cfg.policy.label_rule;
        if (cfg.warm_start.mode != WarmStartMode::Off) warm_start();
        refresh_thetas();
    }

    std::size_t choose(const StepContext& ctx) override {
        return policy_.select(theta(ctx.period), env_.user_context(ctx.user), ctx.candidates);
    }

    void learn(const StepContext& ctx, std::size_t chosen, double reward) override {
        InteractionRecord rec{ctx.user, chosen, ctx.period, reward, ctx.candidates};
        policy_.update(theta(ctx.period), rec, env_.user_context(ctx.user));
        buffer_.push_back(std::move(rec));
    }

    bool end_batch(std::size_t batch) override {
        bool trained = false;
        if (cfg_.policy.train_hypernet && !buffer_.empty()) {
            TrainOptions opts = train_;
            opts.seed = mix_seed(seed_, 0x7a, batch);
            train_minibatch(hn_, buffer_, PolicyContexts(env_, policy_), opts);
            refresh_thetas();
            trained = true;
        }
        buffer_.clear();
        return trained;
    }

    void finish(MetricsLog& log) override { log.rank_report = rank_report(hn_, cfg_.policy.embedding); }

private:
    const PreferenceMatrix& theta(TimePeriod p) const { return thetas_[static_cast<std::size_t>(p.value())]; }

    void refresh_thetas() {
        thetas_.clear();
        for (int p = 0; p < kNumPeriods; ++p) thetas_.push_back(forward(hn_, embed(TimePeriod(p), cfg_.policy.embedding)));
    }

    void warm_start() {
        const WarmStartSpec& ws = cfg_.warm_start;
        std::unique_ptr<AugmentationProvider> provider;
        if (ws.mode == WarmStartMode::Oracle) {
            const auto* synthetic = dynamic_cast<const SyntheticPeriodicEnv*>(&env_);
            if (!synthetic) throw ConfigError("oracle warm start needs a synthetic environment");
            provider = std::make_unique<OracleProvider>(*synthetic, ws.corruption, mix_seed(seed_, 0x0c));
        } else {
            const auto ext = ExternalProviderConfig::from_environment();
            if (!ext) throw ConfigError("external warm start needs HYPERBANDIT_LLM_ENDPOINT");
            provider = std::make_unique<ExternalLlmProvider>(make_http_transport(*ext), PromptBundle::defaults(),
                                                             ext->max_retries);
        }

        SimulationSpec spec;
        for (std::size_t u = 0; u < env_.num_users(); ++u) spec.users.push_back(u);
        for (int p = 0; p < kNumPeriods; ++p) spec.periods.emplace_back(p);
        spec.k = ws.k;
        spec.candidate_size = env_.candidate_size();
        spec.seed = mix_seed(seed_, 0x51);
        const std::size_t n_items = env_.num_items();
        const std::size_t pool_size = ws.pool_size == 0 ? n_items : std::min(ws.pool_size, n_items);
        const std::uint64_t pool_seed = mix_seed(seed_, 0x52);
        spec.pool = [n_items, pool_size, pool_seed](std::size_t user, TimePeriod period) {
            std::vector<std::size_t> items(n_items);
            std::iota(items.begin(), items.end(), std::size_t{0});
            Rng rng = make_rng(pool_seed, user, static_cast<std::uint64_t>(period.value()));
            for (std::size_t i = 0; i < pool_size; ++i)
                std::swap(items[i], items[i + static_cast<std::size_t>(rng.below(n_items - i))]);
            items.resize(pool_size);
            return items;
        };

        auto records = simulate_interactions(*provider, spec);
        const std::size_t buffer_size = ws.buffer_size == 0 ? cfg_.schedule.batch_steps : ws.buffer_size;
        const auto buffers = partition_buffers(std::move(records), buffer_size, mix_seed(seed_, 0x53));
        TrainOptions opts = train_;
        opts.seed = mix_seed(seed_, 0x54);
        llm_start(policy_, hn_, buffers, env_, opts);
    }

    const ExperimentConfig& cfg_;
    Environment& env_;
    std::uint64_t seed_;
    HyperBanditPolicy policy_;
    HyperNetwork hn_;
    TrainOptions train_;
    std::vector<PreferenceMatrix> thetas_;
    std::vector<InteractionRecord> buffer_;
};

class LinUcbRunner final : public Runner {
public:
    LinUcbRunner(const ExperimentConfig& cfg, const Environment& env, std::optional<std::size_t> interval)
        : env_(env), features_(all_item_features(env)),
          policy_(LinUcbConfig{cfg.policy.alpha, cfg.policy.lambda, env.user_dim() + env.observed_dim()},
                  env.num_items(), interval) {}

    std::size_t choose(const StepContext& ctx) override {
        return policy_.select(ctx.t, env_.user_context(ctx.user), ctx.candidates, features_);
    }

    void learn(const StepContext& ctx, std::size_t chosen, double reward) override {
        policy_.update(chosen, policy_.inner().features(env_.user_context(ctx.user), features_[chosen]), reward);
    }

private:
    const Environment& env_;
    std::vector<Vector> features_;
    RestartUcbPolicy policy_;
};

class RandomRunner final : public Runner {
public:
    explicit RandomRunner(std::uint64_t seed) : policy_(seed) {}
    std::size_t choose(const StepContext& ctx) override { return policy_.select(ctx.candidates); }
    void learn(const StepContext&, std::size_t, double) override {}

private:
    RandomPolicy policy_;
};

class OracleRunner final : public Runner {
public:
    explicit OracleRunner(const Environment& env) : env_(env) {}

    std::size_t choose(const StepContext& ctx) override {
        std::size_t best = ctx.candidates.front();
        double best_r = -std::numeric_limits<double>::infinity();
        for (std::size_t c : ctx.candidates) {
            const auto r = env_.expected_reward(ctx, c);
            if (!r) throw ConfigError("oracle policy needs an environment with ground truth");
            if (*r > best_r || (*r == best_r && c < best)) {
                best = c;
                best_r = *r;
            }
        }
        return best;
    }
    void learn(const StepContext&, std::size_t, double) override {}

private:
    const Environment& env_;
};

std::unique_ptr<Runner> make_runner(const ExperimentConfig& cfg, Environment& env, std::uint64_t seed) {
    switch (cfg.policy.kind) {
        case PolicyKind::HyperBandit: return std::make_unique<HyperBanditRunner>(cfg, env, seed);
        case PolicyKind::LinUcb: return std::make_unique<LinUcbRunner>(cfg, env, std::nullopt);
        case PolicyKind::RestartUcb: return std::make_unique<LinUcbRunner>(cfg, env, cfg.policy.restart_interval);
        case PolicyKind::Random: return std::make_unique<RandomRunner>(seed);
        case PolicyKind::Oracle: return std::make_unique<OracleRunner>(env);
    }
    throw ConfigError("unknown policy kind");
}

void accumulate(MetricsLog& log) {
    auto prefix = [](const Vector& in) {
        Vector out(in.size());
        std::partial_sum(in.begin(), in.end(), out.begin());
        return out;
    };
    log.accumulated_reward = prefix(log.reward);
    log.accumulated_true_reward = prefix(log.true_reward);
    log.dynamic_regret = prefix(log.regret);
}

}  // namespace

MetricsLog run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    auto env = make_environment(cfg.environment, seed);
    std::size_t total = cfg.schedule.total_steps;
    if (const auto h = env->horizon()) total = std::min(total, *h);

    MetricsLog log;
    log.seed = seed;
    log.policy = policy_name(cfg.policy);
    if (const auto* synthetic = dynamic_cast<const SyntheticPeriodicEnv*>(env.get()))
        log.path_length = synthetic->path_length(total);

    auto runner = make_runner(cfg, *env, seed);

    using Clock = std::chrono::steady_clock;
    std::chrono::duration<double> bandit_time{0.0};
    std::chrono::duration<double> train_time{0.0};
    const bool has_truth = total > 0 && env->expected_reward(env->step(0), env->step(0).candidates.front()).has_value();

    std::size_t batch = 0;
    for (std::size_t start = 0; start < total; start += cfg.schedule.batch_steps, ++batch) {
        const std::size_t end = std::min(total, start + cfg.schedule.batch_steps);
        for (std::size_t t = start; t < end; ++t) {
            const StepContext ctx = env->step(t);
            const auto t0 = Clock::now();
            const std::size_t chosen = runner->choose(ctx);
            const double reward = env->observe(ctx, chosen);
            runner->learn(ctx, chosen, reward);
            bandit_time += Clock::now() - t0;

            log.user.push_back(ctx.user);
            log.period.push_back(ctx.period.value());
            log.chosen.push_back(chosen);
            log.reward.push_back(reward);
            if (has_truth) {
                double best = -std::numeric_limits<double>::infinity();
                for (std::size_t c : ctx.candidates) best = std::max(best, *env->expected_reward(ctx, c));
                const double r = *env->expected_reward(ctx, chosen);
                log.true_reward.push_back(r);
                log.regret.push_back(best - r);
            }
        }
        const auto t0 = Clock::now();
        if (runner->end_batch(batch)) {
            train_time += Clock::now() - t0;
            ++log.hypernet_updates;
        }
    }
    runner->finish(log);
    accumulate(log);
    if (total > 0) log.seconds_per_bandit_step = bandit_time.count() / static_cast<double>(total);
    if (log.hypernet_updates > 0)
        log.seconds_per_hypernet_update = train_time.count() / static_cast<double>(log.hypernet_updates);
    return log;
}

std::vector<MetricsLog> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<std::future<MetricsLog>> futures;
    for (std::uint64_t seed : cfg.seeds)
        futures.push_back(std::async(std::launch::async, [&cfg, seed] { return run_seed(cfg, seed); }));
    std::vector<MetricsLog> logs;
    for (auto& f : futures) logs.push_back(f.get());
    return logs;
}

Vector dynamic_regret(const MetricsLog& log, const Environment& env) {
    Vector series;
    series.reserve(log.size());
    double total = 0.0;
    for (std::size_t t = 0; t < log.size(); ++t) {
        const StepContext ctx = env.step(t);
        const auto chosen = env.expected_reward(ctx, log.chosen[t]);
        if (!chosen) throw ReplayNotSupported("dynamic regret needs an environment with known true rewards");
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t c : ctx.candidates) best = std::max(best, *env.expected_reward(ctx, c));
        total += best - *chosen;
        series.push_back(total);
    }
    return series;
}

Vector normalized_accumulated_reward(const MetricsLog& log, const MetricsLog& random_log) {
    if (log.accumulated_reward.size() != random_log.accumulated_reward.size())
        throw LengthMismatch("normalized reward needs logs of equal length");
    Vector out(log.accumulated_reward.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double denom = random_log.accumulated_reward[i];
        if (denom > 0.0) out[i] = log.accumulated_reward[i] / denom;
    }
    return out;
}

double path_length(const SyntheticPeriodicEnv& env, std::size_t horizon) { return env.path_length(horizon); }

SeriesSummary summarize(std::span<const double> values) {
    SeriesSummary s;
    s.n = values.size();
    if (s.n == 0) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
    if (s.n < 2) return s;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
    return s;
}

// ---------------------------------------------------------------------------
// Output files

namespace {

constexpr const char* kStepHeader =
    "t,user,period,chosen,reward,true_reward,regret,accumulated_reward,accumulated_true_reward,dynamic_regret";

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::string step_file_name(const MetricsLog& log) {
    return "steps_" + log.policy + "_seed" + std::to_string(log.seed) + ".csv";
}

}  // namespace

void emit_outputs(std::span<const MetricsLog> logs, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    for (const auto& log : logs) {
        auto out = open_out(dir / step_file_name(log));
        out << kStepHeader << '\n';
        const bool truth = log.true_reward.size() == log.size();
        for (std::size_t t = 0; t < log.size(); ++t) {
            out << t << ',' << log.user[t] << ',' << log.period[t] << ',' << log.chosen[t] << ','
                << csv::format_double(log.reward[t]) << ',';
            if (truth) out << csv::format_double(log.true_reward[t]) << ',' << csv::format_double(log.regret[t]);
            else out << ',';
            out << ',' << csv::format_double(log.accumulated_reward[t]) << ',';
            if (truth)
                out << csv::format_double(log.accumulated_true_reward[t]) << ','
                    << csv::format_double(log.dynamic_regret[t]);
            else out << ',';
            out << '\n';
        }
        if (!out) throw IoError("failed writing " + (dir / step_file_name(log)).string());
    }

    // Group by policy, preserving first-appearance order.
    std::vector<std::string> policies;
    for (const auto& log : logs)
        if (std::find(policies.begin(), policies.end(), log.policy) == policies.end()) policies.push_back(log.policy);

    auto summary = open_out(dir / "summary.csv");
    summary << "policy,metric,mean,std,n\n";
    for (const auto& policy : policies) {
        std::map<std::string, Vector> metrics;
        std::vector<std::string> order;
        auto add = [&](const std::string& name, double v) {
            if (!metrics.contains(name)) order.push_back(name);
            metrics[name].push_back(v);
        };
        for (const auto& log : logs) {
            if (log.policy != policy) continue;
            add("final_accumulated_reward", log.accumulated_reward.empty() ? 0.0 : log.accumulated_reward.back());
            if (log.true_reward.size() == log.size() && log.size() > 0) {
                add("final_accumulated_true_reward", log.accumulated_true_reward.back());
                add("final_dynamic_regret", log.dynamic_regret.back());
            }
            add("path_length", log.path_length);
        }
        for (const auto& name : order) {
            const SeriesSummary s = summarize(metrics[name]);
            summary << policy << ',' << name << ',' << csv::format_double(s.mean) << ',' << csv::format_double(s.std)
                    << ',' << s.n << '\n';
        }
    }

    auto timing = open_out(dir / "timing.csv");
    timing << "policy,seed,seconds_per_bandit_step,seconds_per_hypernet_update,hypernet_updates\n";
    for (const auto& log : logs)
        timing << log.policy << ',' << log.seed << ',' << csv::format_double(log.seconds_per_bandit_step) << ','
               << csv::format_double(log.seconds_per_hypernet_update) << ',' << log.hypernet_updates << '\n';

    auto ranks = open_out(dir / "rank_report.csv");
    ranks << "policy,seed,period,index,singular_value\n";
    for (const auto& log : logs)
        for (std::size_t p = 0; p < log.rank_report.size(); ++p)
            for (std::size_t i = 0; i < log.rank_report[p].size(); ++i)
                ranks << log.policy << ',' << log.seed << ',' << p << ',' << i << ','
                      << csv::format_double(log.rank_report[p][i]) << '\n';
    if (!summary || !timing || !ranks) throw IoError("failed writing summary files in " + dir.string());
}

MetricsLog read_step_series(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    const std::string source = path.string();
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line) || line != kStepHeader) throw ParseError(source, 1, "unexpected header");

    MetricsLog log;
    auto number = [&](const std::string& s) {
        const auto v = csv::parse_double(s);
        if (!v) throw ParseError(source, line_no, "bad number '" + s + "'");
        return *v;
    };
    auto index = [&](const std::string& s) {
        const auto v = csv::parse_int64(s);
        if (!v || *v < 0) throw ParseError(source, line_no, "bad index '" + s + "'");
        return static_cast<std::size_t>(*v);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = csv::split(line);
        if (f.size() != 10) throw ParseError(source, line_no, "expected 10 fields");
        log.user.push_back(index(f[1]));
        log.period.push_back(static_cast<int>(index(f[2])));
        log.chosen.push_back(index(f[3]));
        log.reward.push_back(number(f[4]));
        log.accumulated_reward.push_back(number(f[7]));
        if (!f[5].empty()) {
            log.true_reward.push_back(number(f[5]));
            log.regret.push_back(number(f[6]));
            log.accumulated_true_reward.push_back(number(f[8]));
            log.dynamic_regret.push_back(number(f[9]));
        }
    }
    return log;
}

}  // namespace hyperbandit
