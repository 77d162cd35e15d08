// Experiment orchestration: configuration, the online loop, metrics and
// output files.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hyperbandit/environment.hpp"
#include "hyperbandit/hypernet.hpp"
#include "hyperbandit/policy.hpp"

namespace hyperbandit {

enum class PolicyKind { HyperBandit, LinUcb, RestartUcb, Random, Oracle };

struct PolicySpec {
    PolicyKind kind = PolicyKind::HyperBandit;
    double alpha = 0.1;
    /// Large enough that the ridge term, fit at reward scale, does not swamp
    /// the ListNet-scaled observed term.
    double lambda = 30.0;
    /// τ; 0 trains the full d_a × d_u output.
    std::size_t rank = 0;
    /// l_a used by the policy. 0 disables ridge updating of latent features.
    std::size_t latent_dim = 3;
    EmbeddingMode embedding = EmbeddingMode::Euler;
    std::vector<std::size_t> hidden_layers{64, 64};
    /// false freezes the hypernetwork at its initialisation.
    bool train_hypernet = true;
    LabelRule label_rule = LabelRule::Reward;
    /// Restart-UCB epoch length; nullopt never restarts.
    std::optional<std::size_t> restart_interval;
};

struct ScheduleSpec {
    std::size_t total_steps = 20000;  ///< T
    std::size_t batch_steps = 1000;   ///< T_n; the last batch may be shorter
};

enum class WarmStartMode { Off, Oracle, External };

struct WarmStartSpec {
    WarmStartMode mode = WarmStartMode::Off;
    double corruption = 0.1;  ///< oracle only
    std::size_t k = 5;
    /// Items offered to the provider per (user, period); 0 offers every item.
    std::size_t pool_size = 50;
    /// Records per simulated buffer; 0 uses the online batch size.
    std::size_t buffer_size = 0;
};

enum class EnvironmentKind { Synthetic, Replay };

struct EnvironmentSpec {
    EnvironmentKind kind = EnvironmentKind::Synthetic;
    SyntheticConfig synthetic;  ///< seed is overridden per run
    std::filesystem::path log;
    std::filesystem::path user_features;
    std::filesystem::path item_features;
};

struct ExperimentConfig {
    static constexpr int kSchemaVersion = 1;

    EnvironmentSpec environment;
    PolicySpec policy;
    ScheduleSpec schedule;
    TrainOptions train;
    WarmStartSpec warm_start;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::filesystem::path output_dir = "out";

    /// Throws ConfigError.
    void validate() const;
};

/// Throws ConfigError on unknown keys, bad values or a schema_version mismatch.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

std::string policy_name(const PolicySpec& spec);

struct MetricsLog {
    std::uint64_t seed = 0;
    std::string policy;

    std::vector<std::size_t> user;
    std::vector<int> period;
    std::vector<std::size_t> chosen;
    Vector reward;       ///< observed
    Vector true_reward;  ///< empty when the environment has no ground truth
    Vector regret;       ///< per step, against the best candidate

    Vector accumulated_reward;
    Vector accumulated_true_reward;
    Vector dynamic_regret;

    double seconds_per_bandit_step = 0.0;
    double seconds_per_hypernet_update = 0.0;
    std::size_t hypernet_updates = 0;
    double path_length = 0.0;
    /// Singular values of the final Θ_p per period (HyperBandit only).
    std::vector<Vector> rank_report;

    std::size_t size() const noexcept { return chosen.size(); }
};

std::unique_ptr<Environment> make_environment(const EnvironmentSpec& spec, std::uint64_t seed);

/// One seed of the configured experiment.
MetricsLog run_seed(const ExperimentConfig& cfg, std::uint64_t seed);
/// All seeds; seeds run in parallel, results in seed order.
std::vector<MetricsLog> run_experiment(const ExperimentConfig& cfg);

/// Prefix sums of best-in-candidates minus chosen true reward, recomputed by
/// replaying the environment's step stream. Throws ReplayNotSupported.
Vector dynamic_regret(const MetricsLog& log, const Environment& env);

/// accumulated / accumulated_random, NaN until (and wherever) the denominator
/// is not positive. Throws LengthMismatch.
Vector normalized_accumulated_reward(const MetricsLog& log, const MetricsLog& random_log);

double path_length(const SyntheticPeriodicEnv& env, std::size_t horizon);

struct SeriesSummary {
    double mean = 0.0;
    double std = 0.0;  ///< sample std, n - 1 denominator; 0 for n < 2
    std::size_t n = 0;
};

SeriesSummary summarize(std::span<const double> values);

/// Writes steps_seed<seed>.csv per log plus summary.csv, timing.csv and
/// rank_report.csv into dir. Throws IoError.
void emit_outputs(std::span<const MetricsLog> logs, const std::filesystem::path& dir);

/// Re-reads a steps file written by emit_outputs.
MetricsLog read_step_series(const std::filesystem::path& path);

}  // namespace hyperbandit
