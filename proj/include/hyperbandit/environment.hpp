// Interaction sources: a synthetic periodic environment with known ground truth
// and a replay environment over pre-featurized interaction logs.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hyperbandit/numerics.hpp"
#include "hyperbandit/rng.hpp"
#include "hyperbandit/temporal.hpp"

namespace hyperbandit {

struct StepContext {
    std::size_t t = 0;
    std::size_t user = 0;
    TimePeriod period;
    std::vector<std::size_t> candidates;
};

/// One logged step; the element type of the hypernetwork's data buffer.
struct InteractionRecord {
    std::size_t user = 0;
    std::size_t chosen = 0;
    TimePeriod period;
    double reward = 0.0;
    std::vector<std::size_t> candidates;

    friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

/// Throws DimMismatch/OutOfRange if chosen is not among distinct candidates.
void validate_record(const InteractionRecord& r);

class Environment {
public:
    virtual ~Environment() = default;

    virtual std::size_t user_dim() const = 0;
    virtual std::size_t observed_dim() const = 0;
    virtual std::size_t num_users() const = 0;
    virtual std::size_t num_items() const = 0;
    virtual std::size_t candidate_size() const = 0;

    virtual const Vector& user_context(std::size_t user) const = 0;
    /// Observed item features s_a.
    virtual const Vector& item_features(std::size_t item) const = 0;

    /// Number of available steps; nullopt when unbounded.
    virtual std::optional<std::size_t> horizon() const = 0;

    virtual StepContext step(std::size_t t) const = 0;
    /// Reward revealed for recommending `item` in `ctx`. May consume a noise stream.
    virtual double observe(const StepContext& ctx, std::size_t item) = 0;
    /// Noise-free reward, when the environment knows it.
    virtual std::optional<double> expected_reward(const StepContext& ctx, std::size_t item) const {
        (void)ctx;
        (void)item;
        return std::nullopt;
    }
};

enum class RewardMode {
    Real,       ///< true reward plus Gaussian noise
    Bernoulli,  ///< binary draw with probability clamp(true reward, 0, 1)
};

struct SyntheticConfig {
    std::size_t user_dim = 8;
    std::size_t observed_dim = 5;
    std::size_t latent_dim = 3;
    std::size_t num_users = 100;
    std::size_t num_items = 50;
    std::size_t rank = 2;
    double period_similarity = 0.3;
    double noise_sigma = 0.1;
    /// Optional per-period noise std; overrides noise_sigma when it has 35 entries.
    std::vector<double> period_noise_sigma;
    std::size_t candidate_size = 10;
    std::size_t steps_per_period = 20;
    RewardMode reward_mode = RewardMode::Real;
    /// Latent item contexts jump every `latent_drift_interval` steps (0 = static).
    std::size_t latent_drift_interval = 0;
    double latent_drift_scale = 0.0;
    std::uint64_t seed = 0;

    std::size_t item_dim() const noexcept { return observed_dim + latent_dim; }
};

struct SyntheticItem {
    Vector observed;  ///< s_a
    Vector latent;    ///< x*_a at t = 0
};

class SyntheticPeriodicEnv final : public Environment {
public:
    /// Throws BadConfig on inconsistent dimensions or counts.
    explicit SyntheticPeriodicEnv(const SyntheticConfig& cfg);

    const SyntheticConfig& config() const noexcept { return cfg_; }
    const Matrix& ground_truth(TimePeriod p) const { return theta_[static_cast<std::size_t>(p.value())]; }
    const SyntheticItem& item(std::size_t i) const { return items_.at(i); }

    std::size_t user_dim() const override { return cfg_.user_dim; }
    std::size_t observed_dim() const override { return cfg_.observed_dim; }
    std::size_t num_users() const override { return users_.size(); }
    std::size_t num_items() const override { return items_.size(); }
    std::size_t candidate_size() const override { return cfg_.candidate_size; }
    const Vector& user_context(std::size_t user) const override { return users_.at(user); }
    const Vector& item_features(std::size_t item) const override { return items_.at(item).observed; }
    std::optional<std::size_t> horizon() const override { return std::nullopt; }

    TimePeriod period_at(std::size_t t) const;
    StepContext step(std::size_t t) const override;
    double observe(const StepContext& ctx, std::size_t item) override;
    std::optional<double> expected_reward(const StepContext& ctx, std::size_t item) const override;

    /// Latent context x*_a(t), including any drift up to t.
    Vector latent_at(std::size_t item, std::size_t t) const;
    /// Full context [s_a; x*_a(t)].
    Vector item_context(std::size_t item, std::size_t t = 0) const;

    /// c_a^T Θ*_p c_u (clamped to [0, 1] in Bernoulli mode).
    double true_reward(std::size_t user, std::size_t item, TimePeriod p, std::size_t t = 0) const;
    /// true_reward plus a draw from the environment's noise stream.
    double observe_reward(std::size_t user, std::size_t item, TimePeriod p, std::size_t t = 0);

    /// Best candidate by true reward; ties go to the lowest item id.
    std::size_t best_candidate(const StepContext& ctx) const;

    /// Σ_a Σ_{t < horizon-1} |x*_a(t) - x*_a(t+1)|.
    double path_length(std::size_t horizon) const;

private:
    double bilinear_reward(std::size_t user, std::size_t item, TimePeriod p, std::size_t t) const;
    Vector drift_step(std::size_t item, std::size_t epoch) const;

    SyntheticConfig cfg_;
    std::vector<Vector> users_;
    std::vector<SyntheticItem> items_;
    std::vector<Matrix> theta_;
    Rng noise_rng_;
};

SyntheticPeriodicEnv build_synthetic(const SyntheticConfig& cfg);

/// id -> feature vector table loaded from a comma-separated file whose header
/// starts with the id column.
class FeatureTable {
public:
    static FeatureTable load(const std::filesystem::path& path);

    std::size_t size() const noexcept { return features_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::string& id(std::size_t index) const { return ids_.at(index); }
    std::optional<std::size_t> find(const std::string& id) const;
    const Vector& features(std::size_t index) const { return features_.at(index); }

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<Vector> features_;
    std::size_t dim_ = 0;
};

struct FeatureBundle {
    FeatureTable users;
    FeatureTable items;
};

/// Replays a `timestamp,user_id,item_id,reward` log. Rows sharing
/// (timestamp, user_id) form one step whose candidates are their items.
class ReplayEnv final : public Environment {
public:
    ReplayEnv(const std::filesystem::path& log_path, FeatureBundle bundle);

    const FeatureBundle& bundle() const noexcept { return bundle_; }

    std::size_t user_dim() const override { return bundle_.users.dim(); }
    std::size_t observed_dim() const override { return bundle_.items.dim(); }
    std::size_t num_users() const override { return bundle_.users.size(); }
    std::size_t num_items() const override { return bundle_.items.size(); }
    std::size_t candidate_size() const override { return candidate_size_; }
    const Vector& user_context(std::size_t user) const override { return bundle_.users.features(user); }
    const Vector& item_features(std::size_t item) const override { return bundle_.items.features(item); }
    std::optional<std::size_t> horizon() const override { return steps_.size(); }

    StepContext step(std::size_t t) const override;
    double observe(const StepContext& ctx, std::size_t item) override;

private:
    struct LoggedStep {
        std::int64_t timestamp = 0;
        StepContext ctx;
        std::vector<double> rewards;  ///< parallel to ctx.candidates
    };

    FeatureBundle bundle_;
    std::vector<LoggedStep> steps_;
    std::size_t candidate_size_ = 0;
};

ReplayEnv replay_from_log(const std::filesystem::path& log_path, FeatureBundle bundle);

}  // namespace hyperbandit
