// Bandit policies.
//
// HyperBanditPolicy scores an item as
//     [s_a; x_a]^T Θ_p c_u + α sqrt(P^T Ψ_a^{-1} P),   P = Θ^x c_u,  Ψ_a = λI + Φ_a
// and keeps per-arm ridge statistics (Φ_a, b_a) whose solution x_a = Ψ_a^{-1} b_a
// is refreshed after every update. Only the latent block drives exploration:
// the observed features s_a never change online.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hyperbandit/environment.hpp"
#include "hyperbandit/hypernet.hpp"
#include "hyperbandit/numerics.hpp"
#include "hyperbandit/preference.hpp"
#include "hyperbandit/rng.hpp"
#include "hyperbandit/temporal.hpp"

namespace hyperbandit {

struct ArmStats {
    Matrix phi;  ///< Φ, l_a × l_a, sum of P P^T
    Vector b;    ///< b, l_a
    Vector x;    ///< latent features, (λI + Φ)^{-1} b

    static ArmStats zero(std::size_t latent_dim);

    friend bool operator==(const ArmStats&, const ArmStats&) = default;
};

/// P^T (λI + Φ)^{-1} P; the squared exploration width.
double exploration_quadratic(const Matrix& phi, double lambda, std::span<const double> p);

struct HyperBanditConfig {
    double alpha = 0.1;
    double lambda = 0.1;
    std::size_t observed_dim = 0;  ///< o_a
    std::size_t latent_dim = 0;    ///< l_a
    EmbeddingMode embedding = EmbeddingMode::Euler;

    /// Throws BadConfig.
    void validate() const;

    friend bool operator==(const HyperBanditConfig&, const HyperBanditConfig&) = default;
};

class HyperBanditPolicy {
public:
    /// item_features holds s_a for every item; each must have observed_dim entries.
    HyperBanditPolicy(const HyperBanditConfig& cfg, std::vector<Vector> item_features);

    const HyperBanditConfig& config() const noexcept { return cfg_; }
    std::size_t num_items() const noexcept { return arms_.size(); }
    const ArmStats& arm(std::size_t item) const { return arms_.at(item); }
    /// Direct access for warm-start handoff and checkpoint restore.
    void set_arm(std::size_t item, ArmStats stats);
    const Vector& item_features(std::size_t item) const { return features_.at(item); }

    /// c_a = [s_a; x_a] with the current latent estimate.
    Vector item_context(std::size_t item) const;

    double score(const PreferenceMatrix& theta, std::span<const double> user, std::size_t item) const;
    double exploitation(const PreferenceMatrix& theta, std::span<const double> user, std::size_t item) const;
    double exploration(const PreferenceMatrix& theta, std::span<const double> user, std::size_t item) const;

    /// argmax of score; ties go to the lowest item id. Throws EmptyCandidates.
    std::size_t select(const PreferenceMatrix& theta, std::span<const double> user,
                       std::span<const std::size_t> candidates) const;

    /// Rank-one update of the chosen arm's statistics and a fresh solve for x.
    void update(const PreferenceMatrix& theta, const InteractionRecord& record, std::span<const double> user);

    friend bool operator==(const HyperBanditPolicy&, const HyperBanditPolicy&) = default;

private:
    void check_theta(const PreferenceMatrix& theta, std::span<const double> user) const;

    HyperBanditConfig cfg_;
    std::vector<Vector> features_;
    std::vector<ArmStats> arms_;
};

/// Stateless score for a single item, as used by HyperBanditPolicy.
double hyperbandit_score(const PreferenceMatrix& theta, std::span<const double> user,
                         std::span<const double> observed, const ArmStats& stats, double alpha, double lambda);

/// Adapts a policy plus environment into the hypernetwork's ContextSource.
class PolicyContexts final : public ContextSource {
public:
    PolicyContexts(const Environment& env, const HyperBanditPolicy& policy) : env_(env), policy_(policy) {}
    Vector user_context(std::size_t user) const override { return env_.user_context(user); }
    Vector item_context(std::size_t item) const override { return policy_.item_context(item); }

private:
    const Environment& env_;
    const HyperBanditPolicy& policy_;
};

void save_policy(const HyperBanditPolicy& policy, std::ostream& out);
HyperBanditPolicy load_policy(std::istream& in);
void save_policy(const HyperBanditPolicy& policy, const std::filesystem::path& path);
HyperBanditPolicy load_policy(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Baselines

struct LinUcbConfig {
    double alpha = 0.1;
    double lambda = 0.1;
    /// Width of the joint feature [c_u; s_a], truncated or zero-padded.
    std::size_t feature_dim = 0;
};

struct LinUcbArm {
    Matrix a;  ///< λI + Σ z z^T
    Vector b;  ///< Σ r z

    friend bool operator==(const LinUcbArm&, const LinUcbArm&) = default;
};

/// Disjoint-arm linear UCB over the joint user/item feature.
class LinUcbPolicy {
public:
    LinUcbPolicy(const LinUcbConfig& cfg, std::size_t num_items);

    const LinUcbConfig& config() const noexcept { return cfg_; }
    const LinUcbArm& arm(std::size_t item) const { return arms_.at(item); }

    Vector features(std::span<const double> user, std::span<const double> observed) const;
    /// θ_a^T z.
    double estimate(std::size_t item, std::span<const double> z) const;
    double score(std::size_t item, std::span<const double> z) const;

    /// Throws EmptyCandidates.
    std::size_t select(std::span<const double> user, std::span<const std::size_t> candidates,
                       std::span<const Vector> item_features) const;
    void update(std::size_t item, std::span<const double> z, double reward);
    void reset();

private:
    LinUcbConfig cfg_;
    std::vector<LinUcbArm> arms_;
};

/// LinUCB whose statistics are reset to the initial state every H steps.
class RestartUcbPolicy {
public:
    /// interval = nullopt means never restart. Throws BadConfig if interval < 1.
    RestartUcbPolicy(const LinUcbConfig& cfg, std::size_t num_items, std::optional<std::size_t> interval);

    const LinUcbPolicy& inner() const noexcept { return inner_; }
    std::optional<std::size_t> interval() const noexcept { return interval_; }

    /// Resets first when t is a positive multiple of the interval.
    std::size_t select(std::size_t t, std::span<const double> user, std::span<const std::size_t> candidates,
                       std::span<const Vector> item_features);
    void update(std::size_t item, std::span<const double> z, double reward) { inner_.update(item, z, reward); }

private:
    LinUcbPolicy inner_;
    std::optional<std::size_t> interval_;
};

/// floor((d T / P_T)^{2/3}), clamped to [1, T]; T when P_T is zero.
std::size_t restart_interval_for(std::size_t dim, std::size_t horizon, double path_length);

class RandomPolicy {
public:
    explicit RandomPolicy(std::uint64_t seed) : rng_(make_rng(seed, streams::kRandomPolicy)) {}

    /// Throws EmptyCandidates.
    std::size_t select(std::span<const std::size_t> candidates);

private:
    Rng rng_;
};

}  // namespace hyperbandit
