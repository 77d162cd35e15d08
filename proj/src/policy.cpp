#include "hyperbandit/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "hyperbandit/csv.hpp"
#include "hyperbandit/errors.hpp"

namespace hyperbandit {

namespace {

Matrix regularized(const Matrix& phi, double lambda) {
    Matrix psi = phi;
    for (std::size_t i = 0; i < psi.rows(); ++i) psi(i, i) += lambda;
    return psi;
}

template <class ScoreFn>
std::size_t argmax_lowest_id(std::span<const std::size_t> candidates, ScoreFn&& score) {
    if (candidates.empty()) throw EmptyCandidates("select: no candidates");
    std::size_t best = candidates.front();
    double best_score = score(best);
    for (std::size_t k = 1; k < candidates.size(); ++k) {
        const std::size_t c = candidates[k];
        const double s = score(c);
        if (s > best_score || (s == best_score && c < best)) {
            best = c;
            best_score = s;
        }
    }
    return best;
}

}  // namespace

ArmStats ArmStats::zero(std::size_t latent_dim) {
    return ArmStats{Matrix(latent_dim, latent_dim), Vector(latent_dim, 0.0), Vector(latent_dim, 0.0)};
}

double exploration_quadratic(const Matrix& phi, double lambda, std::span<const double> p) {
    if (p.empty()) return 0.0;
    return Cholesky(regularized(phi, lambda)).inverse_quadratic_form(p);
}

void HyperBanditConfig::validate() const {
    if (!(alpha >= 0.0)) throw BadConfig("alpha must be non-negative");
    if (!(lambda > 0.0)) throw BadConfig("lambda must be positive");
    if (observed_dim + latent_dim == 0) throw BadConfig("item dimension must be positive");
}

HyperBanditPolicy::HyperBanditPolicy(const HyperBanditConfig& cfg, std::vector<Vector> item_features)
    : cfg_(cfg), features_(std::move(item_features)) {
    cfg_.validate();
    for (const auto& f : features_)
        if (f.size() != cfg_.observed_dim) throw DimMismatch("item features must have observed_dim entries");
    arms_.assign(features_.size(), ArmStats::zero(cfg_.latent_dim));
}

void HyperBanditPolicy::set_arm(std::size_t item, ArmStats stats) {
    const std::size_t l = cfg_.latent_dim;
    if (stats.phi.rows() != l || stats.phi.cols() != l || stats.b.size() != l || stats.x.size() != l)
        throw DimMismatch("arm statistics have the wrong latent dimension");
    arms_.at(item) = std::move(stats);
}

Vector HyperBanditPolicy::item_context(std::size_t item) const {
    Vector c = features_.at(item);
    const Vector& x = arms_.at(item).x;
    c.insert(c.end(), x.begin(), x.end());
    return c;
}

void HyperBanditPolicy::check_theta(const PreferenceMatrix& theta, std::span<const double> user) const {
    if (theta.observed_dim() != cfg_.observed_dim || theta.latent_dim() != cfg_.latent_dim)
        throw DimMismatch("preference matrix blocks do not match the policy's (o_a, l_a)");
    if (theta.user_dim() != user.size()) throw DimMismatch("user context does not match preference matrix");
}

double hyperbandit_score(const PreferenceMatrix& theta, std::span<const double> user,
                         std::span<const double> observed, const ArmStats& stats, double alpha, double lambda) {
    if (observed.size() != theta.observed_dim() || stats.x.size() != theta.latent_dim() ||
        user.size() != theta.user_dim())
        throw DimMismatch("hyperbandit_score: dimension mismatch");
    const Vector proj = theta.project_user(user);
    const std::size_t o = theta.observed_dim();
    const std::span<const double> q(proj.data(), o);
    const std::span<const double> p(proj.data() + o, proj.size() - o);
    const double exploit = dot(observed, q) + dot(stats.x, p);
    if (alpha == 0.0) return exploit;
    return exploit + alpha * std::sqrt(exploration_quadratic(stats.phi, lambda, p));
}

double HyperBanditPolicy::score(const PreferenceMatrix& theta, std::span<const double> user, std::size_t item) const {
    check_theta(theta, user);
    return hyperbandit_score(theta, user, features_.at(item), arms_.at(item), cfg_.alpha, cfg_.lambda);
}

double HyperBanditPolicy::exploitation(const PreferenceMatrix& theta, std::span<const double> user,
                                       std::size_t item) const {
    check_theta(theta, user);
    return hyperbandit_score(theta, user, features_.at(item), arms_.at(item), 0.0, cfg_.lambda);
}

double HyperBanditPolicy::exploration(const PreferenceMatrix& theta, std::span<const double> user,
                                      std::size_t item) const {
    check_theta(theta, user);
    const Vector proj = theta.project_user(user);
    const std::span<const double> p(proj.data() + cfg_.observed_dim, cfg_.latent_dim);
    return cfg_.alpha * std::sqrt(exploration_quadratic(arms_.at(item).phi, cfg_.lambda, p));
}

std::size_t HyperBanditPolicy::select(const PreferenceMatrix& theta, std::span<const double> user,
                                      std::span<const std::size_t> candidates) const {
    check_theta(theta, user);
    const Vector proj = theta.project_user(user);
    const std::size_t o = cfg_.observed_dim;
    const std::span<const double> q(proj.data(), o);
    const std::span<const double> p(proj.data() + o, cfg_.latent_dim);
    return argmax_lowest_id(candidates, [&](std::size_t item) {
        const ArmStats& a = arms_.at(item);
        double s = dot(features_.at(item), q) + dot(a.x, p);
        if (cfg_.alpha != 0.0) s += cfg_.alpha * std::sqrt(exploration_quadratic(a.phi, cfg_.lambda, p));
        return s;
    });
}

void HyperBanditPolicy::update(const PreferenceMatrix& theta, const InteractionRecord& record,
                               std::span<const double> user) {
    check_theta(theta, user);
    ArmStats& arm = arms_.at(record.chosen);
    if (cfg_.latent_dim == 0) return;
    const Vector proj = theta.project_user(user);
    const std::size_t o = cfg_.observed_dim;
    const std::span<const double> q(proj.data(), o);
    const std::span<const double> p(proj.data() + o, cfg_.latent_dim);
    add_outer(arm.phi, 1.0, p);
    axpy(record.reward - dot(q, features_.at(record.chosen)), p, arm.b);
    arm.x = solve_spd(regularized(arm.phi, cfg_.lambda), arm.b);
}

// Policy checkpoint (text):
//   hyperbandit-policy 1
//   config <alpha> <lambda> <observed_dim> <latent_dim> <euler|one_hot>
//   items <count>
//   per item: "s" + o_a values, "phi" + l_a² values, "b" + l_a values, "x" + l_a values
void save_policy(const HyperBanditPolicy& policy, std::ostream& out) {
    const auto& c = policy.config();
    auto write = [&](const char* tag, std::span<const double> values) {
        out << tag;
        for (double v : values) out << ' ' << csv::format_double(v);
        out << '\n';
    };
    out << "hyperbandit-policy 1\n";
    out << "config " << csv::format_double(c.alpha) << ' ' << csv::format_double(c.lambda) << ' '
        << c.observed_dim << ' ' << c.latent_dim << ' '
        << (c.embedding == EmbeddingMode::Euler ? "euler" : "one_hot") << '\n';
    out << "items " << policy.num_items() << '\n';
    for (std::size_t i = 0; i < policy.num_items(); ++i) {
        const ArmStats& a = policy.arm(i);
        write("s", policy.item_features(i));
        write("phi", a.phi.data());
        write("b", a.b);
        write("x", a.x);
    }
    if (!out) throw IoError("failed writing policy checkpoint");
}

HyperBanditPolicy load_policy(std::istream& in) {
    auto fail = [](const std::string& what) { return ParseError("policy checkpoint", 0, what); };
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "hyperbandit-policy" || version != 1) throw fail("bad magic");
    HyperBanditConfig cfg;
    std::string alpha, lambda, mode;
    if (!(in >> tag >> alpha >> lambda >> cfg.observed_dim >> cfg.latent_dim >> mode) || tag != "config")
        throw fail("missing config");
    auto num = [&](const std::string& s) {
        const auto v = csv::parse_double(s);
        if (!v) throw fail("bad number '" + s + "'");
        return *v;
    };
    cfg.alpha = num(alpha);
    cfg.lambda = num(lambda);
    if (mode == "euler") cfg.embedding = EmbeddingMode::Euler;
    else if (mode == "one_hot") cfg.embedding = EmbeddingMode::OneHot;
    else throw fail("unknown embedding '" + mode + "'");
    std::size_t count = 0;
    if (!(in >> tag >> count) || tag != "items") throw fail("missing items");

    auto read = [&](const char* expected, std::size_t n) {
        std::string t;
        if (!(in >> t) || t != expected) throw fail(std::string("expected '") + expected + "'");
        Vector v(n);
        std::string token;
        for (double& x : v) {
            if (!(in >> token)) throw fail("truncated values");
            x = num(token);
        }
        return v;
    };
    const std::size_t l = cfg.latent_dim;
    std::vector<Vector> features;
    std::vector<ArmStats> arms;
    for (std::size_t i = 0; i < count; ++i) {
        features.push_back(read("s", cfg.observed_dim));
        ArmStats a;
        a.phi = Matrix(l, l, read("phi", l * l));
        a.b = read("b", l);
        a.x = read("x", l);
        arms.push_back(std::move(a));
    }
    HyperBanditPolicy policy(cfg, std::move(features));
    for (std::size_t i = 0; i < count; ++i) policy.set_arm(i, std::move(arms[i]));
    return policy;
}

void save_policy(const HyperBanditPolicy& policy, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    save_policy(policy, out);
}

HyperBanditPolicy load_policy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return load_policy(in);
}

// ---------------------------------------------------------------------------

LinUcbPolicy::LinUcbPolicy(const LinUcbConfig& cfg, std::size_t num_items) : cfg_(cfg), arms_(num_items) {
    if (!(cfg.alpha >= 0.0) || !(cfg.lambda > 0.0) || cfg.feature_dim == 0)
        throw BadConfig("LinUCB needs alpha >= 0, lambda > 0 and a positive feature width");
    reset();
}

void LinUcbPolicy::reset() {
    for (auto& arm : arms_) {
        arm.a = cfg_.lambda * Matrix::identity(cfg_.feature_dim);
        arm.b.assign(cfg_.feature_dim, 0.0);
    }
}

Vector LinUcbPolicy::features(std::span<const double> user, std::span<const double> observed) const {
    Vector z(user.begin(), user.end());
    z.insert(z.end(), observed.begin(), observed.end());
    z.resize(cfg_.feature_dim, 0.0);
    return z;
}

double LinUcbPolicy::estimate(std::size_t item, std::span<const double> z) const {
    const LinUcbArm& arm = arms_.at(item);
    return dot(solve_spd(arm.a, arm.b), z);
}

double LinUcbPolicy::score(std::size_t item, std::span<const double> z) const {
    const LinUcbArm& arm = arms_.at(item);
    const Cholesky chol(arm.a);
    const double mean = dot(chol.solve(arm.b), z);
    if (cfg_.alpha == 0.0) return mean;
    return mean + cfg_.alpha * std::sqrt(chol.inverse_quadratic_form(z));
}

std::size_t LinUcbPolicy::select(std::span<const double> user, std::span<const std::size_t> candidates,
                                 std::span<const Vector> item_features) const {
    return argmax_lowest_id(candidates,
                            [&](std::size_t item) { return score(item, features(user, item_features[item])); });
}

void LinUcbPolicy::update(std::size_t item, std::span<const double> z, double reward) {
    LinUcbArm& arm = arms_.at(item);
    if (z.size() != cfg_.feature_dim) throw DimMismatch("LinUCB feature has the wrong width");
    add_outer(arm.a, 1.0, z);
    axpy(reward, z, arm.b);
}

RestartUcbPolicy::RestartUcbPolicy(const LinUcbConfig& cfg, std::size_t num_items,
                                   std::optional<std::size_t> interval)
    : inner_(cfg, num_items), interval_(interval) {
    if (interval_ && *interval_ < 1) throw BadConfig("restart interval must be >= 1");
}

std::size_t RestartUcbPolicy::select(std::size_t t, std::span<const double> user,
                                     std::span<const std::size_t> candidates, std::span<const Vector> item_features) {
    if (interval_ && t > 0 && t % *interval_ == 0) inner_.reset();
    return inner_.select(user, candidates, item_features);
}

std::size_t restart_interval_for(std::size_t dim, std::size_t horizon, double path_length) {
    if (horizon == 0) return 1;
    if (!(path_length > 0.0)) return horizon;
    const double ratio = static_cast<double>(dim) * static_cast<double>(horizon) / path_length;
    // pow(x, 2/3) lands just under exact cubes, so nudge before flooring.
    const double h = std::floor(std::cbrt(ratio * ratio) * (1.0 + 1e-12));
    return std::clamp<std::size_t>(static_cast<std::size_t>(h), 1, horizon);
}

std::size_t RandomPolicy::select(std::span<const std::size_t> candidates) {
    if (candidates.empty()) throw EmptyCandidates("random policy: no candidates");
    return candidates[static_cast<std::size_t>(rng_.below(candidates.size()))];
}

}  // namespace hyperbandit
