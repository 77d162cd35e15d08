#include "hyperbandit/environment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string_view>

#include "hyperbandit/csv.hpp"
#include "hyperbandit/errors.hpp"

namespace hyperbandit {

void validate_record(const InteractionRecord& r) {
    std::set<std::size_t> seen;
    for (std::size_t c : r.candidates)
        if (!seen.insert(c).second) throw DimMismatch("record has duplicate candidates");
    if (!seen.contains(r.chosen)) throw OutOfRange("record's chosen item is not a candidate");
}

namespace {

Vector gaussian_vector(Rng& rng, std::size_t n, double scale) {
    Vector v(n);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
    Matrix m(rows, cols);
    for (double& x : m.data()) x = scale * rng.normal();
    return m;
}

Matrix low_rank_truth(Rng& rng, const SyntheticConfig& cfg) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.rank));
    const Matrix a = gaussian_matrix(rng, cfg.item_dim(), cfg.rank, scale);
    const Matrix b = gaussian_matrix(rng, cfg.user_dim, cfg.rank, scale);
    return a * b.transpose();
}

}  // namespace

SyntheticPeriodicEnv::SyntheticPeriodicEnv(const SyntheticConfig& cfg)
    : cfg_(cfg), noise_rng_(make_rng(cfg.seed, streams::kNoise)) {
    if (cfg.user_dim == 0 || cfg.observed_dim + cfg.latent_dim == 0)
        throw BadConfig("synthetic env: dimensions must be positive");
    if (cfg.num_users == 0 || cfg.num_items == 0)
        throw BadConfig("synthetic env: need at least one user and one item");
    if (cfg.rank == 0 || cfg.rank > std::min(cfg.item_dim(), cfg.user_dim))
        throw BadConfig("synthetic env: rank must be in [1, min(d_a, d_u)]");
    if (!(cfg.period_similarity >= 0.0 && cfg.period_similarity <= 1.0))
        throw BadConfig("synthetic env: period_similarity must be in [0, 1]");
    if (!(cfg.noise_sigma >= 0.0)) throw BadConfig("synthetic env: noise_sigma must be >= 0");
    if (!cfg.period_noise_sigma.empty() &&
        (cfg.period_noise_sigma.size() != static_cast<std::size_t>(kNumPeriods) ||
         std::any_of(cfg.period_noise_sigma.begin(), cfg.period_noise_sigma.end(),
                     [](double s) { return !(s >= 0.0); })))
        throw BadConfig("synthetic env: period_noise_sigma needs 35 non-negative entries");
    if (cfg.candidate_size == 0 || cfg.candidate_size > cfg.num_items)
        throw BadConfig("synthetic env: candidate_size must be in [1, num_items]");
    if (cfg.steps_per_period == 0) throw BadConfig("synthetic env: steps_per_period must be >= 1");
    if (!(cfg.latent_drift_scale >= 0.0)) throw BadConfig("synthetic env: negative drift scale");

    Rng user_rng = make_rng(cfg.seed, streams::kUsers);
    const double user_scale = 1.0 / std::sqrt(static_cast<double>(cfg.user_dim));
    users_.reserve(cfg.num_users);
    for (std::size_t u = 0; u < cfg.num_users; ++u)
        users_.push_back(gaussian_vector(user_rng, cfg.user_dim, user_scale));

    Rng item_rng = make_rng(cfg.seed, streams::kItems);
    const double item_scale = 1.0 / std::sqrt(static_cast<double>(cfg.item_dim()));
    items_.reserve(cfg.num_items);
    for (std::size_t i = 0; i < cfg.num_items; ++i) {
        SyntheticItem item;
        item.observed = gaussian_vector(item_rng, cfg.observed_dim, item_scale);
        item.latent = gaussian_vector(item_rng, cfg.latent_dim, item_scale);
        items_.push_back(std::move(item));
    }

    Rng truth_rng = make_rng(cfg.seed, streams::kGroundTruth);
    const Matrix shared = low_rank_truth(truth_rng, cfg);
    const double kappa = cfg.period_similarity;
    theta_.reserve(kNumPeriods);
    for (int p = 0; p < kNumPeriods; ++p) {
        Matrix own = low_rank_truth(truth_rng, cfg);
        if (kappa == 0.0) {
            theta_.push_back(std::move(own));
        } else if (kappa == 1.0) {
            theta_.push_back(shared);
        } else {
            theta_.push_back(kappa * shared + (1.0 - kappa) * std::move(own));
        }
    }
}

SyntheticPeriodicEnv build_synthetic(const SyntheticConfig& cfg) { return SyntheticPeriodicEnv(cfg); }

TimePeriod SyntheticPeriodicEnv::period_at(std::size_t t) const {
    return TimePeriod(static_cast<int>((t / cfg_.steps_per_period) % kNumPeriods));
}

StepContext SyntheticPeriodicEnv::step(std::size_t t) const {
    Rng rng = make_rng(cfg_.seed, streams::kStep, t);
    StepContext ctx;
    ctx.t = t;
    ctx.period = period_at(t);
    ctx.user = static_cast<std::size_t>(rng.below(users_.size()));

    std::vector<std::size_t> pool(items_.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t k = 0; k < cfg_.candidate_size; ++k) {
        const auto j = k + static_cast<std::size_t>(rng.below(pool.size() - k));
        std::swap(pool[k], pool[j]);
    }
    pool.resize(cfg_.candidate_size);
    ctx.candidates = std::move(pool);
    return ctx;
}

Vector SyntheticPeriodicEnv::drift_step(std::size_t item, std::size_t epoch) const {
    Rng rng = make_rng(cfg_.seed, streams::kDrift, epoch * items_.size() + item);
    const double scale =
        cfg_.latent_drift_scale / std::sqrt(static_cast<double>(std::max<std::size_t>(1, cfg_.latent_dim)));
    return gaussian_vector(rng, cfg_.latent_dim, scale);
}

Vector SyntheticPeriodicEnv::latent_at(std::size_t item, std::size_t t) const {
    Vector x = items_.at(item).latent;
    if (cfg_.latent_drift_interval == 0 || cfg_.latent_drift_scale == 0.0) return x;
    const std::size_t epochs = t / cfg_.latent_drift_interval;
    for (std::size_t e = 1; e <= epochs; ++e) axpy(1.0, drift_step(item, e), x);
    return x;
}

Vector SyntheticPeriodicEnv::item_context(std::size_t item, std::size_t t) const {
    Vector c = items_.at(item).observed;
    const Vector x = latent_at(item, t);
    c.insert(c.end(), x.begin(), x.end());
    return c;
}

double SyntheticPeriodicEnv::bilinear_reward(std::size_t user, std::size_t item, TimePeriod p,
                                             std::size_t t) const {
    return bilinear(item_context(item, t), ground_truth(p), users_.at(user));
}

double SyntheticPeriodicEnv::true_reward(std::size_t user, std::size_t item, TimePeriod p,
                                         std::size_t t) const {
    const double r = bilinear_reward(user, item, p, t);
    return cfg_.reward_mode == RewardMode::Bernoulli ? std::clamp(r, 0.0, 1.0) : r;
}

double SyntheticPeriodicEnv::observe_reward(std::size_t user, std::size_t item, TimePeriod p,
                                            std::size_t t) {
    const double mean = true_reward(user, item, p, t);
    if (cfg_.reward_mode == RewardMode::Bernoulli) return noise_rng_.uniform() < mean ? 1.0 : 0.0;
    const double sigma = cfg_.period_noise_sigma.empty()
                             ? cfg_.noise_sigma
                             : cfg_.period_noise_sigma[static_cast<std::size_t>(p.value())];
    const double eta = noise_rng_.normal();
    return mean + sigma * eta;
}

double SyntheticPeriodicEnv::observe(const StepContext& ctx, std::size_t item) {
    return observe_reward(ctx.user, item, ctx.period, ctx.t);
}

std::optional<double> SyntheticPeriodicEnv::expected_reward(const StepContext& ctx,
                                                            std::size_t item) const {
    return true_reward(ctx.user, item, ctx.period, ctx.t);
}

std::size_t SyntheticPeriodicEnv::best_candidate(const StepContext& ctx) const {
    if (ctx.candidates.empty()) throw EmptyCandidates("best_candidate: no candidates");
    std::size_t best = ctx.candidates.front();
    double best_r = true_reward(ctx.user, best, ctx.period, ctx.t);
    for (std::size_t c : ctx.candidates) {
        const double r = true_reward(ctx.user, c, ctx.period, ctx.t);
        if (r > best_r || (r == best_r && c < best)) {
            best = c;
            best_r = r;
        }
    }
    return best;
}

double SyntheticPeriodicEnv::path_length(std::size_t horizon) const {
    if (cfg_.latent_drift_interval == 0 || cfg_.latent_drift_scale == 0.0 || horizon < 2) return 0.0;
    // x*(t) changes between t-1 and t exactly when t is a positive multiple of the interval.
    const std::size_t epochs = (horizon - 1) / cfg_.latent_drift_interval;
    double total = 0.0;
    for (std::size_t a = 0; a < items_.size(); ++a)
        for (std::size_t e = 1; e <= epochs; ++e) total += norm2(drift_step(a, e));
    return total;
}

// ---------------------------------------------------------------------------
// Replay

FeatureTable FeatureTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open feature file " + path.string());
    const std::string source = path.string();

    FeatureTable table;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = csv::split(line);
        if (!header_seen) {
            header_seen = true;
            if (fields.size() < 2) throw ParseError(source, line_no, "header needs an id column and features");
            table.dim_ = fields.size() - 1;
            continue;
        }
        if (fields.size() != table.dim_ + 1)
            throw ParseError(source, line_no,
                             "expected " + std::to_string(table.dim_ + 1) + " fields, got " +
                                 std::to_string(fields.size()));
        Vector f(table.dim_);
        for (std::size_t k = 0; k < table.dim_; ++k) {
            const auto v = csv::parse_double(fields[k + 1]);
            if (!v || !std::isfinite(*v)) throw ParseError(source, line_no, "bad number '" + fields[k + 1] + "'");
            f[k] = *v;
        }
        if (table.index_.contains(fields[0])) throw ParseError(source, line_no, "duplicate id '" + fields[0] + "'");
        table.index_.emplace(fields[0], table.ids_.size());
        table.ids_.push_back(fields[0]);
        table.features_.push_back(std::move(f));
    }
    if (!header_seen) throw ParseError(source, 1, "missing header");
    return table;
}

std::optional<std::size_t> FeatureTable::find(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

ReplayEnv::ReplayEnv(const std::filesystem::path& log_path, FeatureBundle bundle)
    : bundle_(std::move(bundle)) {
    std::ifstream in(log_path);
    if (!in) throw IoError("cannot open interaction log " + log_path.string());
    const std::string source = log_path.string();

    // (timestamp, user index) -> step index, in order of first appearance.
    std::map<std::pair<std::int64_t, std::size_t>, std::size_t> groups;
    std::vector<std::size_t> first_line;

    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = csv::split(line);
        if (!header_seen) {
            header_seen = true;
            if (fields != std::vector<std::string>{"timestamp", "user_id", "item_id", "reward"})
                throw ParseError(source, line_no, "header must be timestamp,user_id,item_id,reward");
            continue;
        }
        if (fields.size() != 4)
            throw ParseError(source, line_no, "expected 4 fields, got " + std::to_string(fields.size()));
        const auto ts = csv::parse_int64(fields[0]);
        if (!ts) throw ParseError(source, line_no, "bad timestamp '" + fields[0] + "'");
        const auto reward = csv::parse_double(fields[3]);
        if (!reward || !std::isfinite(*reward)) throw ParseError(source, line_no, "bad reward '" + fields[3] + "'");
        const auto user = bundle_.users.find(fields[1]);
        if (!user) throw UnknownId(source + ":" + std::to_string(line_no) + ": unknown user_id '" + fields[1] + "'");
        const auto item = bundle_.items.find(fields[2]);
        if (!item) throw UnknownId(source + ":" + std::to_string(line_no) + ": unknown item_id '" + fields[2] + "'");

        auto [it, inserted] = groups.try_emplace({*ts, *user}, steps_.size());
        if (inserted) {
            LoggedStep s;
            s.timestamp = *ts;
            s.ctx.user = *user;
            s.ctx.period = period_of_timestamp(*ts);
            steps_.push_back(std::move(s));
            first_line.push_back(line_no);
        }
        LoggedStep& s = steps_[it->second];
        if (std::find(s.ctx.candidates.begin(), s.ctx.candidates.end(), *item) != s.ctx.candidates.end())
            throw ParseError(source, line_no, "item '" + fields[2] + "' repeated within one step");
        s.ctx.candidates.push_back(*item);
        s.rewards.push_back(*reward);
    }
    if (!header_seen) throw ParseError(source, 1, "missing header");

    std::vector<std::size_t> order(steps_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return steps_[a].timestamp < steps_[b].timestamp; });
    std::vector<LoggedStep> sorted;
    sorted.reserve(steps_.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        LoggedStep s = std::move(steps_[order[k]]);
        if (k == 0) candidate_size_ = s.ctx.candidates.size();
        else if (s.ctx.candidates.size() != candidate_size_)
            throw ParseError(source, first_line[order[k]],
                             "step has " + std::to_string(s.ctx.candidates.size()) +
                                 " candidates, expected " + std::to_string(candidate_size_));
        s.ctx.t = k;
        sorted.push_back(std::move(s));
    }
    steps_ = std::move(sorted);
}

ReplayEnv replay_from_log(const std::filesystem::path& log_path, FeatureBundle bundle) {
    return ReplayEnv(log_path, std::move(bundle));
}

StepContext ReplayEnv::step(std::size_t t) const {
    if (t >= steps_.size()) throw OutOfRange("replay step " + std::to_string(t) + " beyond log");
    return steps_[t].ctx;
}

double ReplayEnv::observe(const StepContext& ctx, std::size_t item) {
    const LoggedStep& s = steps_.at(ctx.t);
    for (std::size_t k = 0; k < s.ctx.candidates.size(); ++k)
        if (s.ctx.candidates[k] == item) return s.rewards[k];
    throw OutOfRange("item is not a candidate of this replay step");
}

}  // namespace hyperbandit
