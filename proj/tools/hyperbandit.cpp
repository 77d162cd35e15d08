// Command-line front end for running experiments.
//
// Exit codes: 0 success, 2 bad configuration or arguments, 3 runtime failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "hyperbandit/csv.hpp"
#include "hyperbandit/errors.hpp"
#include "hyperbandit/harness.hpp"

namespace hb = hyperbandit;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

hb::ExperimentConfig resolve_config(const std::string& path, const std::string& output) {
    hb::ExperimentConfig cfg = path.empty() ? hb::ExperimentConfig{} : hb::load_config(path);
    if (!output.empty()) cfg.output_dir = output;
    return cfg;
}

void print_summary(const std::vector<hb::MetricsLog>& logs) {
    std::map<std::string, std::pair<hb::Vector, hb::Vector>> by_policy;
    std::vector<std::string> order;
    for (const auto& log : logs) {
        if (!by_policy.contains(log.policy)) order.push_back(log.policy);
        auto& [reward, regret] = by_policy[log.policy];
        if (!log.accumulated_reward.empty()) reward.push_back(log.accumulated_reward.back());
        if (!log.dynamic_regret.empty()) regret.push_back(log.dynamic_regret.back());
    }
    std::printf("%-28s %16s %16s\n", "policy", "acc. reward", "dyn. regret");
    for (const auto& name : order) {
        const auto& [reward, regret] = by_policy[name];
        const auto r = hb::summarize(reward);
        const auto g = hb::summarize(regret);
        std::printf("%-28s %9.2f ±%6.2f %9.2f ±%6.2f\n", name.c_str(), r.mean, r.std, g.mean, g.std);
    }
}

std::vector<hb::MetricsLog> run_variant(hb::ExperimentConfig cfg, const hb::PolicySpec& policy) {
    cfg.policy = policy;
    if (policy.kind != hb::PolicyKind::HyperBandit) cfg.warm_start.mode = hb::WarmStartMode::Off;
    std::fprintf(stderr, "running %s\n", hb::policy_name(policy).c_str());
    return hb::run_experiment(cfg);
}

void append(std::vector<hb::MetricsLog>& all, std::vector<hb::MetricsLog> more) {
    for (auto& log : more) all.push_back(std::move(log));
}

void write_normalized(const std::vector<hb::MetricsLog>& logs, const std::filesystem::path& dir) {
    std::ofstream out(dir / "normalized_reward.csv");
    out << "policy,seed,normalized_accumulated_reward\n";
    for (const auto& log : logs) {
        for (const auto& rnd : logs) {
            if (rnd.policy != "random" || rnd.seed != log.seed) continue;
            const auto nar = hb::normalized_accumulated_reward(log, rnd);
            out << log.policy << ',' << log.seed << ','
                << (nar.empty() || std::isnan(nar.back()) ? std::string("nan") : hb::csv::format_double(nar.back()))
                << '\n';
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HyperBandit+ experiment runner"};
    app.require_subcommand(1);

    std::string config_path, output;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "experiment config (JSON)");
        sub->add_option("-o,--output", output, "output directory (overrides the config)");
    };

    auto* run = app.add_subcommand("run", "run the configured policy over every seed");
    add_common(run);

    auto* compare = app.add_subcommand("regret-compare", "configured policy against LinUCB, Restart-UCB, random and oracle");
    add_common(compare);
    std::vector<std::size_t> restart_intervals{500, 2000};
    compare->add_option("--restart", restart_intervals, "Restart-UCB epoch lengths");
    double baseline_lambda = 0.1;
    compare->add_option("--baseline-lambda", baseline_lambda, "ridge regularizer for the LinUCB-family baselines");

    auto* ranks = app.add_subcommand("rank-report", "singular values of every period's learned preference matrix");
    add_common(ranks);

    auto* warm = app.add_subcommand("warm-start-ablation", "configured policy with and without the oracle warm start");
    add_common(warm);

    auto* dump = app.add_subcommand("print-config", "print the effective config as JSON");
    dump->add_option("-c,--config", config_path, "experiment config (JSON)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        hb::ExperimentConfig cfg = resolve_config(config_path, output);
        cfg.validate();

        if (*dump) {
            std::cout << hb::config_to_json(cfg).dump(2) << '\n';
            return 0;
        }

        std::vector<hb::MetricsLog> logs;
        if (*run || *ranks) {
            logs = hb::run_experiment(cfg);
        } else if (*compare) {
            append(logs, run_variant(cfg, cfg.policy));
            hb::PolicySpec base = cfg.policy;
            base.restart_interval.reset();
            base.lambda = baseline_lambda;
            base.kind = hb::PolicyKind::LinUcb;
            append(logs, run_variant(cfg, base));
            for (std::size_t h : restart_intervals) {
                base.kind = hb::PolicyKind::RestartUcb;
                base.restart_interval = h;
                append(logs, run_variant(cfg, base));
            }
            base.restart_interval.reset();
            base.kind = hb::PolicyKind::Random;
            append(logs, run_variant(cfg, base));
            base.kind = hb::PolicyKind::Oracle;
            append(logs, run_variant(cfg, base));
        } else if (*warm) {
            hb::ExperimentConfig off = cfg;
            off.warm_start.mode = hb::WarmStartMode::Off;
            auto cold = hb::run_experiment(off);
            for (auto& log : cold) log.policy += "_cold";
            hb::ExperimentConfig on = cfg;
            if (on.warm_start.mode == hb::WarmStartMode::Off) on.warm_start.mode = hb::WarmStartMode::Oracle;
            auto warmed = hb::run_experiment(on);
            for (auto& log : warmed) log.policy += "_warm";
            append(logs, std::move(cold));
            append(logs, std::move(warmed));
        }

        hb::emit_outputs(logs, cfg.output_dir);
        if (*compare) write_normalized(logs, cfg.output_dir);

        if (*ranks) {
            for (const auto& log : logs) {
                for (std::size_t p = 0; p < log.rank_report.size(); ++p) {
                    std::printf("seed %llu period %2zu:", static_cast<unsigned long long>(log.seed), p);
                    for (double s : log.rank_report[p]) std::printf(" %.4g", s);
                    std::printf("\n");
                }
            }
        } else {
            print_summary(logs);
        }
        std::printf("outputs written to %s\n", cfg.output_dir.string().c_str());
        return 0;
    } catch (const hb::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const hb::BadConfig& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
}
