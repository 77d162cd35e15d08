#include "hyperbandit/warmstart.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#ifdef HYPERBANDIT_WITH_HTTP
#include <httplib.h>
#endif

#include "hyperbandit/csv.hpp"
#include "hyperbandit/errors.hpp"
#include "hyperbandit/rng.hpp"

namespace hyperbandit {

PromptBundle PromptBundle::defaults() {
    PromptBundle b;
    b.item_attribute =
        "You are a domain expert describing items for a recommender system.\n"
        "Task: infer the attributes of the item below that are not recorded in the catalogue.\n"
        "Item: {item}\n"
        "Known attributes: {attributes}\n"
        "Output format: answer with one line per attribute as `name: value` covering "
        "function, spending level and audience.\n";
    b.user_profile =
        "You are an analyst building user profiles for a recommender system.\n"
        "Task: infer the profile of the user from their interaction history.\n"
        "History:\n{history}\n"
        "Output format: answer with one line per field as `name: value` covering "
        "age, gender, career, budget level and preferences by time of day.\n";
    b.simulation =
        "You are simulating a user of a recommender system.\n"
        "Profile: {profile}\n"
        "Recent interactions:\n{history}\n"
        "Current time: {time}\n"
        "Candidate items: {candidates}\n"
        "Task: pick the {k} candidate items this user is most likely to interact with at the current time.\n"
        "Output format: reply with a single line `SELECTED: id1,id2,...` listing exactly {k} ids from the candidates.\n";
    return b;
}

const std::string& PromptBundle::get(PromptKind kind) const {
    switch (kind) {
        case PromptKind::ItemAttribute: return item_attribute;
        case PromptKind::UserProfile: return user_profile;
        case PromptKind::Simulation: return simulation;
    }
    return simulation;
}

std::string render_prompt(const PromptBundle& bundle, PromptKind kind, const PromptBindings& bindings) {
    const std::string& tpl = bundle.get(kind);
    std::string out;
    out.reserve(tpl.size());
    std::size_t pos = 0;
    while (pos < tpl.size()) {
        const std::size_t open = tpl.find('{', pos);
        if (open == std::string::npos) {
            out.append(tpl, pos);
            break;
        }
        const std::size_t close = tpl.find('}', open);
        if (close == std::string::npos) {
            out.append(tpl, pos);
            break;
        }
        out.append(tpl, pos, open - pos);
        const std::string name = tpl.substr(open + 1, close - open - 1);
        const auto it = bindings.find(name);
        if (it == bindings.end()) throw MissingBinding("prompt placeholder '{" + name + "}' is not bound");
        out += it->second;
        pos = close + 1;
    }
    return out;
}

std::string describe_period(TimePeriod p) {
    static constexpr const char* kDays[] = {"Monday", "Tuesday", "Wednesday", "Thursday",
                                            "Friday", "Saturday", "Sunday"};
    static constexpr const char* kBlocks[] = {"morning", "noon", "afternoon", "night", "late hours"};
    return std::string(kDays[p.day()]) + " " + kBlocks[p.block()];
}

// ---------------------------------------------------------------------------

OracleProvider::OracleProvider(const SyntheticPeriodicEnv& env, double corruption, std::uint64_t seed)
    : env_(env), corruption_(corruption), seed_(seed) {
    if (!(corruption >= 0.0 && corruption <= 1.0)) throw BadConfig("oracle corruption must be in [0, 1]");
}

std::vector<std::size_t> OracleProvider::select_top_k(const SimulationRequest& req) {
    if (req.k > req.pool.size()) throw BadConfig("oracle provider: k exceeds pool size");
    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(req.pool.size());
    for (std::size_t item : req.pool) ranked.emplace_back(env_.true_reward(req.user, item, req.period), item);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < req.k; ++i) chosen.push_back(ranked[i].second);
    if (corruption_ == 0.0 || req.k == req.pool.size()) return chosen;

    std::uint64_t key = mix_seed(req.user, static_cast<std::uint64_t>(req.period.value()));
    for (std::size_t item : req.pool) key = splitmix64(key ^ item);
    Rng rng = make_rng(seed_, streams::kOracleProvider, key);
    for (std::size_t slot = 0; slot < chosen.size(); ++slot) {
        if (!(rng.uniform() < corruption_)) continue;
        std::vector<std::size_t> rest;
        for (std::size_t item : req.pool)
            if (std::find(chosen.begin(), chosen.end(), item) == chosen.end()) rest.push_back(item);
        chosen[slot] = rest[static_cast<std::size_t>(rng.below(rest.size()))];
    }
    return chosen;
}

std::optional<ExternalProviderConfig> ExternalProviderConfig::from_environment() {
    auto get = [](const char* name) -> std::string {
        const char* v = std::getenv(name);
        return v ? std::string(v) : std::string();
    };
    ExternalProviderConfig cfg;
    cfg.endpoint = get("HYPERBANDIT_LLM_ENDPOINT");
    if (cfg.endpoint.empty()) return std::nullopt;
    cfg.model = get("HYPERBANDIT_LLM_MODEL");
    cfg.token = get("HYPERBANDIT_LLM_TOKEN");
    return cfg;
}

Transport make_http_transport(const ExternalProviderConfig& cfg) {
#ifdef HYPERBANDIT_WITH_HTTP
    const std::string& url = cfg.endpoint;
    const std::size_t scheme = url.find("://");
    const std::size_t path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    const std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
    return [base, path, cfg](const std::string& prompt) -> std::string {
        httplib::Client client(base);
        client.set_read_timeout(120, 0);
        httplib::Headers headers;
        if (!cfg.token.empty()) headers.emplace("Authorization", "Bearer " + cfg.token);
        const nlohmann::json body = {{"model", cfg.model}, {"prompt", prompt}};
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) throw TransportError("request to " + base + path + " failed: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw TransportError("request to " + base + path + " returned HTTP " + std::to_string(res->status));
        const auto parsed = nlohmann::json::parse(res->body, nullptr, false);
        if (parsed.is_object() && parsed.contains("text") && parsed["text"].is_string())
            return parsed["text"].get<std::string>();
        return res->body;
    };
#else
    (void)cfg;
    throw TransportError("built without HTTP support");
#endif
}

std::vector<std::string> parse_selected(const std::string& response) {
    std::istringstream in(response);
    std::string line;
    while (std::getline(in, line)) {
        const auto trimmed = csv::trim(line);
        constexpr std::string_view kTag = "SELECTED:";
        const std::size_t at = trimmed.find(kTag);
        if (at == std::string_view::npos) continue;
        std::vector<std::string> ids;
        for (auto& id : csv::split(trimmed.substr(at + kTag.size())))
            if (!id.empty()) ids.push_back(id);
        return ids;
    }
    throw MalformedResponse(response);
}

ExternalLlmProvider::ExternalLlmProvider(Transport transport, PromptBundle bundle, std::size_t max_retries,
                                         IdName id_name)
    : transport_(std::move(transport)), bundle_(std::move(bundle)), max_retries_(max_retries),
      id_name_(id_name ? std::move(id_name) : IdName([](std::size_t i) { return std::to_string(i); })) {}

std::vector<std::size_t> ExternalLlmProvider::select_top_k(const SimulationRequest& req) {
    if (req.k > req.pool.size()) throw BadConfig("external provider: k exceeds pool size");
    std::map<std::string, std::size_t> by_name;
    std::string candidates;
    for (std::size_t item : req.pool) {
        const std::string name = id_name_(item);
        by_name.emplace(name, item);
        if (!candidates.empty()) candidates += ",";
        candidates += name;
    }
    const std::string prompt = render_prompt(bundle_, PromptKind::Simulation,
                                             {{"profile", req.user_summary},
                                              {"history", req.history},
                                              {"time", describe_period(req.period)},
                                              {"candidates", candidates},
                                              {"k", std::to_string(req.k)}});

    std::vector<std::size_t> chosen;
    for (std::size_t attempt = 0; attempt <= max_retries_; ++attempt) {
        for (const auto& name : parse_selected(transport_(prompt))) {
            const auto it = by_name.find(name);
            if (it == by_name.end()) continue;
            if (std::find(chosen.begin(), chosen.end(), it->second) != chosen.end()) continue;
            chosen.push_back(it->second);
        }
        if (chosen.size() >= req.k) {
            chosen.resize(req.k);
            return chosen;
        }
    }
    throw RetryExhausted("provider returned " + std::to_string(chosen.size()) + " valid ids of " +
                         std::to_string(req.k) + " after " + std::to_string(max_retries_ + 1) + " attempts");
}

// ---------------------------------------------------------------------------

std::vector<InteractionRecord> simulate_interactions(AugmentationProvider& provider, const SimulationSpec& spec) {
    if (spec.k == 0 || spec.candidate_size == 0) throw BadConfig("simulation needs k >= 1 and candidate_size >= 1");
    if (!spec.pool) throw BadConfig("simulation needs a pool function");
    std::vector<InteractionRecord> records;
    records.reserve(spec.users.size() * spec.periods.size() * spec.k);
    for (std::size_t user : spec.users) {
        for (TimePeriod period : spec.periods) {
            SimulationRequest req;
            req.user = user;
            req.user_summary = spec.user_summary ? spec.user_summary(user) : "user " + std::to_string(user);
            req.period = period;
            req.pool = spec.pool(user, period);
            req.k = spec.k;
            if (req.pool.size() < spec.k + spec.candidate_size - 1)
                throw BadConfig("pool of " + std::to_string(req.pool.size()) + " items cannot supply " +
                                std::to_string(spec.k) + " positives and " + std::to_string(spec.candidate_size - 1) +
                                " negatives");
            const std::vector<std::size_t> positives = provider.select_top_k(req);
            if (positives.size() != spec.k) throw BadConfig("provider returned the wrong number of items");
            std::vector<std::size_t> negatives;
            for (std::size_t item : req.pool)
                if (std::find(positives.begin(), positives.end(), item) == positives.end()) negatives.push_back(item);

            for (std::size_t j = 0; j < positives.size(); ++j) {
                Rng rng = make_rng(spec.seed, streams::kNegatives,
                                   mix_seed(user, static_cast<std::uint64_t>(period.value()), j));
                std::vector<std::size_t> pool = negatives;
                for (std::size_t i = 0; i + 1 < spec.candidate_size; ++i)
                    std::swap(pool[i], pool[i + static_cast<std::size_t>(rng.below(pool.size() - i))]);
                InteractionRecord rec;
                rec.user = user;
                rec.period = period;
                rec.chosen = positives[j];
                rec.reward = 1.0;
                rec.candidates.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(spec.candidate_size - 1));
                const std::size_t slot = static_cast<std::size_t>(rng.below(spec.candidate_size));
                rec.candidates.insert(rec.candidates.begin() + static_cast<std::ptrdiff_t>(slot), positives[j]);
                records.push_back(std::move(rec));
            }
        }
    }
    return records;
}

std::vector<std::vector<InteractionRecord>> partition_buffers(std::vector<InteractionRecord> records,
                                                              std::size_t buffer_size, std::uint64_t seed) {
    if (buffer_size == 0) throw BadConfig("buffer size must be positive");
    Rng rng = make_rng(seed, streams::kShuffle, 0x5157);
    for (std::size_t i = records.size(); i > 1; --i)
        std::swap(records[i - 1], records[static_cast<std::size_t>(rng.below(i))]);
    std::vector<std::vector<InteractionRecord>> buffers;
    for (std::size_t start = 0; start < records.size(); start += buffer_size) {
        const std::size_t end = std::min(records.size(), start + buffer_size);
        buffers.emplace_back(std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(start)),
                             std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(end)));
    }
    return buffers;
}

WarmStartResult llm_start(HyperBanditPolicy& policy, HyperNetwork& hn,
                          std::span<const std::vector<InteractionRecord>> buffers, const Environment& env,
                          const TrainOptions& train) {
    for (const auto& buffer : buffers)
        if (buffer.empty()) throw EmptyBuffer("llm_start: empty simulated buffer");

    const EmbeddingMode mode = policy.config().embedding;
    TrainOptions opts = train;
    opts.loss.embedding = mode;
    opts.loss.label_rule = LabelRule::Click;

    std::size_t consumed = 0;
    for (std::size_t n = 0; n < buffers.size(); ++n) {
        std::vector<std::optional<PreferenceMatrix>> thetas(kNumPeriods);
        std::vector<InteractionRecord> replayed;
        replayed.reserve(buffers[n].size());
        for (const InteractionRecord& sim : buffers[n]) {
            auto& theta = thetas[static_cast<std::size_t>(sim.period.value())];
            if (!theta) theta = forward(hn, embed(sim.period, mode));
            const Vector& user = env.user_context(sim.user);
            InteractionRecord rec = sim;
            rec.chosen = policy.select(*theta, user, sim.candidates);
            rec.reward = rec.chosen == sim.chosen ? 1.0 : 0.0;
            policy.update(*theta, rec, user);
            replayed.push_back(std::move(rec));
            ++consumed;
        }
        opts.seed = mix_seed(train.seed, 0x11a, n);
        train_minibatch(hn, replayed, PolicyContexts(env, policy), opts);
    }

    WarmStartResult result;
    for (std::size_t i = 0; i < policy.num_items(); ++i) result.arms.push_back(policy.arm(i));
    result.hypernetwork = hn;
    result.interactions = consumed;
    return result;
}

}  // namespace hyperbandit
