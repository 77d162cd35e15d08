// Offline warm start from simulated interactions.
//
// An AugmentationProvider plays the user: given a user summary, a time period
// and a candidate pool it names the top-k items the user would engage with.
// Those picks become positive records; llm_start then replays them through the
// same select/update/train cycle as the online loop so the policy's statistics
// and the hypernetwork start from informed values.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperbandit/environment.hpp"
#include "hyperbandit/hypernet.hpp"
#include "hyperbandit/policy.hpp"
#include "hyperbandit/temporal.hpp"

namespace hyperbandit {

enum class PromptKind { ItemAttribute, UserProfile, Simulation };

/// Text templates with `{name}` placeholders.
struct PromptBundle {
    std::string item_attribute;
    std::string user_profile;
    std::string simulation;

    static PromptBundle defaults();
    const std::string& get(PromptKind kind) const;
};

using PromptBindings = std::map<std::string, std::string>;

/// Substitutes every `{name}`; throws MissingBinding naming the first unbound one.
std::string render_prompt(const PromptBundle& bundle, PromptKind kind, const PromptBindings& bindings);

/// Human-readable label for a period, e.g. "Tuesday afternoon".
std::string describe_period(TimePeriod p);

struct SimulationRequest {
    std::size_t user = 0;
    std::string user_summary;
    std::string history;
    TimePeriod period;
    std::vector<std::size_t> pool;
    std::size_t k = 0;
};

class AugmentationProvider {
public:
    virtual ~AugmentationProvider() = default;
    /// k distinct ids drawn from request.pool.
    virtual std::vector<std::size_t> select_top_k(const SimulationRequest& request) = 0;
};

/// Ranks the pool by the environment's true reward and returns the top k, then
/// with probability `corruption` per slot swaps in a random unselected pool item.
class OracleProvider final : public AugmentationProvider {
public:
    OracleProvider(const SyntheticPeriodicEnv& env, double corruption, std::uint64_t seed);

    std::vector<std::size_t> select_top_k(const SimulationRequest& request) override;

private:
    const SyntheticPeriodicEnv& env_;
    double corruption_;
    std::uint64_t seed_;
};

/// Sends a prompt, returns the raw reply. Throws TransportError.
using Transport = std::function<std::string(const std::string& prompt)>;

struct ExternalProviderConfig {
    std::string endpoint;  ///< e.g. http://localhost:8080/v1/complete
    std::string model;
    std::string token;
    std::size_t max_retries = 3;

    /// Reads HYPERBANDIT_LLM_ENDPOINT, HYPERBANDIT_LLM_MODEL and
    /// HYPERBANDIT_LLM_TOKEN; nullopt (provider disabled) when the endpoint is unset.
    static std::optional<ExternalProviderConfig> from_environment();
};

/// HTTP POST of {"model", "prompt"} as JSON. The reply body is used as-is, or
/// its "text" field when it is a JSON object. Throws TransportError when built
/// without HTTP support.
Transport make_http_transport(const ExternalProviderConfig& cfg);

/// Ids listed on the `SELECTED: id1,id2,...` line. Throws MalformedResponse.
std::vector<std::string> parse_selected(const std::string& response);

/// Provider backed by a language model behind `transport`. Ids outside the
/// pool are dropped; short answers trigger a re-ask up to max_retries.
class ExternalLlmProvider final : public AugmentationProvider {
public:
    using IdName = std::function<std::string(std::size_t item)>;

    ExternalLlmProvider(Transport transport, PromptBundle bundle, std::size_t max_retries = 3,
                        IdName id_name = {});

    std::vector<std::size_t> select_top_k(const SimulationRequest& request) override;

private:
    Transport transport_;
    PromptBundle bundle_;
    std::size_t max_retries_;
    IdName id_name_;
};

struct SimulationSpec {
    std::vector<std::size_t> users;
    std::vector<TimePeriod> periods;
    /// Candidate pool for a (user, period).
    std::function<std::vector<std::size_t>(std::size_t user, TimePeriod period)> pool;
    std::size_t k = 5;
    /// Candidates per record: one positive plus candidate_size - 1 negatives.
    std::size_t candidate_size = 10;
    std::uint64_t seed = 0;
    std::function<std::string(std::size_t user)> user_summary;
};

/// users × periods × k positive records. Throws BadConfig when a pool is too
/// small for k positives plus the negatives.
std::vector<InteractionRecord> simulate_interactions(AugmentationProvider& provider, const SimulationSpec& spec);

/// Shuffle (by seed) and cut into consecutive buffers of buffer_size.
std::vector<std::vector<InteractionRecord>> partition_buffers(std::vector<InteractionRecord> records,
                                                              std::size_t buffer_size, std::uint64_t seed);

struct WarmStartResult {
    std::vector<ArmStats> arms;
    HyperNetwork hypernetwork;
    std::size_t interactions = 0;
};

/// Replays each simulated buffer through select/update (reward 1 iff the
/// policy picks the record's positive), then trains the hypernetwork on the
/// replayed buffer. Mutates `policy` and `hn`; returns a snapshot of both.
/// Throws EmptyBuffer if any buffer is empty.
WarmStartResult llm_start(HyperBanditPolicy& policy, HyperNetwork& hn,
                          std::span<const std::vector<InteractionRecord>> buffers, const Environment& env,
                          const TrainOptions& train);

}  // namespace hyperbandit
