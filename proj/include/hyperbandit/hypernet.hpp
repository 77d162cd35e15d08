// Hypernetwork: an MLP mapping a time-period embedding to the preference matrix
// Θ_p, trained on logged interactions with a list-wise softmax cross-entropy
// (ListNet) loss and Adam.
//
// Output layout (row-major throughout):
//   full-rank (τ = 0): the output reshapes to Θ_p, d_a × d_u.
//   low-rank  (τ > 0): output = [Vec(A_p), Vec(B_p)] with A_p d_a × τ and
//                      B_p d_u × τ; Θ_p = A_p B_p^T.
//
// Parameters live in one flat vector, layer by layer: the weight matrix
// (fan_out × fan_in, row-major) followed by the bias.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "hyperbandit/environment.hpp"
#include "hyperbandit/numerics.hpp"
#include "hyperbandit/preference.hpp"
#include "hyperbandit/temporal.hpp"

namespace hyperbandit {

class HyperNetwork {
public:
    struct Layer {
        std::size_t fan_in = 0;
        std::size_t fan_out = 0;
        std::size_t weight_offset = 0;
        std::size_t bias_offset = 0;

        friend bool operator==(const Layer&, const Layer&) = default;
    };

    HyperNetwork() = default;
    /// Zero-initialised network. Throws BadConfig unless there are >= 2 layer
    /// sizes and the last equals shape.output_width().
    HyperNetwork(std::vector<std::size_t> layer_sizes, PreferenceShape shape);

    const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    const PreferenceShape& shape() const noexcept { return shape_; }
    std::size_t input_dim() const noexcept { return sizes_.front(); }
    std::size_t output_dim() const noexcept { return sizes_.back(); }
    std::size_t num_parameters() const noexcept { return params_.size(); }

    std::span<const double> parameters() const noexcept { return params_; }
    std::span<double> parameters() noexcept { return params_; }

    /// Raw output vector before reshaping.
    Vector output(std::span<const double> embedding) const;

    friend bool operator==(const HyperNetwork&, const HyperNetwork&) = default;

private:
    std::vector<std::size_t> sizes_;
    PreferenceShape shape_;
    std::vector<Layer> layers_;
    Vector params_;
};

/// [input, hidden..., shape.output_width()]
std::vector<std::size_t> hypernet_layer_sizes(std::size_t input_dim, std::span<const std::size_t> hidden,
                                              const PreferenceShape& shape);

/// Weights ~ Normal(0, 2 / (fan_in + fan_out)), biases zero.
HyperNetwork init_xavier(std::vector<std::size_t> layer_sizes, const PreferenceShape& shape,
                         std::uint64_t seed);

/// Reshape a raw output vector into Θ_p.
PreferenceMatrix reshape_output(std::span<const double> output, const PreferenceShape& shape);

PreferenceMatrix forward(const HyperNetwork& hn, std::span<const double> embedding);

/// How the chosen item's label is derived from its reward. Candidates that
/// were not recommended are always labelled 0.
enum class LabelRule {
    Click,   ///< +1 if the reward is a click (> 0.5), -1 for a skip
    Reward,  ///< the observed reward itself, for real-valued feedback
};

Vector record_labels(const InteractionRecord& record, LabelRule rule);

/// User contexts c_u and current item contexts c_a = [s_a; x_a] used to score
/// buffer records.
class ContextSource {
public:
    virtual ~ContextSource() = default;
    virtual Vector user_context(std::size_t user) const = 0;
    virtual Vector item_context(std::size_t item) const = 0;
};

struct LossOptions {
    EmbeddingMode embedding = EmbeddingMode::Euler;
    LabelRule label_rule = LabelRule::Click;
};

/// -Σ_t Σ_k softmax(y_t)_k log softmax(r̂_t)_k with r̂_{t,k} = c_k^T Θ_{p_t} c_u.
/// Throws EmptyBuffer or DimMismatch (records with differing candidate counts).
double listnet_loss(const HyperNetwork& hn, std::span<const InteractionRecord> buffer,
                    const ContextSource& contexts, const LossOptions& opts = {});

/// Gradient of listnet_loss w.r.t. parameters(), same flat order.
Vector gradient(const HyperNetwork& hn, std::span<const InteractionRecord> buffer,
                const ContextSource& contexts, const LossOptions& opts = {});

struct TrainOptions {
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::size_t max_epochs = 200;
    std::size_t patience = 5;
    double validation_fraction = 0.1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    LossOptions loss;

    /// Throws BadConfig.
    void validate() const;
};

struct TrainReport {
    std::size_t epochs_run = 0;
    double best_validation_loss = 0.0;
};

/// Adam over shuffled mini-batches of the training split; stops after
/// `patience` epochs without validation improvement and restores the best
/// parameters seen. Throws EmptyBuffer.
TrainReport train_minibatch(HyperNetwork& hn, std::span<const InteractionRecord> buffer,
                            const ContextSource& contexts, const TrainOptions& opts);

/// Singular values of Θ_p for every period, one row per period.
std::vector<Vector> rank_report(const HyperNetwork& hn, EmbeddingMode mode = EmbeddingMode::Euler);

void save_checkpoint(const HyperNetwork& hn, std::ostream& out);
HyperNetwork load_checkpoint(std::istream& in);
void save_checkpoint(const HyperNetwork& hn, const std::filesystem::path& path);
HyperNetwork load_checkpoint(const std::filesystem::path& path);

}  // namespace hyperbandit
