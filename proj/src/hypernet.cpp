#include "hyperbandit/hypernet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "hyperbandit/csv.hpp"
#include "hyperbandit/errors.hpp"
#include "hyperbandit/rng.hpp"

namespace hyperbandit {

PreferenceMatrix::PreferenceMatrix(Matrix theta, std::size_t observed_dim)
    : theta_(std::move(theta)), observed_dim_(observed_dim) {
    if (observed_dim_ > theta_.rows())
        throw DimMismatch("PreferenceMatrix: observed block larger than theta");
}

HyperNetwork::HyperNetwork(std::vector<std::size_t> layer_sizes, PreferenceShape shape)
    : sizes_(std::move(layer_sizes)), shape_(shape) {
    if (sizes_.size() < 2) throw BadConfig("hypernetwork needs at least an input and an output layer");
    if (std::any_of(sizes_.begin(), sizes_.end(), [](std::size_t s) { return s == 0; }))
        throw BadConfig("hypernetwork layer sizes must be positive");
    if (shape_.user_dim == 0 || shape_.item_dim() == 0)
        throw BadConfig("hypernetwork output shape has a zero dimension");
    if (sizes_.back() != shape_.output_width())
        throw BadConfig("hypernetwork output width " + std::to_string(sizes_.back()) + " != expected " +
                        std::to_string(shape_.output_width()));
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        Layer layer{sizes_[l], sizes_[l + 1], offset, offset + sizes_[l] * sizes_[l + 1]};
        offset = layer.bias_offset + layer.fan_out;
        layers_.push_back(layer);
    }
    params_.assign(offset, 0.0);
}

namespace {

struct ForwardCache {
    // activations[0] is the input; activations[l + 1] is layer l's output
    // (post-ReLU for hidden layers).
    std::vector<Vector> activations;
};

ForwardCache run_forward(const HyperNetwork& hn, std::span<const double> input) {
    if (input.size() != hn.input_dim())
        throw DimMismatch("hypernetwork input has dim " + std::to_string(input.size()) + ", expected " +
                          std::to_string(hn.input_dim()));
    const auto params = hn.parameters();
    ForwardCache cache;
    cache.activations.emplace_back(input.begin(), input.end());
    const auto& layers = hn.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        const Vector& in = cache.activations.back();
        Vector out(layer.fan_out);
        for (std::size_t o = 0; o < layer.fan_out; ++o) {
            const auto w = params.subspan(layer.weight_offset + o * layer.fan_in, layer.fan_in);
            double z = params[layer.bias_offset + o] + dot(w, in);
            if (l + 1 < layers.size()) z = std::max(z, 0.0);
            out[o] = z;
        }
        cache.activations.push_back(std::move(out));
    }
    return cache;
}

/// Accumulate parameter gradients given dL/d(output).
void backward(const HyperNetwork& hn, const ForwardCache& cache, Vector delta, std::span<double> grad) {
    const auto params = hn.parameters();
    const auto& layers = hn.layers();
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& layer = layers[l];
        const Vector& in = cache.activations[l];
        for (std::size_t o = 0; o < layer.fan_out; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            grad[layer.bias_offset + o] += d;
            axpy(d, in, grad.subspan(layer.weight_offset + o * layer.fan_in, layer.fan_in));
        }
        if (l == 0) break;
        Vector prev(layer.fan_in, 0.0);
        for (std::size_t o = 0; o < layer.fan_out; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            axpy(d, params.subspan(layer.weight_offset + o * layer.fan_in, layer.fan_in), prev);
        }
        // ReLU derivative from the stored post-activation of the layer below.
        for (std::size_t i = 0; i < prev.size(); ++i)
            if (!(in[i] > 0.0)) prev[i] = 0.0;
        delta = std::move(prev);
    }
}

/// dL/d(output) from dL/dΘ.
Vector output_gradient(const Matrix& grad_theta, std::span<const double> output, const PreferenceShape& shape) {
    const std::size_t da = shape.item_dim();
    const std::size_t du = shape.user_dim;
    if (shape.rank == 0) {
        const auto g = grad_theta.data();
        return Vector(g.begin(), g.end());
    }
    const std::size_t tau = shape.rank;
    const Matrix a(da, tau, Vector(output.begin(), output.begin() + static_cast<std::ptrdiff_t>(da * tau)));
    const Matrix b(du, tau, Vector(output.begin() + static_cast<std::ptrdiff_t>(da * tau), output.end()));
    const Matrix grad_a = grad_theta * b;              // d_a × τ
    const Matrix grad_b = grad_theta.transpose() * a;  // d_u × τ
    Vector out(grad_a.data().begin(), grad_a.data().end());
    out.insert(out.end(), grad_b.data().begin(), grad_b.data().end());
    return out;
}

struct PreparedRecord {
    int period = 0;
    Vector user;
    Vector target;  ///< softmax of labels
    Matrix items;   ///< M × d_a candidate contexts
};

std::vector<PreparedRecord> prepare(const HyperNetwork& hn, std::span<const InteractionRecord> buffer,
                                    const ContextSource& contexts, LabelRule rule) {
    if (buffer.empty()) throw EmptyBuffer("hypernetwork loss needs a non-empty buffer");
    const std::size_t m = buffer.front().candidates.size();
    const std::size_t da = hn.shape().item_dim();
    const std::size_t du = hn.shape().user_dim;
    std::vector<PreparedRecord> out;
    out.reserve(buffer.size());
    for (const auto& rec : buffer) {
        if (rec.candidates.size() != m || m == 0)
            throw DimMismatch("all buffer records must have the same non-zero number of candidates");
        PreparedRecord p;
        p.period = rec.period.value();
        p.user = contexts.user_context(rec.user);
        if (p.user.size() != du) throw DimMismatch("user context dimension differs from d_u");
        p.target = softmax(record_labels(rec, rule));
        p.items = Matrix(m, da);
        for (std::size_t k = 0; k < m; ++k) {
            const Vector c = contexts.item_context(rec.candidates[k]);
            if (c.size() != da) throw DimMismatch("item context dimension differs from d_a");
            std::copy(c.begin(), c.end(), p.items.row(k).begin());
        }
        out.push_back(std::move(p));
    }
    return out;
}

/// Loss over the selected records; adds the gradient into `grad` when non-empty.
double evaluate(const HyperNetwork& hn, const std::vector<PreparedRecord>& records,
                std::span<const std::size_t> selection, EmbeddingMode mode, std::span<double> grad) {
    std::map<int, std::vector<std::size_t>> by_period;
    for (std::size_t idx : selection) by_period[records[idx].period].push_back(idx);

    const PreferenceShape& shape = hn.shape();
    double loss = 0.0;
    for (const auto& [period, members] : by_period) {
        const ForwardCache cache = run_forward(hn, embed(TimePeriod(period), mode));
        const Vector& out = cache.activations.back();
        const PreferenceMatrix theta = reshape_output(out, shape);
        Matrix grad_theta;
        if (!grad.empty()) grad_theta = Matrix(shape.item_dim(), shape.user_dim);

        for (std::size_t idx : members) {
            const PreparedRecord& rec = records[idx];
            const Vector proj = theta.project_user(rec.user);
            const Vector scores = matvec(rec.items, proj);
            const Vector log_p = log_softmax(scores);
            for (std::size_t k = 0; k < log_p.size(); ++k) loss -= rec.target[k] * log_p[k];
            if (grad.empty()) continue;
            Vector w(shape.item_dim(), 0.0);
            for (std::size_t k = 0; k < log_p.size(); ++k)
                axpy(std::exp(log_p[k]) - rec.target[k], rec.items.row(k), w);
            for (std::size_t i = 0; i < w.size(); ++i) axpy(w[i], rec.user, grad_theta.row(i));
        }
        if (!grad.empty()) backward(hn, cache, output_gradient(grad_theta, out, shape), grad);
    }
    return loss;
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

void shuffle(std::vector<std::size_t>& v, Rng rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(rng.below(i))]);
}

}  // namespace

Vector HyperNetwork::output(std::span<const double> embedding) const {
    return run_forward(*this, embedding).activations.back();
}

std::vector<std::size_t> hypernet_layer_sizes(std::size_t input_dim, std::span<const std::size_t> hidden,
                                              const PreferenceShape& shape) {
    std::vector<std::size_t> sizes{input_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(shape.output_width());
    return sizes;
}

HyperNetwork init_xavier(std::vector<std::size_t> layer_sizes, const PreferenceShape& shape, std::uint64_t seed) {
    HyperNetwork hn(std::move(layer_sizes), shape);
    auto params = hn.parameters();
    for (std::size_t l = 0; l < hn.layers().size(); ++l) {
        const auto& layer = hn.layers()[l];
        Rng rng = make_rng(seed, streams::kXavier, l);
        const double stddev = std::sqrt(2.0 / static_cast<double>(layer.fan_in + layer.fan_out));
        for (std::size_t i = 0; i < layer.fan_in * layer.fan_out; ++i)
            params[layer.weight_offset + i] = stddev * rng.normal();
    }
    return hn;
}

PreferenceMatrix reshape_output(std::span<const double> output, const PreferenceShape& shape) {
    if (output.size() != shape.output_width()) throw DimMismatch("hypernetwork output width mismatch");
    const std::size_t da = shape.item_dim();
    const std::size_t du = shape.user_dim;
    if (shape.rank == 0) return PreferenceMatrix(Matrix(da, du, Vector(output.begin(), output.end())), shape.observed_dim);
    const std::size_t tau = shape.rank;
    const Matrix a(da, tau, Vector(output.begin(), output.begin() + static_cast<std::ptrdiff_t>(da * tau)));
    const Matrix b(du, tau, Vector(output.begin() + static_cast<std::ptrdiff_t>(da * tau), output.end()));
    return PreferenceMatrix(a * b.transpose(), shape.observed_dim);
}

PreferenceMatrix forward(const HyperNetwork& hn, std::span<const double> embedding) {
    return reshape_output(hn.output(embedding), hn.shape());
}

Vector record_labels(const InteractionRecord& record, LabelRule rule) {
    Vector labels(record.candidates.size(), 0.0);
    bool found = false;
    for (std::size_t k = 0; k < record.candidates.size(); ++k) {
        if (record.candidates[k] != record.chosen) continue;
        labels[k] = rule == LabelRule::Click ? (record.reward > 0.5 ? 1.0 : -1.0) : record.reward;
        found = true;
    }
    if (!found) throw OutOfRange("record's chosen item is not among its candidates");
    return labels;
}

double listnet_loss(const HyperNetwork& hn, std::span<const InteractionRecord> buffer,
                    const ContextSource& contexts, const LossOptions& opts) {
    const auto records = prepare(hn, buffer, contexts, opts.label_rule);
    const auto idx = all_indices(records.size());
    return evaluate(hn, records, idx, opts.embedding, {});
}

Vector gradient(const HyperNetwork& hn, std::span<const InteractionRecord> buffer,
                const ContextSource& contexts, const LossOptions& opts) {
    const auto records = prepare(hn, buffer, contexts, opts.label_rule);
    const auto idx = all_indices(records.size());
    Vector grad(hn.num_parameters(), 0.0);
    evaluate(hn, records, idx, opts.embedding, grad);
    return grad;
}

void TrainOptions::validate() const {
    if (!(learning_rate >= 0.0)) throw BadConfig("learning_rate must be >= 0");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw BadConfig("adam_beta1 must be in (0, 1)");
    if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw BadConfig("adam_beta2 must be in (0, 1)");
    if (!(adam_epsilon > 0.0)) throw BadConfig("adam_epsilon must be positive");
    if (patience == 0) throw BadConfig("patience must be positive");
    if (!(validation_fraction > 0.0 && validation_fraction <= 0.5))
        throw BadConfig("validation_fraction must be in (0, 0.5]");
    if (batch_size == 0) throw BadConfig("batch_size must be positive");
}

TrainReport train_minibatch(HyperNetwork& hn, std::span<const InteractionRecord> buffer,
                            const ContextSource& contexts, const TrainOptions& opts) {
    opts.validate();
    const auto records = prepare(hn, buffer, contexts, opts.loss.label_rule);
    const EmbeddingMode mode = opts.loss.embedding;

    std::vector<std::size_t> order = all_indices(records.size());
    shuffle(order, make_rng(opts.seed, streams::kShuffle, 0));
    std::size_t n_val = static_cast<std::size_t>(std::floor(opts.validation_fraction * static_cast<double>(order.size())));
    if (n_val == 0 && order.size() >= 2) n_val = 1;
    std::vector<std::size_t> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
    const std::vector<std::size_t> val(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
    const std::vector<std::size_t>& monitor = val.empty() ? train : val;

    TrainReport report;
    report.best_validation_loss = evaluate(hn, records, monitor, mode, {});
    if (opts.max_epochs == 0) return report;

    auto params = hn.parameters();
    Vector best(params.begin(), params.end());
    Vector m1(params.size(), 0.0), m2(params.size(), 0.0), grad(params.size());
    std::size_t step = 0;
    std::size_t stale = 0;

    for (std::size_t epoch = 1; epoch <= opts.max_epochs; ++epoch) {
        shuffle(train, make_rng(opts.seed, streams::kShuffle, epoch));
        for (std::size_t start = 0; start < train.size(); start += opts.batch_size) {
            const std::size_t count = std::min(opts.batch_size, train.size() - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            evaluate(hn, records, std::span(train).subspan(start, count), mode, grad);
            ++step;
            const double c1 = 1.0 - std::pow(opts.adam_beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(opts.adam_beta2, static_cast<double>(step));
            for (std::size_t i = 0; i < params.size(); ++i) {
                m1[i] = opts.adam_beta1 * m1[i] + (1.0 - opts.adam_beta1) * grad[i];
                m2[i] = opts.adam_beta2 * m2[i] + (1.0 - opts.adam_beta2) * grad[i] * grad[i];
                params[i] -= opts.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + opts.adam_epsilon);
            }
        }
        report.epochs_run = epoch;
        const double loss = evaluate(hn, records, monitor, mode, {});
        if (loss < report.best_validation_loss) {
            report.best_validation_loss = loss;
            best.assign(params.begin(), params.end());
            stale = 0;
        } else if (++stale >= opts.patience || !std::isfinite(loss)) {
            break;
        }
    }
    std::copy(best.begin(), best.end(), params.begin());
    return report;
}

std::vector<Vector> rank_report(const HyperNetwork& hn, EmbeddingMode mode) {
    std::vector<Vector> rows;
    rows.reserve(kNumPeriods);
    for (int p = 0; p < kNumPeriods; ++p)
        rows.push_back(svd_values(forward(hn, embed(TimePeriod(p), mode)).theta()));
    return rows;
}

// Checkpoint format (text, one token group per line):
//   hyperbandit-hypernet 1
//   layers <count> <size>...
//   shape <observed_dim> <latent_dim> <user_dim> <rank>
//   parameters <count>
//   <one shortest-round-trip double per line>
void save_checkpoint(const HyperNetwork& hn, std::ostream& out) {
    out << "hyperbandit-hypernet 1\n";
    out << "layers " << hn.layer_sizes().size();
    for (std::size_t s : hn.layer_sizes()) out << ' ' << s;
    const auto& sh = hn.shape();
    out << "\nshape " << sh.observed_dim << ' ' << sh.latent_dim << ' ' << sh.user_dim << ' ' << sh.rank << '\n';
    out << "parameters " << hn.num_parameters() << '\n';
    for (double v : hn.parameters()) out << csv::format_double(v) << '\n';
    if (!out) throw IoError("failed writing hypernetwork checkpoint");
}

HyperNetwork load_checkpoint(std::istream& in) {
    auto fail = [](const std::string& what) { return ParseError("hypernet checkpoint", 0, what); };
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "hyperbandit-hypernet" || version != 1) throw fail("bad magic");
    std::size_t count = 0;
    if (!(in >> tag >> count) || tag != "layers") throw fail("missing layers");
    std::vector<std::size_t> sizes(count);
    for (auto& s : sizes)
        if (!(in >> s)) throw fail("truncated layers");
    PreferenceShape shape;
    if (!(in >> tag >> shape.observed_dim >> shape.latent_dim >> shape.user_dim >> shape.rank) || tag != "shape")
        throw fail("missing shape");
    if (!(in >> tag >> count) || tag != "parameters") throw fail("missing parameters");
    HyperNetwork hn(std::move(sizes), shape);
    if (count != hn.num_parameters()) throw fail("parameter count does not match layers");
    auto params = hn.parameters();
    std::string token;
    for (std::size_t i = 0; i < count; ++i) {
        if (!(in >> token)) throw fail("truncated parameters");
        const auto v = csv::parse_double(token);
        if (!v) throw fail("bad parameter '" + token + "'");
        params[i] = *v;
    }
    return hn;
}

void save_checkpoint(const HyperNetwork& hn, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    save_checkpoint(hn, out);
}

HyperNetwork load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return load_checkpoint(in);
}

}  // namespace hyperbandit
