#include "ninepatch/mlp.hpp"

#include "ninepatch/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ninepatch {

int argmax_lowest(std::span<const double> values) {
    if (values.empty()) return -1;
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return static_cast<int>(best);
}

int Posterior::argmax() const { return argmax_lowest(probs); }

}  // namespace ninepatch

namespace ninepatch::mlp {

namespace {

constexpr double kProbFloor = 1e-12;

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void softmax_rows(Matrix& z) {
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        const double peak = row.maxCoeff();
        row = (row.array() - peak).exp();
        row /= row.sum();
    }
}

void check_input(const Mlp& m, Eigen::Index cols) {
    if (m.weights.empty()) throw ShapeError("network has no layers");
    if (cols != m.weights.front().cols()) {
        throw ShapeError("input has " + std::to_string(cols) + " features, network expects " +
                         std::to_string(m.weights.front().cols()));
    }
}

}  // namespace

MlpConfig MlpConfig::standard(int input_dim, int classes, int hidden_count, int hidden_units) {
    MlpConfig c;
    c.dims.clear();
    c.dims.push_back(input_dim);
    for (int i = 0; i < hidden_count; ++i) c.dims.push_back(hidden_units);
    c.dims.push_back(classes);
    return c;
}

void MlpConfig::validate() const {
    if (dims.size() < 2) throw ConfigError("mlp: need at least input and output dimensions");
    for (int d : dims) {
        if (d < 1) throw ConfigError("mlp: layer dimensions must be positive");
    }
    if (dims.back() < 2) throw ConfigError("mlp: need at least two output classes");
    auto in_unit = [](double p) { return p > 0.0 && p <= 1.0; };
    if (!in_unit(dropout_keep_input) || !in_unit(dropout_keep_hidden)) {
        throw ConfigError("mlp: dropout retain probabilities must be in (0, 1]");
    }
    if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("mlp: lr0 must be positive");
    if (!in_unit(lr_decay)) throw ConfigError("mlp: lr_decay must be in (0, 1]");
    if (!(momentum0 >= 0.0 && momentum0 < 1.0) || !(momentum_final >= 0.0 && momentum_final < 1.0)) {
        throw ConfigError("mlp: momentum values must be in [0, 1)");
    }
    if (max_norm < 0.0 || !std::isfinite(max_norm)) throw ConfigError("mlp: max_norm must be >= 0");
    if (momentum_ramp_epochs < 0) throw ConfigError("mlp: momentum_ramp_epochs must be >= 0");
    if (epochs < 0) throw ConfigError("mlp: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("mlp: batch_size must be >= 1");
}

std::string MlpConfig::echo() const {
    std::ostringstream os;
    os << "dims = ";
    for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
    os << "\ndropout_keep_input = " << format_double(dropout_keep_input)
       << "\ndropout_keep_hidden = " << format_double(dropout_keep_hidden) << "\nlr0 = " << format_double(lr0)
       << "\nlr_decay = " << format_double(lr_decay) << "\nmomentum0 = " << format_double(momentum0)
       << "\nmomentum_final = " << format_double(momentum_final)
       << "\nmomentum_ramp_epochs = " << momentum_ramp_epochs << "\nmomentum_style = "
       << (momentum_style == MomentumStyle::dampened ? "dampened" : "classical")
       << "\nmax_norm = " << format_double(max_norm) << "\nepochs = " << epochs
       << "\nbatch_size = " << batch_size << "\nseed = " << seed << "\n";
    return os.str();
}

bool Mlp::parameters_finite() const {
    // A NaN or infinity anywhere makes the sum non-finite.
    double total = 0.0;
    for (std::size_t l = 0; l < weights.size(); ++l) total += weights[l].sum() + biases[l].sum();
    if (std::isfinite(total)) return true;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    }
    return true;
}

Mlp init(const MlpConfig& config) {
    config.validate();
    Mlp m;
    m.config = config;
    Rng init_rng(derive_seed(config.seed, "init"));
    m.rng = Rng(derive_seed(config.seed, "dropout"));
    const std::size_t layers = config.dims.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const int fan_in = config.dims[l];
        const int fan_out = config.dims[l + 1];
        const double sd = std::sqrt(2.0 / fan_in);
        Matrix w(fan_out, fan_in);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = sd * init_rng.normal();
        m.weights.push_back(std::move(w));
        m.biases.push_back(Vector::Zero(fan_out));
        m.weight_velocity.push_back(Matrix::Zero(fan_out, fan_in));
        m.bias_velocity.push_back(Vector::Zero(fan_out));
    }
    for (int c = 0; c < config.classes(); ++c) m.class_names.push_back(std::to_string(c));
    return m;
}

DropoutMasks draw_masks(const MlpConfig& config, Eigen::Index batch, Rng& rng) {
    DropoutMasks masks;
    const std::size_t layers = config.dims.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const double keep = l == 0 ? config.dropout_keep_input : config.dropout_keep_hidden;
        if (keep >= 1.0) {
            masks.layer_inputs.emplace_back();  // empty: no masking
            continue;
        }
        const double scale = 1.0 / keep;
        // Two 32-bit draws per 64-bit word; the threshold is exact to 2^-32.
        const auto threshold = static_cast<std::uint64_t>(std::ldexp(keep, 32));
        Matrix mask(batch, config.dims[l]);
        double* out = mask.data();
        const Eigen::Index n = mask.size();
        Eigen::Index i = 0;
        for (; i + 1 < n; i += 2) {
            const std::uint64_t word = rng.next();
            out[i] = (word & 0xffffffffu) < threshold ? scale : 0.0;
            out[i + 1] = (word >> 32) < threshold ? scale : 0.0;
        }
        if (i < n) out[i] = (rng.next() & 0xffffffffu) < threshold ? scale : 0.0;
        masks.layer_inputs.push_back(std::move(mask));
    }
    return masks;
}

ForwardTrace forward_train(const Mlp& m, const Matrix& x, const DropoutMasks* masks) {
    check_input(m, x.cols());
    const std::size_t layers = m.layer_count();
    auto mask_for = [&](std::size_t l) -> const Matrix* {
        if (!masks || l >= masks->layer_inputs.size() || masks->layer_inputs[l].size() == 0) return nullptr;
        const Matrix& mk = masks->layer_inputs[l];
        if (mk.rows() != x.rows() || mk.cols() != m.weights[l].cols()) throw ShapeError("dropout mask shape mismatch");
        return &mk;
    };

    ForwardTrace t;
    t.activations.reserve(layers);
    t.pre_activations.reserve(layers);
    if (const Matrix* mk = mask_for(0)) {
        t.activations.push_back(x.cwiseProduct(*mk));
    } else {
        t.activations.push_back(x);
    }
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix z(x.rows(), m.weights[l].rows());
        z.noalias() = t.activations[l] * m.weights[l].transpose();
        z.rowwise() += m.biases[l].transpose();
        if (l + 1 < layers) {
            Matrix h = z.cwiseMax(0.0);
            if (const Matrix* mk = mask_for(l + 1)) h = h.cwiseProduct(*mk);
            t.pre_activations.push_back(std::move(z));
            t.activations.push_back(std::move(h));
        } else {
            t.probs = z;
            softmax_rows(t.probs);
            t.pre_activations.push_back(std::move(z));
        }
    }
    return t;
}

Matrix forward_batch(const Mlp& m, const Matrix& x) {
    check_input(m, x.cols());
    Matrix a = x;
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        Matrix z(a.rows(), m.weights[l].rows());
        z.noalias() = a * m.weights[l].transpose();
        z.rowwise() += m.biases[l].transpose();
        if (l + 1 < m.layer_count()) {
            a = z.cwiseMax(0.0);
        } else {
            softmax_rows(z);
            a = std::move(z);
        }
    }
    return a;
}

Posterior forward(const Mlp& m, std::span<const double> x) {
    Matrix row(1, static_cast<Eigen::Index>(x.size()));
    std::copy(x.begin(), x.end(), row.data());
    const Matrix p = forward_batch(m, row);
    return Posterior{std::vector<double>(p.data(), p.data() + p.size())};
}

LossAndGrads loss_and_grads(const Mlp& m, const Matrix& x, std::span<const int> labels, const DropoutMasks* masks) {
    if (x.rows() == 0) throw InvalidInput("loss_and_grads: empty batch");
    if (static_cast<std::size_t>(x.rows()) != labels.size()) {
        throw ShapeError("loss_and_grads: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(x.rows()) + " samples");
    }
    const ForwardTrace t = forward_train(m, x, masks);
    const auto classes = t.probs.cols();
    const double inv_n = 1.0 / static_cast<double>(x.rows());

    LossAndGrads out;
    Matrix delta = t.probs;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const int y = labels[static_cast<std::size_t>(r)];
        if (y < 0 || y >= classes) throw ShapeError("loss_and_grads: label out of range");
        out.loss -= std::log(std::max(t.probs(r, y), kProbFloor));
        delta(r, y) -= 1.0;
    }
    out.loss *= inv_n;
    delta *= inv_n;

    const std::size_t layers = m.layer_count();
    out.grads.weights.resize(layers);
    out.grads.biases.resize(layers);
    for (std::size_t l = layers; l-- > 0;) {
        out.grads.weights[l].noalias() = delta.transpose() * t.activations[l];
        out.grads.biases[l] = delta.colwise().sum().transpose();
        if (l == 0) break;
        Matrix upstream(delta.rows(), m.weights[l].cols());
        upstream.noalias() = delta * m.weights[l];
        // activations[l] = relu(z) * mask; differentiate through both.
        const Matrix& z = t.pre_activations[l - 1];
        const Matrix* mk = (masks && l < masks->layer_inputs.size() && masks->layer_inputs[l].size() != 0)
                               ? &masks->layer_inputs[l]
                               : nullptr;
        if (mk) {
            upstream.array() = (z.array() > 0.0).select(upstream.array() * mk->array(), 0.0);
        } else {
            upstream.array() = (z.array() > 0.0).select(upstream.array(), 0.0);
        }
        delta = std::move(upstream);
    }
    return out;
}

void apply_update(Mlp& m, const Gradients& g, double lr, double momentum) {
    const double step = m.config.momentum_style == MomentumStyle::dampened ? (1.0 - momentum) * lr : lr;
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        m.weight_velocity[l] = momentum * m.weight_velocity[l] - step * g.weights[l];
        m.bias_velocity[l] = momentum * m.bias_velocity[l] - step * g.biases[l];
        m.weights[l] += m.weight_velocity[l];
        m.biases[l] += m.bias_velocity[l];
        if (m.config.max_norm > 0.0) {
            for (Eigen::Index r = 0; r < m.weights[l].rows(); ++r) {
                const double norm = m.weights[l].row(r).norm();
                if (norm > m.config.max_norm) m.weights[l].row(r) *= m.config.max_norm / norm;
            }
        }
    }
}

double train_step(Mlp& m, const Matrix& x, std::span<const int> labels, double lr, double momentum) {
    if (!(lr > 0.0)) throw InvalidInput("train_step: lr must be positive");
    const DropoutMasks masks = draw_masks(m.config, x.rows(), m.rng);
    LossAndGrads lg = loss_and_grads(m, x, labels, &masks);
    if (!std::isfinite(lg.loss)) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(m.epoch) + ": loss is " +
                               format_double(lg.loss) + " (lr " + format_double(lr) +
                               "); lower lr0 or check that inputs are standardized");
    }
    apply_update(m, lg.grads, lr, momentum);
    if (!m.parameters_finite()) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(m.epoch) +
                               ": non-finite parameters after update (lr " + format_double(lr) + ")");
    }
    return lg.loss;
}

Schedule schedule(int epoch, const MlpConfig& config) {
    Schedule s;
    s.lr = config.lr0 * std::pow(config.lr_decay, epoch);
    const double ramp = config.momentum_ramp_epochs > 0
                            ? std::min(static_cast<double>(epoch) / config.momentum_ramp_epochs, 1.0)
                            : 1.0;
    s.momentum = config.momentum0 + (config.momentum_final - config.momentum0) * ramp;
    return s;
}

double accuracy(const Mlp& m, const TrainingSet& data) {
    if (data.size() == 0) return 0.0;
    const Matrix p = forward_batch(m, data.features);
    std::size_t hits = 0;
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const auto row = p.row(r);
        if (argmax_lowest(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))) ==
            data.labels[static_cast<std::size_t>(r)]) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(p.rows());
}

std::string format_log(const std::vector<EpochLog>& log) {
    std::ostringstream os;
    os << "epoch,loss,lr,momentum,validation_accuracy\n";
    for (const auto& e : log) {
        os << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.lr) << ','
           << format_double(e.momentum) << ',' << format_double(e.validation_accuracy) << '\n';
    }
    return os.str();
}

FitResult fit(const MlpConfig& config, const TrainingSet& train, const TrainingSet* validation,
              const EpochCallback& on_epoch) {
    config.validate();
    if (train.features.cols() != config.input_dim()) {
        throw ShapeError("fit: training features have " + std::to_string(train.features.cols()) +
                         " columns, config expects " + std::to_string(config.input_dim()));
    }
    if (static_cast<std::size_t>(train.size()) != train.labels.size()) {
        throw ShapeError("fit: feature and label counts differ");
    }
    std::vector<std::size_t> per_class(static_cast<std::size_t>(config.classes()), 0);
    for (int y : train.labels) {
        if (y < 0 || y >= config.classes()) throw ShapeError("fit: label out of range");
        ++per_class[static_cast<std::size_t>(y)];
    }
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        if (per_class[c] == 0) throw InvalidInput("fit: class " + std::to_string(c) + " has no training samples");
    }

    FitResult result{init(config), {}};
    Mlp& m = result.model;
    Rng shuffle_rng(derive_seed(config.seed, "shuffle"));

    const auto n = static_cast<std::size_t>(train.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Matrix batch;
    std::vector<int> batch_labels;

    for (int e = 0; e < config.epochs; ++e) {
        const Schedule s = schedule(m.epoch, config);
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t len = std::min(n - start, static_cast<std::size_t>(config.batch_size));
            batch.resize(static_cast<Eigen::Index>(len), train.features.cols());
            batch_labels.resize(len);
            for (std::size_t i = 0; i < len; ++i) {
                batch.row(static_cast<Eigen::Index>(i)) = train.features.row(static_cast<Eigen::Index>(order[start + i]));
                batch_labels[i] = train.labels[order[start + i]];
            }
            loss_sum += train_step(m, batch, batch_labels, s.lr, s.momentum) * static_cast<double>(len);
        }

        EpochLog entry{m.epoch, loss_sum / static_cast<double>(n), s.lr, s.momentum, -1.0};
        if (validation != nullptr && validation->size() > 0) entry.validation_accuracy = accuracy(m, *validation);
        ++m.epoch;
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    m.log_digest = fnv1a64(format_log(result.log));
    return result;
}

GradCheckReport gradient_check(const GradCheckOptions& options) {
    GradCheckReport report;
    Rng rng(options.seed);
    const double h = options.step;

    for (int b = 0; b < options.batches; ++b) {
        MlpConfig cfg;
        cfg.dims = options.dims;
        cfg.dropout_keep_input = 1.0;
        cfg.dropout_keep_hidden = 1.0;
        cfg.seed = rng.next();
        Mlp m = init(cfg);
        for (auto& bias : m.biases) {
            for (Eigen::Index i = 0; i < bias.size(); ++i) bias[i] = 0.1 * rng.normal();
        }

        Matrix x(options.batch_size, cfg.input_dim());
        std::vector<int> y(static_cast<std::size_t>(options.batch_size));
        // Keep every hidden pre-activation clear of the ReLU kink so the
        // finite differences never straddle it.
        for (int attempt = 0;; ++attempt) {
            for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
            const ForwardTrace t = forward_train(m, x, nullptr);
            bool clear = true;
            for (std::size_t l = 0; l + 1 < t.pre_activations.size(); ++l) {
                if ((t.pre_activations[l].array().abs() < 1e-3).any()) clear = false;
            }
            if (clear || attempt > 1000) break;
        }
        for (int& label : y) label = static_cast<int>(rng.below(static_cast<std::size_t>(cfg.classes())));

        LossAndGrads analytic = loss_and_grads(m, x, y, nullptr);
        if (options.mutate) options.mutate(analytic.grads);

        auto loss_at = [&]() { return loss_and_grads(m, x, y, nullptr).loss; };
        auto compare = [&](double& param, double a) {
            const double saved = param;
            param = saved + h;
            const double up = loss_at();
            param = saved - h;
            const double down = loss_at();
            param = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-8);
            report.max_relative_error = std::max(report.max_relative_error, rel);
            ++report.entries_checked;
        };

        for (std::size_t l = 0; l < m.layer_count(); ++l) {
            for (Eigen::Index i = 0; i < m.weights[l].size(); ++i) {
                compare(m.weights[l].data()[i], analytic.grads.weights[l].data()[i]);
            }
            for (Eigen::Index i = 0; i < m.biases[l].size(); ++i) {
                compare(m.biases[l].data()[i], analytic.grads.biases[l].data()[i]);
            }
        }
    }
    return report;
}

}  // namespace ninepatch::mlp
