#include "ninepatch/error.hpp"
#include "ninepatch/mlp.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace ninepatch;
using namespace ninepatch::mlp;

namespace {

MlpConfig small_config(std::vector<int> dims, std::uint64_t seed = 1) {
    MlpConfig c;
    c.dims = std::move(dims);
    c.seed = seed;
    return c;
}

// Zeroes every parameter so the output layer sees nothing but its biases.
void zero_parameters(Mlp& m) {
    for (auto& w : m.weights) w.setZero();
    for (auto& b : m.biases) b.setZero();
}

// Two Gaussian blobs separated along the diagonal.
TrainingSet blobs(int n, std::uint64_t seed) {
    Rng rng(seed);
    TrainingSet s;
    s.features.resize(n, 2);
    s.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int y = i % 2;
        const double c = y == 0 ? -1.5 : 1.5;
        s.features(i, 0) = c + 0.4 * rng.normal();
        s.features(i, 1) = c + 0.4 * rng.normal();
        s.labels[static_cast<std::size_t>(i)] = y;
    }
    return s;
}

}  // namespace

TEST(Init, HeStandardDeviation) {
    const Mlp m = init(small_config({900, 512, 512, 2}));
    const auto& w = m.weights[0];
    const double mean = w.mean();
    const double var = (w.array() - mean).square().mean();
    EXPECT_NEAR(std::sqrt(var), std::sqrt(2.0 / 900.0), 0.05 * std::sqrt(2.0 / 900.0));
    EXPECT_NEAR(std::sqrt((m.weights[1].array().square()).mean()), std::sqrt(2.0 / 512.0), 0.05 * std::sqrt(2.0 / 512.0));
    for (const auto& b : m.biases) EXPECT_EQ(b.cwiseAbs().maxCoeff(), 0.0);
    for (const auto& v : m.weight_velocity) EXPECT_EQ(v.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(m.weights[0].rows(), 512);
    EXPECT_EQ(m.weights[0].cols(), 900);
    EXPECT_EQ(m.weights[2].rows(), 2);
}

TEST(Init, DeterministicInSeed) {
    const Mlp a = init(small_config({10, 6, 3}, 5));
    const Mlp b = init(small_config({10, 6, 3}, 5));
    const Mlp c = init(small_config({10, 6, 3}, 6));
    EXPECT_EQ(a.weights[0], b.weights[0]);
    EXPECT_NE(a.weights[0], c.weights[0]);
}

TEST(Forward, ZeroNetworkIsUniform) {
    Mlp m = init(small_config({4, 3, 2}));
    zero_parameters(m);
    const std::vector<double> x{1.0, -2.0, 0.5, 3.0};
    const Posterior p = forward(m, x);
    EXPECT_DOUBLE_EQ(p[0], 0.5);
    EXPECT_DOUBLE_EQ(p[1], 0.5);
    EXPECT_EQ(p.argmax(), 0);
}

TEST(Forward, SoftmaxOfLogTwo) {
    Mlp m = init(small_config({1, 2}));
    zero_parameters(m);
    m.biases[0] << std::log(2.0), 0.0;
    const std::vector<double> x{0.0};
    const Posterior p = forward(m, x);
    EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
}

TEST(Forward, HandComputedTinyNetwork) {
    Mlp m = init(small_config({2, 2, 2}));
    m.weights[0] << 1.0, -1.0, 0.5, 2.0;
    m.biases[0] << 0.0, -1.0;
    m.weights[1] << 1.0, 0.0, -1.0, 1.0;
    m.biases[1] << 0.25, 0.0;
    // x = (1, 2): z1 = (-1, 3.5), h = (0, 3.5), z2 = (0.25, 3.5)
    const std::vector<double> x{1.0, 2.0};
    const Posterior p = forward(m, x);
    const double e0 = std::exp(0.25), e1 = std::exp(3.5);
    EXPECT_NEAR(p[0], e0 / (e0 + e1), 1e-12);
    EXPECT_NEAR(p[1], e1 / (e0 + e1), 1e-12);
}

TEST(Forward, BatchRowsSumToOne) {
    const Mlp m = init(small_config({5, 8, 8, 4}, 3));
    Rng rng(9);
    Matrix x(20, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal() * 3.0;
    const Matrix p = forward_batch(m, x);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
        EXPECT_GE(p.row(r).minCoeff(), 0.0);
    }
}

TEST(Forward, ShapeMismatchThrows) {
    const Mlp m = init(small_config({5, 3, 2}));
    const std::vector<double> x{1.0, 2.0};
    EXPECT_THROW(forward(m, x), ShapeError);
}

TEST(Loss, UniformPosteriorGivesLogTwo) {
    Mlp m = init(small_config({3, 4, 2}));
    zero_parameters(m);
    Matrix x = Matrix::Ones(4, 3);
    const std::vector<int> y{0, 1, 1, 0};
    EXPECT_NEAR(loss_and_grads(m, x, y, nullptr).loss, std::log(2.0), 1e-15);
}

TEST(Loss, ConfidentCorrectGivesZero) {
    Mlp m = init(small_config({1, 2}));
    zero_parameters(m);
    m.biases[0] << 0.0, 1000.0;
    Matrix x = Matrix::Zero(1, 1);
    const std::vector<int> y{1};
    EXPECT_NEAR(loss_and_grads(m, x, y, nullptr).loss, 0.0, 1e-15);
}

TEST(Loss, ShapeErrors) {
    const Mlp m = init(small_config({3, 2}));
    Matrix x = Matrix::Ones(2, 3);
    const std::vector<int> one{0};
    EXPECT_THROW(loss_and_grads(m, x, one, nullptr), ShapeError);
    const std::vector<int> bad{0, 2};
    EXPECT_THROW(loss_and_grads(m, x, bad, nullptr), ShapeError);
}

TEST(GradCheck, AnalyticMatchesNumeric) {
    const GradCheckReport r = gradient_check();
    EXPECT_GT(r.entries_checked, 0u);
    EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(GradCheck, DeeperAndWiderShapes) {
    GradCheckOptions o;
    o.dims = {9, 11, 6, 6, 3};
    o.seed = 21;
    EXPECT_TRUE(gradient_check(o).passed(1e-6));
}

TEST(GradCheck, DetectsCorruptedBiasGradient) {
    GradCheckOptions o;
    o.mutate = [](Gradients& g) {
        for (auto& b : g.biases) b *= 2.0;
    };
    EXPECT_GT(gradient_check(o).max_relative_error, 1e-1);
}

TEST(GradCheck, DropoutMasksInBackwardPass) {
    // Fixed masks make the loss a deterministic function of the parameters,
    // so finite differences apply.
    MlpConfig c = small_config({6, 5, 2}, 11);
    c.dropout_keep_input = 0.5;
    c.dropout_keep_hidden = 0.5;
    Mlp m = init(c);
    Rng rng(4);
    Matrix x(6, 6);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const std::vector<int> y{0, 1, 0, 1, 1, 0};
    const DropoutMasks masks = draw_masks(c, x.rows(), rng);
    const LossAndGrads lg = loss_and_grads(m, x, y, &masks);
    const double h = 1e-6;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m.weights[0].size(); ++i) {
        const double orig = m.weights[0].data()[i];
        m.weights[0].data()[i] = orig + h;
        const double up = loss_and_grads(m, x, y, &masks).loss;
        m.weights[0].data()[i] = orig - h;
        const double down = loss_and_grads(m, x, y, &masks).loss;
        m.weights[0].data()[i] = orig;
        const double num = (up - down) / (2 * h);
        const double ana = lg.grads.weights[0].data()[i];
        worst = std::max(worst, std::abs(num - ana) / std::max(std::abs(num) + std::abs(ana), 1e-8));
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(Update, ZeroMomentumIsPlainSgd) {
    Mlp m = init(small_config({3, 4, 2}, 2));
    const Mlp before = m;
    Gradients g;
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        g.weights.push_back(Matrix::Constant(m.weights[l].rows(), m.weights[l].cols(), 0.5));
        g.biases.push_back(Vector::Constant(m.biases[l].size(), -0.25));
    }
    apply_update(m, g, 0.1, 0.0);
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        EXPECT_LT((m.weights[l] - (before.weights[l].array() - 0.05).matrix()).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_LT((m.biases[l] - (before.biases[l].array() + 0.025).matrix()).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(Update, TwoStepsWithMomentum) {
    Mlp m = init(small_config({2, 2}, 2));
    zero_parameters(m);
    Gradients g{{Matrix::Constant(2, 2, 1.0)}, {Vector::Constant(2, 1.0)}};
    const double lr = 0.1, mu = 0.5;
    apply_update(m, g, lr, mu);
    apply_update(m, g, lr, mu);
    // v1 = -lr g, v2 = -mu lr g - lr g; total = -lr g (2 + mu)
    EXPECT_NEAR(m.weights[0](0, 0), -lr * (2 + mu), 1e-15);
    EXPECT_NEAR(m.biases[0](1), -lr * (2 + mu), 1e-15);

    Gradients zero{{Matrix::Zero(2, 2)}, {Vector::Zero(2)}};
    const double w = m.weights[0](0, 0);
    const double v = m.weight_velocity[0](0, 0);
    apply_update(m, zero, lr, mu);
    EXPECT_NEAR(m.weights[0](0, 0), w + mu * v, 1e-15);
}

TEST(Update, DampenedStyleScalesStep) {
    MlpConfig c = small_config({2, 2}, 2);
    c.momentum_style = MomentumStyle::dampened;
    Mlp m = init(c);
    zero_parameters(m);
    Gradients g{{Matrix::Constant(2, 2, 1.0)}, {Vector::Constant(2, 1.0)}};
    apply_update(m, g, 1.0, 0.9);
    EXPECT_NEAR(m.weights[0](0, 0), -0.1, 1e-15);
}

TEST(Update, MaxNormCapsRows) {
    MlpConfig c = small_config({2, 2}, 2);
    c.max_norm = 1.0;
    Mlp m = init(c);
    zero_parameters(m);
    Gradients g{{Matrix::Constant(2, 2, -10.0)}, {Vector::Zero(2)}};
    apply_update(m, g, 1.0, 0.0);
    for (Eigen::Index r = 0; r < 2; ++r) EXPECT_NEAR(m.weights[0].row(r).norm(), 1.0, 1e-12);
}

TEST(Schedule, DecayAndRamp) {
    const MlpConfig c;
    EXPECT_DOUBLE_EQ(schedule(0, c).lr, 3.0);
    EXPECT_DOUBLE_EQ(schedule(0, c).momentum, 0.5);
    EXPECT_NEAR(schedule(1, c).lr, 2.994, 1e-12);
    EXPECT_NEAR(schedule(250, c).momentum, 0.745, 1e-12);
    EXPECT_NEAR(schedule(500, c).momentum, 0.99, 1e-12);
    EXPECT_NEAR(schedule(900, c).momentum, 0.99, 1e-12);
    for (int e = 1; e < 1000; ++e) {
        EXPECT_LT(schedule(e, c).lr, schedule(e - 1, c).lr);
        EXPECT_GE(schedule(e, c).momentum, schedule(e - 1, c).momentum);
    }
}

TEST(Dropout, MasksAreUnbiased) {
    MlpConfig c = small_config({50, 40, 2});
    c.dropout_keep_input = 0.8;
    c.dropout_keep_hidden = 0.5;
    Rng rng(13);
    const DropoutMasks masks = draw_masks(c, 400, rng);
    ASSERT_EQ(masks.layer_inputs.size(), 2u);
    for (std::size_t l = 0; l < 2; ++l) {
        const double keep = l == 0 ? 0.8 : 0.5;
        const Matrix& mk = masks.layer_inputs[l];
        for (Eigen::Index i = 0; i < mk.size(); ++i) {
            const double v = mk.data()[i];
            EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / keep) < 1e-15);
        }
        // Each entry has mean 1 and variance (1 - keep) / keep.
        const double n = static_cast<double>(mk.size());
        const double se = std::sqrt((1.0 - keep) / keep / n);
        EXPECT_NEAR(mk.mean(), 1.0, 3.0 * se);
    }
}

TEST(Dropout, LinearLayerExpectation) {
    // For a linear map, E[w . (m * x)] = w . x under inverted dropout.
    MlpConfig c = small_config({8, 2});
    c.dropout_keep_input = 0.5;
    Rng rng(17);
    Vector x(8), w(8);
    for (int i = 0; i < 8; ++i) {
        x(i) = rng.normal();
        w(i) = rng.normal();
    }
    const int trials = 20000;
    const DropoutMasks masks = draw_masks(c, trials, rng);
    const Matrix& mk = masks.layer_inputs[0];
    std::vector<double> out(trials);
    for (int t = 0; t < trials; ++t) out[static_cast<std::size_t>(t)] = (mk.row(t).transpose().cwiseProduct(x)).dot(w);
    const double mean = std::accumulate(out.begin(), out.end(), 0.0) / trials;
    double var = 0.0;
    for (double v : out) var += (v - mean) * (v - mean);
    var /= trials - 1;
    EXPECT_NEAR(mean, x.dot(w), 3.0 * std::sqrt(var / trials));
}

TEST(Fit, SeparableBlobs) {
    const TrainingSet train = blobs(200, 3);
    MlpConfig c = MlpConfig::standard(2, 2, 2, 32);
    c.lr0 = 0.05;
    c.epochs = 50;
    c.batch_size = 16;
    c.seed = 8;
    const FitResult r = fit(c, train);
    EXPECT_GE(accuracy(r.model, train), 0.99);
    EXPECT_EQ(r.log.size(), 50u);
    EXPECT_LT(r.log.back().loss, r.log.front().loss);
}

TEST(Fit, ZeroEpochsReturnsInit) {
    const TrainingSet train = blobs(20, 3);
    MlpConfig c = MlpConfig::standard(2, 2, 1, 4);
    c.epochs = 0;
    c.seed = 4;
    const FitResult r = fit(c, train);
    const Mlp fresh = init(c);
    EXPECT_TRUE(r.log.empty());
    for (std::size_t l = 0; l < fresh.layer_count(); ++l) EXPECT_EQ(r.model.weights[l], fresh.weights[l]);
}

TEST(Fit, Deterministic) {
    const TrainingSet train = blobs(60, 5);
    MlpConfig c = MlpConfig::standard(2, 2, 2, 16);
    c.lr0 = 0.05;
    c.epochs = 5;
    c.batch_size = 7;
    c.seed = 12;
    const FitResult a = fit(c, train);
    const FitResult b = fit(c, train);
    for (std::size_t l = 0; l < a.model.layer_count(); ++l) EXPECT_EQ(a.model.weights[l], b.model.weights[l]);
    EXPECT_EQ(format_log(a.log), format_log(b.log));
    EXPECT_EQ(a.model.log_digest, b.model.log_digest);
}

TEST(Fit, MissingClassRejected) {
    TrainingSet train = blobs(10, 1);
    std::fill(train.labels.begin(), train.labels.end(), 0);
    MlpConfig c = MlpConfig::standard(2, 2, 1, 4);
    EXPECT_THROW(fit(c, train), InvalidInput);
}

TEST(Fit, DivergenceIsReported) {
    TrainingSet train = blobs(64, 2);
    train.features *= 1e3;
    MlpConfig c = MlpConfig::standard(2, 2, 2, 64);
    c.lr0 = 1e200;
    c.epochs = 20;
    EXPECT_THROW(fit(c, train), TrainingDiverged);
}

TEST(Config, ValidationErrors) {
    MlpConfig c;
    c.validate();
    c.lr0 = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.dropout_keep_hidden = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.momentum_final = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.dims = {4, 1};
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, StandardShape) {
    const MlpConfig c = MlpConfig::standard(900, 8);
    EXPECT_EQ(c.dims, (std::vector<int>{900, 512, 512, 8}));
    EXPECT_EQ(MlpConfig::standard(10, 2, 3, 7).dims, (std::vector<int>{10, 7, 7, 7, 2}));
}
