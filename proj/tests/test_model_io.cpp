#include "ninepatch/error.hpp"
#include "ninepatch/mlp.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace ninepatch;
using namespace ninepatch::mlp;

TEST(ModelIo, ByteExactRoundTrip) {
    MlpConfig c = MlpConfig::standard(12, 3, 2, 5);
    c.seed = 77;
    c.lr0 = 0.25;
    c.momentum_style = MomentumStyle::dampened;
    c.max_norm = 3.5;
    Mlp m = init(c);
    m.class_names = {"a", "b", "c"};
    m.epoch = 41;
    m.log_digest = 0x0123456789abcdefULL;

    std::stringstream first;
    save_model(m, first);
    const std::string bytes = first.str();
    std::istringstream in(bytes);
    const Mlp loaded = load_model(in);

    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        EXPECT_EQ(loaded.weights[l], m.weights[l]);
        EXPECT_EQ(loaded.biases[l], m.biases[l]);
    }
    EXPECT_EQ(loaded.config.dims, c.dims);
    EXPECT_EQ(loaded.config.momentum_style, MomentumStyle::dampened);
    EXPECT_DOUBLE_EQ(loaded.config.max_norm, 3.5);
    EXPECT_DOUBLE_EQ(loaded.config.lr0, 0.25);
    EXPECT_EQ(loaded.config.seed, 77u);
    EXPECT_EQ(loaded.class_names, m.class_names);
    EXPECT_EQ(loaded.epoch, 41);
    EXPECT_EQ(loaded.log_digest, m.log_digest);

    std::stringstream second;
    save_model(loaded, second);
    EXPECT_EQ(second.str(), bytes);
}

TEST(ModelIo, PredictionsSurviveRoundTrip) {
    const Mlp m = init(MlpConfig::standard(4, 2, 1, 6));
    std::stringstream buf;
    save_model(m, buf);
    const Mlp loaded = load_model(buf);
    const std::vector<double> x{0.3, -1.0, 2.0, 0.1};
    EXPECT_EQ(forward(m, x), forward(loaded, x));
}

TEST(ModelIo, RejectsBadMagic) {
    std::istringstream in(std::string("NOTAMODEL-----------"));
    EXPECT_THROW(load_model(in), DataError);
}

TEST(ModelIo, RejectsTruncatedFile) {
    const Mlp m = init(MlpConfig::standard(4, 2, 1, 6));
    std::stringstream buf;
    save_model(m, buf);
    const std::string bytes = buf.str();
    std::istringstream in(bytes.substr(0, bytes.size() / 2));
    EXPECT_THROW(load_model(in), DataError);
}

TEST(ModelIo, MissingFile) { EXPECT_THROW(load_model_file("/nonexistent/model.npmlp"), DataError); }
