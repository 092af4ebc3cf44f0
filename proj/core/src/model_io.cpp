#include "detail/binary_io.hpp"
#include "ninepatch/error.hpp"
#include "ninepatch/mlp.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace ninepatch::mlp {

namespace {

constexpr char kMagic[6] = {'N', 'P', 'M', 'L', 'P', '1'};

std::string hex64(std::uint64_t v) {
    char buf[17];
    auto [ptr, ec] = std::to_chars(buf, buf + 16, v, 16);
    std::string s(buf, ptr);
    return std::string(16 - s.size(), '0') + s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text, int base = 10) {
    T v{};
    std::from_chars_result res;
    if constexpr (std::is_floating_point_v<T>) {
        res = std::from_chars(text.data(), text.data() + text.size(), v);
    } else {
        res = std::from_chars(text.data(), text.data() + text.size(), v, base);
    }
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw DataError("model metadata: bad value '" + text + "' for " + key);
    }
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    return out;
}

std::string metadata_text(const Mlp& m) {
    std::ostringstream os;
    os << m.config.echo();
    os << "classes = ";
    for (std::size_t i = 0; i < m.class_names.size(); ++i) os << (i ? "," : "") << m.class_names[i];
    os << "\nepochs_trained = " << m.epoch << "\nlog_digest = " << hex64(m.log_digest) << "\n";
    return os.str();
}

void apply_metadata(Mlp& m, const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 3);
    }
    auto get = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw DataError(std::string("model metadata: missing ") + key);
        return it->second;
    };
    MlpConfig& c = m.config;
    c.dropout_keep_input = parse_number<double>("dropout_keep_input", get("dropout_keep_input"));
    c.dropout_keep_hidden = parse_number<double>("dropout_keep_hidden", get("dropout_keep_hidden"));
    c.lr0 = parse_number<double>("lr0", get("lr0"));
    c.lr_decay = parse_number<double>("lr_decay", get("lr_decay"));
    c.momentum0 = parse_number<double>("momentum0", get("momentum0"));
    c.momentum_final = parse_number<double>("momentum_final", get("momentum_final"));
    c.momentum_ramp_epochs = parse_number<int>("momentum_ramp_epochs", get("momentum_ramp_epochs"));
    const std::string& style = get("momentum_style");
    if (style == "classical") {
        c.momentum_style = MomentumStyle::classical;
    } else if (style == "dampened") {
        c.momentum_style = MomentumStyle::dampened;
    } else {
        throw DataError("model metadata: bad value '" + style + "' for momentum_style");
    }
    c.max_norm = parse_number<double>("max_norm", get("max_norm"));
    c.epochs = parse_number<int>("epochs", get("epochs"));
    c.batch_size = parse_number<int>("batch_size", get("batch_size"));
    c.seed = parse_number<std::uint64_t>("seed", get("seed"));
    m.class_names = split(get("classes"), ',');
    m.epoch = parse_number<int>("epochs_trained", get("epochs_trained"));
    m.log_digest = parse_number<std::uint64_t>("log_digest", get("log_digest"), 16);
}

}  // namespace

void save_model(const Mlp& m, std::ostream& out) {
    out.write(kMagic, sizeof kMagic);
    detail::put_u32(out, static_cast<std::uint32_t>(m.layer_count()));
    for (int d : m.config.dims) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        const Matrix& w = m.weights[l];
        for (Eigen::Index i = 0; i < w.size(); ++i) detail::put_f64(out, w.data()[i]);
        for (Eigen::Index i = 0; i < m.biases[l].size(); ++i) detail::put_f64(out, m.biases[l][i]);
    }
    detail::put_string(out, metadata_text(m));
    if (!out) throw DataError("failed to write model");
}

Mlp load_model(std::istream& in) {
    char magic[sizeof kMagic];
    detail::read_exact(in, magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw DataError("not an NPMLP1 model file");

    const std::uint32_t layers = detail::get_u32(in);
    if (layers < 1 || layers > 64) throw DataError("model file: implausible layer count");
    Mlp m;
    m.config.dims.clear();
    for (std::uint32_t i = 0; i <= layers; ++i) {
        const std::uint32_t d = detail::get_u32(in);
        if (d < 1 || d > (1u << 24)) throw DataError("model file: implausible layer width");
        m.config.dims.push_back(static_cast<int>(d));
    }
    for (std::uint32_t l = 0; l < layers; ++l) {
        const int rows = m.config.dims[l + 1];
        const int cols = m.config.dims[l];
        Matrix w(rows, cols);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = detail::get_f64(in);
        Vector b(rows);
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = detail::get_f64(in);
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
        m.weight_velocity.push_back(Matrix::Zero(rows, cols));
        m.bias_velocity.push_back(Vector::Zero(rows));
    }
    apply_metadata(m, detail::get_string(in));
    m.rng = Rng(derive_seed(m.config.seed, "dropout"));
    return m;
}

void save_model_file(const Mlp& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    save_model(m, out);
}

Mlp load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model '" + path + "'");
    return load_model(in);
}

}  // namespace ninepatch::mlp
