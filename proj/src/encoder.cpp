#include "atp/encoder.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "atp/errors.hpp"
#include "atp/io.hpp"
#include "atp/kernels.hpp"
#include "atp/lowrank.hpp"
#include "atp/ops.hpp"
#include "atp/svd.hpp"

namespace fs = std::filesystem;

namespace atp {

const char *to_string(PositionalEncoding::Mode mode) {
    switch (mode) {
    case PositionalEncoding::Mode::none: return "none";
    case PositionalEncoding::Mode::absolute_sinusoidal: return "absolute-sinusoidal";
    case PositionalEncoding::Mode::rotary: return "rotary";
    }
    return "none";
}

PositionalEncoding::Mode pe_mode_from_string(const std::string &name) {
    if (name == "none") return PositionalEncoding::Mode::none;
    if (name == "absolute-sinusoidal") return PositionalEncoding::Mode::absolute_sinusoidal;
    if (name == "rotary") return PositionalEncoding::Mode::rotary;
    throw invalid_input_error("unknown positional encoding \"" + name + "\"");
}

const char *to_string(ForwardMode mode) {
    return mode == ForwardMode::standard ? "standard" : "lowrank";
}

ForwardMode forward_mode_from_string(const std::string &name) {
    if (name == "standard") return ForwardMode::standard;
    if (name == "lowrank") return ForwardMode::lowrank;
    throw invalid_input_error("unknown mode \"" + name + "\"");
}

void EncoderLayer::validate() const {
    attn_weights.validate();
    const std::size_t d = attn_weights.model_dim();
    const std::size_t dp = attn_weights.proj_dim();
    if (wo.rows() != dp || wo.cols() != d)
        throw invalid_input_error("output projection must be " + std::to_string(dp) + "x" +
                                  std::to_string(d));
    if (ffn_w1.rows() != d || ffn_w2.cols() != d || ffn_w2.rows() != ffn_w1.cols())
        throw invalid_input_error("feedforward shapes do not chain back to width " +
                                  std::to_string(d));
    for (const auto &norm : {norm1, norm2}) {
        if (!norm) continue;
        if (norm->scale.size() != d || norm->offset.size() != d)
            throw invalid_input_error("normalization vectors must have length " +
                                      std::to_string(d));
        if (!(norm->epsilon > 0.0))
            throw invalid_input_error("normalization variance floor must be positive");
    }
}

Matrix make_sinusoidal(std::size_t L, std::size_t d, double base) {
    if (L == 0 || d < 2) throw invalid_input_error("position table needs L >= 1 and d >= 2");
    if (!(base > 0.0)) throw invalid_input_error("position base must be positive");
    Matrix p = Matrix::uninit(L, d);
    for (std::size_t i = 0; i < L; ++i) {
        const double pos = static_cast<double>(i);
        for (std::size_t t = 0; 2 * t < d; ++t) {
            const double freq = std::pow(base, -2.0 * static_cast<double>(t) /
                                                   static_cast<double>(d));
            p(i, 2 * t) = std::sin(pos * freq);
            if (2 * t + 1 < d) p(i, 2 * t + 1) = std::cos(pos * freq);
        }
    }
    return p;
}

namespace {

void apply_layer_norm(Matrix &x, const std::optional<LayerNorm> &norm) {
    if (!norm) return;
    const std::size_t d = x.cols();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double *row = x.row(i);
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + norm->epsilon);
        for (std::size_t j = 0; j < d; ++j)
            row[j] = norm->scale[j] * (row[j] - mean) * inv + norm->offset[j];
    }
}

void gelu_inplace(Matrix &x) {
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double v = x.data()[t];
        x.data()[t] = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
    }
}

} // namespace

// Factorize the (position-adjusted) input at the policy's rank. Components
// whose mass is at the floating-point floor of the deflation are dropped
// before orthogonalization: a policy may resolve past the true rank, and the
// junk directions extracted from an exhausted residual carry no signal.
LowRankFactors decompose_input(const Matrix &x, const RankPolicy &policy,
                               std::size_t inner_iters, std::uint64_t seed,
                               OpCounter *counter) {
    if (ops::frob_norm(x) == 0.0) {
        // A zero sequence has no principal directions; use a trivial exact
        // factorization so the pipeline can carry zeros forward.
        Matrix u(x.rows(), 1);
        u(0, 0) = 1.0;
        LowRankFactors f;
        f.U = std::move(u);
        f.Xp = Matrix(1, x.cols());
        f.r = 1;
        f.orthonormal = true;
        f.method = LowRankFactors::Method::exact_truncated;
        return f;
    }
    std::size_t r;
    if (policy.kind == RankPolicy::Kind::entropy)
        r = select_rank(exact_svd(x).singular_values, policy, x.rows(), x.cols());
    else
        r = select_rank(EntropyReport{}, policy, x.rows(), x.cols());
    LowRankFactors f = alternating_lowrank(x, r, inner_iters, seed, counter);

    std::vector<double> mass(f.r);
    double top = 0.0;
    for (std::size_t c = 0; c < f.r; ++c) {
        double un = 0.0, vn = 0.0;
        for (std::size_t i = 0; i < f.U.rows(); ++i) un += f.U(i, c) * f.U(i, c);
        for (std::size_t j = 0; j < f.Xp.cols(); ++j) vn += f.Xp(c, j) * f.Xp(c, j);
        mass[c] = std::sqrt(un * vn);
        top = std::max(top, mass[c]);
    }
    std::size_t keep = f.r;
    while (keep > 1 && mass[keep - 1] <= 1e-12 * top) --keep;
    if (keep < f.r) {
        LowRankFactors trimmed;
        trimmed.U = Matrix::uninit(f.U.rows(), keep);
        trimmed.Xp = Matrix::uninit(keep, f.Xp.cols());
        for (std::size_t i = 0; i < f.U.rows(); ++i)
            for (std::size_t c = 0; c < keep; ++c) trimmed.U(i, c) = f.U(i, c);
        for (std::size_t c = 0; c < keep; ++c)
            for (std::size_t j = 0; j < f.Xp.cols(); ++j) trimmed.Xp(c, j) = f.Xp(c, j);
        trimmed.r = keep;
        trimmed.method = f.method;
        f = std::move(trimmed);
    }
    return reorthogonalize(f);
}

Matrix encoder_forward(const Matrix &x, const EncoderLayer &layer, const PositionalEncoding &pe,
                       ForwardMode mode, std::uint64_t seed, OpCounter *counter) {
    layer.validate();
    if (x.cols() != layer.model_dim())
        throw invalid_input_error("input width " + std::to_string(x.cols()) +
                                  " does not match layer width " +
                                  std::to_string(layer.model_dim()));

    Matrix x1 = x;
    if (pe.mode == PositionalEncoding::Mode::absolute_sinusoidal)
        x1 = ops::add(x1, make_sinusoidal(x.rows(), x.cols(), pe.base));

    AttentionConfig cfg = layer.config;
    cfg.rope = pe.mode == PositionalEncoding::Mode::rotary;

    Matrix attn;
    if (mode == ForwardMode::lowrank) {
        LowRankFactors f = decompose_input(x1, layer.rank_policy, layer.inner_iters, seed, counter);
        attn = multi_head_attention(f, layer.attn_weights, cfg, counter, pe.base);
    } else {
        attn = multi_head_attention(x1, layer.attn_weights, cfg, counter, pe.base);
    }

    Matrix y1 = ops::add(ops::matmul(attn, layer.wo, counter), x1);
    apply_layer_norm(y1, layer.norm1);

    Matrix h = ops::matmul(y1, layer.ffn_w1, counter);
    gelu_inplace(h);
    Matrix y2 = ops::add(ops::matmul(h, layer.ffn_w2, counter), y1);
    apply_layer_norm(y2, layer.norm2);
    return y2;
}

Matrix stack_forward(const Matrix &x, const std::vector<EncoderLayer> &layers,
                     const PositionalEncoding &pe, ForwardMode mode, std::uint64_t seed,
                     OpCounter *counter) {
    if (layers.empty()) throw invalid_input_error("stack needs at least one layer");
    Matrix y = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        PositionalEncoding layer_pe = pe;
        if (pe.mode == PositionalEncoding::Mode::absolute_sinusoidal && i > 0)
            layer_pe.mode = PositionalEncoding::Mode::none;
        y = encoder_forward(y, layers[i], layer_pe, mode, seed + i, counter);
    }
    return y;
}

namespace {

nlohmann::json policy_to_json(const RankPolicy &policy) {
    switch (policy.kind) {
    case RankPolicy::Kind::fixed:
        return {{"kind", "fixed"}, {"r", policy.fixed_r}};
    case RankPolicy::Kind::fraction:
        return {{"kind", "fraction"}, {"fraction", policy.fraction}};
    case RankPolicy::Kind::entropy:
        return {{"kind", "entropy"}, {"scale", policy.scale}};
    }
    return {{"kind", "fixed"}, {"r", 1}};
}

RankPolicy policy_from_json(const nlohmann::json &j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "fixed") return RankPolicy::Fixed(j.at("r").get<std::size_t>());
    if (kind == "fraction") return RankPolicy::Fraction(j.at("fraction").get<double>());
    if (kind == "entropy") return RankPolicy::Entropy(j.at("scale").get<double>());
    throw invalid_input_error("unknown rank policy kind \"" + kind + "\"");
}

Matrix vector_as_row(const std::vector<double> &v) {
    return Matrix(1, v.size(), v);
}

std::vector<double> row_as_vector(const Matrix &m, const std::string &path) {
    if (m.rows() != 1)
        throw invalid_input_error(path + ": expected a single-row vector, got " +
                                  std::to_string(m.rows()) + " rows");
    return m.values();
}

} // namespace

void save_layer_bundle(const std::string &dir, const EncoderLayer &layer,
                       const PositionalEncoding &pe) {
    layer.validate();
    fs::create_directories(dir);
    const fs::path base(dir);
    io::write_matx((base / "wq.matx").string(), layer.attn_weights.wq);
    io::write_matx((base / "wk.matx").string(), layer.attn_weights.wk);
    io::write_matx((base / "wv.matx").string(), layer.attn_weights.wv);
    io::write_matx((base / "wo.matx").string(), layer.wo);
    io::write_matx((base / "ffn_w1.matx").string(), layer.ffn_w1);
    io::write_matx((base / "ffn_w2.matx").string(), layer.ffn_w2);
    for (const auto &[norm, name] :
         {std::pair{&layer.norm1, "norm1"}, std::pair{&layer.norm2, "norm2"}}) {
        if (!norm->has_value()) continue;
        io::write_matx((base / (std::string(name) + "_scale.matx")).string(),
                   vector_as_row((*norm)->scale));
        io::write_matx((base / (std::string(name) + "_offset.matx")).string(),
                   vector_as_row((*norm)->offset));
    }
    nlohmann::json j{{"heads", layer.attn_weights.heads},
                     {"rank_policy", policy_to_json(layer.rank_policy)},
                     {"pe", to_string(pe.mode)},
                     {"normalizer", to_string(layer.config.normalizer)}};
    std::ofstream out(base / "layer.json");
    if (!out) throw invalid_input_error("cannot write " + (base / "layer.json").string());
    out << j.dump(2) << "\n";
}

std::pair<EncoderLayer, PositionalEncoding> load_layer_bundle(const std::string &dir) {
    const fs::path base(dir);
    auto required = [&](const char *name) {
        const fs::path p = base / name;
        if (!fs::exists(p)) throw invalid_input_error("bundle is missing " + p.string());
        return io::read_matx(p.string());
    };
    EncoderLayer layer;
    layer.attn_weights.wq = required("wq.matx");
    layer.attn_weights.wk = required("wk.matx");
    layer.attn_weights.wv = required("wv.matx");
    layer.wo = required("wo.matx");
    layer.ffn_w1 = required("ffn_w1.matx");
    layer.ffn_w2 = required("ffn_w2.matx");

    for (const auto &[slot, name] :
         {std::pair{&layer.norm1, "norm1"}, std::pair{&layer.norm2, "norm2"}}) {
        const fs::path scale = base / (std::string(name) + "_scale.matx");
        const fs::path offset = base / (std::string(name) + "_offset.matx");
        if (fs::exists(scale) != fs::exists(offset))
            throw invalid_input_error("bundle has an unpaired " + std::string(name) +
                                      " scale/offset file");
        if (!fs::exists(scale)) continue;
        LayerNorm norm;
        norm.scale = row_as_vector(io::read_matx(scale.string()), scale.string());
        norm.offset = row_as_vector(io::read_matx(offset.string()), offset.string());
        *slot = std::move(norm);
    }

    const fs::path meta = base / "layer.json";
    std::ifstream in(meta);
    if (!in) throw invalid_input_error("bundle is missing " + meta.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw invalid_input_error(meta.string() + ": " + e.what());
    }
    PositionalEncoding pe;
    try {
        layer.attn_weights.heads = j.at("heads").get<std::size_t>();
        layer.rank_policy = policy_from_json(j.at("rank_policy"));
        pe.mode = pe_mode_from_string(j.at("pe").get<std::string>());
        layer.config.normalizer = normalizer_from_string(j.at("normalizer").get<std::string>());
    } catch (const nlohmann::json::exception &e) {
        throw invalid_input_error(meta.string() + ": " + e.what());
    }
    layer.validate();
    return {std::move(layer), pe};
}

} // namespace atp
