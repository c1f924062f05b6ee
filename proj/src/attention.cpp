#include "atp/attention.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "atp/errors.hpp"
#include "atp/kernels.hpp"
#include "atp/ops.hpp"

namespace atp {

const char *to_string(Normalizer n) {
    switch (n) {
    case Normalizer::row_sum: return "row-sum";
    case Normalizer::taylor_denominator: return "taylor-denominator";
    case Normalizer::softmax_on_scores: return "softmax-on-scores";
    }
    return "row-sum";
}

Normalizer normalizer_from_string(const std::string &name) {
    if (name == "row-sum") return Normalizer::row_sum;
    if (name == "taylor-denominator") return Normalizer::taylor_denominator;
    if (name == "softmax-on-scores") return Normalizer::softmax_on_scores;
    throw invalid_input_error("unknown normalizer \"" + name + "\"");
}

void AttentionWeights::validate() const {
    if (wk.rows() != wq.rows() || wk.cols() != wq.cols() || wv.rows() != wq.rows() ||
        wv.cols() != wq.cols())
        throw invalid_input_error("projection weights must share one shape");
    if (heads == 0 || wq.cols() % heads != 0)
        throw invalid_input_error("head count " + std::to_string(heads) +
                                  " does not divide projection width " +
                                  std::to_string(wq.cols()));
}

namespace {

void require(bool ok, const std::string &msg) {
    if (!ok) throw invalid_input_error(msg);
}

std::string shape(const Matrix &m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_epsilon(const AttentionConfig &config) {
    if (!(config.epsilon > 0.0))
        throw invalid_input_error("normalizer epsilon must be positive");
}

// Queries carry the 1/sqrt(width) temperature so every later dot product,
// including the first-order denominator, is scaled consistently.
Matrix scaled_query(const Matrix &q, const AttentionConfig &config) {
    Matrix qs = q;
    if (config.scale)
        kernels::scale(1.0 / std::sqrt(static_cast<double>(q.cols())), qs.data(), qs.size());
    return qs;
}

// Sign-preserving clamp: a denominator inside (-eps, eps) is replaced by eps
// carrying the denominator's sign, so near-cancelling rows stay finite
// without flipping orientation.
double guarded(double denom, double eps) {
    if (std::abs(denom) > eps) return denom;
    return denom < 0.0 ? -eps : eps;
}

// Row normalization shared by the dense first-order kernel and the
// principal-space kernel. key_sum is the column sum of the full-length keys
// (used only by the taylor denominator) and n_keys the full sequence length.
void normalize_scores(Matrix &scores, const Matrix &qs, const double *key_sum,
                      std::size_t n_keys, const AttentionConfig &config) {
    const std::size_t width = scores.cols();
    switch (config.normalizer) {
    case Normalizer::row_sum:
        for (std::size_t i = 0; i < scores.rows(); ++i) {
            double *row = scores.row(i);
            const double sum = std::accumulate(row, row + width, 0.0);
            kernels::scale(1.0 / guarded(sum, config.epsilon), row, width);
        }
        break;
    case Normalizer::taylor_denominator:
        for (std::size_t i = 0; i < scores.rows(); ++i) {
            const double denom = static_cast<double>(n_keys) +
                                 ops::dot(qs.row(i), key_sum, qs.cols());
            kernels::scale(1.0 / guarded(denom, config.epsilon), scores.row(i), width);
        }
        break;
    case Normalizer::softmax_on_scores:
        for (std::size_t i = 0; i < scores.rows(); ++i)
            kernels::softmax_row(scores.row(i), width);
        break;
    }
}

AttentionOutput finish(Matrix &&out, Matrix &&scores, bool keep_scores) {
    AttentionOutput res;
    res.output = std::move(out);
    if (keep_scores) res.scores = std::move(scores);
    return res;
}

} // namespace

ProjectedQkv project_qkv(const LowRankFactors &factors, const AttentionWeights &weights,
                         OpCounter *counter) {
    weights.validate();
    require(factors.Xp.cols() == weights.model_dim(),
            "factor width " + std::to_string(factors.Xp.cols()) +
                " does not match weight rows " + std::to_string(weights.model_dim()));
    ProjectedQkv out;
    Matrix qp = ops::matmul(factors.Xp, weights.wq, counter);
    out.q = ops::matmul(factors.U, qp, counter); // queries back at full length
    out.kp = ops::matmul(factors.Xp, weights.wk, counter);
    out.vp = ops::matmul(factors.Xp, weights.wv, counter);
    return out;
}

AttentionOutput standard_attention(const Matrix &q, const Matrix &k, const Matrix &v,
                                   const AttentionConfig &config, bool keep_scores,
                                   OpCounter *counter) {
    require(q.cols() == k.cols(), "query/key width mismatch: " + shape(q) + " vs " + shape(k));
    require(k.rows() == v.rows(), "key/value length mismatch: " + shape(k) + " vs " + shape(v));
    Matrix qs = scaled_query(q, config);
    if (counter) counter->alloc(q.rows() * k.rows());
    Matrix scores = ops::matmul_nt(qs, k, counter);
    for (std::size_t i = 0; i < scores.rows(); ++i)
        kernels::softmax_row(scores.row(i), scores.cols());
    Matrix out = ops::matmul(scores, v, counter);
    if (counter) counter->release(q.rows() * k.rows());
    return finish(std::move(out), std::move(scores), keep_scores);
}

AttentionOutput taylor_dense_attention(const Matrix &q, const Matrix &k, const Matrix &v,
                                       const AttentionConfig &config, bool keep_scores,
                                       OpCounter *counter) {
    require(q.cols() == k.cols(), "query/key width mismatch: " + shape(q) + " vs " + shape(k));
    require(k.rows() == v.rows(), "key/value length mismatch: " + shape(k) + " vs " + shape(v));
    check_epsilon(config);
    Matrix qs = scaled_query(q, config);
    if (counter) counter->alloc(q.rows() * k.rows());
    Matrix scores = ops::matmul_nt(qs, k, counter);
    for (std::size_t t = 0; t < scores.size(); ++t) scores.data()[t] += 1.0;
    std::vector<double> key_sum(k.cols(), 0.0);
    if (config.normalizer == Normalizer::taylor_denominator)
        kernels::colsum(k.data(), key_sum.data(), k.rows(), k.cols());
    normalize_scores(scores, qs, key_sum.data(), k.rows(), config);
    Matrix out = ops::matmul(scores, v, counter);
    if (counter) counter->release(q.rows() * k.rows());
    return finish(std::move(out), std::move(scores), keep_scores);
}

AttentionOutput lowrank_attention(const Matrix &q, const Matrix &kp, const Matrix &vp,
                                  const Matrix &u, const AttentionConfig &config,
                                  bool keep_scores, OpCounter *counter) {
    require(q.cols() == kp.cols(), "query/key width mismatch: " + shape(q) + " vs " + shape(kp));
    require(kp.rows() == vp.rows(), "key/value rank mismatch: " + shape(kp) + " vs " + shape(vp));
    require(u.cols() == kp.rows(), "basis rank mismatch: " + shape(u) + " vs " + shape(kp));
    require(u.rows() == q.rows(), "basis/query length mismatch: " + shape(u) + " vs " + shape(q));
    check_epsilon(config);
    Matrix qs = scaled_query(q, config);

    // Column sums of U give the broadcast row (1.U), shared by every query.
    std::vector<double> row_u(u.cols(), 0.0);
    kernels::colsum(u.data(), row_u.data(), u.rows(), u.cols());

    if (counter) counter->alloc(q.rows() * kp.rows());
    Matrix scores = ops::matmul_nt(qs, kp, counter);
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        double *row = scores.row(i);
        for (std::size_t c = 0; c < scores.cols(); ++c) row[c] += row_u[c];
    }

    // Under the taylor denominator the full-key column sum is recovered
    // without leaving the principal space: colsum(U*Kp) = (1.U) * Kp.
    std::vector<double> key_sum(kp.cols(), 0.0);
    if (config.normalizer == Normalizer::taylor_denominator)
        kernels::matvec_t(kp.data(), row_u.data(), key_sum.data(), kp.rows(), kp.cols());
    normalize_scores(scores, qs, key_sum.data(), u.rows(), config);

    Matrix out = ops::matmul(scores, vp, counter);
    if (counter) counter->release(q.rows() * kp.rows());
    return finish(std::move(out), std::move(scores), keep_scores);
}

Matrix lowrank_attention_jvp(const Matrix &q, const Matrix &kp, const Matrix &vp,
                             const Matrix &u, const Matrix &dq, const Matrix &dkp,
                             const Matrix &dvp, const AttentionConfig &config) {
    require(dq.rows() == q.rows() && dq.cols() == q.cols(), "query tangent shape mismatch");
    require(dkp.rows() == kp.rows() && dkp.cols() == kp.cols(), "key tangent shape mismatch");
    require(dvp.rows() == vp.rows() && dvp.cols() == vp.cols(), "value tangent shape mismatch");
    check_epsilon(config);
    Matrix qs = scaled_query(q, config);
    Matrix dqs = scaled_query(dq, config);

    std::vector<double> row_u(u.cols(), 0.0);
    kernels::colsum(u.data(), row_u.data(), u.rows(), u.cols());

    // Primal score map and its tangent; the broadcast (1.U) row is constant.
    Matrix a = ops::matmul_nt(qs, kp);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t c = 0; c < a.cols(); ++c) a(i, c) += row_u[c];
    Matrix da = ops::add(ops::matmul_nt(dqs, kp), ops::matmul_nt(qs, dkp));

    Matrix n = a;             // normalized scores
    Matrix dn(std::move(da)); // reused in place as the normalized tangent
    if (config.normalizer == Normalizer::softmax_on_scores) {
        for (std::size_t i = 0; i < n.rows(); ++i) {
            kernels::softmax_row(n.row(i), n.cols());
            const double pull = ops::dot(n.row(i), dn.row(i), n.cols());
            for (std::size_t c = 0; c < n.cols(); ++c)
                dn(i, c) = n(i, c) * (dn(i, c) - pull);
        }
    } else {
        std::vector<double> key_sum(kp.cols(), 0.0);
        std::vector<double> key_sum_dot(kp.cols(), 0.0);
        if (config.normalizer == Normalizer::taylor_denominator) {
            kernels::matvec_t(kp.data(), row_u.data(), key_sum.data(), kp.rows(), kp.cols());
            kernels::matvec_t(dkp.data(), row_u.data(), key_sum_dot.data(), dkp.rows(),
                              dkp.cols());
        }
        const double n_keys = static_cast<double>(u.rows());
        for (std::size_t i = 0; i < n.rows(); ++i) {
            double denom_raw, denom_dot;
            if (config.normalizer == Normalizer::row_sum) {
                denom_raw = std::accumulate(n.row(i), n.row(i) + n.cols(), 0.0);
                denom_dot = std::accumulate(dn.row(i), dn.row(i) + dn.cols(), 0.0);
            } else {
                denom_raw = n_keys + ops::dot(qs.row(i), key_sum.data(), qs.cols());
                denom_dot = ops::dot(dqs.row(i), key_sum.data(), qs.cols()) +
                            ops::dot(qs.row(i), key_sum_dot.data(), qs.cols());
            }
            const double denom = guarded(denom_raw, config.epsilon);
            // Inside the clamp the denominator is locally constant.
            if (denom != denom_raw) denom_dot = 0.0;
            for (std::size_t c = 0; c < n.cols(); ++c) {
                n(i, c) /= denom;
                dn(i, c) = (dn(i, c) - n(i, c) * denom_dot) / denom;
            }
        }
    }
    return ops::add(ops::matmul(dn, vp), ops::matmul(n, dvp));
}

Matrix apply_rope(const Matrix &m, const std::vector<std::int64_t> &positions, double base) {
    if (m.cols() % 2 != 0)
        throw invalid_input_error("rotary pairs need an even width, got " +
                                  std::to_string(m.cols()));
    if (positions.size() != m.rows())
        throw invalid_input_error("positions length " + std::to_string(positions.size()) +
                                  " does not match " + std::to_string(m.rows()) + " rows");
    if (!(base > 0.0)) throw invalid_input_error("rotary base must be positive");
    const std::size_t pairs = m.cols() / 2;
    const double width = static_cast<double>(m.cols());
    Matrix out = Matrix::uninit(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double pos = static_cast<double>(positions[i]);
        for (std::size_t t = 0; t < pairs; ++t) {
            const double theta = pos * std::pow(base, -2.0 * static_cast<double>(t) / width);
            const double c = std::cos(theta);
            const double s = std::sin(theta);
            const double even = m(i, 2 * t);
            const double odd = m(i, 2 * t + 1);
            out(i, 2 * t) = c * even - s * odd;
            out(i, 2 * t + 1) = s * even + c * odd;
        }
    }
    return out;
}

Matrix project_rotated_keys(const Matrix &k_full, const LowRankFactors &factors,
                            OpCounter *counter) {
    if (!factors.orthonormal)
        throw precondition_error(
            "rotated-key projection needs an orthonormal basis; run reorthogonalize first");
    require(k_full.rows() == factors.U.rows(), "key length " + std::to_string(k_full.rows()) +
                                                   " does not match basis length " +
                                                   std::to_string(factors.U.rows()));
    return ops::matmul_tn(factors.U, k_full, counter);
}

namespace {

Matrix column_block(const Matrix &m, std::size_t first, std::size_t width) {
    Matrix out = Matrix::uninit(m.rows(), width);
    for (std::size_t i = 0; i < m.rows(); ++i)
        std::memcpy(out.row(i), m.row(i) + first, width * sizeof(double));
    return out;
}

void paste_columns(Matrix &dst, const Matrix &src, std::size_t first) {
    for (std::size_t i = 0; i < src.rows(); ++i)
        std::memcpy(dst.row(i) + first, src.row(i), src.cols() * sizeof(double));
}

std::vector<std::int64_t> iota_positions(std::size_t n) {
    std::vector<std::int64_t> pos(n);
    std::iota(pos.begin(), pos.end(), std::int64_t{0});
    return pos;
}

void check_rope_width(const AttentionWeights &weights) {
    if (weights.head_dim() % 2 != 0)
        throw invalid_input_error("rotary positions require an even head width, got " +
                                  std::to_string(weights.head_dim()));
}

// Column-split q/k/v into head blocks, run one head at a time on a local
// tally, and merge so the recorded peak is a single head's score map.
template <typename Kernel>
Matrix run_heads(const Matrix &q, std::size_t heads, OpCounter *counter, Kernel &&kernel) {
    const std::size_t hd = q.cols() / heads;
    Matrix out = Matrix::uninit(q.rows(), q.cols());
    for (std::size_t h = 0; h < heads; ++h) {
        OpCounter local;
        paste_columns(out, kernel(h, hd, counter ? &local : nullptr), h * hd);
        if (counter) counter->merge(local);
    }
    return out;
}

} // namespace

Matrix multi_head_attention(const Matrix &x, const AttentionWeights &weights,
                            const AttentionConfig &config, OpCounter *counter,
                            double rope_base) {
    weights.validate();
    require(x.cols() == weights.model_dim(), "input width " + std::to_string(x.cols()) +
                                                 " does not match weight rows " +
                                                 std::to_string(weights.model_dim()));
    Matrix q = ops::matmul(x, weights.wq, counter);
    Matrix k = ops::matmul(x, weights.wk, counter);
    Matrix v = ops::matmul(x, weights.wv, counter);
    if (config.rope) {
        check_rope_width(weights);
        const auto pos = iota_positions(x.rows());
        q = apply_rope(q, pos, rope_base);
        k = apply_rope(k, pos, rope_base);
    }
    return run_heads(q, weights.heads, counter, [&](std::size_t h, std::size_t hd, OpCounter *c) {
        return standard_attention(column_block(q, h * hd, hd), column_block(k, h * hd, hd),
                                  column_block(v, h * hd, hd), config, false, c)
            .output;
    });
}

Matrix multi_head_attention(const LowRankFactors &factors, const AttentionWeights &weights,
                            const AttentionConfig &config, OpCounter *counter,
                            double rope_base) {
    weights.validate();
    ProjectedQkv p = project_qkv(factors, weights, counter);
    if (config.rope) {
        check_rope_width(weights);
        const auto pos = iota_positions(factors.U.rows());
        p.q = apply_rope(p.q, pos, rope_base);
        // Rotation acts on full-length keys, so reconstruct, rotate, and
        // project back onto the shared basis.
        Matrix k_full = apply_rope(ops::matmul(factors.U, p.kp, counter), pos, rope_base);
        p.kp = project_rotated_keys(k_full, factors, counter);
    }
    return run_heads(p.q, weights.heads, counter, [&](std::size_t h, std::size_t hd, OpCounter *c) {
        return lowrank_attention(column_block(p.q, h * hd, hd), column_block(p.kp, h * hd, hd),
                                 column_block(p.vp, h * hd, hd), factors.U, config, false, c)
            .output;
    });
}

} // namespace atp
