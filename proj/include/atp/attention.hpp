#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "atp/lowrank.hpp"
#include "atp/matrix.hpp"
#include "atp/opcount.hpp"

namespace atp {

// Row normalization applied to the first-order score map. row_sum divides by
// the row total behind a sign-preserving epsilon guard; taylor_denominator
// divides by L + scale * q . (sum of keys), the first-order expansion of the
// softmax partition; softmax_on_scores applies a softmax to the score row.
enum class Normalizer { row_sum, taylor_denominator, softmax_on_scores };

const char *to_string(Normalizer n);
Normalizer normalizer_from_string(const std::string &name);

struct AttentionWeights {
    Matrix wq, wk, wv; // each d x d'
    std::size_t heads = 1;

    std::size_t model_dim() const { return wq.rows(); }
    std::size_t proj_dim() const { return wq.cols(); }
    std::size_t head_dim() const { return proj_dim() / heads; }

    // Shapes equal, heads >= 1 and dividing d'.
    void validate() const;
};

struct AttentionConfig {
    bool scale = true; // 1/sqrt(head_dim) on query-key products
    Normalizer normalizer = Normalizer::row_sum;
    double epsilon = 1e-6;
    bool rope = false;
};

struct AttentionOutput {
    Matrix output;                // L x d'
    std::optional<Matrix> scores; // post-normalization; L x L or L x r
};

struct ProjectedQkv {
    Matrix q;  // L x d', reconstructed to full length as U * (Xp * wq)
    Matrix kp; // r x d'
    Matrix vp; // r x d'
};

// Principal-space projections: Kp = Xp*wk, Vp = Xp*wv, Q = U*(Xp*wq).
ProjectedQkv project_qkv(const LowRankFactors &factors, const AttentionWeights &weights,
                         OpCounter *counter = nullptr);

// Softmax attention rows over full-length keys.
AttentionOutput standard_attention(const Matrix &q, const Matrix &k, const Matrix &v,
                                   const AttentionConfig &config, bool keep_scores = false,
                                   OpCounter *counter = nullptr);

// Full-length first-order kernel: scores 1 + q.k (scaled), then the
// configured row normalization. Serves as the dense oracle for the low-rank
// kernel.
AttentionOutput taylor_dense_attention(const Matrix &q, const Matrix &k, const Matrix &v,
                                       const AttentionConfig &config, bool keep_scores = false,
                                       OpCounter *counter = nullptr);

// Principal-key kernel: scores (1.U) + q.Kp (scaled), an L x r map.
AttentionOutput lowrank_attention(const Matrix &q, const Matrix &kp, const Matrix &vp,
                                  const Matrix &u, const AttentionConfig &config,
                                  bool keep_scores = false, OpCounter *counter = nullptr);

// Directional derivative of lowrank_attention's output along the tangent
// (dq, dkp, dvp), holding U fixed. Rows whose normalizer is clamped by the
// epsilon guard treat the denominator as constant.
Matrix lowrank_attention_jvp(const Matrix &q, const Matrix &kp, const Matrix &vp,
                             const Matrix &u, const Matrix &dq, const Matrix &dkp,
                             const Matrix &dvp, const AttentionConfig &config);

// Column-split into heads, per-head kernel with scale 1/sqrt(head_dim),
// column-wise concatenation. The low-rank form shares one U across heads.
// rope_base feeds the rotary path when config.rope is set (positions 0..L-1).
Matrix multi_head_attention(const Matrix &x, const AttentionWeights &weights,
                            const AttentionConfig &config, OpCounter *counter = nullptr,
                            double rope_base = 10000.0);
Matrix multi_head_attention(const LowRankFactors &factors, const AttentionWeights &weights,
                            const AttentionConfig &config, OpCounter *counter = nullptr,
                            double rope_base = 10000.0);

// Pairwise rotation of each row: coordinate pair (2t, 2t+1) of row i turns by
// positions[i] * base^(-2t/d').
Matrix apply_rope(const Matrix &m, const std::vector<std::int64_t> &positions,
                  double base = 10000.0);

// U^T * k_full: back-projection of rotated full-length keys into the
// principal space. Requires orthonormal factors.
Matrix project_rotated_keys(const Matrix &k_full, const LowRankFactors &factors,
                            OpCounter *counter = nullptr);

} // namespace atp
