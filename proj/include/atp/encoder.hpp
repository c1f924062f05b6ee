#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "atp/attention.hpp"
#include "atp/entropy.hpp"
#include "atp/matrix.hpp"
#include "atp/opcount.hpp"

namespace atp {

// Per-row normalization over the feature dimension with learned scale and
// offset. A layer stores these as optional: an absent block is a pass-through
// (layer normalization itself has no neutral parameter setting, since it
// recentres and rescales whatever the vectors say).
struct LayerNorm {
    std::vector<double> scale;  // length d
    std::vector<double> offset; // length d
    double epsilon = 1e-5;      // variance floor
};

struct EncoderLayer {
    AttentionWeights attn_weights;
    Matrix wo;     // d' x d output recombination
    Matrix ffn_w1; // d x d_ff
    Matrix ffn_w2; // d_ff x d
    std::optional<LayerNorm> norm1, norm2;
    RankPolicy rank_policy;
    AttentionConfig config;
    std::size_t inner_iters = 2; // alternating refinement depth

    std::size_t model_dim() const { return attn_weights.model_dim(); }
    // Full mutual shape consistency; throws invalid_input_error.
    void validate() const;
};

struct PositionalEncoding {
    enum class Mode { none, absolute_sinusoidal, rotary };
    Mode mode = Mode::none;
    double base = 10000.0;
};

const char *to_string(PositionalEncoding::Mode mode);
PositionalEncoding::Mode pe_mode_from_string(const std::string &name);

enum class ForwardMode { standard, lowrank };

const char *to_string(ForwardMode mode);
ForwardMode forward_mode_from_string(const std::string &name);

// Sinusoidal position table: P[i][2t] = sin(i * base^(-2t/d)),
// P[i][2t+1] = cos(i * base^(-2t/d)). Requires d >= 2.
Matrix make_sinusoidal(std::size_t L, std::size_t d, double base = 10000.0);

// Policy-ranked alternating factorization with junk-component trimming and a
// final reorthogonalization, as run at the head of every low-rank forward.
// A zero input falls back to a trivial exact factorization.
LowRankFactors decompose_input(const Matrix &x, const RankPolicy &policy,
                               std::size_t inner_iters = 2, std::uint64_t seed = 0,
                               OpCounter *counter = nullptr);

// One encoder layer. The low-rank mode re-factorizes its input (rank from
// the layer's policy, then reorthogonalization), runs multi-head attention in
// the principal space, and finishes with the output projection, residual,
// normalization, feedforward, residual, normalization. Standard mode runs
// the identical pipeline on full-length keys and values with no
// decomposition. pe.mode overrides config.rope; seed feeds the
// decomposition's starting vectors.
Matrix encoder_forward(const Matrix &x, const EncoderLayer &layer,
                       const PositionalEncoding &pe, ForwardMode mode,
                       std::uint64_t seed = 0, OpCounter *counter = nullptr);

// Sequential layers. Absolute-sinusoidal positions are added before layer 1
// only; the rotary path acts inside every layer; each layer re-factorizes
// its own input. Layer i derives its decomposition stream from seed + i.
Matrix stack_forward(const Matrix &x, const std::vector<EncoderLayer> &layers,
                     const PositionalEncoding &pe, ForwardMode mode,
                     std::uint64_t seed = 0, OpCounter *counter = nullptr);

// Directory bundle: wq/wk/wv/wo/ffn_w1/ffn_w2 plus optional
// norm{1,2}_{scale,offset} as .matx files, and layer.json holding heads,
// rank_policy, pe, and normalizer. Norm files must come in scale/offset
// pairs; a missing pair disables that block.
void save_layer_bundle(const std::string &dir, const EncoderLayer &layer,
                       const PositionalEncoding &pe);
std::pair<EncoderLayer, PositionalEncoding> load_layer_bundle(const std::string &dir);

} // namespace atp
