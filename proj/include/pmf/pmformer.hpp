#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pmf/checkpoint.hpp"
#include "pmf/rng.hpp"
#include "pmf/tensor.hpp"

namespace pmf {

/// Partial-multivariate transformer configuration. The model sees feature
/// subsets of size subset_size drawn from total_features channels; one
/// network serves every subset through feature-identity embeddings.
struct PmformerConfig {
    std::size_t total_features = 16;  // D
    std::size_t subset_size = 4;      // S, strictly 1 < S < D
    std::size_t window = 48;          // SL
    std::size_t model_dim = 64;
    std::size_t heads = 16;
    std::size_t ff_dim = 128;
    std::size_t layers = 4;
    double dropout = 0.0;             // drop rate, [0, 1)
    std::size_t target_channel = 15;

    std::size_t head_dim() const { return model_dim / heads; }
    void validate() const;
};

/// One encoder block: pre-norm temporal attention, pre-norm feature
/// attention, pre-norm MLP, single outer residual.
struct AttentionParams {
    Tensor ln_gamma, ln_beta;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct BlockParams {
    AttentionParams ta;
    AttentionParams fa;
    Tensor ln_mlp_gamma, ln_mlp_beta;
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

struct PmformerParams {
    PmformerConfig config;
    Tensor ex;      // [1, dim] scalar-to-token projection
    Tensor e_time;  // [SL, dim]
    Tensor e_feat;  // [D, dim], one row per global feature id
    std::vector<BlockParams> blocks;
    Tensor head_w;  // [SL*dim, 1], shared across features
    Tensor head_b;  // [1]

    static PmformerParams init(const PmformerConfig& config, std::uint64_t seed);

    std::vector<Tensor> parameters() const;
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;

    /// Deep copy (used to snapshot the best validation epoch).
    PmformerParams clone() const;
};

/// Train/eval switch. Dropout fires only in training mode with a stream.
struct RunMode {
    bool training = false;
    Rng* rng = nullptr;
};

/// window: [SL, S] scaled values (or [B, SL, S] batched). Token (s, t) =
/// E_x * x_{t,s} + E_time[t] + E_feat[feature_ids[s]].
/// Returns [S, SL, dim] (or [B, S, SL, dim]).
Tensor embed_tokens(const Tensor& window, const std::vector<std::size_t>& feature_ids,
                    const PmformerParams& params);

/// Multi-head self-attention over each feature's time axis, pre-norm, no
/// causal mask. Input/output [*, S, SL, dim]; the residual is added by the
/// enclosing block.
Tensor temporal_attention(const Tensor& tokens, const BlockParams& block,
                          const PmformerConfig& config);

/// Multi-head self-attention across features at each time step, pre-norm.
Tensor feature_attention(const Tensor& tokens, const BlockParams& block,
                         const PmformerConfig& config);

/// H_out = H_in + MLP(FA(TA(H_in))), dropout after each sublayer in
/// training mode.
Tensor encoder_block(const Tensor& h_in, const BlockParams& block, const PmformerConfig& config,
                     const RunMode& mode);

/// Full differentiable pass: embed, L blocks, shared linear head on each
/// feature's flattened tokens. window [B, SL, S] -> predictions [B, S].
Tensor forward_batch(const Tensor& window, const std::vector<std::size_t>& feature_ids,
                     const PmformerParams& params, const RunMode& mode);

/// Inference for one window [SL, S]: one scaled next-step value per subset
/// feature, ordered as feature_ids.
std::vector<double> forward(const Tensor& window, const std::vector<std::size_t>& feature_ids,
                            const PmformerParams& params);

/// Draw a subset of size S containing target_channel: target first, the
/// remaining S-1 members sampled uniformly without replacement.
std::vector<std::size_t> sample_target_subset(std::size_t total_features, std::size_t subset_size,
                                              std::size_t target_channel, Rng& rng);

/// Ensemble inference: mean target prediction over ensemble_size random
/// target-containing subsets. full_window is [SL, D]; deterministic given
/// the rng state.
double predict_target(const PmformerParams& params, const Tensor& full_window,
                      std::size_t target_channel, std::size_t ensemble_size, Rng& rng);

/// Checkpoint I/O. The meta line carries the config plus channel names so
/// checkpoints are self-describing.
Checkpoint to_checkpoint(const PmformerParams& params,
                         const std::vector<std::string>& channel_names);
PmformerParams pmformer_from_checkpoint(const Checkpoint& ckpt);
std::vector<std::string> channel_names_from_checkpoint(const Checkpoint& ckpt);

}  // namespace pmf
