#include "pmf/pmformer.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

namespace pmf {

namespace {

using nlohmann::json;

Tensor maybe_dropout(const Tensor& t, const PmformerConfig& config, const RunMode& mode) {
    if (!mode.training || config.dropout == 0.0) return t;
    if (mode.rng == nullptr) throw ConfigError("training mode requires a random stream for dropout");
    return dropout(t, 1.0 - config.dropout, *mode.rng);
}

/// Pre-norm multi-head self-attention over the second-to-last axis of
/// [..., L, dim] tokens.
Tensor attention_over_last_sequence(const Tensor& tokens, const AttentionParams& p,
                                    const PmformerConfig& config) {
    const Shape& s = tokens.shape();
    const std::size_t rank = s.size();
    if (rank < 3 || s[rank - 1] != config.model_dim) {
        std::ostringstream os;
        os << "attention: expected [..., len, " << config.model_dim << "], got " << shape_str(s);
        throw ShapeError(os.str());
    }
    const std::size_t len = s[rank - 2];
    const std::size_t dh = config.head_dim();
    const std::size_t h = config.heads;

    const Tensor x = layer_norm(tokens, p.ln_gamma, p.ln_beta);
    const Tensor q = matmul(x, p.wq) + p.bq;
    const Tensor k = matmul(x, p.wk) + p.bk;
    const Tensor v = matmul(x, p.wv) + p.bv;

    // [..., len, dim] -> [..., H, len, dh]
    Shape split = s;
    split.back() = h;
    split.push_back(dh);
    std::vector<std::size_t> to_heads(rank + 1);
    for (std::size_t i = 0; i + 3 < rank + 1; ++i) to_heads[i] = i;
    to_heads[rank - 2] = rank - 1;  // H
    to_heads[rank - 1] = rank - 2;  // len
    to_heads[rank] = rank;          // dh
    const Tensor qh = transpose(reshape(q, split), to_heads);
    const Tensor kh = transpose(reshape(k, split), to_heads);
    const Tensor vh = transpose(reshape(v, split), to_heads);

    const Tensor scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
    const Tensor attn = softmax(scores);
    const Tensor ctx = matmul(attn, vh);  // [..., H, len, dh]

    Shape merged = s;  // [..., len, dim]
    const Tensor back = transpose(ctx, to_heads);  // swap is its own inverse on those axes
    return matmul(reshape(back, merged), p.wo) + p.bo;
}

AttentionParams init_attention(std::size_t dim, Rng& rng) {
    const double w_std = 1.0 / std::sqrt(static_cast<double>(dim));
    AttentionParams p;
    p.ln_gamma = Tensor::full({dim}, 1.0, true);
    p.ln_beta = Tensor::zeros({dim}, true);
    p.wq = Tensor::randn({dim, dim}, rng, w_std);
    p.bq = Tensor::zeros({dim}, true);
    p.wk = Tensor::randn({dim, dim}, rng, w_std);
    p.bk = Tensor::zeros({dim}, true);
    p.wv = Tensor::randn({dim, dim}, rng, w_std);
    p.bv = Tensor::zeros({dim}, true);
    p.wo = Tensor::randn({dim, dim}, rng, 0.5 * w_std);
    p.bo = Tensor::zeros({dim}, true);
    return p;
}

void collect_attention(const std::string& prefix, const AttentionParams& p,
                       std::vector<std::pair<std::string, Tensor>>& out) {
    out.emplace_back(prefix + ".ln.gamma", p.ln_gamma);
    out.emplace_back(prefix + ".ln.beta", p.ln_beta);
    out.emplace_back(prefix + ".wq", p.wq);
    out.emplace_back(prefix + ".bq", p.bq);
    out.emplace_back(prefix + ".wk", p.wk);
    out.emplace_back(prefix + ".bk", p.bk);
    out.emplace_back(prefix + ".wv", p.wv);
    out.emplace_back(prefix + ".bv", p.bv);
    out.emplace_back(prefix + ".wo", p.wo);
    out.emplace_back(prefix + ".bo", p.bo);
}

AttentionParams attention_from_checkpoint(const Checkpoint& ckpt, const std::string& prefix) {
    AttentionParams p;
    auto grab = [&](const std::string& leaf) {
        Tensor t = ckpt.get(prefix + "." + leaf).clone();
        return Tensor::from_values(t.shape(), t.values(), true);
    };
    p.ln_gamma = grab("ln.gamma");
    p.ln_beta = grab("ln.beta");
    p.wq = grab("wq");
    p.bq = grab("bq");
    p.wk = grab("wk");
    p.bk = grab("bk");
    p.wv = grab("wv");
    p.bv = grab("bv");
    p.wo = grab("wo");
    p.bo = grab("bo");
    return p;
}

}  // namespace

void PmformerConfig::validate() const {
    if (!(subset_size > 1 && subset_size < total_features)) {
        std::ostringstream os;
        os << "subset size must satisfy 1 < S < D, got S=" << subset_size
           << " D=" << total_features;
        throw ConfigError(os.str());
    }
    if (model_dim == 0 || heads == 0 || model_dim % heads != 0) {
        std::ostringstream os;
        os << "model dim (" << model_dim << ") must be divisible by heads (" << heads << ")";
        throw ConfigError(os.str());
    }
    if (window == 0) throw ConfigError("window length must be at least 1");
    if (layers == 0) throw ConfigError("need at least one encoder layer");
    if (ff_dim == 0) throw ConfigError("ff dim must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
    if (target_channel >= total_features) throw ConfigError("target channel out of range");
}

PmformerParams PmformerParams::init(const PmformerConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    PmformerParams p;
    p.config = config;
    const std::size_t dim = config.model_dim;
    p.ex = Tensor::randn({1, dim}, rng, 1.0);
    p.e_time = Tensor::randn({config.window, dim}, rng, 0.02);
    p.e_feat = Tensor::randn({config.total_features, dim}, rng, 0.02);
    p.blocks.resize(config.layers);
    for (auto& b : p.blocks) {
        b.ta = init_attention(dim, rng);
        b.fa = init_attention(dim, rng);
        b.ln_mlp_gamma = Tensor::full({dim}, 1.0, true);
        b.ln_mlp_beta = Tensor::zeros({dim}, true);
        const double s1 = std::sqrt(2.0 / static_cast<double>(dim + config.ff_dim));
        b.mlp_w1 = Tensor::randn({dim, config.ff_dim}, rng, s1);
        b.mlp_b1 = Tensor::zeros({config.ff_dim}, true);
        b.mlp_w2 = Tensor::randn({config.ff_dim, dim}, rng, 0.5 * s1);
        b.mlp_b2 = Tensor::zeros({dim}, true);
    }
    const std::size_t flat = config.window * dim;
    p.head_w = Tensor::randn({flat, 1}, rng, 1.0 / std::sqrt(static_cast<double>(flat)));
    p.head_b = Tensor::zeros({1}, true);
    return p;
}

std::vector<std::pair<std::string, Tensor>> PmformerParams::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("ex", ex);
    out.emplace_back("e_time", e_time);
    out.emplace_back("e_feat", e_feat);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string prefix = "blocks." + std::to_string(i);
        collect_attention(prefix + ".ta", blocks[i].ta, out);
        collect_attention(prefix + ".fa", blocks[i].fa, out);
        out.emplace_back(prefix + ".mlp.ln.gamma", blocks[i].ln_mlp_gamma);
        out.emplace_back(prefix + ".mlp.ln.beta", blocks[i].ln_mlp_beta);
        out.emplace_back(prefix + ".mlp.w1", blocks[i].mlp_w1);
        out.emplace_back(prefix + ".mlp.b1", blocks[i].mlp_b1);
        out.emplace_back(prefix + ".mlp.w2", blocks[i].mlp_w2);
        out.emplace_back(prefix + ".mlp.b2", blocks[i].mlp_b2);
    }
    out.emplace_back("head.w", head_w);
    out.emplace_back("head.b", head_b);
    return out;
}

std::vector<Tensor> PmformerParams::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

PmformerParams PmformerParams::clone() const {
    Checkpoint ckpt;
    for (const auto& [name, t] : named_parameters()) ckpt.add(name, t.clone());
    PmformerParams copy = *this;  // copies config and handles
    auto grab = [&](const std::string& name) {
        const Tensor& t = ckpt.get(name);
        return Tensor::from_values(t.shape(), t.values(), true);
    };
    copy.ex = grab("ex");
    copy.e_time = grab("e_time");
    copy.e_feat = grab("e_feat");
    for (std::size_t i = 0; i < copy.blocks.size(); ++i) {
        const std::string prefix = "blocks." + std::to_string(i);
        copy.blocks[i].ta = attention_from_checkpoint(ckpt, prefix + ".ta");
        copy.blocks[i].fa = attention_from_checkpoint(ckpt, prefix + ".fa");
        copy.blocks[i].ln_mlp_gamma = grab(prefix + ".mlp.ln.gamma");
        copy.blocks[i].ln_mlp_beta = grab(prefix + ".mlp.ln.beta");
        copy.blocks[i].mlp_w1 = grab(prefix + ".mlp.w1");
        copy.blocks[i].mlp_b1 = grab(prefix + ".mlp.b1");
        copy.blocks[i].mlp_w2 = grab(prefix + ".mlp.w2");
        copy.blocks[i].mlp_b2 = grab(prefix + ".mlp.b2");
    }
    copy.head_w = grab("head.w");
    copy.head_b = grab("head.b");
    return copy;
}

Tensor embed_tokens(const Tensor& window, const std::vector<std::size_t>& feature_ids,
                    const PmformerParams& params) {
    const PmformerConfig& cfg = params.config;
    const std::size_t s_count = feature_ids.size();
    if (s_count == 0) throw ConfigError("empty feature subset");
    std::set<std::size_t> unique(feature_ids.begin(), feature_ids.end());
    if (unique.size() != s_count) throw ConfigError("duplicate feature id in subset");
    for (std::size_t id : feature_ids)
        if (id >= cfg.total_features) {
            std::ostringstream os;
            os << "feature id " << id << " out of range (D=" << cfg.total_features << ")";
            throw ConfigError(os.str());
        }

    const bool batched = window.ndim() == 3;
    if (!batched && window.ndim() != 2)
        throw ShapeError("embed_tokens: window must be [SL, S] or [B, SL, S], got " +
                         shape_str(window.shape()));
    const Shape& ws = window.shape();
    const std::size_t sl = ws[batched ? 1 : 0];
    const std::size_t sdim = ws[batched ? 2 : 1];
    if (sl != cfg.window || sdim != s_count) {
        std::ostringstream os;
        os << "embed_tokens: window " << shape_str(ws) << " does not match SL=" << cfg.window
           << ", S=" << s_count;
        throw ShapeError(os.str());
    }

    const std::size_t batch = batched ? ws[0] : 1;
    Tensor w3 = batched ? window : reshape(window, {1, sl, s_count});
    // [B, SL, S] -> [B, S, SL, 1]
    Tensor x = reshape(transpose(w3, {0, 2, 1}), {batch, s_count, sl, 1});
    Tensor tokens = matmul(x, params.ex);                             // [B, S, SL, dim]
    tokens = tokens + params.e_time;                                  // [SL, dim] broadcast
    Tensor feat = reshape(rows(params.e_feat, feature_ids),
                          {s_count, 1, cfg.model_dim});               // [S, 1, dim] broadcast
    tokens = tokens + feat;
    return batched ? tokens : reshape(tokens, {s_count, sl, cfg.model_dim});
}

Tensor temporal_attention(const Tensor& tokens, const BlockParams& block,
                          const PmformerConfig& config) {
    // sequence axis = SL: [..., S, SL, dim] already has SL second-to-last
    return attention_over_last_sequence(tokens, block.ta, config);
}

Tensor feature_attention(const Tensor& tokens, const BlockParams& block,
                         const PmformerConfig& config) {
    const std::size_t rank = tokens.ndim();
    if (rank < 3) throw ShapeError("feature_attention: need [..., S, SL, dim], got " +
                                   shape_str(tokens.shape()));
    std::vector<std::size_t> swap_axes(rank);
    for (std::size_t i = 0; i < rank; ++i) swap_axes[i] = i;
    std::swap(swap_axes[rank - 3], swap_axes[rank - 2]);  // [..., SL, S, dim]
    const Tensor flipped = transpose(tokens, swap_axes);
    const Tensor attended = attention_over_last_sequence(flipped, block.fa, config);
    return transpose(attended, swap_axes);
}

Tensor encoder_block(const Tensor& h_in, const BlockParams& block, const PmformerConfig& config,
                     const RunMode& mode) {
    Tensor t = maybe_dropout(temporal_attention(h_in, block, config), config, mode);
    t = maybe_dropout(feature_attention(t, block, config), config, mode);
    Tensor m = layer_norm(t, block.ln_mlp_gamma, block.ln_mlp_beta);
    m = gelu(matmul(m, block.mlp_w1) + block.mlp_b1);
    m = matmul(m, block.mlp_w2) + block.mlp_b2;
    m = maybe_dropout(m, config, mode);
    return h_in + m;
}

Tensor forward_batch(const Tensor& window, const std::vector<std::size_t>& feature_ids,
                     const PmformerParams& params, const RunMode& mode) {
    const PmformerConfig& cfg = params.config;
    Tensor h = embed_tokens(window.ndim() == 2 ? reshape(window, {1, cfg.window, feature_ids.size()})
                                               : window,
                            feature_ids, params);
    for (const auto& block : params.blocks) h = encoder_block(h, block, cfg, mode);
    const Shape& s = h.shape();  // [B, S, SL, dim]
    const std::size_t batch = s[0], s_count = s[1];
    Tensor flat = reshape(h, {batch, s_count, cfg.window * cfg.model_dim});
    Tensor y = matmul(flat, params.head_w) + params.head_b;  // [B, S, 1]
    return reshape(y, {batch, s_count});
}

std::vector<double> forward(const Tensor& window, const std::vector<std::size_t>& feature_ids,
                            const PmformerParams& params) {
    if (window.ndim() != 2)
        throw ShapeError("forward: window must be [SL, S], got " + shape_str(window.shape()));
    const Tensor w = window.requires_grad() ? window.detach() : window;
    const Tensor y = forward_batch(w, feature_ids, params, RunMode{});
    return y.values();
}

std::vector<std::size_t> sample_target_subset(std::size_t total_features, std::size_t subset_size,
                                              std::size_t target_channel, Rng& rng) {
    if (subset_size > total_features) throw ConfigError("subset size exceeds feature count");
    if (subset_size == 0) throw ConfigError("subset size must be positive");
    if (target_channel >= total_features) throw ConfigError("target channel out of range");
    std::vector<std::size_t> pool;
    pool.reserve(total_features - 1);
    for (std::size_t i = 0; i < total_features; ++i)
        if (i != target_channel) pool.push_back(i);
    std::vector<std::size_t> subset{target_channel};
    for (std::size_t i = 0; i + 1 < subset_size; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(pool.size() - i));
        std::swap(pool[i], pool[j]);
        subset.push_back(pool[i]);
    }
    return subset;
}

double predict_target(const PmformerParams& params, const Tensor& full_window,
                      std::size_t target_channel, std::size_t ensemble_size, Rng& rng) {
    const PmformerConfig& cfg = params.config;
    if (ensemble_size == 0) throw ConfigError("ensemble size must be at least 1");
    if (full_window.ndim() != 2 || full_window.shape()[0] != cfg.window ||
        full_window.shape()[1] != cfg.total_features) {
        std::ostringstream os;
        os << "predict_target: window must be [" << cfg.window << ", " << cfg.total_features
           << "], got " << shape_str(full_window.shape());
        throw ShapeError(os.str());
    }
    if (target_channel >= cfg.total_features) throw ConfigError("target channel out of range");

    const std::size_t sl = cfg.window;
    const std::size_t d = cfg.total_features;
    const auto& vals = full_window.values();
    double acc = 0.0;
    for (std::size_t k = 0; k < ensemble_size; ++k) {
        const auto subset = sample_target_subset(d, cfg.subset_size, target_channel, rng);
        std::vector<double> cols(sl * subset.size());
        for (std::size_t t = 0; t < sl; ++t)
            for (std::size_t si = 0; si < subset.size(); ++si)
                cols[t * subset.size() + si] = vals[t * d + subset[si]];
        const Tensor sub_window = Tensor::from_values({sl, subset.size()}, std::move(cols));
        acc += forward(sub_window, subset, params)[0];  // target sits at position 0
    }
    return acc / static_cast<double>(ensemble_size);
}

Checkpoint to_checkpoint(const PmformerParams& params,
                         const std::vector<std::string>& channel_names) {
    json meta;
    meta["model"] = "pmformer";
    meta["total_features"] = params.config.total_features;
    meta["subset_size"] = params.config.subset_size;
    meta["window"] = params.config.window;
    meta["model_dim"] = params.config.model_dim;
    meta["heads"] = params.config.heads;
    meta["ff_dim"] = params.config.ff_dim;
    meta["layers"] = params.config.layers;
    meta["dropout"] = params.config.dropout;
    meta["target_channel"] = params.config.target_channel;
    meta["channel_names"] = channel_names;
    Checkpoint ckpt;
    ckpt.meta = meta.dump();
    for (const auto& [name, t] : params.named_parameters()) ckpt.add(name, t);
    return ckpt;
}

PmformerParams pmformer_from_checkpoint(const Checkpoint& ckpt) {
    json meta;
    try {
        meta = json::parse(ckpt.meta);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad checkpoint meta: ") + e.what());
    }
    if (meta.value("model", "") != "pmformer")
        throw ParseError("checkpoint does not hold a pmformer model");
    PmformerConfig cfg;
    cfg.total_features = meta.at("total_features").get<std::size_t>();
    cfg.subset_size = meta.at("subset_size").get<std::size_t>();
    cfg.window = meta.at("window").get<std::size_t>();
    cfg.model_dim = meta.at("model_dim").get<std::size_t>();
    cfg.heads = meta.at("heads").get<std::size_t>();
    cfg.ff_dim = meta.at("ff_dim").get<std::size_t>();
    cfg.layers = meta.at("layers").get<std::size_t>();
    cfg.dropout = meta.at("dropout").get<double>();
    cfg.target_channel = meta.at("target_channel").get<std::size_t>();
    cfg.validate();

    PmformerParams p;
    p.config = cfg;
    auto grab = [&](const std::string& name) {
        const Tensor& t = ckpt.get(name);
        return Tensor::from_values(t.shape(), t.values(), true);
    };
    p.ex = grab("ex");
    p.e_time = grab("e_time");
    p.e_feat = grab("e_feat");
    p.blocks.resize(cfg.layers);
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        const std::string prefix = "blocks." + std::to_string(i);
        p.blocks[i].ta = attention_from_checkpoint(ckpt, prefix + ".ta");
        p.blocks[i].fa = attention_from_checkpoint(ckpt, prefix + ".fa");
        p.blocks[i].ln_mlp_gamma = grab(prefix + ".mlp.ln.gamma");
        p.blocks[i].ln_mlp_beta = grab(prefix + ".mlp.ln.beta");
        p.blocks[i].mlp_w1 = grab(prefix + ".mlp.w1");
        p.blocks[i].mlp_b1 = grab(prefix + ".mlp.b1");
        p.blocks[i].mlp_w2 = grab(prefix + ".mlp.w2");
        p.blocks[i].mlp_b2 = grab(prefix + ".mlp.b2");
    }
    p.head_w = grab("head.w");
    p.head_b = grab("head.b");
    return p;
}

std::vector<std::string> channel_names_from_checkpoint(const Checkpoint& ckpt) {
    try {
        const json meta = json::parse(ckpt.meta);
        if (meta.contains("channel_names"))
            return meta.at("channel_names").get<std::vector<std::string>>();
    } catch (const json::exception&) {
    }
    return {};
}

}  // namespace pmf
