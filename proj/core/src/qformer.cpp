#include "alm/qformer.hpp"

#include <cmath>
#include <cstring>

#include "alm/errors.hpp"

namespace alm {

void QFormerConfig::validate() const {
    if (window_size < 1) throw ConfigError("qformer: window_size must be >= 1");
    if (num_queries < 1) throw ConfigError("qformer: num_queries must be >= 1");
    if (num_blocks < 1) throw ConfigError("qformer: num_blocks must be >= 1");
    if (model_dim < 1 || output_dim < 1 || input_dim < 1)
        throw ConfigError("qformer: dims must be positive");
    if (model_dim % num_heads != 0)
        throw ConfigError("qformer: model_dim " + std::to_string(model_dim) +
                          " not divisible by num_heads " + std::to_string(num_heads));
}

namespace {
Parameter normal_param(const std::string& name, std::vector<std::int64_t> shape, Rng& rng,
                       double std_dev = 0.02) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.normal(0.0, std_dev);
    return Parameter(name, std::move(t));
}

Parameter const_param(const std::string& name, std::vector<std::int64_t> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return Parameter(name, std::move(t));
}
}  // namespace

void QFormerParams::init(const QFormerConfig& config, std::uint64_t seed) {
    config.validate();
    cfg = config;
    Rng rng = Rng::stream(seed, "qformer_init");
    const std::int64_t dm = cfg.model_dim, din = cfg.input_dim, ff = 4 * cfg.model_dim;
    queries = normal_param("qformer.queries", {cfg.num_queries, dm}, rng);
    blocks.clear();
    for (int b = 0; b < cfg.num_blocks; ++b) {
        const std::string p = "qformer.block" + std::to_string(b) + ".";
        QFormerBlock blk;
        blk.sa_wq = normal_param(p + "sa_wq", {dm, dm}, rng);
        blk.sa_wk = normal_param(p + "sa_wk", {dm, dm}, rng);
        blk.sa_wv = normal_param(p + "sa_wv", {dm, dm}, rng);
        blk.sa_wo = normal_param(p + "sa_wo", {dm, dm}, rng);
        blk.ln1_g = const_param(p + "ln1_g", {1, dm}, 1.0);
        blk.ln1_b = const_param(p + "ln1_b", {1, dm}, 0.0);
        blk.ca_wq = normal_param(p + "ca_wq", {dm, dm}, rng);
        blk.ca_wk = normal_param(p + "ca_wk", {dm, din}, rng);
        blk.ca_wv = normal_param(p + "ca_wv", {dm, din}, rng);
        blk.ca_wo = normal_param(p + "ca_wo", {dm, dm}, rng);
        blk.ln2_g = const_param(p + "ln2_g", {1, dm}, 1.0);
        blk.ln2_b = const_param(p + "ln2_b", {1, dm}, 0.0);
        blk.ff_w1 = normal_param(p + "ff_w1", {ff, dm}, rng);
        blk.ff_b1 = const_param(p + "ff_b1", {1, ff}, 0.0);
        blk.ff_w2 = normal_param(p + "ff_w2", {dm, ff}, rng);
        blk.ff_b2 = const_param(p + "ff_b2", {1, dm}, 0.0);
        blk.ln3_g = const_param(p + "ln3_g", {1, dm}, 1.0);
        blk.ln3_b = const_param(p + "ln3_b", {1, dm}, 0.0);
        blocks.push_back(std::move(blk));
    }
    out_w = normal_param("qformer.out_w", {cfg.output_dim, dm}, rng);
    out_b = const_param("qformer.out_b", {1, cfg.output_dim}, 0.0);
    win_pos = normal_param("qformer.win_pos", {cfg.window_size, din}, rng);
    win_pos.trainable = cfg.window_pos_embed;
}

std::vector<Parameter*> QFormerParams::parameters() {
    std::vector<Parameter*> out = {&queries};
    for (QFormerBlock& b : blocks) {
        for (Parameter* p : {&b.sa_wq, &b.sa_wk, &b.sa_wv, &b.sa_wo, &b.ln1_g, &b.ln1_b,
                             &b.ca_wq, &b.ca_wk, &b.ca_wv, &b.ca_wo, &b.ln2_g, &b.ln2_b,
                             &b.ff_w1, &b.ff_b1, &b.ff_w2, &b.ff_b2, &b.ln3_g, &b.ln3_b})
            out.push_back(p);
    }
    out.push_back(&out_w);
    out.push_back(&out_b);
    if (cfg.window_pos_embed) out.push_back(&win_pos);
    return out;
}

std::int64_t QFormerParams::num_params() const {
    std::int64_t n = 0;
    auto* self = const_cast<QFormerParams*>(this);
    for (Parameter* p : self->parameters()) n += p->value.numel();
    return n;
}

std::vector<Window> segment(const FeatureSequence& z, std::int64_t window_size) {
    const std::int64_t T = z.num_frames();
    const std::int64_t d = z.dim();
    if (T < 1) throw DataError("segment: empty feature sequence");
    if (window_size < 1) throw DataError("segment: window size must be >= 1");
    const std::int64_t num = (T + window_size - 1) / window_size;
    std::vector<Window> out;
    out.reserve(static_cast<std::size_t>(num));
    for (std::int64_t w = 0; w < num; ++w) {
        Window win;
        win.start = w * window_size;
        win.length = std::min(window_size, T - win.start);
        win.pad_count = window_size - win.length;
        win.frames = Tensor({window_size, d});
        std::memcpy(win.frames.data.data(), z.frames.data.data() + win.start * d,
                    static_cast<std::size_t>(win.length * d) * sizeof(double));
        out.push_back(std::move(win));
    }
    return out;
}

namespace {

// Multi-head attention: rows of q_in attend to rows of kv. wk/wv map the kv
// feature dim into model_dim. An optional additive mask lands on the scores.
Var mha(Graph& g, Var q_in, Var kv, Parameter& wq, Parameter& wk, Parameter& wv,
        Parameter& wo, int heads, const Tensor* mask) {
    Var q = g.matmul_nt(q_in, g.leaf(wq));
    Var k = g.matmul_nt(kv, g.leaf(wk));
    Var v = g.matmul_nt(kv, g.leaf(wv));
    const std::int64_t dm = q.val().cols();
    const std::int64_t hd = dm / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<Var> ctx;
    ctx.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Var qh = g.slice_cols(q, h * hd, hd);
        Var kh = g.slice_cols(k, h * hd, hd);
        Var vh = g.slice_cols(v, h * hd, hd);
        Var scores = g.scale(g.matmul_nt(qh, kh), inv_sqrt);
        if (mask) scores = g.add_const(scores, *mask);
        Var w = g.softmax_rows(scores);
        ctx.push_back(g.matmul(w, vh));
    }
    return g.matmul_nt(g.concat_cols(ctx), g.leaf(wo));
}

Var ffn(Graph& g, Var x, Parameter& w1, Parameter& b1, Parameter& w2, Parameter& b2) {
    Var h = g.gelu(g.add_rowvec(g.matmul_nt(x, g.leaf(w1)), g.leaf(b1)));
    return g.add_rowvec(g.matmul_nt(h, g.leaf(w2)), g.leaf(b2));
}

// Post-LN block: queries self-attend, cross-attend to the window, then FFN,
// with residual + layer norm around each sublayer.
Var qformer_block(Graph& g, Var queries, Var window, QFormerBlock& blk,
                  const QFormerConfig& cfg, const Tensor* cross_mask) {
    Var x = queries;
    x = g.layer_norm(g.add(x, mha(g, x, x, blk.sa_wq, blk.sa_wk, blk.sa_wv, blk.sa_wo,
                                  cfg.num_heads, nullptr)),
                     g.leaf(blk.ln1_g), g.leaf(blk.ln1_b));
    x = g.layer_norm(g.add(x, mha(g, x, window, blk.ca_wq, blk.ca_wk, blk.ca_wv, blk.ca_wo,
                                  cfg.num_heads, cross_mask)),
                     g.leaf(blk.ln2_g), g.leaf(blk.ln2_b));
    x = g.layer_norm(g.add(x, ffn(g, x, blk.ff_w1, blk.ff_b1, blk.ff_w2, blk.ff_b2)),
                     g.leaf(blk.ln3_g), g.leaf(blk.ln3_b));
    return x;
}

}  // namespace

Var qformer_forward(Graph& g, const FeatureSequence& z, QFormerParams& p) {
    p.cfg.validate();
    const auto windows = segment(z, p.cfg.window_size);
    std::vector<Var> window_tokens;
    window_tokens.reserve(windows.size());
    for (const Window& win : windows) {
        Var wvar = g.constant(win.frames);
        if (p.cfg.window_pos_embed) wvar = g.add(wvar, g.leaf(p.win_pos));
        Tensor mask;
        const Tensor* mask_ptr = nullptr;
        if (p.cfg.mask_padding && win.pad_count > 0) {
            mask = Tensor({p.cfg.num_queries, p.cfg.window_size});
            for (std::int64_t qi = 0; qi < p.cfg.num_queries; ++qi)
                for (std::int64_t t = win.length; t < p.cfg.window_size; ++t)
                    mask.at(qi, t) = -1e30;
            mask_ptr = &mask;
        }
        Var q = g.leaf(p.queries);
        for (QFormerBlock& blk : p.blocks)
            q = qformer_block(g, q, wvar, blk, p.cfg, mask_ptr);
        window_tokens.push_back(
            g.add_rowvec(g.matmul_nt(q, g.leaf(p.out_w)), g.leaf(p.out_b)));
    }
    return g.concat_rows(window_tokens);
}

AuditoryTokens qformer_apply(const FeatureSequence& z, QFormerParams& p) {
    Graph g(false);
    Var tokens = qformer_forward(g, z, p);
    AuditoryTokens out;
    out.tokens = tokens.val();
    auto spans = segment(z, p.cfg.window_size);
    out.windows = static_cast<std::int64_t>(spans.size());
    for (Window& w : spans) {
        w.frames = Tensor();  // keep metadata only
        out.spans.push_back(std::move(w));
    }
    return out;
}

}  // namespace alm
