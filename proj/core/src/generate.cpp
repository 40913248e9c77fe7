#include <cmath>
#include <cstring>

#include "alm/errors.hpp"
#include "alm/llm.hpp"

namespace alm {

namespace {

// Incremental decoding state: cached per-layer key/value rows. Appending a
// token costs one row of projections plus attention over the cached rows,
// which keeps greedy decoding linear instead of quadratic in output length.
struct DecodeState {
    BackboneParams* bb = nullptr;
    LoraSet* lora = nullptr;
    double scale_mult = 1.0;
    std::vector<Tensor> k_cache, v_cache;  // per layer [max_context x d], filled rows
    std::int64_t filled = 0;               // rows valid in each cache
    std::int64_t pos = 0;                  // next absolute position

    void init_from(std::vector<Tensor>&& ks, std::vector<Tensor>&& vs, std::int64_t total) {
        const std::int64_t d = bb->cfg.embed_dim;
        const std::int64_t cap = bb->cfg.max_context;
        k_cache.assign(bb->layers.size(), Tensor({cap, d}));
        v_cache.assign(bb->layers.size(), Tensor({cap, d}));
        for (std::size_t l = 0; l < bb->layers.size(); ++l) {
            std::memcpy(k_cache[l].data.data(), ks[l].data.data(),
                        ks[l].data.size() * sizeof(double));
            std::memcpy(v_cache[l].data.data(), vs[l].data.data(),
                        vs[l].data.size() * sizeof(double));
        }
        filled = total;
        pos = total;
    }

    // Row-level kernels reuse the shared gemm/layer_norm so values match the
    // full graph forward.
    Tensor ln_row(const Tensor& x, const Parameter& g, const Parameter& b) const {
        Tensor out;
        layer_norm_rows(x, g.value, b.value, 1e-5, out);
        return out;
    }

    Tensor project(const Tensor& x, const Parameter& w, const LoraAdaptor* ad) const {
        Tensor y({1, w.value.rows()});
        gemm(false, true, x, w.value, y, false);
        if (ad && scale_mult != 0.0) {
            Tensor down({1, ad->rank});
            gemm(false, true, x, ad->a.value, down, false);
            Tensor up({1, y.cols()});
            gemm(false, true, down, ad->b.value, up, false);
            const double s = scale_mult * ad->alpha / static_cast<double>(ad->rank);
            for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += s * up.data[i];
        }
        return y;
    }

    // Returns logits row for the next position given the embedding of the
    // token placed at `pos`.
    Tensor step_embedding(const Tensor& emb_row) {
        if (pos >= bb->cfg.max_context)
            throw ModelError("generate: context overflow at position " + std::to_string(pos));
        const std::int64_t d = bb->cfg.embed_dim;
        const int heads = bb->cfg.num_heads;
        const std::int64_t hd = d / heads;
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

        Tensor x = emb_row;
        for (std::int64_t j = 0; j < d; ++j)
            x.data[j] += bb->pos_embed.value.data[pos * d + j];

        for (std::size_t l = 0; l < bb->layers.size(); ++l) {
            DecoderLayer& layer = bb->layers[l];
            Tensor h = ln_row(x, layer.ln1_g, layer.ln1_b);
            Tensor q = project(h, layer.wq, lora ? &lora->q_adaptors[l] : nullptr);
            Tensor k = project(h, layer.wk, nullptr);
            Tensor v = project(h, layer.wv, lora ? &lora->v_adaptors[l] : nullptr);
            std::memcpy(k_cache[l].data.data() + filled * d, k.data.data(),
                        static_cast<std::size_t>(d) * sizeof(double));
            std::memcpy(v_cache[l].data.data() + filled * d, v.data.data(),
                        static_cast<std::size_t>(d) * sizeof(double));
            const std::int64_t t = filled + 1;
            Tensor ctx({1, d});
            std::vector<double> scores(static_cast<std::size_t>(t));
            for (int hh = 0; hh < heads; ++hh) {
                const std::int64_t off = hh * hd;
                for (std::int64_t j = 0; j < t; ++j) {
                    const double* kr = k_cache[l].data.data() + j * d + off;
                    const double* qr = q.data.data() + off;
                    double acc = 0.0;
                    for (std::int64_t e = 0; e < hd; ++e) acc += qr[e] * kr[e];
                    scores[static_cast<std::size_t>(j)] = acc * inv_sqrt;
                }
                Tensor srow({1, t}, std::vector<double>(scores.begin(), scores.end()));
                softmax_rows_inplace(srow);
                for (std::int64_t j = 0; j < t; ++j) {
                    const double w = srow.data[static_cast<std::size_t>(j)];
                    const double* vr = v_cache[l].data.data() + j * d + off;
                    for (std::int64_t e = 0; e < hd; ++e) ctx.data[off + e] += w * vr[e];
                }
            }
            Tensor att({1, d});
            gemm(false, true, ctx, layer.wo.value, att, false);
            for (std::int64_t j = 0; j < d; ++j) x.data[j] += att.data[j];
            Tensor h2 = ln_row(x, layer.ln2_g, layer.ln2_b);
            Tensor f1({1, bb->cfg.ffn_dim});
            gemm(false, true, h2, layer.ff_w1.value, f1, false);
            for (std::size_t j = 0; j < f1.data.size(); ++j)
                f1.data[j] = gelu_scalar(f1.data[j] + layer.ff_b1.value.data[j]);
            Tensor f2({1, d});
            gemm(false, true, f1, layer.ff_w2.value, f2, false);
            for (std::int64_t j = 0; j < d; ++j) x.data[j] += f2.data[j] + layer.ff_b2.value.data[j];
        }
        ++filled;
        ++pos;
        Tensor hf = ln_row(x, bb->lnf_g, bb->lnf_b);
        Tensor logits({1, bb->cfg.vocab_size});
        gemm(false, true, hf, bb->head_w.value, logits, false);
        return logits;
    }

    Tensor step_token(int token_id) {
        const std::int64_t d = bb->cfg.embed_dim;
        Tensor emb({1, d});
        std::memcpy(emb.data.data(), bb->tok_embed.value.data.data() + token_id * d,
                    static_cast<std::size_t>(d) * sizeof(double));
        return step_embedding(emb);
    }
};

int argmax_lowest(const Tensor& logits) {
    int best = 0;
    double best_v = logits.data[0];
    for (std::int64_t j = 1; j < logits.cols(); ++j)
        if (logits.data[static_cast<std::size_t>(j)] > best_v) {
            best_v = logits.data[static_cast<std::size_t>(j)];
            best = static_cast<int>(j);
        }
    return best;
}

std::string strip_trailing_ws(std::string s) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\n' || s.back() == '\t'))
        s.pop_back();
    return s;
}

}  // namespace

std::string generate(CrossModalModel& m, const PromptInputs& inputs,
                     const GenerateOptions& opts) {
    if (opts.max_new_tokens <= 0) return "";
    // Prefill with the full graph forward (no grad), capturing K/V caches.
    Graph g(false);
    ForwardStats st;
    std::vector<Tensor> ks, vs;
    Var logits = decoder_logits(g, m.backbone, &m.qformer, &m.lora, opts.scale_mult, inputs,
                                {}, &st, &ks, &vs);
    DecodeState state;
    state.bb = &m.backbone;
    state.lora = &m.lora;
    state.scale_mult = opts.scale_mult;
    state.init_from(std::move(ks), std::move(vs), st.total_tokens);

    Tensor cur = logits.val();  // [1 x V], predicts the first response token
    std::vector<int> out_tokens;
    for (int i = 0; i < opts.max_new_tokens; ++i) {
        const int tok_id = argmax_lowest(cur);
        if (tok_id == tok::kEos) break;
        out_tokens.push_back(tok_id);
        if (i + 1 == opts.max_new_tokens) break;
        cur = state.step_token(tok_id);
    }
    return strip_trailing_ws(tok::decode(out_tokens));
}

std::string generate_full_recompute(CrossModalModel& m, const PromptInputs& inputs,
                                    const GenerateOptions& opts) {
    if (opts.max_new_tokens <= 0) return "";
    std::vector<int> out_tokens;
    for (int i = 0; i < opts.max_new_tokens; ++i) {
        Graph g(false);
        ForwardStats st;
        Var logits = decoder_logits(g, m.backbone, &m.qformer, &m.lora, opts.scale_mult,
                                    inputs, out_tokens, &st);
        const Tensor& L = logits.val();
        Tensor last({1, L.cols()});
        std::memcpy(last.data.data(),
                    L.data.data() + (L.rows() - 1) * L.cols(),
                    static_cast<std::size_t>(L.cols()) * sizeof(double));
        const int tok_id = argmax_lowest(last);
        if (tok_id == tok::kEos) break;
        out_tokens.push_back(tok_id);
    }
    return strip_trailing_ws(tok::decode(out_tokens));
}

}  // namespace alm
