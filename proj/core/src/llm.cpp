#include "alm/llm.hpp"

#include <cmath>

#include "alm/errors.hpp"

namespace alm {

// ---- tokenizer -----------------------------------------------------------------

namespace tok {

int encode_char(char c) {
    if (c == '\n') return kEos;
    const unsigned char u = static_cast<unsigned char>(c);
    if (u >= 32 && u <= 126) return static_cast<int>(u) - 31;
    throw DataError("tokenizer: character code " + std::to_string(static_cast<int>(u)) +
                    " outside the 96-char set");
}

std::vector<int> encode(const std::string& text) {
    std::vector<int> out;
    out.reserve(text.size());
    for (char c : text) out.push_back(encode_char(c));
    return out;
}

std::string decode(const std::vector<int>& ids) {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids) {
        if (id == kEos) {
            out.push_back('\n');
        } else if (id >= 1 && id < kVocabSize) {
            out.push_back(static_cast<char>(id + 31));
        } else {
            throw DataError("tokenizer: id " + std::to_string(id) + " outside vocab");
        }
    }
    return out;
}

}  // namespace tok

// ---- backbone ---------------------------------------------------------------------

void BackboneConfig::validate() const {
    if (vocab_size != tok::kVocabSize)
        throw ConfigError("backbone: vocab_size is fixed at " +
                          std::to_string(tok::kVocabSize));
    if (embed_dim < 1 || num_layers < 1 || num_heads < 1 || ffn_dim < 1 || max_context < 8)
        throw ConfigError("backbone: non-positive dimension");
    if (embed_dim % num_heads != 0)
        throw ConfigError("backbone: embed_dim not divisible by num_heads");
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

void BackboneParams::init(const BackboneConfig& config, std::uint64_t seed) {
    config.validate();
    cfg = config;
    Rng rng = Rng::stream(seed, "backbone_init");
    const std::int64_t d = cfg.embed_dim, ff = cfg.ffn_dim, v = cfg.vocab_size;
    tok_embed = normal_param("backbone.tok_embed", {v, d}, rng);
    pos_embed = normal_param("backbone.pos_embed", {cfg.max_context, d}, rng);
    layers.clear();
    for (int l = 0; l < cfg.num_layers; ++l) {
        const std::string p = "backbone.layer" + std::to_string(l) + ".";
        DecoderLayer layer;
        layer.ln1_g = const_param(p + "ln1_g", {1, d}, 1.0);
        layer.ln1_b = const_param(p + "ln1_b", {1, d}, 0.0);
        layer.wq = normal_param(p + "wq", {d, d}, rng);
        layer.wk = normal_param(p + "wk", {d, d}, rng);
        layer.wv = normal_param(p + "wv", {d, d}, rng);
        layer.wo = normal_param(p + "wo", {d, d}, rng);
        layer.ln2_g = const_param(p + "ln2_g", {1, d}, 1.0);
        layer.ln2_b = const_param(p + "ln2_b", {1, d}, 0.0);
        layer.ff_w1 = normal_param(p + "ff_w1", {ff, d}, rng);
        layer.ff_b1 = const_param(p + "ff_b1", {1, ff}, 0.0);
        layer.ff_w2 = normal_param(p + "ff_w2", {d, ff}, rng);
        layer.ff_b2 = const_param(p + "ff_b2", {1, d}, 0.0);
        layers.push_back(std::move(layer));
    }
    lnf_g = const_param("backbone.lnf_g", {1, d}, 1.0);
    lnf_b = const_param("backbone.lnf_b", {1, d}, 0.0);
    head_w = normal_param("backbone.head_w", {v, d}, rng);
}

void BackboneParams::set_trainable(bool trainable) {
    for (Parameter* p : parameters()) p->trainable = trainable;
}

std::vector<Parameter*> BackboneParams::parameters() {
    std::vector<Parameter*> out = {&tok_embed, &pos_embed};
    for (DecoderLayer& l : layers) {
        for (Parameter* p : {&l.ln1_g, &l.ln1_b, &l.wq, &l.wk, &l.wv, &l.wo, &l.ln2_g,
                             &l.ln2_b, &l.ff_w1, &l.ff_b1, &l.ff_w2, &l.ff_b2})
            out.push_back(p);
    }
    out.push_back(&lnf_g);
    out.push_back(&lnf_b);
    out.push_back(&head_w);
    return out;
}

std::int64_t BackboneParams::num_params() const {
    std::int64_t n = 0;
    auto* self = const_cast<BackboneParams*>(this);
    for (Parameter* p : self->parameters()) n += p->value.numel();
    return n;
}

std::uint64_t BackboneParams::digest() const {
    std::uint64_t h = 1469598103934665603ull;
    auto* self = const_cast<BackboneParams*>(this);
    for (Parameter* p : self->parameters()) h = tensor_digest(p->value, h);
    return h;
}

// ---- LoRA ----------------------------------------------------------------------------

void LoraConfig::validate() const {
    if (rank <= 0) throw ConfigError("lora: rank must be positive");
    if (alpha <= 0.0) throw ConfigError("lora: alpha must be positive");
}

void LoraSet::init(const BackboneConfig& bb, const LoraConfig& config, std::uint64_t seed) {
    config.validate();
    cfg = config;
    Rng rng = Rng::stream(seed, "lora_init");
    const std::int64_t d = bb.embed_dim;
    q_adaptors.clear();
    v_adaptors.clear();
    for (int l = 0; l < bb.num_layers; ++l) {
        for (auto* vecp : {&q_adaptors, &v_adaptors}) {
            const std::string p = "lora.layer" + std::to_string(l) +
                                  (vecp == &q_adaptors ? ".q." : ".v.");
            LoraAdaptor ad;
            ad.rank = cfg.rank;
            ad.alpha = cfg.alpha;
            ad.a = normal_param(p + "a", {cfg.rank, d}, rng);
            ad.b = const_param(p + "b", {d, cfg.rank}, 0.0);  // zero-delta start
            vecp->push_back(std::move(ad));
        }
    }
}

std::vector<Parameter*> LoraSet::parameters() {
    std::vector<Parameter*> out;
    for (auto* vecp : {&q_adaptors, &v_adaptors})
        for (LoraAdaptor& ad : *vecp) {
            out.push_back(&ad.a);
            out.push_back(&ad.b);
        }
    return out;
}

std::int64_t LoraSet::num_params() const {
    std::int64_t n = 0;
    auto* self = const_cast<LoraSet*>(this);
    for (Parameter* p : self->parameters()) n += p->value.numel();
    return n;
}

Var lora_project(Graph& g, Var x, Parameter& base_weight, LoraAdaptor* adaptor,
                 double scale_mult) {
    Var base = g.matmul_nt(x, g.leaf(base_weight));
    if (!adaptor || scale_mult == 0.0) {
        if (adaptor && adaptor->rank <= 0) throw ModelError("lora_project: rank must be > 0");
        return base;
    }
    if (adaptor->rank <= 0) throw ModelError("lora_project: rank must be > 0");
    Var down = g.matmul_nt(x, g.leaf(adaptor->a));
    Var up = g.matmul_nt(down, g.leaf(adaptor->b));
    const double s = scale_mult * adaptor->alpha / static_cast<double>(adaptor->rank);
    return g.add(base, g.scale(up, s));
}

// ---- prompt ------------------------------------------------------------------------

std::string prompt_pre_text() { return "USER: "; }

std::string prompt_post_text(const std::string& instruction) {
    return " " + instruction + "\nASSISTANT:";
}

std::string response_target(const std::string& reference) {
    return " " + reference + "\n";
}

// ---- model -------------------------------------------------------------------------

void CrossModalModel::init(const BackboneConfig& bb, const QFormerConfig& qf,
                           const LoraConfig& lc, std::uint64_t seed) {
    backbone.init(bb, seed);
    backbone.set_trainable(false);
    QFormerConfig qf2 = qf;
    qf2.output_dim = bb.embed_dim;
    qformer.init(qf2, seed);
    lora.init(bb, lc, seed);
}

std::vector<Parameter*> CrossModalModel::trainable_parameters() {
    std::vector<Parameter*> out = qformer.parameters();
    for (Parameter* p : lora.parameters()) out.push_back(p);
    return out;
}

double trainable_fraction(const CrossModalModel& model, std::int64_t frozen_extra) {
    std::int64_t trainable = 0;
    auto* self = const_cast<CrossModalModel*>(&model);
    for (Parameter* p : self->trainable_parameters())
        if (p->trainable) trainable += p->value.numel();
    const std::int64_t total =
        model.backbone.num_params() + model.qformer.num_params() + model.lora.num_params() +
        frozen_extra;
    if (total == 0) return 0.0;
    return static_cast<double>(trainable) / static_cast<double>(total);
}

// ---- decoder forward -----------------------------------------------------------------

namespace {

Tensor causal_mask(std::int64_t t) {
    Tensor m({t, t});
    for (std::int64_t i = 0; i < t; ++i)
        for (std::int64_t j = i + 1; j < t; ++j) m.data[i * t + j] = -1e30;
    return m;
}

}  // namespace

Var decoder_logits(Graph& g, BackboneParams& bb, QFormerParams* qformer, LoraSet* lora,
                   double scale_mult, const PromptInputs& inputs,
                   const std::vector<int>& response_tokens, ForwardStats* stats,
                   std::vector<Tensor>* k_capture, std::vector<Tensor>* v_capture) {
    const std::vector<int> pre_ids = tok::encode(prompt_pre_text());
    const std::vector<int> post_ids = tok::encode(prompt_post_text(inputs.instruction));

    Var aud;
    std::int64_t aud_len = 0;
    if (inputs.features && inputs.raw_span)
        throw ModelError("decoder: both features and raw span given");
    if (inputs.features) {
        if (!qformer) throw ModelError("decoder: features given but no Q-Former");
        aud = qformer_forward(g, *inputs.features, *qformer);
        aud_len = aud.val().rows();
    } else if (inputs.raw_span) {
        aud = g.constant(*inputs.raw_span);
        aud_len = aud.val().rows();
    }

    const std::int64_t pre_n = static_cast<std::int64_t>(pre_ids.size());
    const std::int64_t post_n = static_cast<std::int64_t>(post_ids.size());
    const std::int64_t resp_n = static_cast<std::int64_t>(response_tokens.size());
    const std::int64_t total = pre_n + aud_len + post_n + resp_n;
    if (total > bb.cfg.max_context)
        throw ModelError("decoder: context overflow, need " + std::to_string(total) +
                         " tokens (pre " + std::to_string(pre_n) + ", auditory " +
                         std::to_string(aud_len) + ", post " + std::to_string(post_n) +
                         ", response " + std::to_string(resp_n) + ") > max_context " +
                         std::to_string(bb.cfg.max_context));

    Var table = g.leaf(bb.tok_embed);
    std::vector<Var> parts;
    parts.push_back(g.embed_rows(table, pre_ids));
    if (aud_len > 0) parts.push_back(aud);
    std::vector<int> tail = post_ids;
    tail.insert(tail.end(), response_tokens.begin(), response_tokens.end());
    parts.push_back(g.embed_rows(table, tail));
    Var x = g.concat_rows(parts);
    x = g.add(x, g.slice_rows(g.leaf(bb.pos_embed), 0, total));

    const Tensor mask = causal_mask(total);
    const int heads = bb.cfg.num_heads;
    const std::int64_t hd = bb.cfg.embed_dim / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

    for (std::size_t li = 0; li < bb.layers.size(); ++li) {
        DecoderLayer& layer = bb.layers[li];
        Var h = g.layer_norm(x, g.leaf(layer.ln1_g), g.leaf(layer.ln1_b));
        Var q = lora_project(g, h, layer.wq, lora ? &lora->q_adaptors[li] : nullptr,
                             scale_mult);
        Var k = g.matmul_nt(h, g.leaf(layer.wk));
        Var v = lora_project(g, h, layer.wv, lora ? &lora->v_adaptors[li] : nullptr,
                             scale_mult);
        if (k_capture) k_capture->push_back(k.val());
        if (v_capture) v_capture->push_back(v.val());
        std::vector<Var> ctx;
        for (int hh = 0; hh < heads; ++hh) {
            Var qh = g.slice_cols(q, hh * hd, hd);
            Var kh = g.slice_cols(k, hh * hd, hd);
            Var vh = g.slice_cols(v, hh * hd, hd);
            Var scores = g.add_const(g.scale(g.matmul_nt(qh, kh), inv_sqrt), mask);
            ctx.push_back(g.matmul(g.softmax_rows(scores), vh));
        }
        x = g.add(x, g.matmul_nt(g.concat_cols(ctx), g.leaf(layer.wo)));
        Var h2 = g.layer_norm(x, g.leaf(layer.ln2_g), g.leaf(layer.ln2_b));
        Var f = g.gelu(g.add_rowvec(g.matmul_nt(h2, g.leaf(layer.ff_w1)), g.leaf(layer.ff_b1)));
        Var f2 = g.add_rowvec(g.matmul_nt(f, g.leaf(layer.ff_w2)), g.leaf(layer.ff_b2));
        x = g.add(x, f2);
    }
    Var hf = g.layer_norm(x, g.leaf(bb.lnf_g), g.leaf(bb.lnf_b));

    // Rows resp_start-1 .. total-1: row k predicts response token k; the last
    // row predicts whatever would come next.
    const std::int64_t resp_start = pre_n + aud_len + post_n;
    Var h_resp = g.slice_rows(hf, resp_start - 1, resp_n + 1);
    Var logits = g.matmul_nt(h_resp, g.leaf(bb.head_w));
    if (stats) {
        stats->total_tokens = total;
        stats->response_positions = resp_n;
        stats->response_start = resp_start;
    }
    return logits;
}

Var decoder_loss(Graph& g, CrossModalModel& m, const PromptInputs& inputs,
                 const std::string& reference, double scale_mult, ForwardStats* stats) {
    const std::vector<int> resp = tok::encode(response_target(reference));
    ForwardStats st;
    Var logits = decoder_logits(g, m.backbone, &m.qformer, &m.lora, scale_mult, inputs, resp,
                                &st);
    if (stats) *stats = st;
    Var resp_logits = g.slice_rows(logits, 0, st.response_positions);
    const std::vector<std::uint8_t> mask(resp.size(), 1);
    return g.cross_entropy(resp_logits, resp, mask);
}

std::vector<double> response_nlls(CrossModalModel& m, const PromptInputs& inputs,
                                  const std::string& reference, double scale_mult) {
    if (reference.empty()) throw DataError("response_nlls: empty reference");
    const std::vector<int> resp = tok::encode(response_target(reference));
    Graph g(false);
    ForwardStats st;
    Var logits = decoder_logits(g, m.backbone, &m.qformer, &m.lora, scale_mult, inputs, resp,
                                &st);
    const Tensor& L = logits.val();
    const std::int64_t v = L.cols();
    std::vector<double> nlls;
    nlls.reserve(resp.size());
    for (std::size_t i = 0; i < resp.size(); ++i)
        nlls.push_back(-log_softmax_pick(L.data.data() + static_cast<std::int64_t>(i) * v, v,
                                         resp[i]));
    return nlls;
}

Var text_lm_loss(Graph& g, BackboneParams& bb, const PromptInputs& inputs,
                 const std::string& reference) {
    const std::vector<int> resp = tok::encode(response_target(reference));
    ForwardStats st;
    Var logits = decoder_logits(g, bb, nullptr, nullptr, 0.0, inputs, resp, &st);
    Var resp_logits = g.slice_rows(logits, 0, st.response_positions);
    const std::vector<std::uint8_t> mask(resp.size(), 1);
    return g.cross_entropy(resp_logits, resp, mask);
}

}  // namespace alm
