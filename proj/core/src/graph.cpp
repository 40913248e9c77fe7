#include "alm/graph.hpp"

#include <cmath>
#include <cstring>

#include "alm/errors.hpp"

namespace alm {

namespace {
void axpy(Tensor& dst, const Tensor& src) {
    double* d = dst.data.data();
    const double* s = src.data.data();
    const std::size_t n = dst.data.size();
    for (std::size_t i = 0; i < n; ++i) d[i] += s[i];
}
}  // namespace

const Tensor& Var::val() const {
    if (!g_) throw ModelError("Var::val on undefined handle");
    return g_->val_of(id_);
}

const Tensor& Var::grad() const {
    if (!g_) throw ModelError("Var::grad on undefined handle");
    const auto& node = g_->nodes_[static_cast<std::size_t>(id_)];
    if (!node.grad_set) throw ModelError("Var::grad: no gradient recorded for this node");
    return node.grad;
}

Tensor& Graph::grad_buf(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad_set) {
        n.grad = Tensor(n.view->shape);
        n.grad_set = true;
    }
    return n.grad;
}

void Graph::add_grad(int id, const Tensor& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    axpy(grad_buf(id), g);
}

int Graph::push(Tensor value, bool needs, std::function<void(Graph&, int)> back) {
    Node n;
    n.store = std::move(value);
    n.view = &n.store;
    n.needs_grad = grad_enabled_ && needs;
    if (n.needs_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    // deque never relocates elements, but re-anchor the view after the move.
    nodes_.back().view = &nodes_.back().store;
    return static_cast<int>(nodes_.size()) - 1;
}

void Graph::check_same_graph(Var v) const {
    if (v.g_ != this) throw ModelError("Var belongs to a different graph");
}

Var Graph::leaf(Parameter& p) {
    Node n;
    n.view = &p.value;
    n.needs_grad = grad_enabled_ && p.trainable;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return wrap(static_cast<int>(nodes_.size()) - 1);
}

Var Graph::constant(Tensor t) {
    Node n;
    n.store = std::move(t);
    n.view = &n.store;
    nodes_.push_back(std::move(n));
    nodes_.back().view = &nodes_.back().store;
    return wrap(static_cast<int>(nodes_.size()) - 1);
}

Var Graph::constant_view(const Tensor* t) {
    Node n;
    n.view = t;
    nodes_.push_back(std::move(n));
    return wrap(static_cast<int>(nodes_.size()) - 1);
}

Var Graph::matmul(Var a, Var b) {
    check_same_graph(a);
    check_same_graph(b);
    const Tensor& A = a.val();
    const Tensor& B = b.val();
    if (A.cols() != B.rows())
        throw ShapeError("matmul: inner dimensions disagree, lhs " + A.shape_str() +
                         " vs rhs " + B.shape_str());
    Tensor C({A.rows(), B.cols()});
    gemm(false, false, A, B, C, false);
    const int ia = a.id(), ib = b.id();
    const bool needs = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
    int id = push(std::move(C), needs, [ia, ib](Graph& g, int self) {
        const Tensor& gc = g.nodes_[self].grad;
        if (g.nodes_[ia].needs_grad)
            gemm(false, true, gc, g.val_of(ib), g.grad_buf(ia), true);
        if (g.nodes_[ib].needs_grad)
            gemm(true, false, g.val_of(ia), gc, g.grad_buf(ib), true);
    });
    return wrap(id);
}

Var Graph::matmul_nt(Var a, Var b) {
    check_same_graph(a);
    check_same_graph(b);
    const Tensor& A = a.val();
    const Tensor& B = b.val();
    if (A.cols() != B.cols())
        throw ShapeError("matmul_nt: inner dimensions disagree, lhs " + A.shape_str() +
                         " vs rhs " + B.shape_str() + "^T");
    Tensor C({A.rows(), B.rows()});
    gemm(false, true, A, B, C, false);
    const int ia = a.id(), ib = b.id();
    const bool needs = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
    int id = push(std::move(C), needs, [ia, ib](Graph& g, int self) {
        const Tensor& gc = g.nodes_[self].grad;
        if (g.nodes_[ia].needs_grad)
            gemm(false, false, gc, g.val_of(ib), g.grad_buf(ia), true);
        if (g.nodes_[ib].needs_grad)
            gemm(true, false, gc, g.val_of(ia), g.grad_buf(ib), true);
    });
    return wrap(id);
}

Var Graph::add(Var a, Var b) {
    check_same_graph(a);
    check_same_graph(b);
    const Tensor& A = a.val();
    const Tensor& B = b.val();
    if (!A.same_shape(B))
        throw ShapeError("add: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor C = A;
    axpy(C, B);
    const int ia = a.id(), ib = b.id();
    const bool needs = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
    int id = push(std::move(C), needs, [ia, ib](Graph& g, int self) {
        const Tensor& gc = g.nodes_[self].grad;
        g.add_grad(ia, gc);
        g.add_grad(ib, gc);
    });
    return wrap(id);
}

Var Graph::add_rowvec(Var a, Var v) {
    check_same_graph(a);
    check_same_graph(v);
    const Tensor& A = a.val();
    const Tensor& V = v.val();
    if (V.rows() != 1 || V.cols() != A.cols())
        throw ShapeError("add_rowvec: vector " + V.shape_str() + " does not broadcast over " +
                         A.shape_str());
    Tensor C = A;
    const std::int64_t m = A.rows(), n = A.cols();
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) C.data[i * n + j] += V.data[j];
    const int ia = a.id(), iv = v.id();
    const bool needs = nodes_[ia].needs_grad || nodes_[iv].needs_grad;
    int id = push(std::move(C), needs, [ia, iv, m, n](Graph& g, int self) {
        const Tensor& gc = g.nodes_[self].grad;
        g.add_grad(ia, gc);
        if (g.nodes_[iv].needs_grad) {
            Tensor& gv = g.grad_buf(iv);
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j) gv.data[j] += gc.data[i * n + j];
        }
    });
    return wrap(id);
}

Var Graph::mul(Var a, Var b) {
    check_same_graph(a);
    check_same_graph(b);
    const Tensor& A = a.val();
    const Tensor& B = b.val();
    if (!A.same_shape(B))
        throw ShapeError("mul: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor C = A;
    for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] *= B.data[i];
    const int ia = a.id(), ib = b.id();
    const bool needs = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
    int id = push(std::move(C), needs, [ia, ib](Graph& g, int self) {
        const Tensor& gc = g.nodes_[self].grad;
        if (g.nodes_[ia].needs_grad) {
            Tensor& ga = g.grad_buf(ia);
            const Tensor& B2 = g.val_of(ib);
            for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += gc.data[i] * B2.data[i];
        }
        if (g.nodes_[ib].needs_grad) {
            Tensor& gb = g.grad_buf(ib);
            const Tensor& A2 = g.val_of(ia);
            for (std::size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += gc.data[i] * A2.data[i];
        }
    });
    return wrap(id);
}

Var Graph::scale(Var a, double s) {
    check_same_graph(a);
    Tensor C = a.val();
    for (double& v : C.data) v *= s;
    const int ia = a.id();
    int id = push(std::move(C), nodes_[ia].needs_grad, [ia, s](Graph& g, int self) {
        if (!g.nodes_[ia].needs_grad) return;
        const Tensor& gc = g.nodes_[self].grad;
        Tensor& ga = g.grad_buf(ia);
        for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += s * gc.data[i];
    });
    return wrap(id);
}

Var Graph::add_const(Var a, const Tensor& c) {
    check_same_graph(a);
    const Tensor& A = a.val();
    if (!A.same_shape(c))
        throw ShapeError("add_const: shape mismatch " + A.shape_str() + " vs " + c.shape_str());
    Tensor C = A;
    axpy(C, c);
    const int ia = a.id();
    int id = push(std::move(C), nodes_[ia].needs_grad, [ia](Graph& g, int self) {
        g.add_grad(ia, g.nodes_[self].grad);
    });
    return wrap(id);
}

Var Graph::softmax_rows(Var a) {
    check_same_graph(a);
    const Tensor& A = a.val();
    if (!A.all_finite()) throw ModelError("softmax_rows: non-finite input");
    Tensor C = A;
    softmax_rows_inplace(C);
    const int ia = a.id();
    const std::int64_t m = A.rows(), n = A.cols();
    int id = push(std::move(C), nodes_[ia].needs_grad, [ia, m, n](Graph& g, int self) {
        if (!g.nodes_[ia].needs_grad) return;
        const Tensor& gc = g.nodes_[self].grad;
        const Tensor& y = g.val_of(self);
        Tensor& ga = g.grad_buf(ia);
        for (std::int64_t i = 0; i < m; ++i) {
            const double* gi = gc.data.data() + i * n;
            const double* yi = y.data.data() + i * n;
            double dot = 0.0;
            for (std::int64_t j = 0; j < n; ++j) dot += gi[j] * yi[j];
            double* oi = ga.data.data() + i * n;
            for (std::int64_t j = 0; j < n; ++j) oi[j] += yi[j] * (gi[j] - dot);
        }
    });
    return wrap(id);
}

Var Graph::layer_norm(Var x, Var gain, Var bias, double eps) {
    check_same_graph(x);
    check_same_graph(gain);
    check_same_graph(bias);
    const Tensor& X = x.val();
    const std::int64_t d = X.cols();
    if (d < 1) throw ShapeError("layer_norm: feature dim must be >= 1");
    Tensor out, xhat, inv_sigma;
    layer_norm_rows(X, gain.val(), bias.val(), eps, out, &xhat, &inv_sigma);
    const int ix = x.id(), ig = gain.id(), ib = bias.id();
    const bool needs =
        nodes_[ix].needs_grad || nodes_[ig].needs_grad || nodes_[ib].needs_grad;
    const std::int64_t m = X.rows();
    int id = push(std::move(out), needs,
                  [ix, ig, ib, m, d, xh = std::move(xhat),
                   is = std::move(inv_sigma)](Graph& g, int self) {
        const Tensor& gc = g.nodes_[self].grad;
        const Tensor& gainv = g.val_of(ig);
        if (g.nodes_[ig].needs_grad) {
            Tensor& gg = g.grad_buf(ig);
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < d; ++j)
                    gg.data[j] += gc.data[i * d + j] * xh.data[i * d + j];
        }
        if (g.nodes_[ib].needs_grad) {
            Tensor& gb = g.grad_buf(ib);
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < d; ++j) gb.data[j] += gc.data[i * d + j];
        }
        if (g.nodes_[ix].needs_grad) {
            Tensor& gx = g.grad_buf(ix);
            const double invd = 1.0 / static_cast<double>(d);
            for (std::int64_t i = 0; i < m; ++i) {
                double mean_h = 0.0, mean_hx = 0.0;
                for (std::int64_t j = 0; j < d; ++j) {
                    const double h = gc.data[i * d + j] * gainv.data[j];
                    mean_h += h;
                    mean_hx += h * xh.data[i * d + j];
                }
                mean_h *= invd;
                mean_hx *= invd;
                const double isr = is.data[i];
                for (std::int64_t j = 0; j < d; ++j) {
                    const double h = gc.data[i * d + j] * gainv.data[j];
                    gx.data[i * d + j] += (h - mean_h - xh.data[i * d + j] * mean_hx) * isr;
                }
            }
        }
    });
    return wrap(id);
}

Var Graph::gelu(Var a) {
    check_same_graph(a);
    Tensor C = a.val();
    for (double& v : C.data) v = gelu_scalar(v);
    const int ia = a.id();
    int id = push(std::move(C), nodes_[ia].needs_grad, [ia](Graph& g, int self) {
        if (!g.nodes_[ia].needs_grad) return;
        const Tensor& gc = g.nodes_[self].grad;
        const Tensor& x = g.val_of(ia);
        Tensor& ga = g.grad_buf(ia);
        for (std::size_t i = 0; i < ga.data.size(); ++i)
            ga.data[i] += gc.data[i] * gelu_grad_scalar(x.data[i]);
    });
    return wrap(id);
}

Var Graph::slice_rows(Var a, std::int64_t r0, std::int64_t n) {
    check_same_graph(a);
    const Tensor& A = a.val();
    const std::int64_t cols = A.cols();
    if (r0 < 0 || n < 0 || r0 + n > A.rows())
        throw ShapeError("slice_rows: range out of bounds for " + A.shape_str());
    Tensor C({n, cols});
    std::memcpy(C.data.data(), A.data.data() + r0 * cols,
                static_cast<std::size_t>(n * cols) * sizeof(double));
    const int ia = a.id();
    int id = push(std::move(C), nodes_[ia].needs_grad, [ia, r0, n, cols](Graph& g, int self) {
        if (!g.nodes_[ia].needs_grad) return;
        const Tensor& gc = g.nodes_[self].grad;
        Tensor& ga = g.grad_buf(ia);
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < cols; ++j)
                ga.data[(r0 + i) * cols + j] += gc.data[i * cols + j];
    });
    return wrap(id);
}

Var Graph::slice_cols(Var a, std::int64_t c0, std::int64_t n) {
    check_same_graph(a);
    const Tensor& A = a.val();
    const std::int64_t m = A.rows(), cols = A.cols();
    if (c0 < 0 || n < 0 || c0 + n > cols)
        throw ShapeError("slice_cols: range out of bounds for " + A.shape_str());
    Tensor C({m, n});
    for (std::int64_t i = 0; i < m; ++i)
        std::memcpy(C.data.data() + i * n, A.data.data() + i * cols + c0,
                    static_cast<std::size_t>(n) * sizeof(double));
    const int ia = a.id();
    int id = push(std::move(C), nodes_[ia].needs_grad, [ia, c0, n, m, cols](Graph& g, int self) {
        if (!g.nodes_[ia].needs_grad) return;
        const Tensor& gc = g.nodes_[self].grad;
        Tensor& ga = g.grad_buf(ia);
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j)
                ga.data[i * cols + c0 + j] += gc.data[i * n + j];
    });
    return wrap(id);
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: empty part list");
    std::int64_t rows = 0;
    const std::int64_t cols = parts[0].val().cols();
    bool needs = false;
    for (const Var& p : parts) {
        check_same_graph(p);
        if (p.val().cols() != cols)
            throw ShapeError("concat_rows: column mismatch " + p.val().shape_str());
        rows += p.val().rows();
        needs = needs || nodes_[p.id()].needs_grad;
    }
    Tensor C({rows, cols});
    std::int64_t r = 0;
    std::vector<int> ids;
    std::vector<std::int64_t> offsets;
    for (const Var& p : parts) {
        const Tensor& P = p.val();
        std::memcpy(C.data.data() + r * cols, P.data.data(),
                    P.data.size() * sizeof(double));
        ids.push_back(p.id());
        offsets.push_back(r);
        r += P.rows();
    }
    int id = push(std::move(C), needs,
                  [ids, offsets, cols](Graph& g, int self) {
        const Tensor& gc = g.nodes_[self].grad;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (!g.nodes_[ids[k]].needs_grad) continue;
            Tensor& gp = g.grad_buf(ids[k]);
            const std::int64_t pr = gp.rows();
            for (std::int64_t i = 0; i < pr; ++i)
                for (std::int64_t j = 0; j < cols; ++j)
                    gp.data[i * cols + j] += gc.data[(offsets[k] + i) * cols + j];
        }
    });
    return wrap(id);
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: empty part list");
    const std::int64_t rows = parts[0].val().rows();
    std::int64_t cols = 0;
    bool needs = false;
    for (const Var& p : parts) {
        check_same_graph(p);
        if (p.val().rows() != rows)
            throw ShapeError("concat_cols: row mismatch " + p.val().shape_str());
        cols += p.val().cols();
        needs = needs || nodes_[p.id()].needs_grad;
    }
    Tensor C({rows, cols});
    std::int64_t c = 0;
    std::vector<int> ids;
    std::vector<std::int64_t> offsets;
    std::vector<std::int64_t> widths;
    for (const Var& p : parts) {
        const Tensor& P = p.val();
        const std::int64_t w = P.cols();
        for (std::int64_t i = 0; i < rows; ++i)
            std::memcpy(C.data.data() + i * cols + c, P.data.data() + i * w,
                        static_cast<std::size_t>(w) * sizeof(double));
        ids.push_back(p.id());
        offsets.push_back(c);
        widths.push_back(w);
        c += w;
    }
    int id = push(std::move(C), needs,
                  [ids, offsets, widths, rows, cols](Graph& g, int self) {
        const Tensor& gc = g.nodes_[self].grad;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (!g.nodes_[ids[k]].needs_grad) continue;
            Tensor& gp = g.grad_buf(ids[k]);
            const std::int64_t w = widths[k];
            for (std::int64_t i = 0; i < rows; ++i)
                for (std::int64_t j = 0; j < w; ++j)
                    gp.data[i * w + j] += gc.data[i * cols + offsets[k] + j];
        }
    });
    return wrap(id);
}

Var Graph::embed_rows(Var table, const std::vector<int>& ids) {
    check_same_graph(table);
    const Tensor& T = table.val();
    const std::int64_t V = T.rows(), d = T.cols();
    for (int i : ids)
        if (i < 0 || i >= V)
            throw ShapeError("embed_rows: id " + std::to_string(i) + " out of range [0," +
                             std::to_string(V) + ")");
    const std::int64_t n = static_cast<std::int64_t>(ids.size());
    Tensor C({n, d});
    for (std::int64_t i = 0; i < n; ++i)
        std::memcpy(C.data.data() + i * d, T.data.data() + ids[i] * d,
                    static_cast<std::size_t>(d) * sizeof(double));
    const int it = table.id();
    int id = push(std::move(C), nodes_[it].needs_grad, [it, ids, d, n](Graph& g, int self) {
        if (!g.nodes_[it].needs_grad) return;
        const Tensor& gc = g.nodes_[self].grad;
        Tensor& gt = g.grad_buf(it);
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < d; ++j)
                gt.data[ids[i] * d + j] += gc.data[i * d + j];
    });
    return wrap(id);
}

Var Graph::sum(Var a) {
    check_same_graph(a);
    double s = 0.0;
    for (double v : a.val().data) s += v;
    const int ia = a.id();
    int id = push(Tensor({1, 1}, {s}), nodes_[ia].needs_grad, [ia](Graph& g, int self) {
        if (!g.nodes_[ia].needs_grad) return;
        const double gc = g.nodes_[self].grad.data[0];
        Tensor& ga = g.grad_buf(ia);
        for (double& v : ga.data) v += gc;
    });
    return wrap(id);
}

Var Graph::cross_entropy(Var logits, const std::vector<int>& targets,
                         const std::vector<std::uint8_t>& mask) {
    check_same_graph(logits);
    const Tensor& L = logits.val();
    const std::int64_t t = L.rows(), V = L.cols();
    if (static_cast<std::int64_t>(targets.size()) != t ||
        static_cast<std::int64_t>(mask.size()) != t)
        throw ShapeError("cross_entropy: targets/mask length must equal logit rows " +
                         std::to_string(t));
    std::int64_t m_count = 0;
    for (std::int64_t i = 0; i < t; ++i) {
        if (targets[i] < 0 || targets[i] >= V)
            throw ModelError("cross_entropy: target " + std::to_string(targets[i]) +
                             " outside [0," + std::to_string(V) + ")");
        if (mask[i]) ++m_count;
    }
    if (m_count == 0) throw ModelError("cross_entropy: all positions masked");
    double loss = 0.0;
    for (std::int64_t i = 0; i < t; ++i) {
        if (!mask[i]) continue;
        loss -= log_softmax_pick(L.data.data() + i * V, V, targets[i]);
    }
    loss /= static_cast<double>(m_count);
    const int il = logits.id();
    int id = push(Tensor({1, 1}, {loss}), nodes_[il].needs_grad,
                  [il, targets, mask, t, V, m_count](Graph& g, int self) {
        if (!g.nodes_[il].needs_grad) return;
        const double gc = g.nodes_[self].grad.data[0];
        const Tensor& L2 = g.val_of(il);
        Tensor& gl = g.grad_buf(il);
        const double invm = gc / static_cast<double>(m_count);
        Tensor probs_row({1, V});
        for (std::int64_t i = 0; i < t; ++i) {
            if (!mask[i]) continue;
            std::memcpy(probs_row.data.data(), L2.data.data() + i * V,
                        static_cast<std::size_t>(V) * sizeof(double));
            softmax_rows_inplace(probs_row);
            double* gi = gl.data.data() + i * V;
            for (std::int64_t j = 0; j < V; ++j) gi[j] += invm * probs_row.data[j];
            gi[targets[i]] -= invm;
        }
    });
    return wrap(id);
}

void Graph::backward(Var loss) {
    if (!grad_enabled_) throw ModelError("backward on a no-grad graph");
    check_same_graph(loss);
    const Tensor& lv = loss.val();
    if (lv.numel() != 1) throw ShapeError("backward: loss must be scalar, got " + lv.shape_str());
    Node& ln = nodes_[static_cast<std::size_t>(loss.id())];
    if (!ln.needs_grad)
        throw ModelError("backward: loss does not depend on any trainable parameter");
    grad_buf(loss.id()).data[0] = 1.0;
    for (int id = loss.id(); id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.grad_set) continue;
        ++n.visits;
        if (n.back) n.back(*this, id);
        if (n.param && n.param->trainable) axpy(n.param->grad, n.grad);
    }
}

int Graph::backward_visits(Var v) const {
    check_same_graph(v);
    return nodes_[static_cast<std::size_t>(v.id())].visits;
}

bool Graph::node_has_grad(Var v) const {
    check_same_graph(v);
    return nodes_[static_cast<std::size_t>(v.id())].grad_set;
}

}  // namespace alm
