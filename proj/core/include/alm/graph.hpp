#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "alm/tensor.hpp"

namespace alm {

// A named trainable (or frozen) tensor with its gradient accumulator.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Tensor v, bool train = true)
        : name(std::move(n)), value(std::move(v)), grad(value.shape), trainable(train) {}

    void zero_grad() { grad.fill(0.0); }
};

class Graph;

// Non-owning handle to a node in a Graph.
class Var {
public:
    Var() = default;
    bool defined() const { return g_ != nullptr; }
    const Tensor& val() const;
    const Tensor& grad() const;
    int id() const { return id_; }

private:
    friend class Graph;
    Var(Graph* g, int id) : g_(g), id_(id) {}
    Graph* g_ = nullptr;
    int id_ = -1;
};

// Reverse-mode tape. Nodes are recorded in creation order, which is a
// topological order of the dataflow; backward() walks it once in reverse.
// A graph built with grad_enabled=false computes identical values but
// records no backward closures (used for probes and generation prefill).
class Graph {
public:
    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool grad_enabled() const { return grad_enabled_; }

    // ---- leaves ----
    Var leaf(Parameter& p);
    Var constant(Tensor t);
    Var constant_view(const Tensor* t);  // caller keeps t alive for graph lifetime

    // ---- ops ----
    Var matmul(Var a, Var b);     // a · b
    Var matmul_nt(Var a, Var b);  // a · b^T
    Var add(Var a, Var b);
    Var add_rowvec(Var a, Var v);  // [m x n] + broadcast [1 x n]
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var add_const(Var a, const Tensor& c);
    Var softmax_rows(Var a);
    Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
    Var gelu(Var a);
    Var slice_rows(Var a, std::int64_t r0, std::int64_t n);
    Var slice_cols(Var a, std::int64_t c0, std::int64_t n);
    Var concat_rows(const std::vector<Var>& parts);
    Var concat_cols(const std::vector<Var>& parts);
    Var embed_rows(Var table, const std::vector<int>& ids);
    Var sum(Var a);
    // Mean over unmasked positions of -log softmax(logits)[target].
    Var cross_entropy(Var logits, const std::vector<int>& targets,
                      const std::vector<std::uint8_t>& mask);

    // Backward from a scalar loss; accumulates into Parameter::grad for every
    // reachable trainable leaf.
    void backward(Var loss);

    // Introspection (tests).
    std::size_t node_count() const { return nodes_.size(); }
    int backward_visits(Var v) const;
    bool node_has_grad(Var v) const;

private:
    struct Node {
        Tensor store;              // owned value (unused for view leaves)
        const Tensor* view = nullptr;  // points at store or an external tensor
        Tensor grad;
        bool needs_grad = false;
        bool grad_set = false;
        int visits = 0;
        Parameter* param = nullptr;
        std::function<void(Graph&, int)> back;
    };

    const Tensor& val_of(int id) const { return *nodes_[static_cast<std::size_t>(id)].view; }
    Tensor& grad_buf(int id);
    void add_grad(int id, const Tensor& g);
    int push(Tensor value, bool needs, std::function<void(Graph&, int)> back);
    Var wrap(int id) { return Var(this, id); }
    void check_same_graph(Var v) const;

    std::deque<Node> nodes_;
    bool grad_enabled_;

    friend class Var;
};

}  // namespace alm
