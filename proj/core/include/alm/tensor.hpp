#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace alm {

// Dense row-major tensor of doubles. Rank is arbitrary in principle but the
// math ops below work on rank <= 2; everything in this project is a matrix,
// a row vector, or a scalar.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> shape);
    Tensor(std::vector<std::int64_t> shape, std::vector<double> values);

    static Tensor zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::int64_t> shape, double value);
    static Tensor identity(std::int64_t n);
    static Tensor row(std::vector<double> values);  // [1 x n]

    std::int64_t numel() const;
    std::int64_t rank() const { return static_cast<std::int64_t>(shape.size()); }
    // Matrix view: scalars are 1x1, rank-1 tensors are 1xN rows.
    std::int64_t rows() const;
    std::int64_t cols() const;

    double& at(std::int64_t r, std::int64_t c);
    double at(std::int64_t r, std::int64_t c) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    std::string shape_str() const;  // e.g. "[3x4]"

    bool all_finite() const;
    void fill(double value);

    std::vector<std::int64_t> shape;
    std::vector<double> data;
};

// C (+)= op(A) * op(B). The one matmul kernel everything funnels through:
// forward products and both backward products of autodiff use it, so value
// determinism is a property of this single loop nest.
void gemm(bool trans_a, bool trans_b, const Tensor& a, const Tensor& b, Tensor& c,
          bool accumulate);

Tensor matmul_val(const Tensor& a, const Tensor& b);

// Shared elementwise/rowwise kernels used by both the autodiff graph and the
// no-grad inference path, so the two paths agree bitwise.
void softmax_rows_inplace(Tensor& x);
void layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps,
                     Tensor& out, Tensor* xhat = nullptr, Tensor* inv_sigma = nullptr);
double gelu_scalar(double x);
double gelu_grad_scalar(double x);
// log softmax of one row, returns the value at index `pick`.
double log_softmax_pick(const double* row, std::int64_t n, std::int64_t pick);

std::uint64_t tensor_digest(const Tensor& t, std::uint64_t h = 1469598103934665603ull);

}  // namespace alm
