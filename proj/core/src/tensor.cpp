#include "alm/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "alm/errors.hpp"
#include "alm/rng.hpp"

namespace alm {

namespace {
std::int64_t product(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw ShapeError("negative dimension in tensor shape");
        n *= d;
    }
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::int64_t> shape_in) : shape(std::move(shape_in)) {
    data.assign(static_cast<std::size_t>(product(shape)), 0.0);
}

Tensor::Tensor(std::vector<std::int64_t> shape_in, std::vector<double> values)
    : shape(std::move(shape_in)), data(std::move(values)) {
    if (product(shape) != static_cast<std::int64_t>(data.size()))
        throw ShapeError("tensor data length does not match shape " + shape_str());
}

Tensor Tensor::full(std::vector<std::int64_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::identity(std::int64_t n) {
    Tensor t({n, n});
    for (std::int64_t i = 0; i < n; ++i) t.data[static_cast<std::size_t>(i * n + i)] = 1.0;
    return t;
}

Tensor Tensor::row(std::vector<double> values) {
    const std::int64_t n = static_cast<std::int64_t>(values.size());
    return Tensor({1, n}, std::move(values));
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(data.size()); }

std::int64_t Tensor::rows() const {
    if (shape.empty()) return 1;
    if (shape.size() == 1) return 1;
    if (shape.size() == 2) return shape[0];
    throw ShapeError("matrix view requires rank <= 2, got " + shape_str());
}

std::int64_t Tensor::cols() const {
    if (shape.empty()) return 1;
    if (shape.size() == 1) return shape[0];
    if (shape.size() == 2) return shape[1];
    throw ShapeError("matrix view requires rank <= 2, got " + shape_str());
}

double& Tensor::at(std::int64_t r, std::int64_t c) {
    return data[static_cast<std::size_t>(r * cols() + c)];
}

double Tensor::at(std::int64_t r, std::int64_t c) const {
    return data[static_cast<std::size_t>(r * cols() + c)];
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    if (shape.empty()) os << "scalar";
    os << ']';
    return os.str();
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(double value) {
    for (double& v : data) v = value;
}

void gemm(bool trans_a, bool trans_b, const Tensor& a, const Tensor& b, Tensor& c,
          bool accumulate) {
    const std::int64_t m = trans_a ? a.cols() : a.rows();
    const std::int64_t k = trans_a ? a.rows() : a.cols();
    const std::int64_t kb = trans_b ? b.cols() : b.rows();
    const std::int64_t n = trans_b ? b.rows() : b.cols();
    if (k != kb)
        throw ShapeError("matmul: inner dimensions disagree, lhs " + a.shape_str() +
                         (trans_a ? "^T" : "") + " vs rhs " + b.shape_str() +
                         (trans_b ? "^T" : ""));
    if (c.rows() != m || c.cols() != n || c.numel() != m * n) {
        c = Tensor({m, n});
    } else if (!accumulate) {
        std::memset(c.data.data(), 0, c.data.size() * sizeof(double));
    }

    const double* A = a.data.data();
    const double* B = b.data.data();
    double* C = c.data.data();
    const std::int64_t lda = a.cols();
    const std::int64_t ldb = b.cols();

    if (!trans_a && !trans_b) {
        // ikj order: unit-stride on B and C.
        for (std::int64_t i = 0; i < m; ++i) {
            double* ci = C + i * n;
            const double* ai = A + i * lda;
            for (std::int64_t t = 0; t < k; ++t) {
                const double av = ai[t];
                if (av == 0.0) continue;
                const double* bt = B + t * ldb;
                for (std::int64_t j = 0; j < n; ++j) ci[j] += av * bt[j];
            }
        }
    } else if (!trans_a && trans_b) {
        // C[i,j] = sum_t A[i,t] * B[j,t]: both rows contiguous.
        for (std::int64_t i = 0; i < m; ++i) {
            const double* ai = A + i * lda;
            double* ci = C + i * n;
            for (std::int64_t j = 0; j < n; ++j) {
                const double* bj = B + j * ldb;
                double acc = 0.0;
                for (std::int64_t t = 0; t < k; ++t) acc += ai[t] * bj[t];
                ci[j] += acc;
            }
        }
    } else if (trans_a && !trans_b) {
        for (std::int64_t t = 0; t < k; ++t) {
            const double* at = A + t * lda;
            const double* bt = B + t * ldb;
            for (std::int64_t i = 0; i < m; ++i) {
                const double av = at[i];
                if (av == 0.0) continue;
                double* ci = C + i * n;
                for (std::int64_t j = 0; j < n; ++j) ci[j] += av * bt[j];
            }
        }
    } else {
        for (std::int64_t i = 0; i < m; ++i) {
            double* ci = C + i * n;
            for (std::int64_t j = 0; j < n; ++j) {
                const double* bj = B + j * ldb;
                double acc = 0.0;
                for (std::int64_t t = 0; t < k; ++t) acc += A[t * lda + i] * bj[t];
                ci[j] += acc;
            }
        }
    }
}

Tensor matmul_val(const Tensor& a, const Tensor& b) {
    Tensor c({a.rows(), b.cols()});
    gemm(false, false, a, b, c, false);
    return c;
}

void softmax_rows_inplace(Tensor& x) {
    const std::int64_t m = x.rows(), n = x.cols();
    for (std::int64_t i = 0; i < m; ++i) {
        double* row = x.data.data() + i * n;
        double mx = row[0];
        for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        const double inv = 1.0 / sum;
        for (std::int64_t j = 0; j < n; ++j) row[j] *= inv;
    }
}

void layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps,
                     Tensor& out, Tensor* xhat, Tensor* inv_sigma) {
    const std::int64_t m = x.rows(), d = x.cols();
    if (gain.numel() != d || bias.numel() != d)
        throw ShapeError("layer_norm: gain/bias length must equal feature dim " +
                         std::to_string(d));
    out = Tensor({m, d});
    if (xhat) *xhat = Tensor({m, d});
    if (inv_sigma) *inv_sigma = Tensor({m, 1});
    for (std::int64_t i = 0; i < m; ++i) {
        const double* xi = x.data.data() + i * d;
        double mean = 0.0;
        for (std::int64_t j = 0; j < d; ++j) mean += xi[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            const double dv = xi[j] - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        if (inv_sigma) inv_sigma->data[static_cast<std::size_t>(i)] = is;
        double* oi = out.data.data() + i * d;
        for (std::int64_t j = 0; j < d; ++j) {
            const double xh = (xi[j] - mean) * is;
            if (xhat) xhat->data[static_cast<std::size_t>(i * d + j)] = xh;
            oi[j] = gain.data[static_cast<std::size_t>(j)] * xh +
                    bias.data[static_cast<std::size_t>(j)];
        }
    }
}

double gelu_scalar(double x) {
    // tanh approximation
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    const double u = c * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad_scalar(double x) {
    constexpr double c = 0.7978845608028654;
    const double u = c * (x + 0.044715 * x * x * x);
    const double t = std::tanh(u);
    const double du = c * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

double log_softmax_pick(const double* row, std::int64_t n, std::int64_t pick) {
    double mx = row[0];
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::int64_t j = 0; j < n; ++j) sum += std::exp(row[j] - mx);
    return row[pick] - mx - std::log(sum);
}

std::uint64_t tensor_digest(const Tensor& t, std::uint64_t h) {
    for (auto d : t.shape) h = fnv1a_u64(static_cast<std::uint64_t>(d), h);
    for (double v : t.data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        h = fnv1a_u64(bits, h);
    }
    return h;
}

}  // namespace alm
