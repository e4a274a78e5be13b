#include "casa/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace casa {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeMismatch("matmul " + shape_str(a) + " * " + shape_str(b));
    Matrix out(a.rows(), b.cols());
    const int m = a.rows(), k = a.cols(), n = b.cols();
    // ikj order keeps the inner loop contiguous over b and out.
    for (int i = 0; i < m; ++i) {
        double* orow = out.data() + static_cast<std::size_t>(i) * n;
        const double* arow = a.data() + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b.data() + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeMismatch("add " + shape_str(a) + " + " + shape_str(b));
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.raw()[i] += b.raw()[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeMismatch("sub " + shape_str(a) + " - " + shape_str(b));
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.raw()[i] -= b.raw()[i];
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeMismatch("hadamard " + shape_str(a) + " . " + shape_str(b));
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.raw()[i] *= b.raw()[i];
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Matrix scale(const Matrix& a, double s) {
    Matrix out = a;
    for (double& v : out.raw()) v *= s;
    return out;
}

Matrix row_softmax(const Matrix& a, double temperature) {
    if (temperature <= 0.0) throw ShapeMismatch("row_softmax temperature must be positive");
    Matrix out(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i) {
        double mx = -HUGE_VAL;
        for (int j = 0; j < a.cols(); ++j) mx = std::max(mx, a(i, j) / temperature);
        double denom = 0.0;
        for (int j = 0; j < a.cols(); ++j) {
            out(i, j) = std::exp(a(i, j) / temperature - mx);
            denom += out(i, j);
        }
        for (int j = 0; j < a.cols(); ++j) out(i, j) /= denom;
    }
    return out;
}

Matrix elu_plus_one(const Matrix& a) {
    Matrix out = a;
    for (double& v : out.raw()) v = v > 0.0 ? v + 1.0 : std::exp(v);
    return out;
}

Matrix l2_norm_rows(const Matrix& a) {
    Matrix out(a.rows(), 1);
    for (int i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) s += a(i, j) * a(i, j);
        out(i, 0) = std::sqrt(s);
    }
    return out;
}

double sum(const Matrix& a) {
    double s = 0.0;
    for (double v : a.raw()) s += v;
    return s;
}

double mean(const Matrix& a) { return sum(a) / static_cast<double>(a.size()); }

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeMismatch("max_abs_diff " + shape_str(a) + " vs " + shape_str(b));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.raw()[i] - b.raw()[i]));
    return m;
}

}  // namespace casa
