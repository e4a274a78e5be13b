#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "casa/errors.hpp"

namespace casa {

// Dense row-major matrix of doubles. Small and boring on purpose: every
// trainable computation in the project runs through these and the autodiff
// tape, so the op set stays minimal.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
        if (rows <= 0 || cols <= 0) throw ShapeMismatch("matrix dims must be positive");
    }
    Matrix(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (rows <= 0 || cols <= 0) throw ShapeMismatch("matrix dims must be positive");
        if (data_.size() != static_cast<std::size_t>(rows) * cols)
            throw ShapeMismatch("data length does not match rows*cols");
    }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

std::string shape_str(const Matrix& m);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix scale(const Matrix& a, double s);
// Softmax of each row of a/temperature.
Matrix row_softmax(const Matrix& a, double temperature);
// Elementwise elu(x)+1: x+1 for x>0, exp(x) otherwise. Strictly positive.
Matrix elu_plus_one(const Matrix& a);
// Column vector of L2 norms of each row.
Matrix l2_norm_rows(const Matrix& a);
double sum(const Matrix& a);
double mean(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace casa
