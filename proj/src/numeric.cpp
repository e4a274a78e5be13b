#include "casa/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace casa {

void adam_step(AdamState& state, std::map<std::string, Matrix>& params,
               const std::map<std::string, Matrix>& grads) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        const Matrix& g = git->second;
        if (!g.same_shape(p))
            throw ShapeMismatch("adam_step gradient for " + name + ": " + shape_str(g) +
                                " vs param " + shape_str(p));
        Matrix& m = state.m.try_emplace(name, p.rows(), p.cols()).first->second;
        Matrix& v = state.v.try_emplace(name, p.rows(), p.cols()).first->second;
        if (!m.same_shape(p) || !v.same_shape(p))
            throw ShapeMismatch("adam_step moment shape for " + name);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g.raw()[i];
            m.raw()[i] = state.beta1 * m.raw()[i] + (1.0 - state.beta1) * gi;
            v.raw()[i] = state.beta2 * v.raw()[i] + (1.0 - state.beta2) * gi * gi;
            const double mhat = m.raw()[i] / bc1;
            const double vhat = v.raw()[i] / bc2;
            p.raw()[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

namespace {

bool try_cholesky(const Matrix& c, double jitter, Matrix& out) {
    const int n = c.rows();
    out = Matrix(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = c(i, j) + (i == j ? jitter : 0.0);
            for (int k = 0; k < j; ++k) s -= out(i, k) * out(j, k);
            if (i == j) {
                if (s <= 0.0 || !std::isfinite(s)) return false;
                out(i, j) = std::sqrt(s);
            } else {
                out(i, j) = s / out(j, j);
            }
        }
    }
    return true;
}

}  // namespace

CholeskyResult cholesky(const Matrix& c, double jitter) {
    if (c.rows() != c.cols()) throw ShapeMismatch("cholesky of non-square " + shape_str(c));
    for (int i = 0; i < c.rows(); ++i)
        for (int j = 0; j < i; ++j)
            if (std::fabs(c(i, j) - c(j, i)) > 1e-9 * std::max(1.0, std::fabs(c(i, j))))
                throw ShapeMismatch("cholesky requires a symmetric matrix");
    double j = jitter;
    while (true) {
        Matrix L;
        if (try_cholesky(c, j, L)) return {std::move(L), j};
        if (j >= 1e-4) break;
        j = j == 0.0 ? 1e-10 : j * 10.0;
    }
    throw NotPositiveDefinite("cholesky failed up to jitter 1e-4");
}

std::vector<double> mvn_sample(const Matrix& L, Rng& rng) {
    const int n = L.rows();
    std::vector<double> g(n);
    for (double& x : g) x = rng.normal();
    std::vector<double> out(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k <= i; ++k) s += L(i, k) * g[k];
        out[i] = s;
    }
    return out;
}

Matrix cholesky_solve(const Matrix& L, const Matrix& b) {
    if (L.rows() != b.rows()) throw ShapeMismatch("cholesky_solve " + shape_str(L) + " vs " + shape_str(b));
    const int n = L.rows();
    Matrix y(n, b.cols());
    for (int c = 0; c < b.cols(); ++c) {
        for (int i = 0; i < n; ++i) {
            double s = b(i, c);
            for (int k = 0; k < i; ++k) s -= L(i, k) * y(k, c);
            y(i, c) = s / L(i, i);
        }
    }
    Matrix x(n, b.cols());
    for (int c = 0; c < b.cols(); ++c) {
        for (int i = n - 1; i >= 0; --i) {
            double s = y(i, c);
            for (int k = i + 1; k < n; ++k) s -= L(k, i) * x(k, c);
            x(i, c) = s / L(i, i);
        }
    }
    return x;
}

Matrix least_squares(const Matrix& a, const Matrix& b, double ridge) {
    if (a.rows() != b.rows()) throw ShapeMismatch("least_squares " + shape_str(a) + " vs " + shape_str(b));
    Matrix at = transpose(a);
    Matrix ata = matmul(at, a);
    for (int i = 0; i < ata.rows(); ++i) ata(i, i) += ridge;
    Matrix atb = matmul(at, b);
    CholeskyResult f = cholesky(ata, 0.0);
    return cholesky_solve(f.L, atb);
}

SymEig sym_eig(const Matrix& a, int max_sweeps) {
    if (a.rows() != a.cols()) throw ShapeMismatch("sym_eig of non-square " + shape_str(a));
    const int n = a.rows();
    Matrix d = a;
    Matrix v = Matrix::identity(n);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += d(i, j) * d(i, j);
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::fabs(d(p, q)) < 1e-300) continue;
                const double theta = (d(q, q) - d(p, p)) / (2.0 * d(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double dkp = d(k, p), dkq = d(k, q);
                    d(k, p) = c * dkp - s * dkq;
                    d(k, q) = s * dkp + c * dkq;
                }
                for (int k = 0; k < n; ++k) {
                    const double dpk = d(p, k), dqk = d(q, k);
                    d(p, k) = c * dpk - s * dqk;
                    d(q, k) = s * dpk + c * dqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) { return d(x, x) > d(y, y); });
    SymEig out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (int c = 0; c < n; ++c) {
        out.values[c] = d(order[c], order[c]);
        for (int r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
    }
    return out;
}

}  // namespace casa
