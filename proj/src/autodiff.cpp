#include "casa/autodiff.hpp"

#include <cmath>
#include <utility>

namespace casa {

Var Tape::push(Matrix value, std::function<void(Tape&)> backprop) {
    Node n;
    n.grad = Matrix(value.rows(), value.cols());
    n.value = std::move(value);
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Matrix value) { return push(std::move(value), nullptr); }

void Tape::backward(Var loss) {
    if (value(loss).rows() != 1 || value(loss).cols() != 1)
        throw NonScalarLoss("backward requires a 1x1 loss, got " + shape_str(value(loss)));
    mutable_grad(loss.id)(0, 0) += 1.0;
    for (int i = loss.id; i >= 0; --i) {
        if (nodes_[i].backprop) nodes_[i].backprop(*this);
    }
}

Var Tape::matmul(Var a, Var b) {
    Var out = push(casa::matmul(value(a), value(b)), nullptr);
    nodes_[out.id].backprop = [a, b, out](Tape& t) {
        const Matrix& g = t.grad(out);
        const Matrix& av = t.value(a);
        const Matrix& bv = t.value(b);
        Matrix& da = t.mutable_grad(a.id);
        Matrix& db = t.mutable_grad(b.id);
        // da += g * b^T
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < bv.rows(); ++j) {
                double acc = 0.0;
                for (int k = 0; k < g.cols(); ++k) acc += g(i, k) * bv(j, k);
                da(i, j) += acc;
            }
        // db += a^T * g
        for (int p = 0; p < av.rows(); ++p)
            for (int i = 0; i < av.cols(); ++i) {
                const double x = av(p, i);
                if (x == 0.0) continue;
                for (int j = 0; j < g.cols(); ++j) db(i, j) += x * g(p, j);
            }
    };
    return out;
}

Var Tape::add(Var a, Var b) {
    Var out = push(casa::add(value(a), value(b)), nullptr);
    nodes_[out.id].backprop = [a, b, out](Tape& t) {
        const Matrix& g = t.grad(out);
        t.mutable_grad(a.id) = casa::add(t.grad(a), g);
        t.mutable_grad(b.id) = casa::add(t.grad(b), g);
    };
    return out;
}

Var Tape::sub(Var a, Var b) {
    Var out = push(casa::sub(value(a), value(b)), nullptr);
    nodes_[out.id].backprop = [a, b, out](Tape& t) {
        const Matrix& g = t.grad(out);
        t.mutable_grad(a.id) = casa::add(t.grad(a), g);
        t.mutable_grad(b.id) = casa::sub(t.grad(b), g);
    };
    return out;
}

Var Tape::hadamard(Var a, Var b) {
    Var out = push(casa::hadamard(value(a), value(b)), nullptr);
    nodes_[out.id].backprop = [a, b, out](Tape& t) {
        const Matrix& g = t.grad(out);
        t.mutable_grad(a.id) = casa::add(t.grad(a), casa::hadamard(g, t.value(b)));
        t.mutable_grad(b.id) = casa::add(t.grad(b), casa::hadamard(g, t.value(a)));
    };
    return out;
}

Var Tape::transpose(Var a) {
    Var out = push(casa::transpose(value(a)), nullptr);
    nodes_[out.id].backprop = [a, out](Tape& t) {
        t.mutable_grad(a.id) = casa::add(t.grad(a), casa::transpose(t.grad(out)));
    };
    return out;
}

Var Tape::scale(Var a, double s) {
    Var out = push(casa::scale(value(a), s), nullptr);
    nodes_[out.id].backprop = [a, out, s](Tape& t) {
        t.mutable_grad(a.id) = casa::add(t.grad(a), casa::scale(t.grad(out), s));
    };
    return out;
}

Var Tape::relu(Var a) {
    Matrix v = value(a);
    for (double& x : v.raw()) x = x > 0.0 ? x : 0.0;
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backprop = [a, out](Tape& t) {
        const Matrix& g = t.grad(out);
        const Matrix& x = t.value(a);
        Matrix& da = t.mutable_grad(a.id);
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x.raw()[i] > 0.0) da.raw()[i] += g.raw()[i];
    };
    return out;
}

Var Tape::elu_plus_one(Var a) {
    Var out = push(casa::elu_plus_one(value(a)), nullptr);
    nodes_[out.id].backprop = [a, out](Tape& t) {
        const Matrix& g = t.grad(out);
        const Matrix& x = t.value(a);
        Matrix& da = t.mutable_grad(a.id);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x.raw()[i] > 0.0 ? 1.0 : std::exp(x.raw()[i]);
            da.raw()[i] += g.raw()[i] * d;
        }
    };
    return out;
}

Var Tape::log(Var a) {
    Matrix v = value(a);
    for (double& x : v.raw()) x = std::log(x);
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backprop = [a, out](Tape& t) {
        const Matrix& g = t.grad(out);
        const Matrix& x = t.value(a);
        Matrix& da = t.mutable_grad(a.id);
        for (std::size_t i = 0; i < x.size(); ++i) da.raw()[i] += g.raw()[i] / x.raw()[i];
    };
    return out;
}

Var Tape::row_softmax(Var a, double temperature) {
    Var out = push(casa::row_softmax(value(a), temperature), nullptr);
    nodes_[out.id].backprop = [a, out, temperature](Tape& t) {
        const Matrix& g = t.grad(out);
        const Matrix& y = t.value(out);
        Matrix& da = t.mutable_grad(a.id);
        for (int i = 0; i < y.rows(); ++i) {
            double dot = 0.0;
            for (int j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
            for (int j = 0; j < y.cols(); ++j)
                da(i, j) += y(i, j) * (g(i, j) - dot) / temperature;
        }
    };
    return out;
}

Var Tape::add_row_broadcast(Var m, Var bias) {
    const Matrix& mv = value(m);
    const Matrix& bv = value(bias);
    if (bv.rows() != 1 || bv.cols() != mv.cols())
        throw ShapeMismatch("add_row_broadcast " + shape_str(mv) + " + " + shape_str(bv));
    Matrix v = mv;
    for (int i = 0; i < v.rows(); ++i)
        for (int j = 0; j < v.cols(); ++j) v(i, j) += bv(0, j);
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backprop = [m, bias, out](Tape& t) {
        const Matrix& g = t.grad(out);
        t.mutable_grad(m.id) = casa::add(t.grad(m), g);
        Matrix& db = t.mutable_grad(bias.id);
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) db(0, j) += g(i, j);
    };
    return out;
}

Var Tape::sum_rows(Var a) {
    const Matrix& av = value(a);
    Matrix v(1, av.cols());
    for (int i = 0; i < av.rows(); ++i)
        for (int j = 0; j < av.cols(); ++j) v(0, j) += av(i, j);
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backprop = [a, out](Tape& t) {
        const Matrix& g = t.grad(out);
        Matrix& da = t.mutable_grad(a.id);
        for (int i = 0; i < da.rows(); ++i)
            for (int j = 0; j < da.cols(); ++j) da(i, j) += g(0, j);
    };
    return out;
}

Var Tape::sum(Var a) {
    Matrix v(1, 1);
    v(0, 0) = casa::sum(value(a));
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backprop = [a, out](Tape& t) {
        const double g = t.grad(out)(0, 0);
        Matrix& da = t.mutable_grad(a.id);
        for (double& x : da.raw()) x += g;
    };
    return out;
}

Var Tape::mean(Var a) {
    Matrix v(1, 1);
    v(0, 0) = casa::mean(value(a));
    const double inv = 1.0 / static_cast<double>(value(a).size());
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backprop = [a, out, inv](Tape& t) {
        const double g = t.grad(out)(0, 0) * inv;
        Matrix& da = t.mutable_grad(a.id);
        for (double& x : da.raw()) x += g;
    };
    return out;
}

Var Tape::l2_norm_rows(Var a) {
    Var out = push(casa::l2_norm_rows(value(a)), nullptr);
    nodes_[out.id].backprop = [a, out](Tape& t) {
        const Matrix& g = t.grad(out);
        const Matrix& x = t.value(a);
        const Matrix& y = t.value(out);
        Matrix& da = t.mutable_grad(a.id);
        for (int i = 0; i < x.rows(); ++i) {
            const double denom = y(i, 0) > 1e-300 ? y(i, 0) : 1e-300;
            for (int j = 0; j < x.cols(); ++j) da(i, j) += g(i, 0) * x(i, j) / denom;
        }
    };
    return out;
}

Var Tape::pairwise_l2(Var a, Var b, double eps) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (av.cols() != bv.cols())
        throw ShapeMismatch("pairwise_l2 " + shape_str(av) + " vs " + shape_str(bv));
    Matrix v(av.rows(), bv.rows());
    for (int i = 0; i < av.rows(); ++i) {
        for (int j = 0; j < bv.rows(); ++j) {
            double s = eps;
            for (int k = 0; k < av.cols(); ++k) {
                const double d = av(i, k) - bv(j, k);
                s += d * d;
            }
            v(i, j) = std::sqrt(s);
        }
    }
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backprop = [a, b, out](Tape& t) {
        const Matrix& g = t.grad(out);
        const Matrix& av2 = t.value(a);
        const Matrix& bv2 = t.value(b);
        const Matrix& d = t.value(out);
        Matrix& da = t.mutable_grad(a.id);
        Matrix& db = t.mutable_grad(b.id);
        for (int i = 0; i < av2.rows(); ++i) {
            for (int j = 0; j < bv2.rows(); ++j) {
                const double w = g(i, j) / d(i, j);
                if (w == 0.0) continue;
                for (int k = 0; k < av2.cols(); ++k) {
                    const double diff = (av2(i, k) - bv2(j, k)) * w;
                    da(i, k) += diff;
                    db(j, k) -= diff;
                }
            }
        }
    };
    return out;
}

Var Tape::select_rows(Var a, std::vector<int> rows) {
    const Matrix& av = value(a);
    Matrix v(static_cast<int>(rows.size()), av.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] < 0 || rows[r] >= av.rows())
            throw IndexOutOfRange("select_rows index " + std::to_string(rows[r]));
        for (int j = 0; j < av.cols(); ++j) v(static_cast<int>(r), j) = av(rows[r], j);
    }
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backprop = [a, out, rows = std::move(rows)](Tape& t) {
        const Matrix& g = t.grad(out);
        Matrix& da = t.mutable_grad(a.id);
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (int j = 0; j < g.cols(); ++j) da(rows[r], j) += g(static_cast<int>(r), j);
    };
    return out;
}

Var Tape::slice_cols(Var a, int start, int count) {
    const Matrix& av = value(a);
    if (start < 0 || count <= 0 || start + count > av.cols())
        throw ShapeMismatch("slice_cols [" + std::to_string(start) + ", +" + std::to_string(count) +
                            ") of " + shape_str(av));
    Matrix v(av.rows(), count);
    for (int i = 0; i < av.rows(); ++i)
        for (int j = 0; j < count; ++j) v(i, j) = av(i, start + j);
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backprop = [a, out, start, count](Tape& t) {
        const Matrix& g = t.grad(out);
        Matrix& da = t.mutable_grad(a.id);
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < count; ++j) da(i, start + j) += g(i, j);
    };
    return out;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat_cols of zero parts");
    int cols = 0;
    const int rows = value(parts[0]).rows();
    for (Var p : parts) {
        if (value(p).rows() != rows) throw ShapeMismatch("concat_cols row mismatch");
        cols += value(p).cols();
    }
    Matrix v(rows, cols);
    int off = 0;
    for (Var p : parts) {
        const Matrix& pv = value(p);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < pv.cols(); ++j) v(i, off + j) = pv(i, j);
        off += pv.cols();
    }
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backprop = [parts, out](Tape& t) {
        const Matrix& g = t.grad(out);
        int off2 = 0;
        for (Var p : parts) {
            Matrix& dp = t.mutable_grad(p.id);
            for (int i = 0; i < dp.rows(); ++i)
                for (int j = 0; j < dp.cols(); ++j) dp(i, j) += g(i, off2 + j);
            off2 += dp.cols();
        }
    };
    return out;
}

Var Tape::rowwise_div(Var m, Var col) {
    const Matrix& mv = value(m);
    const Matrix& cv = value(col);
    if (cv.cols() != 1 || cv.rows() != mv.rows())
        throw ShapeMismatch("rowwise_div " + shape_str(mv) + " / " + shape_str(cv));
    Matrix v = mv;
    for (int i = 0; i < v.rows(); ++i)
        for (int j = 0; j < v.cols(); ++j) v(i, j) /= cv(i, 0);
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backprop = [m, col, out](Tape& t) {
        const Matrix& g = t.grad(out);
        const Matrix& mv2 = t.value(m);
        const Matrix& cv2 = t.value(col);
        Matrix& dm = t.mutable_grad(m.id);
        Matrix& dc = t.mutable_grad(col.id);
        for (int i = 0; i < g.rows(); ++i) {
            const double c = cv2(i, 0);
            double acc = 0.0;
            for (int j = 0; j < g.cols(); ++j) {
                dm(i, j) += g(i, j) / c;
                acc += g(i, j) * mv2(i, j);
            }
            dc(i, 0) -= acc / (c * c);
        }
    };
    return out;
}

Var Tape::diag(Var a) {
    const Matrix& av = value(a);
    if (av.rows() != av.cols()) throw ShapeMismatch("diag of non-square " + shape_str(av));
    Matrix v(av.rows(), 1);
    for (int i = 0; i < av.rows(); ++i) v(i, 0) = av(i, i);
    Var out = push(std::move(v), nullptr);
    nodes_[out.id].backprop = [a, out](Tape& t) {
        const Matrix& g = t.grad(out);
        Matrix& da = t.mutable_grad(a.id);
        for (int i = 0; i < g.rows(); ++i) da(i, i) += g(i, 0);
    };
    return out;
}

}  // namespace casa
