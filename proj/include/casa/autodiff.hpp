#pragma once

#include <functional>
#include <vector>

#include "casa/matrix.hpp"

namespace casa {

class Tape;

// Handle to a tape node. Cheap to copy; valid only for the owning tape's
// lifetime.
struct Var {
    int id = -1;
};

// Append-only reverse-mode autodiff tape. One forward+backward pass owns a
// tape exclusively; nodes are visited in reverse insertion order on backward.
class Tape {
public:
    Var leaf(Matrix value);

    const Matrix& value(Var v) const { return nodes_[v.id].value; }
    const Matrix& grad(Var v) const { return nodes_[v.id].grad; }

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var transpose(Var a);
    Var scale(Var a, double s);
    Var relu(Var a);
    Var elu_plus_one(Var a);
    Var log(Var a);
    Var row_softmax(Var a, double temperature);
    // m (R x C) + bias (1 x C) broadcast over rows.
    Var add_row_broadcast(Var m, Var bias);
    // Sum over rows -> 1 x C.
    Var sum_rows(Var a);
    Var sum(Var a);   // -> 1x1
    Var mean(Var a);  // -> 1x1
    Var l2_norm_rows(Var a);
    // D[i][j] = sqrt(sum_k (A[i][k]-B[j][k])^2 + eps); A: NxD, B: MxD -> NxM.
    Var pairwise_l2(Var a, Var b, double eps = 1e-12);
    Var select_rows(Var a, std::vector<int> rows);
    Var slice_cols(Var a, int start, int count);
    Var concat_cols(const std::vector<Var>& parts);
    // m (R x C) divided rowwise by col (R x 1).
    Var rowwise_div(Var m, Var col);
    Var diag(Var a);  // NxN -> Nx1

    // Accumulate d(loss)/d(node) into every node's grad. Loss must be 1x1.
    void backward(Var loss);

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(Tape&)> backprop;
    };

    Matrix& mutable_grad(int id) { return nodes_[id].grad; }
    Var push(Matrix value, std::function<void(Tape&)> backprop);

    std::vector<Node> nodes_;

    friend struct TapeAccess;
};

}  // namespace casa
