#pragma once

#include <map>
#include <string>
#include <vector>

#include "casa/matrix.hpp"
#include "casa/rng.hpp"

namespace casa {

// Bias-corrected ADAM over a named parameter set.
struct AdamState {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;
    std::map<std::string, Matrix> m;
    std::map<std::string, Matrix> v;
};

// One ADAM step; params mutated in place. Moment matrices are created lazily
// on first use and must match parameter shapes afterwards.
void adam_step(AdamState& state, std::map<std::string, Matrix>& params,
               const std::map<std::string, Matrix>& grads);

struct CholeskyResult {
    Matrix L;
    double jitter_used = 0.0;
};

// Lower-triangular factor of C + jitter*I. If the factorization fails the
// jitter escalates by x10 (starting at 1e-10 when the initial jitter is 0)
// up to 1e-4 before throwing NotPositiveDefinite.
CholeskyResult cholesky(const Matrix& c, double jitter = 0.0);

// L * g for standard-normal g; one draw of MN(0, L L^T).
std::vector<double> mvn_sample(const Matrix& L, Rng& rng);

// Minimizes ||Ax - b||^2 + ridge*||x||^2 via the normal equations.
Matrix least_squares(const Matrix& a, const Matrix& b, double ridge = 1e-8);

// Solves (L L^T) x = b given the lower-triangular factor L.
Matrix cholesky_solve(const Matrix& L, const Matrix& b);

struct SymEig {
    std::vector<double> values;  // descending
    Matrix vectors;              // columns are eigenvectors, same order
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix.
SymEig sym_eig(const Matrix& a, int max_sweeps = 64);

}  // namespace casa
