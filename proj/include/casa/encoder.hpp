#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "casa/autodiff.hpp"
#include "casa/matrix.hpp"
#include "casa/skeleton.hpp"

namespace casa {

struct ModelConfig {
    int input_dim = 0;              // d = 3*J
    int num_attention_layers = 4;   // N_att
    int num_heads = 4;              // must divide input_dim
    double temperature = 0.1;       // lambda_temp, used by the losses
    int projection_hidden_dim = 0;  // 0 -> input_dim
    double positional_base = 5000.0;

    int hidden_dim() const { return projection_hidden_dim > 0 ? projection_hidden_dim : input_dim; }
    void validate() const;
};

struct ModelParams {
    std::map<std::string, Matrix> weights;
};

// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] initialization, seeded.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Sinusoidal temporal encoding: row i, col 2l = sin(w_l*i), col 2l+1 =
// cos(w_l*i) with w_l = base^(-2l/d). Odd d is padded internally.
Matrix positional_encoding(int frames, int dim, double base = 5000.0);

// Kernelized attention with feature map phi(x) = elu(x)+1, per head:
//   out_i = [phi(q_i)^T sum_j phi(k_j) v_j^T] / [phi(q_i)^T sum_j phi(k_j)].
// Heads are concatenated; the caller applies the output projection.
Matrix linear_attention(const Matrix& q, const Matrix& k, const Matrix& v, int heads);

struct EmbeddingSequence {
    Matrix U;  // pre-projection embeddings, one row per frame
    Matrix Z;  // projection-head outputs
};

// Tape-level forward pass used by both training and inference.
struct EncodeVars {
    Var u_a, z_a, u_b, z_b;
};
EncodeVars encode_on_tape(Tape& tape, const Matrix& xa, const Matrix& xb,
                          const std::map<std::string, Var>& params, const ModelConfig& cfg);

std::map<std::string, Var> params_on_tape(Tape& tape, const ModelParams& params);

std::pair<EmbeddingSequence, EmbeddingSequence> encode_pair(const SkeletonSequence& a,
                                                            const SkeletonSequence& b,
                                                            const ModelParams& params,
                                                            const ModelConfig& cfg);

// encode_pair(a, a), first output.
EmbeddingSequence encode_single(const SkeletonSequence& a, const ModelParams& params,
                                const ModelConfig& cfg);

// encode_pair on the prefix a[0..t] with the full reference b.
std::pair<EmbeddingSequence, EmbeddingSequence> encode_causal(const SkeletonSequence& a,
                                                              const SkeletonSequence& b,
                                                              const ModelParams& params,
                                                              const ModelConfig& cfg, int t);

// Checkpoint file: JSON with format_version, config, params, rng_seed and
// epoch. Optimizer moments ride along so training can resume bit-exactly.
struct Checkpoint {
    ModelConfig config;
    ModelParams params;
    std::uint64_t rng_seed = 0;
    int epoch = 0;
    std::map<std::string, Matrix> opt_m;
    std::map<std::string, Matrix> opt_v;
    long opt_step = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace casa
