#pragma once

#include <utility>
#include <vector>

#include "casa/matrix.hpp"
#include "casa/rng.hpp"
#include "casa/skeleton.hpp"

namespace casa {

struct AugmentConfig {
    double sigma_angle_deg = 10.0;     // per-frame marginal std of angle noise
    double sigma_translation = 0.1;    // length units
    double sigma_latent = 0.1;
    double geometric_probability = 0.3;
    double temporal_min_fraction = 0.5;
    bool enable_temporal = true;
    bool enable_translation = true;
    bool enable_flip = true;
    bool enable_angle = true;
    bool enable_latent = true;

    void validate() const;
};

// Temporally smoothed noise: zero-mean multivariate normal over the frame
// axis with covariance C[j][j'] = 1 - |j-j'|/(2N). The Cholesky factor is
// cached at construction and immutable afterwards.
class SmoothedNoiseSampler {
public:
    explicit SmoothedNoiseSampler(int length);

    static Matrix covariance(int length);

    int length() const { return length_; }
    const Matrix& cholesky_factor() const { return chol_; }

    // N x dims matrix; each column an independent draw of MN(0, C) * scale.
    Matrix sample(int dims, double scale, Rng& rng) const;

private:
    int length_;
    Matrix chol_;
};

struct AppliedOps {
    bool latent = false;
    bool angle = false;
    bool temporal = false;
    bool translation = false;
    bool flip = false;
};

struct AugmentedPair {
    SkeletonSequence original;   // M frames
    SkeletonSequence augmented;  // N <= M frames
    std::vector<int> j_gt;       // strictly increasing original-frame indices
    AppliedOps applied_ops;
};

// PCA pose latent standing in for a pretrained pose VAE: orthonormal
// components covering 95% of training variance, encode/decode by projection.
class PcaLatentSpace {
public:
    PcaLatentSpace() = default;

    static PcaLatentSpace fit(const std::vector<PoseParamSequence>& train,
                              double variance_threshold = 0.95);

    bool fitted() const { return !components_.empty(); }
    int latent_dim() const { return components_.cols(); }
    const Matrix& components() const { return components_; }
    const std::vector<double>& mean() const { return mean_; }

    Matrix encode(const Matrix& params) const;   // M x P -> M x d_lat
    Matrix decode(const Matrix& latents) const;  // M x d_lat -> M x P

private:
    std::vector<double> mean_;
    Matrix components_;  // P x d_lat, orthonormal columns
};

// Uniform random sorted subset of frames; N drawn uniformly from
// [ceil(temporal_min_fraction*M), M]. Returns the subsequence and j_gt.
std::pair<SkeletonSequence, std::vector<int>> temporal_augment(const SkeletonSequence& seq,
                                                               Rng& rng,
                                                               const AugmentConfig& cfg);

// Per-joint, per-frame, per-coordinate noise uniform on [-s*sqrt(3), s*sqrt(3)]
// so the stated sigma is the true standard deviation.
SkeletonSequence translation_augment(const SkeletonSequence& seq, Rng& rng,
                                     const AugmentConfig& cfg);

// Temporally smoothed noise on every angle dimension; the root translation
// columns are untouched.
PoseParamSequence angle_augment(const PoseParamSequence& poses, Rng& rng,
                                const AugmentConfig& cfg);

// Encode, perturb the latent trajectory with smoothed noise, decode.
PoseParamSequence latent_augment(const PoseParamSequence& poses, const PcaLatentSpace& latent,
                                 Rng& rng, const AugmentConfig& cfg);

// Full pipeline: latent/angle on pose params (each firing independently with
// geometric_probability), FK, temporal subsampling (always, when enabled),
// then translation noise and flipping (each with geometric_probability).
// j_gt comes solely from the temporal step. When no pose-space op fires the
// augmented frames are taken verbatim from `seq` so identity pairs are exact.
AugmentedPair make_pair(const SkeletonSequence& seq, const PoseParamSequence& poses,
                        const AugmentConfig& cfg, Rng& rng,
                        const PcaLatentSpace* latent = nullptr);

}  // namespace casa
