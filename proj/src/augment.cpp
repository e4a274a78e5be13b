#include "casa/augment.hpp"

#include <cmath>

#include "casa/errors.hpp"
#include "casa/numeric.hpp"

namespace casa {

void AugmentConfig::validate() const {
    if (sigma_angle_deg < 0 || sigma_translation < 0 || sigma_latent < 0)
        throw ConfigError("augment sigmas must be nonnegative");
    if (geometric_probability < 0 || geometric_probability > 1)
        throw ConfigError("geometric_probability must be in [0,1]");
    if (temporal_min_fraction <= 0 || temporal_min_fraction > 1)
        throw ConfigError("temporal_min_fraction must be in (0,1]");
}

Matrix SmoothedNoiseSampler::covariance(int length) {
    if (length <= 0) throw ConfigError("sampler length must be positive");
    Matrix c(length, length);
    for (int i = 0; i < length; ++i)
        for (int j = 0; j < length; ++j)
            c(i, j) = 1.0 - std::abs(i - j) / (2.0 * length);
    return c;
}

SmoothedNoiseSampler::SmoothedNoiseSampler(int length) : length_(length) {
    chol_ = cholesky(covariance(length), 0.0).L;
}

Matrix SmoothedNoiseSampler::sample(int dims, double scale, Rng& rng) const {
    Matrix out(length_, dims);
    for (int d = 0; d < dims; ++d) {
        std::vector<double> col = mvn_sample(chol_, rng);
        for (int i = 0; i < length_; ++i) out(i, d) = scale * col[i];
    }
    return out;
}

PcaLatentSpace PcaLatentSpace::fit(const std::vector<PoseParamSequence>& train,
                                   double variance_threshold) {
    if (train.empty()) throw EmptyDataset("PCA fit needs at least one pose sequence");
    const int p = train[0].params.cols();
    long total = 0;
    for (const auto& s : train) {
        if (s.params.cols() != p) throw ShapeMismatch("PCA fit: inconsistent param dims");
        total += s.params.rows();
    }
    std::vector<double> mean(p, 0.0);
    for (const auto& s : train)
        for (int f = 0; f < s.params.rows(); ++f)
            for (int j = 0; j < p; ++j) mean[j] += s.params(f, j);
    for (double& m : mean) m /= static_cast<double>(total);

    Matrix cov(p, p);
    for (const auto& s : train) {
        for (int f = 0; f < s.params.rows(); ++f) {
            for (int i = 0; i < p; ++i) {
                const double di = s.params(f, i) - mean[i];
                for (int j = i; j < p; ++j) cov(i, j) += di * (s.params(f, j) - mean[j]);
            }
        }
    }
    for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j) {
            cov(i, j) /= static_cast<double>(total);
            cov(j, i) = cov(i, j);
        }

    SymEig eig = sym_eig(cov);
    double tv = 0.0;
    for (double v : eig.values) tv += std::max(v, 0.0);
    int dlat = 1;
    if (tv > 0.0) {
        double acc = 0.0;
        dlat = 0;
        for (int i = 0; i < p; ++i) {
            acc += std::max(eig.values[i], 0.0);
            ++dlat;
            if (acc >= variance_threshold * tv) break;
        }
    }
    PcaLatentSpace out;
    out.mean_ = std::move(mean);
    out.components_ = Matrix(p, dlat);
    for (int c = 0; c < dlat; ++c)
        for (int r = 0; r < p; ++r) out.components_(r, c) = eig.vectors(r, c);
    return out;
}

Matrix PcaLatentSpace::encode(const Matrix& params) const {
    if (!fitted()) throw LatentNotFitted("encode on unfitted latent space");
    if (params.cols() != components_.rows())
        throw ShapeMismatch("latent encode dim " + shape_str(params));
    Matrix centered = params;
    for (int f = 0; f < centered.rows(); ++f)
        for (int j = 0; j < centered.cols(); ++j) centered(f, j) -= mean_[j];
    return matmul(centered, components_);
}

Matrix PcaLatentSpace::decode(const Matrix& latents) const {
    if (!fitted()) throw LatentNotFitted("decode on unfitted latent space");
    if (latents.cols() != components_.cols())
        throw ShapeMismatch("latent decode dim " + shape_str(latents));
    Matrix out = matmul(latents, transpose(components_));
    for (int f = 0; f < out.rows(); ++f)
        for (int j = 0; j < out.cols(); ++j) out(f, j) += mean_[j];
    return out;
}

std::pair<SkeletonSequence, std::vector<int>> temporal_augment(const SkeletonSequence& seq,
                                                               Rng& rng,
                                                               const AugmentConfig& cfg) {
    cfg.validate();
    const int m = seq.frame_count();
    if (m < 2) throw InvariantViolation("temporal_augment needs at least 2 frames");
    const int n_min = static_cast<int>(std::ceil(cfg.temporal_min_fraction * m));
    const int n = n_min + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(m - n_min + 1)));

    // Selection sampling: uniform over all size-n subsets, indices sorted.
    std::vector<int> idx;
    idx.reserve(n);
    int need = n;
    for (int i = 0; i < m && need > 0; ++i) {
        const int remaining = m - i;
        if (rng.uniform() * remaining < need) {
            idx.push_back(i);
            --need;
        }
    }

    SkeletonSequence out;
    out.topology = seq.topology;
    out.fps = seq.fps;
    out.action_name = seq.action_name;
    out.frames.reserve(idx.size());
    for (int i : idx) out.frames.push_back(seq.frames[i]);
    if (seq.phase_labels) {
        out.phase_labels.emplace();
        for (int i : idx) out.phase_labels->push_back((*seq.phase_labels)[i]);
    }
    if (seq.progress) {
        out.progress.emplace();
        for (int i : idx) out.progress->push_back((*seq.progress)[i]);
    }
    return {std::move(out), std::move(idx)};
}

SkeletonSequence translation_augment(const SkeletonSequence& seq, Rng& rng,
                                     const AugmentConfig& cfg) {
    cfg.validate();
    const double half = cfg.sigma_translation * std::sqrt(3.0);
    SkeletonSequence out = seq;
    for (auto& frame : out.frames) {
        for (Vec3& j : frame.joints) {
            j.x += rng.uniform(-half, half);
            j.y += rng.uniform(-half, half);
            j.z += rng.uniform(-half, half);
        }
    }
    return out;
}

PoseParamSequence angle_augment(const PoseParamSequence& poses, Rng& rng,
                                const AugmentConfig& cfg) {
    cfg.validate();
    const int m = poses.frame_count();
    const int n_angles = 3 * (poses.topology.joint_count - 1);
    const double scale = cfg.sigma_angle_deg * M_PI / 180.0;
    PoseParamSequence out = poses;
    if (m == 0 || scale == 0.0 || n_angles == 0) return out;
    SmoothedNoiseSampler sampler(m);
    Matrix noise = sampler.sample(n_angles, scale, rng);
    for (int f = 0; f < m; ++f)
        for (int j = 0; j < n_angles; ++j) out.params(f, j) += noise(f, j);
    return out;
}

PoseParamSequence latent_augment(const PoseParamSequence& poses, const PcaLatentSpace& latent,
                                 Rng& rng, const AugmentConfig& cfg) {
    cfg.validate();
    if (!latent.fitted()) throw LatentNotFitted("latent_augment requires a fitted latent space");
    Matrix z = latent.encode(poses.params);
    if (cfg.sigma_latent > 0.0 && z.rows() > 0) {
        SmoothedNoiseSampler sampler(z.rows());
        Matrix noise = sampler.sample(z.cols(), cfg.sigma_latent, rng);
        z = add(z, noise);
    }
    PoseParamSequence out = poses;
    out.params = latent.decode(z);
    return out;
}

AugmentedPair make_pair(const SkeletonSequence& seq, const PoseParamSequence& poses,
                        const AugmentConfig& cfg, Rng& rng, const PcaLatentSpace* latent) {
    cfg.validate();
    if (poses.frame_count() != seq.frame_count())
        throw ShapeMismatch("make_pair: pose frames != skeleton frames");

    // Independent sub-streams per op so the temporal draw (and hence j_gt)
    // does not depend on which geometric ops are enabled or fire.
    const std::uint64_t base = rng.next_u64();
    Rng decisions = Rng::substream(base, {0});
    Rng temporal_rng = Rng::substream(base, {1});
    Rng translation_rng = Rng::substream(base, {2});
    Rng angle_rng = Rng::substream(base, {3});
    Rng latent_rng = Rng::substream(base, {4});

    const double u_latent = decisions.uniform();
    const double u_angle = decisions.uniform();
    const double u_translation = decisions.uniform();
    const double u_flip = decisions.uniform();

    AugmentedPair pair;
    pair.original = seq;
    pair.applied_ops.latent = cfg.enable_latent && u_latent < cfg.geometric_probability;
    pair.applied_ops.angle = cfg.enable_angle && u_angle < cfg.geometric_probability;
    pair.applied_ops.translation = cfg.enable_translation && u_translation < cfg.geometric_probability;
    pair.applied_ops.flip = cfg.enable_flip && u_flip < cfg.geometric_probability;
    pair.applied_ops.temporal = cfg.enable_temporal && seq.frame_count() >= 2;

    SkeletonSequence stage;
    if (pair.applied_ops.latent || pair.applied_ops.angle) {
        PoseParamSequence theta = poses;
        if (pair.applied_ops.latent) {
            if (latent == nullptr || !latent->fitted())
                throw LatentNotFitted("make_pair: latent augmentation fired without a fitted space");
            theta = latent_augment(theta, *latent, latent_rng, cfg);
        }
        if (pair.applied_ops.angle) theta = angle_augment(theta, angle_rng, cfg);
        stage = fk_transform(theta);
        stage.fps = seq.fps;
        stage.action_name = seq.action_name;
        stage.phase_labels = seq.phase_labels;
        stage.progress = seq.progress;
    } else {
        stage = seq;
    }

    if (pair.applied_ops.temporal) {
        auto [sub, jgt] = temporal_augment(stage, temporal_rng, cfg);
        stage = std::move(sub);
        pair.j_gt = std::move(jgt);
    } else {
        pair.j_gt.resize(seq.frame_count());
        for (int i = 0; i < seq.frame_count(); ++i) pair.j_gt[i] = i;
    }

    if (pair.applied_ops.translation) stage = translation_augment(stage, translation_rng, cfg);
    if (pair.applied_ops.flip) stage = flip(stage);

    pair.augmented = std::move(stage);
    return pair;
}

}  // namespace casa
