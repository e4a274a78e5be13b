#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "casa/augment.hpp"
#include "casa/dataio.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace casa;

namespace {

SkeletonSequence random_sequence(int frames, Rng& rng, double amp = 0.6) {
    PoseParamSequence poses;
    poses.topology = toy_humanoid_topology();
    poses.params = Matrix(frames, PoseParamSequence::param_dim(poses.topology));
    for (auto& v : poses.params.raw()) v = rng.uniform(-amp, amp);
    return normalize(fk_transform(poses));
}

double max_joint_diff(const SkeletonSequence& a, const SkeletonSequence& b) {
    double worst = 0.0;
    for (std::size_t f = 0; f < a.frames.size(); ++f)
        for (std::size_t j = 0; j < a.frames[f].joints.size(); ++j) {
            const Vec3 d = a.frames[f].joints[j] - b.frames[f].joints[j];
            worst = std::max({worst, std::abs(d.x), std::abs(d.y), std::abs(d.z)});
        }
    return worst;
}

}  // namespace

TEST_CASE("smoothed-noise covariance entries follow the linear decay") {
    Matrix c = SmoothedNoiseSampler::covariance(4);
    CHECK(c(0, 3) == doctest::Approx(0.625).epsilon(1e-15));  // 1 - 3/8
    CHECK(c(2, 2) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c(1, 0) == c(0, 1));
    // Entries decrease with |j - j'| and stay above 0.5.
    Matrix big = SmoothedNoiseSampler::covariance(64);
    for (int d = 1; d < 64; ++d) CHECK(big(0, d) < big(0, d - 1));
    CHECK(big(0, 63) > 0.5);
}

TEST_CASE("smoothed noise with zero scale is exactly zero") {
    SmoothedNoiseSampler sampler(8);
    Rng rng(1);
    Matrix noise = sampler.sample(5, 0.0, rng);
    CHECK(sum(noise) == 0.0);
}

TEST_CASE("adjacent-row correlation of smoothed noise matches the covariance") {
    const int n = 16, draws = 50000;
    SmoothedNoiseSampler sampler(n);
    Rng rng(2);
    double s00 = 0, s11 = 0, s01 = 0;
    for (int d = 0; d < draws; ++d) {
        Matrix x = sampler.sample(1, 1.0, rng);
        s00 += x(0, 0) * x(0, 0);
        s11 += x(1, 0) * x(1, 0);
        s01 += x(0, 0) * x(1, 0);
    }
    const double corr = s01 / std::sqrt(s00 * s11);
    CHECK(std::abs(corr - (1.0 - 1.0 / 32.0)) < 0.02);
}

TEST_CASE("temporal augment with min fraction 1 is the identity") {
    Rng rng(3);
    SkeletonSequence seq = random_sequence(7, rng);
    AugmentConfig cfg;
    cfg.temporal_min_fraction = 1.0;
    auto [sub, j_gt] = temporal_augment(seq, rng, cfg);
    REQUIRE(j_gt.size() == 7);
    for (int i = 0; i < 7; ++i) CHECK(j_gt[i] == i);
    CHECK(max_joint_diff(sub, seq) == 0.0);
}

TEST_CASE("temporal augment keeps selected frames verbatim in order") {
    Rng rng(4);
    SkeletonSequence seq = random_sequence(12, rng);
    AugmentConfig cfg;
    for (int trial = 0; trial < 50; ++trial) {
        auto [sub, j_gt] = temporal_augment(seq, rng, cfg);
        CHECK(static_cast<int>(j_gt.size()) >= 6);  // ceil(0.5 * 12)
        CHECK(j_gt.size() <= 12);
        for (std::size_t i = 1; i < j_gt.size(); ++i) CHECK(j_gt[i] > j_gt[i - 1]);
        for (std::size_t i = 0; i < j_gt.size(); ++i) {
            const Vec3 d = sub.frames[i].joints[3] - seq.frames[j_gt[i]].joints[3];
            CHECK(d.norm() == 0.0);
        }
    }
}

TEST_CASE("temporal index frequencies pass a chi-squared uniformity check") {
    // With M=10 every index is included with the same marginal probability,
    // so per-index inclusion counts are exchangeable across indices.
    Rng rng(5);
    SkeletonSequence seq = random_sequence(10, rng);
    AugmentConfig cfg;
    std::array<long, 10> counts{};
    long total = 0;
    const int draws = 10000;
    for (int d = 0; d < draws; ++d) {
        auto [sub, j_gt] = temporal_augment(seq, rng, cfg);
        for (int idx : j_gt) ++counts[idx];
        total += static_cast<long>(j_gt.size());
    }
    const double expected = static_cast<double>(total) / 10.0;
    double chi2 = 0.0;
    for (long c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // 9 degrees of freedom, alpha = 0.01 critical value.
    CHECK(chi2 < 21.67);
}

TEST_CASE("translation augment with zero sigma is the identity") {
    Rng rng(6);
    SkeletonSequence seq = random_sequence(4, rng);
    AugmentConfig cfg;
    cfg.sigma_translation = 0.0;
    CHECK(max_joint_diff(translation_augment(seq, rng, cfg), seq) == 0.0);
}

TEST_CASE("translation noise is bounded and has the configured standard deviation") {
    Rng rng(7);
    AugmentConfig cfg;
    cfg.sigma_translation = 0.1;
    const double bound = cfg.sigma_translation * std::sqrt(3.0);
    double sum_sq = 0.0;
    long count = 0;
    while (count < 1000000) {
        SkeletonSequence seq = random_sequence(8, rng);
        SkeletonSequence out = translation_augment(seq, rng, cfg);
        for (std::size_t f = 0; f < seq.frames.size(); ++f)
            for (std::size_t j = 0; j < seq.frames[f].joints.size(); ++j) {
                const Vec3 d = out.frames[f].joints[j] - seq.frames[f].joints[j];
                for (double v : {d.x, d.y, d.z}) {
                    CHECK(std::abs(v) <= bound + 1e-12);
                    sum_sq += v * v;
                    ++count;
                }
            }
    }
    const double std_dev = std::sqrt(sum_sq / count);
    CHECK(std_dev == doctest::Approx(cfg.sigma_translation).epsilon(0.01));
}

TEST_CASE("angle augment with zero sigma is the identity and never touches translation") {
    Rng rng(8);
    PoseParamSequence poses;
    poses.topology = toy_humanoid_topology();
    poses.params = Matrix(6, PoseParamSequence::param_dim(poses.topology));
    for (auto& v : poses.params.raw()) v = rng.uniform(-0.5, 0.5);

    AugmentConfig cfg;
    cfg.sigma_angle_deg = 0.0;
    CHECK(max_abs_diff(angle_augment(poses, rng, cfg).params, poses.params) == 0.0);

    cfg.sigma_angle_deg = 10.0;
    PoseParamSequence out = angle_augment(poses, rng, cfg);
    const int p = poses.params.cols();
    for (int f = 0; f < 6; ++f)
        for (int c = p - 3; c < p; ++c) CHECK(out.params(f, c) == poses.params(f, c));
}

TEST_CASE("angle noise marginal std matches 10 degrees in radians") {
    Rng rng(9);
    AugmentConfig cfg;
    PoseParamSequence poses;
    poses.topology = toy_humanoid_topology();
    const int p = PoseParamSequence::param_dim(poses.topology);
    poses.params = Matrix(16, p);
    double sum_sq = 0.0;
    long count = 0;
    double s0 = 0, s1 = 0, s01 = 0;
    for (int d = 0; d < 50000 / 16; ++d) {
        PoseParamSequence out = angle_augment(poses, rng, cfg);
        for (int f = 0; f < 16; ++f)
            for (int c = 0; c < p - 3; ++c) {
                sum_sq += out.params(f, c) * out.params(f, c);
                ++count;
            }
        // Temporal correlation of the first angle column.
        s0 += out.params(0, 0) * out.params(0, 0);
        s1 += out.params(1, 0) * out.params(1, 0);
        s01 += out.params(0, 0) * out.params(1, 0);
    }
    const double target = 10.0 * M_PI / 180.0;
    CHECK(std::sqrt(sum_sq / count) == doctest::Approx(target).epsilon(0.01));
    CHECK(std::abs(s01 / std::sqrt(s0 * s1) - (1.0 - 1.0 / 32.0)) < 0.02);
}

TEST_CASE("latent augment with zero noise is the PCA projection and is idempotent") {
    Rng rng(10);
    PoseParamSequence poses;
    poses.topology = toy_humanoid_topology();
    poses.params = Matrix(10, PoseParamSequence::param_dim(poses.topology));
    for (auto& v : poses.params.raw()) v = rng.uniform(-0.5, 0.5);
    PcaLatentSpace latent = PcaLatentSpace::fit({poses});

    AugmentConfig cfg;
    cfg.sigma_latent = 0.0;
    PoseParamSequence once = latent_augment(poses, latent, rng, cfg);
    CHECK(max_abs_diff(once.params, latent.decode(latent.encode(poses.params))) < 1e-12);
    PoseParamSequence twice = latent_augment(once, latent, rng, cfg);
    CHECK(max_abs_diff(twice.params, once.params) < 1e-10);

    // Poses inside the PCA span round-trip exactly.
    CHECK(max_abs_diff(latent_augment(once, latent, rng, cfg).params, once.params) < 1e-8);
}

TEST_CASE("latent augment without a fitted latent space throws") {
    Rng rng(11);
    PoseParamSequence poses;
    poses.topology = toy_humanoid_topology();
    poses.params = Matrix(3, PoseParamSequence::param_dim(poses.topology));
    PcaLatentSpace unfitted;
    AugmentConfig cfg;
    CHECK_THROWS_AS(latent_augment(poses, unfitted, rng, cfg), LatentNotFitted);
}

TEST_CASE("pca components are orthonormal") {
    Rng rng(12);
    PoseParamSequence poses;
    poses.topology = toy_humanoid_topology();
    poses.params = Matrix(30, PoseParamSequence::param_dim(poses.topology));
    for (auto& v : poses.params.raw()) v = rng.uniform(-0.5, 0.5);
    PcaLatentSpace latent = PcaLatentSpace::fit({poses});
    REQUIRE(latent.fitted());
    const Matrix& w = latent.components();
    Matrix gram = matmul(transpose(w), w);
    CHECK(max_abs_diff(gram, Matrix::identity(w.cols())) < 1e-9);
}

TEST_CASE("disabling every op yields an exact identity pair") {
    Rng rng(13);
    SkeletonSequence seq = random_sequence(9, rng);
    PoseParamSequence poses = inverse_kinematics_angles(seq);
    AugmentConfig cfg;
    cfg.enable_temporal = cfg.enable_translation = cfg.enable_flip = false;
    cfg.enable_angle = cfg.enable_latent = false;
    Rng pair_rng(99);
    AugmentedPair pair = make_pair(seq, poses, cfg, pair_rng);
    REQUIRE(pair.augmented.frame_count() == 9);
    CHECK(max_joint_diff(pair.augmented, pair.original) == 0.0);
    for (int i = 0; i < 9; ++i) CHECK(pair.j_gt[i] == i);
    CHECK_FALSE(pair.applied_ops.temporal);
    CHECK_FALSE(pair.applied_ops.flip);
}

TEST_CASE("temporal-only pairs copy original frames at j_gt exactly") {
    Rng rng(14);
    SkeletonSequence seq = random_sequence(11, rng);
    PoseParamSequence poses = inverse_kinematics_angles(seq);
    AugmentConfig cfg;
    cfg.enable_translation = cfg.enable_flip = cfg.enable_angle = cfg.enable_latent = false;
    for (int trial = 0; trial < 20; ++trial) {
        Rng pair_rng(trial);
        AugmentedPair pair = make_pair(seq, poses, cfg, pair_rng);
        for (std::size_t j = 0; j < pair.j_gt.size(); ++j) {
            const Vec3 d =
                pair.augmented.frames[j].joints[5] - pair.original.frames[pair.j_gt[j]].joints[5];
            CHECK(d.norm() == 0.0);
        }
    }
}

TEST_CASE("j_gt is strictly increasing and independent of geometric ops") {
    Rng rng(15);
    SkeletonSequence seq = random_sequence(14, rng);
    PoseParamSequence poses = inverse_kinematics_angles(seq);
    PcaLatentSpace latent = PcaLatentSpace::fit({poses});
    AugmentConfig all;
    AugmentConfig temporal_only;
    temporal_only.enable_translation = temporal_only.enable_flip = false;
    temporal_only.enable_angle = temporal_only.enable_latent = false;
    for (int trial = 0; trial < 200; ++trial) {
        Rng r1(trial), r2(trial);
        AugmentedPair a = make_pair(seq, poses, all, r1, &latent);
        AugmentedPair b = make_pair(seq, poses, temporal_only, r2, &latent);
        REQUIRE(a.j_gt.size() == b.j_gt.size());
        for (std::size_t i = 0; i < a.j_gt.size(); ++i) CHECK(a.j_gt[i] == b.j_gt[i]);
        for (std::size_t i = 1; i < a.j_gt.size(); ++i) CHECK(a.j_gt[i] > a.j_gt[i - 1]);
    }
}

TEST_CASE("make_pair is deterministic for a fixed seed") {
    Rng rng(16);
    SkeletonSequence seq = random_sequence(10, rng);
    PoseParamSequence poses = inverse_kinematics_angles(seq);
    PcaLatentSpace latent = PcaLatentSpace::fit({poses});
    AugmentConfig cfg;
    Rng r1(77), r2(77);
    AugmentedPair a = make_pair(seq, poses, cfg, r1, &latent);
    AugmentedPair b = make_pair(seq, poses, cfg, r2, &latent);
    REQUIRE(a.j_gt == b.j_gt);
    CHECK(max_joint_diff(a.augmented, b.augmented) == 0.0);
    CHECK(a.applied_ops.flip == b.applied_ops.flip);
}

TEST_CASE("augmented frames stay nearest their j_gt originals on smooth motion") {
    // Nearest-neighbor sanity on generated data: the augmented frame should
    // sit closer (in normalized joint space) to its ground-truth original
    // frame than to any other in at least 95% of frames.
    // Motion has to cover ground faster than the noise sigmas for the
    // nearest-neighbor readout to be meaningful, so the keyposes are far
    // apart and the phases short.
    SyntheticActionSpec spec;
    spec.action_name = "swing";
    spec.topology = toy_humanoid_topology();
    spec.phase_duration_range = {8, 11};
    spec.subject_variation_std = 0.05;
    const int p = PoseParamSequence::param_dim(spec.topology);
    std::vector<double> a(p, 0.0);
    a[9] = -M_PI / 2.0;  // left shoulder out
    a[12] = M_PI / 2.0;  // right shoulder out
    a[15] = -1.4;        // arms down
    a[18] = 1.4;
    std::vector<double> b = a, c = a;
    for (int i : {3, 4, 6, 7, 15, 16, 18, 19}) {  // neck, head and wrist angles
        b[i] += 2.2;
        c[i] -= 2.2;
    }
    spec.phase_keyposes = {a, b, c};
    Rng gen_rng(17);
    auto seqs = generate(spec, 10, gen_rng);
    // Every op enabled; sigmas kept below the inter-frame step (easing
    // stalls the motion near keyposes, where larger noise would make the
    // nearest neighbor genuinely ambiguous).
    AugmentConfig cfg;
    cfg.sigma_translation = 0.02;
    cfg.sigma_angle_deg = 1.0;
    cfg.sigma_latent = 0.01;
    long hits = 0, total = 0;
    std::vector<PoseParamSequence> all_poses;
    for (const auto& s : seqs) all_poses.push_back(inverse_kinematics_angles(s));
    PcaLatentSpace latent = PcaLatentSpace::fit(all_poses, 0.9999);
    for (int trial = 0; trial < 100; ++trial) {
        const auto& seq = seqs[trial % seqs.size()];
        Rng r(1000 + trial);
        AugmentedPair pair = make_pair(seq, all_poses[trial % seqs.size()], cfg, r, &latent);
        SkeletonSequence aug = pair.applied_ops.flip ? flip(pair.augmented) : pair.augmented;
        Matrix a = flatten_frames(aug);
        Matrix o = flatten_frames(pair.original);
        for (int j = 0; j < a.rows(); ++j) {
            double best = 1e300;
            int best_i = -1;
            for (int i = 0; i < o.rows(); ++i) {
                double d = 0;
                for (int c = 0; c < a.cols(); ++c) {
                    const double diff = a(j, c) - o(i, c);
                    d += diff * diff;
                }
                if (d < best) {
                    best = d;
                    best_i = i;
                }
            }
            if (best_i == pair.j_gt[j]) ++hits;
            ++total;
        }
    }
    CHECK(static_cast<double>(hits) / total >= 0.95);
}

TEST_CASE("config validation rejects bad values") {
    AugmentConfig cfg;
    cfg.geometric_probability = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = AugmentConfig{};
    cfg.sigma_angle_deg = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = AugmentConfig{};
    cfg.temporal_min_fraction = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
