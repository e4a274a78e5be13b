#pragma once

#include <array>
#include <string>
#include <vector>

#include "casa/rng.hpp"
#include "casa/skeleton.hpp"

namespace casa {

// Generator spec for one synthetic action: keyposes anchor the phases,
// frames interpolate between consecutive keyposes with smooth-step easing.
struct SyntheticActionSpec {
    std::string action_name;
    std::vector<std::vector<double>> phase_keyposes;  // >= 2 pose-param vectors
    std::array<int, 2> phase_duration_range = {14, 26};
    double subject_variation_std = 0.05;  // radians, per-subject keypose offset
    double speed_jitter = 0.0;
    SkeletonTopology topology;
    double fps = 30.0;

    void validate() const;
};

struct ManifestEntry {
    std::string path;
    std::string action;
    std::string split;  // "train" or "val"
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    std::vector<ManifestEntry> entries;

    std::vector<ManifestEntry> split(const std::string& name) const;
};

// 8-joint toy humanoid: pelvis(root), chest, neck, head, l/r shoulder,
// l/r wrist. Chest is the normalization origin, pelvis the axis joint and
// the right shoulder the plane joint.
SkeletonTopology toy_humanoid_topology();

SyntheticActionSpec reach_lift_place_spec();
SyntheticActionSpec wave_spec();

// Normalized sequences with phase and progress labels attached.
std::vector<SkeletonSequence> generate(const SyntheticActionSpec& spec, int num_sequences,
                                       Rng& rng);

// Canonical acceptance dataset: 2 actions x (20 train + 8 val), written as
// sequence JSON files plus manifest.json under out_dir.
DatasetManifest default_benchmark(const std::string& out_dir, std::uint64_t seed = 42);

void save_sequence(const SkeletonSequence& seq, const std::string& path);
SkeletonSequence load_sequence(const std::string& path);

void save_manifest(const DatasetManifest& manifest, const std::string& path);
// Paths in the manifest are resolved relative to the manifest file.
DatasetManifest load_manifest(const std::string& path);

}  // namespace casa
