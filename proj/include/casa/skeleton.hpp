#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "casa/matrix.hpp"

namespace casa {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const;
    Vec3 normalized() const;
};

struct ReferenceJoints {
    int origin = 0;  // e.g. chest / wrist
    int axis = 0;    // e.g. pelvis / middle-MCP
    int plane = 0;   // e.g. right shoulder / index-MCP
};

struct SkeletonTopology {
    int joint_count = 0;
    std::vector<int> bone_parents;  // root points to itself
    ReferenceJoints reference_joints;
    std::vector<int> mirror_map;  // involution pairing left/right joints
    std::vector<double> bone_rest_lengths;
    std::vector<std::string> joint_names;  // optional, for readability

    // Throws InvariantViolation on cycles, non-involutive mirror_map,
    // origin == axis, or bad sizes.
    void validate() const;
    // Non-root joints in parent-before-child order.
    std::vector<int> topo_order() const;
    bool is_root(int j) const { return bone_parents[j] == j; }
};

struct Skeleton {
    std::vector<Vec3> joints;
};

struct SkeletonSequence {
    std::vector<Skeleton> frames;
    SkeletonTopology topology;
    double fps = 30.0;
    std::optional<std::vector<int>> phase_labels;
    std::optional<std::vector<double>> progress;
    std::string action_name;

    int frame_count() const { return static_cast<int>(frames.size()); }
    int joint_count() const { return topology.joint_count; }
    void validate() const;
};

// Per-frame joint-angle parameters for the toy FK chain. Row layout:
// 3 Euler XYZ angles per non-root joint (in joint-index order), then the
// 3-vector root translation. P = 3*(J-1) + 3.
struct PoseParamSequence {
    Matrix params;  // M x P
    SkeletonTopology topology;

    int frame_count() const { return params.rows(); }
    static int param_dim(const SkeletonTopology& t) { return 3 * t.joint_count; }
};

// Canonical frame: origin joint at (0,0,0), |origin->axis| = 1 along +z,
// plane joint Gram-Schmidt'd into the y-z half-plane with positive y.
// Applied per frame; labels and topology pass through.
SkeletonSequence normalize(const SkeletonSequence& seq);

// Mirror left/right joints across the x=0 plane of the canonical frame.
SkeletonSequence flip(const SkeletonSequence& seq);

// Walk bone_parents from the root composing per-joint Euler XYZ rotations;
// every bone's rest direction is +z scaled by its rest length.
SkeletonSequence fk_transform(const PoseParamSequence& poses);

// Closed-form inverse of fk_transform with the twist angle fixed to 0.
// Requires frame bone lengths within 5% of the topology rest lengths.
PoseParamSequence inverse_kinematics_angles(const SkeletonSequence& seq);

// Frames flattened to an M x 3J matrix (joint-major: x0,y0,z0,x1,...).
Matrix flatten_frames(const SkeletonSequence& seq);

std::array<std::array<double, 3>, 3> euler_xyz_matrix(double rx, double ry, double rz);

}  // namespace casa
