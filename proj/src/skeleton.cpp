#include "casa/skeleton.hpp"

#include <cmath>

#include "casa/errors.hpp"

namespace casa {

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

Vec3 Vec3::normalized() const {
    const double n = norm();
    if (n < 1e-300) throw DegenerateFrame("normalizing a zero-length vector");
    return {x / n, y / n, z / n};
}

void SkeletonTopology::validate() const {
    const int j = joint_count;
    if (j <= 0) throw InvariantViolation("joint_count must be positive");
    if (static_cast<int>(bone_parents.size()) != j)
        throw InvariantViolation("bone_parents size != joint_count");
    if (static_cast<int>(mirror_map.size()) != j)
        throw InvariantViolation("mirror_map size != joint_count");
    if (static_cast<int>(bone_rest_lengths.size()) != j)
        throw InvariantViolation("bone_rest_lengths size != joint_count");
    for (int i = 0; i < j; ++i) {
        if (bone_parents[i] < 0 || bone_parents[i] >= j)
            throw InvariantViolation("bone_parents out of range");
        if (mirror_map[i] < 0 || mirror_map[i] >= j || mirror_map[mirror_map[i]] != i)
            throw InvariantViolation("mirror_map");
        if (bone_rest_lengths[i] < 0.0) throw InvariantViolation("negative bone_rest_length");
    }
    // Forest check: walking parents must terminate at a root.
    for (int i = 0; i < j; ++i) {
        int cur = i, steps = 0;
        while (bone_parents[cur] != cur) {
            cur = bone_parents[cur];
            if (++steps > j) throw InvariantViolation("bone_parents contains a cycle");
        }
    }
    auto in_range = [j](int v) { return v >= 0 && v < j; };
    if (!in_range(reference_joints.origin) || !in_range(reference_joints.axis) ||
        !in_range(reference_joints.plane))
        throw InvariantViolation("reference_joints out of range");
    if (reference_joints.origin == reference_joints.axis)
        throw InvariantViolation("reference origin == axis");
}

std::vector<int> SkeletonTopology::topo_order() const {
    std::vector<int> order;
    std::vector<bool> placed(joint_count, false);
    for (int i = 0; i < joint_count; ++i)
        if (is_root(i)) placed[i] = true;
    bool progressed = true;
    while (progressed) {
        progressed = false;
        for (int i = 0; i < joint_count; ++i) {
            if (!placed[i] && placed[bone_parents[i]]) {
                order.push_back(i);
                placed[i] = true;
                progressed = true;
            }
        }
    }
    return order;
}

void SkeletonSequence::validate() const {
    topology.validate();
    if (frames.empty()) throw InvariantViolation("sequence must have at least one frame");
    for (std::size_t f = 0; f < frames.size(); ++f) {
        if (static_cast<int>(frames[f].joints.size()) != topology.joint_count)
            throw InvariantViolation("frame " + std::to_string(f) + " joint count");
        for (const Vec3& v : frames[f].joints)
            if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
                throw InvariantViolation("non-finite joint coordinate in frame " + std::to_string(f));
    }
    if (fps <= 0.0) throw InvariantViolation("fps must be positive");
    if (phase_labels && phase_labels->size() != frames.size())
        throw InvariantViolation("phase_labels length");
    if (progress) {
        if (progress->size() != frames.size()) throw InvariantViolation("progress length");
        for (std::size_t i = 0; i < progress->size(); ++i) {
            const double p = (*progress)[i];
            if (p < 0.0 || p > 1.0) throw InvariantViolation("progress out of [0,1]");
            if (i > 0 && p < (*progress)[i - 1] - 1e-12)
                throw InvariantViolation("progress not nondecreasing");
        }
    }
}

SkeletonSequence normalize(const SkeletonSequence& seq) {
    seq.validate();
    const auto& ref = seq.topology.reference_joints;
    SkeletonSequence out = seq;
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        const auto& joints = seq.frames[f].joints;
        const Vec3 o = joints[ref.origin];
        const Vec3 va = joints[ref.axis] - o;
        const double d = va.norm();
        if (d < 1e-9)
            throw DegenerateFrame("frame " + std::to_string(f) + ": origin and axis coincide");
        const Vec3 e3 = va * (1.0 / d);
        const Vec3 vp = joints[ref.plane] - o;
        const Vec3 w = vp - e3 * vp.dot(e3);
        const double vpn = vp.norm();
        if (vpn < 1e-9 || w.norm() < 1e-6 * vpn)
            throw DegenerateFrame("frame " + std::to_string(f) +
                                  ": plane joint parallel to origin-axis bone");
        const Vec3 e2 = w.normalized();
        const Vec3 e1 = e2.cross(e3);
        const double s = 1.0 / d;
        for (int j = 0; j < seq.topology.joint_count; ++j) {
            const Vec3 q = (joints[j] - o) * s;
            out.frames[f].joints[j] = {q.dot(e1), q.dot(e2), q.dot(e3)};
        }
    }
    return out;
}

SkeletonSequence flip(const SkeletonSequence& seq) {
    seq.validate();
    SkeletonSequence out = seq;
    const auto& mm = seq.topology.mirror_map;
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        for (int j = 0; j < seq.topology.joint_count; ++j) {
            const Vec3 src = seq.frames[f].joints[mm[j]];
            out.frames[f].joints[j] = {-src.x, src.y, src.z};
        }
    }
    return out;
}

std::array<std::array<double, 3>, 3> euler_xyz_matrix(double rx, double ry, double rz) {
    const double cx = std::cos(rx), sx = std::sin(rx);
    const double cy = std::cos(ry), sy = std::sin(ry);
    const double cz = std::cos(rz), sz = std::sin(rz);
    // R = Rx * Ry * Rz; Rz is the (unobservable) twist about the bone axis.
    return {{{cy * cz, -cy * sz, sy},
             {cx * sz + sx * sy * cz, cx * cz - sx * sy * sz, -sx * cy},
             {sx * sz - cx * sy * cz, sx * cz + cx * sy * sz, cx * cy}}};
}

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
    return r;
}

Vec3 mat3_apply(const Mat3& a, const Vec3& v) {
    return {a[0][0] * v.x + a[0][1] * v.y + a[0][2] * v.z,
            a[1][0] * v.x + a[1][1] * v.y + a[1][2] * v.z,
            a[2][0] * v.x + a[2][1] * v.y + a[2][2] * v.z};
}

Vec3 mat3_apply_transposed(const Mat3& a, const Vec3& v) {
    return {a[0][0] * v.x + a[1][0] * v.y + a[2][0] * v.z,
            a[0][1] * v.x + a[1][1] * v.y + a[2][1] * v.z,
            a[0][2] * v.x + a[1][2] * v.y + a[2][2] * v.z};
}

Mat3 mat3_identity() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

// Param column offset of joint j: sequential 3-angle slots over non-root
// joints in index order; root translation occupies the trailing 3 columns.
std::vector<int> angle_offsets(const SkeletonTopology& t) {
    std::vector<int> off(t.joint_count, -1);
    int next = 0;
    for (int j = 0; j < t.joint_count; ++j) {
        if (!t.is_root(j)) {
            off[j] = next;
            next += 3;
        }
    }
    return off;
}

}  // namespace

SkeletonSequence fk_transform(const PoseParamSequence& poses) {
    poses.topology.validate();
    const SkeletonTopology& topo = poses.topology;
    const int expected = PoseParamSequence::param_dim(topo);
    if (poses.params.cols() != expected)
        throw ShapeMismatch("pose params have " + std::to_string(poses.params.cols()) +
                            " cols, expected " + std::to_string(expected));
    for (double v : poses.params.raw())
        if (!std::isfinite(v)) throw InvariantViolation("non-finite pose parameter");

    const std::vector<int> order = topo.topo_order();
    const std::vector<int> aoff = angle_offsets(topo);
    const int troff = 3 * (topo.joint_count - 1);

    SkeletonSequence out;
    out.topology = topo;
    out.frames.resize(poses.params.rows());
    for (int f = 0; f < poses.params.rows(); ++f) {
        std::vector<Vec3> pos(topo.joint_count);
        std::vector<Mat3> chain(topo.joint_count, mat3_identity());
        const Vec3 root_t{poses.params(f, troff), poses.params(f, troff + 1),
                          poses.params(f, troff + 2)};
        for (int j = 0; j < topo.joint_count; ++j)
            if (topo.is_root(j)) pos[j] = root_t;
        for (int j : order) {
            const int p = topo.bone_parents[j];
            const int o = aoff[j];
            const Mat3 local = euler_xyz_matrix(poses.params(f, o), poses.params(f, o + 1),
                                                poses.params(f, o + 2));
            chain[j] = mat3_mul(chain[p], local);
            const Vec3 bone = mat3_apply(chain[j], Vec3{0, 0, topo.bone_rest_lengths[j]});
            pos[j] = pos[p] + bone;
        }
        out.frames[f].joints = std::move(pos);
    }
    return out;
}

PoseParamSequence inverse_kinematics_angles(const SkeletonSequence& seq) {
    seq.validate();
    const SkeletonTopology& topo = seq.topology;
    const std::vector<int> order = topo.topo_order();
    const std::vector<int> aoff = angle_offsets(topo);
    const int troff = 3 * (topo.joint_count - 1);

    PoseParamSequence out;
    out.topology = topo;
    out.params = Matrix(seq.frame_count(), PoseParamSequence::param_dim(topo));
    for (int f = 0; f < seq.frame_count(); ++f) {
        const auto& joints = seq.frames[f].joints;
        std::vector<Mat3> chain(topo.joint_count, mat3_identity());
        for (int j = 0; j < topo.joint_count; ++j) {
            if (topo.is_root(j)) {
                out.params(f, troff) = joints[j].x;
                out.params(f, troff + 1) = joints[j].y;
                out.params(f, troff + 2) = joints[j].z;
            }
        }
        for (int j : order) {
            const int p = topo.bone_parents[j];
            const Vec3 d_world = joints[j] - joints[p];
            const double len = d_world.norm();
            const double rest = topo.bone_rest_lengths[j];
            if (rest <= 0.0 || std::fabs(len - rest) > 0.05 * rest)
                throw InconsistentBoneLengths(
                    "frame " + std::to_string(f) + " joint " + std::to_string(j) + ": length " +
                    std::to_string(len) + " vs rest " + std::to_string(rest));
            const Vec3 d = mat3_apply_transposed(chain[p], d_world * (1.0 / len));
            const double rx = std::atan2(-d.y, d.z);
            const double ry = std::atan2(d.x, std::sqrt(d.y * d.y + d.z * d.z));
            const int o = aoff[j];
            out.params(f, o) = rx;
            out.params(f, o + 1) = ry;
            out.params(f, o + 2) = 0.0;  // twist is unrecoverable from positions
            chain[j] = mat3_mul(chain[p], euler_xyz_matrix(rx, ry, 0.0));
        }
    }
    return out;
}

Matrix flatten_frames(const SkeletonSequence& seq) {
    Matrix out(seq.frame_count(), 3 * seq.joint_count());
    for (int f = 0; f < seq.frame_count(); ++f) {
        for (int j = 0; j < seq.joint_count(); ++j) {
            const Vec3& v = seq.frames[f].joints[j];
            out(f, 3 * j) = v.x;
            out(f, 3 * j + 1) = v.y;
            out(f, 3 * j + 2) = v.z;
        }
    }
    return out;
}

}  // namespace casa
