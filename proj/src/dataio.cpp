#include "casa/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "casa/errors.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace casa {

void SyntheticActionSpec::validate() const {
    topology.validate();
    if (phase_keyposes.size() < 2) throw InvalidSpec("need at least 2 keyposes");
    const int p = PoseParamSequence::param_dim(topology);
    for (const auto& k : phase_keyposes)
        if (static_cast<int>(k.size()) != p)
            throw InvalidSpec("keypose dim " + std::to_string(k.size()) + ", expected " +
                              std::to_string(p));
    if (phase_duration_range[0] < 2 || phase_duration_range[1] < phase_duration_range[0])
        throw InvalidSpec("phase durations must be >= 2 and ordered");
    if (subject_variation_std < 0.0) throw InvalidSpec("subject_variation_std must be >= 0");
    if (speed_jitter < 0.0) throw InvalidSpec("speed_jitter must be >= 0");
    if (fps <= 0.0) throw InvalidSpec("fps must be positive");
}

std::vector<ManifestEntry> DatasetManifest::split(const std::string& name) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
        if (e.split == name) out.push_back(e);
    return out;
}

SkeletonTopology toy_humanoid_topology() {
    SkeletonTopology t;
    t.joint_count = 8;
    t.joint_names = {"pelvis", "chest", "neck", "head", "l_shoulder", "r_shoulder", "l_wrist",
                     "r_wrist"};
    t.bone_parents = {0, 0, 1, 2, 1, 1, 4, 5};
    t.bone_rest_lengths = {0.0, 1.0, 0.25, 0.25, 0.35, 0.35, 0.5, 0.5};
    t.mirror_map = {0, 1, 2, 3, 5, 4, 7, 6};
    t.reference_joints = {/*origin=*/1, /*axis=*/0, /*plane=*/5};
    t.validate();
    return t;
}

namespace {

// Angle slots (3 per non-root joint in index order): chest 0, neck 3,
// head 6, l_shoulder 9, r_shoulder 12, l_wrist 15, r_wrist 18; root
// translation occupies 21..23.
std::vector<double> base_pose() {
    std::vector<double> p(24, 0.0);
    p[9] = -M_PI / 2.0;   // left shoulder bone points +y
    p[12] = M_PI / 2.0;   // right shoulder bone points -y
    p[15] = -1.4;         // left arm hangs down
    p[18] = 1.4;          // right arm hangs down
    return p;
}

}  // namespace

SyntheticActionSpec reach_lift_place_spec() {
    SyntheticActionSpec s;
    s.action_name = "reach-lift-place";
    s.topology = toy_humanoid_topology();
    s.fps = 30.0;
    s.phase_duration_range = {14, 26};
    s.subject_variation_std = 0.05;
    s.speed_jitter = 0.4;

    std::vector<double> rest = base_pose();

    std::vector<double> reach = base_pose();
    reach[15] = 0.0;  // arms swing forward
    reach[16] = 1.2;
    reach[18] = 0.0;
    reach[19] = 1.2;
    reach[0] = 0.15;  // slight chest lean

    std::vector<double> lift = base_pose();
    lift[15] = 1.3;  // arms up
    lift[18] = -1.3;
    lift[0] = -0.1;
    lift[3] = -0.15;  // neck tilts back

    std::vector<double> place = base_pose();
    place[15] = -0.6;
    place[16] = 0.6;
    place[18] = 0.6;
    place[19] = 0.6;
    place[0] = 0.25;

    s.phase_keyposes = {rest, reach, lift, place};
    s.validate();
    return s;
}

SyntheticActionSpec wave_spec() {
    SyntheticActionSpec s;
    s.action_name = "wave";
    s.topology = toy_humanoid_topology();
    s.fps = 30.0;
    s.phase_duration_range = {14, 26};
    s.subject_variation_std = 0.05;
    s.speed_jitter = 0.4;

    std::vector<double> rest = base_pose();

    std::vector<double> raised = base_pose();
    raised[18] = -1.3;  // right arm up
    raised[3] = 0.1;

    std::vector<double> wave_out = base_pose();
    wave_out[18] = -1.3;
    wave_out[19] = 0.7;
    wave_out[0] = 0.1;

    std::vector<double> wave_in = base_pose();
    wave_in[18] = -1.3;
    wave_in[19] = -0.7;
    wave_in[3] = -0.1;

    s.phase_keyposes = {rest, raised, wave_out, wave_in};
    s.validate();
    return s;
}

std::vector<SkeletonSequence> generate(const SyntheticActionSpec& spec, int num_sequences,
                                       Rng& rng) {
    spec.validate();
    if (num_sequences <= 0) throw InvalidSpec("num_sequences must be positive");
    const int p = PoseParamSequence::param_dim(spec.topology);
    const int n_angles = 3 * (spec.topology.joint_count - 1);
    const int phases = static_cast<int>(spec.phase_keyposes.size()) - 1;
    const std::uint64_t base = rng.next_u64();

    std::vector<SkeletonSequence> out;
    out.reserve(num_sequences);
    for (int s = 0; s < num_sequences; ++s) {
        Rng r = Rng::substream(base, {static_cast<std::uint64_t>(s)});

        std::vector<std::vector<double>> keys = spec.phase_keyposes;
        for (auto& k : keys)
            for (int j = 0; j < n_angles; ++j) k[j] += spec.subject_variation_std * r.normal();

        std::vector<int> durations(phases);
        for (int& d : durations) {
            const int lo = spec.phase_duration_range[0], hi = spec.phase_duration_range[1];
            d = lo + static_cast<int>(r.uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
        }
        const int m = std::accumulate(durations.begin(), durations.end(), 0);

        PoseParamSequence poses;
        poses.topology = spec.topology;
        poses.params = Matrix(m, p);
        std::vector<int> labels(m);
        int f = 0;
        for (int ph = 0; ph < phases; ++ph) {
            for (int i = 0; i < durations[ph]; ++i, ++f) {
                double t = static_cast<double>(i) / durations[ph];
                if (spec.speed_jitter > 0.0)
                    t += spec.speed_jitter * r.uniform(-0.5, 0.5) / durations[ph];
                t = std::clamp(t, 0.0, 1.0);
                const double e = t * t * (3.0 - 2.0 * t);  // smooth-step easing
                for (int j = 0; j < p; ++j)
                    poses.params(f, j) = keys[ph][j] + e * (keys[ph + 1][j] - keys[ph][j]);
                labels[f] = ph;
            }
        }

        SkeletonSequence seq = normalize(fk_transform(poses));
        seq.fps = spec.fps;
        seq.action_name = spec.action_name;
        seq.phase_labels = std::move(labels);
        std::vector<double> progress(m);
        for (int i = 0; i < m; ++i) progress[i] = static_cast<double>(i) / (m - 1);
        seq.progress = std::move(progress);
        seq.validate();
        out.push_back(std::move(seq));
    }
    return out;
}

namespace {

nlohmann::json topology_to_json(const SkeletonTopology& t) {
    return {{"joint_count", t.joint_count},
            {"bone_parents", t.bone_parents},
            {"reference_joints",
             {{"origin", t.reference_joints.origin},
              {"axis", t.reference_joints.axis},
              {"plane", t.reference_joints.plane}}},
            {"mirror_map", t.mirror_map},
            {"bone_rest_lengths", t.bone_rest_lengths}};
}

SkeletonTopology topology_from_json(const nlohmann::json& j) {
    SkeletonTopology t;
    t.joint_count = j.at("joint_count").get<int>();
    t.bone_parents = j.at("bone_parents").get<std::vector<int>>();
    const auto& r = j.at("reference_joints");
    t.reference_joints.origin = r.at("origin").get<int>();
    t.reference_joints.axis = r.at("axis").get<int>();
    t.reference_joints.plane = r.at("plane").get<int>();
    t.mirror_map = j.at("mirror_map").get<std::vector<int>>();
    t.bone_rest_lengths = j.at("bone_rest_lengths").get<std::vector<double>>();
    return t;
}

}  // namespace

void save_sequence(const SkeletonSequence& seq, const std::string& path) {
    seq.validate();
    nlohmann::json j;
    j["action"] = seq.action_name;
    j["fps"] = seq.fps;
    j["topology"] = topology_to_json(seq.topology);
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : seq.frames) {
        nlohmann::json frame = nlohmann::json::array();
        for (const Vec3& v : f.joints) frame.push_back({v.x, v.y, v.z});
        frames.push_back(std::move(frame));
    }
    j["frames"] = std::move(frames);
    if (seq.phase_labels) j["phase_labels"] = *seq.phase_labels;
    if (seq.progress) j["progress"] = *seq.progress;
    std::ofstream out(path);
    if (!out) throw Error("cannot write sequence " + path);
    out << j.dump();
    if (!out) throw Error("short write on sequence " + path);
}

SkeletonSequence load_sequence(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read sequence " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    SkeletonSequence seq;
    try {
        seq.action_name = j.at("action").get<std::string>();
        seq.fps = j.at("fps").get<double>();
        seq.topology = topology_from_json(j.at("topology"));
        const auto& frames = j.at("frames");
        if (!frames.is_array()) throw ParseError(path + ": frames must be an array");
        seq.frames.reserve(frames.size());
        for (std::size_t f = 0; f < frames.size(); ++f) {
            Skeleton sk;
            for (std::size_t q = 0; q < frames[f].size(); ++q) {
                const auto& c = frames[f][q];
                if (!c.is_array() || c.size() != 3)
                    throw ParseError(path + ": frame " + std::to_string(f) + " joint " +
                                     std::to_string(q) + " must have 3 coordinates");
                sk.joints.push_back({c[0].get<double>(), c[1].get<double>(), c[2].get<double>()});
            }
            seq.frames.push_back(std::move(sk));
        }
        if (j.contains("phase_labels")) seq.phase_labels = j.at("phase_labels").get<std::vector<int>>();
        if (j.contains("progress")) seq.progress = j.at("progress").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    seq.validate();  // throws InvariantViolation naming the failed invariant
    return seq;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    nlohmann::json j;
    j["seed"] = manifest.seed;
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : manifest.entries)
        entries.push_back({{"path", e.path}, {"action", e.action}, {"split", e.split}});
    j["entries"] = std::move(entries);
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest " + path);
    out << j.dump();
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read manifest " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    DatasetManifest m;
    const fs::path base = fs::path(path).parent_path();
    try {
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& e : j.at("entries")) {
            ManifestEntry entry;
            entry.path = e.at("path").get<std::string>();
            entry.action = e.at("action").get<std::string>();
            entry.split = e.at("split").get<std::string>();
            if (entry.split != "train" && entry.split != "val")
                throw ParseError(path + ": split must be train or val, got " + entry.split);
            fs::path p(entry.path);
            if (p.is_relative()) p = base / p;
            entry.path = p.string();
            m.entries.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    for (const auto& e : m.entries)
        if (!fs::exists(e.path)) throw InvariantViolation("manifest entry missing: " + e.path);
    return m;
}

DatasetManifest default_benchmark(const std::string& out_dir, std::uint64_t seed) {
    fs::create_directories(out_dir);
    const std::vector<SyntheticActionSpec> specs = {reach_lift_place_spec(), wave_spec()};
    const int train_per_action = 20, val_per_action = 8;

    DatasetManifest manifest;
    manifest.seed = seed;
    DatasetManifest relative;  // paths as written into the file
    relative.seed = seed;
    for (std::size_t a = 0; a < specs.size(); ++a) {
        Rng rng = Rng::substream(seed, {static_cast<std::uint64_t>(a)});
        auto seqs = generate(specs[a], train_per_action + val_per_action, rng);
        for (std::size_t s = 0; s < seqs.size(); ++s) {
            std::string name = specs[a].action_name + "_" +
                               (s < 10 ? "0" : "") + std::to_string(s) + ".json";
            const std::string full = (fs::path(out_dir) / name).string();
            save_sequence(seqs[s], full);
            const std::string split = s < static_cast<std::size_t>(train_per_action) ? "train" : "val";
            manifest.entries.push_back({full, specs[a].action_name, split});
            relative.entries.push_back({name, specs[a].action_name, split});
        }
    }
    save_manifest(relative, (fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

}  // namespace casa
