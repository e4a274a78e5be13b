#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>

#include "casa/cli.hpp"
#include "casa/dataio.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace casa;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("casa_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Two-keypose swing action; the shoulder/wrist baseline keeps the rest pose
// away from the normalization plane degeneracy.
std::string tiny_spec_json() {
    std::vector<double> a(24, 0.0), b;
    a[9] = -1.5707963;
    a[12] = 1.5707963;
    a[15] = -1.4;
    a[18] = 1.4;
    b = a;
    b[3] = 0.8;
    b[16] = 0.9;
    nlohmann::json spec = {
        {"actions",
         {{{"name", "swing"},
           {"phase_keyposes", {a, b, a}},
           {"phase_duration_range", {8, 11}}}}},
        {"train_per_action", 4},
        {"val_per_action", 2},
    };
    return spec.dump();
}

std::string tiny_train_config(int epochs, double lr = 1e-3) {
    nlohmann::json cfg = {
        {"train", {{"epochs", epochs}, {"learning_rate", lr}, {"seed", 7}, {"batch_size", 2}}},
    };
    return cfg.dump();
}

fs::path generate_tiny_dataset(const std::string& tag) {
    fs::path dir = scratch(tag);
    fs::path spec = dir / "spec.json";
    write_text(spec, tiny_spec_json());
    fs::path data = dir / "data";
    REQUIRE(cli::run({"gen", "--out", data.string(), "--seed", "5", "--spec", spec.string()}) == 0);
    return dir;
}

}  // namespace

TEST_CASE("gen with a custom spec writes the dataset and is seed-deterministic") {
    fs::path dir = scratch("gen");
    fs::path spec = dir / "spec.json";
    write_text(spec, tiny_spec_json());
    fs::path d1 = dir / "d1";
    fs::path d2 = dir / "d2";
    CHECK(cli::run({"gen", "--out", d1.string(), "--seed", "5", "--spec", spec.string()}) == 0);
    CHECK(cli::run({"gen", "--out", d2.string(), "--seed", "5", "--spec", spec.string()}) == 0);

    DatasetManifest m = load_manifest((d1 / "manifest.json").string());
    CHECK(m.entries.size() == 6);
    CHECK(m.split("train").size() == 4);
    CHECK(m.split("val").size() == 2);
    for (const auto& e : fs::directory_iterator(d1))
        CHECK(read_text(e.path()) == read_text(d2 / e.path().filename()));
    fs::remove_all(dir);
}

TEST_CASE("gen default benchmark honors the documented layout") {
    fs::path dir = scratch("gen_default");
    CHECK(cli::run({"gen", "--out", dir.string(), "--seed", "42"}) == 0);
    DatasetManifest m = load_manifest((dir / "manifest.json").string());
    CHECK(m.entries.size() == 56);
    fs::remove_all(dir);
}

TEST_CASE("gen into an unwritable location fails with a runtime error code") {
    fs::path dir = scratch("gen_bad");
    write_text(dir / "blocker", "x");
    // Using a regular file as a parent directory cannot succeed.
    fs::path out = dir / "blocker" / "sub";
    CHECK(cli::run({"gen", "--out", out.string()}) == 1);
    fs::remove_all(dir);
}

TEST_CASE("malformed configs and arguments exit with the config error code") {
    fs::path dir = scratch("badcfg");
    fs::path seq = dir / "seq.json";
    fs::path spec = dir / "spec.json";
    write_text(spec, tiny_spec_json());
    REQUIRE(cli::run({"gen", "--out", (dir / "d").string(), "--spec", spec.string()}) == 0);
    fs::copy_file(dir / "d" / "swing_00.json", seq);

    fs::path cfg = dir / "cfg.json";
    write_text(cfg, "{\"train\": {\"epochz\": 3}}");
    CHECK(cli::run({"augment", "--in", seq.string(), "--out", (dir / "o").string(), "--config",
                    cfg.string()}) == 2);
    write_text(cfg, "{not json");
    CHECK(cli::run({"augment", "--in", seq.string(), "--out", (dir / "o").string(), "--config",
                    cfg.string()}) == 2);
    write_text(cfg, "{\"loss\": {\"kind\": \"triplet\"}}");
    CHECK(cli::run({"augment", "--in", seq.string(), "--out", (dir / "o").string(), "--config",
                    cfg.string()}) == 2);
    write_text(cfg, "{\"train\": {\"learning_rate\": -1.0}}");
    CHECK(cli::run({"augment", "--in", seq.string(), "--out", (dir / "o").string(), "--config",
                    cfg.string()}) == 2);

    // Unknown subcommands and missing required options are argument errors.
    CHECK(cli::run({"frobnicate"}) == 2);
    CHECK(cli::run({"gen"}) == 2);
    fs::remove_all(dir);
}

TEST_CASE("augment with every op disabled reproduces the input pair exactly") {
    fs::path dir = generate_tiny_dataset("aug_id");
    fs::path seq = dir / "data" / "swing_00.json";
    fs::path cfg = dir / "cfg.json";
    nlohmann::json cj = {{"augment",
                          {{"enable_temporal", false},
                           {"enable_translation", false},
                           {"enable_flip", false},
                           {"enable_angle", false},
                           {"enable_latent", false}}}};
    write_text(cfg, cj.dump());
    fs::path out = dir / "pair";
    REQUIRE(cli::run({"augment", "--in", seq.string(), "--out", out.string(), "--config",
                      cfg.string(), "--seed", "11"}) == 0);

    SkeletonSequence orig = load_sequence((out / "original.json").string());
    SkeletonSequence aug = load_sequence((out / "augmented.json").string());
    REQUIRE(orig.frame_count() == aug.frame_count());
    for (int f = 0; f < orig.frame_count(); ++f)
        for (std::size_t j = 0; j < orig.frames[f].joints.size(); ++j) {
            const Vec3 d = orig.frames[f].joints[j] - aug.frames[f].joints[j];
            CHECK(std::abs(d.x) + std::abs(d.y) + std::abs(d.z) < 1e-9);
        }

    nlohmann::json pair;
    std::ifstream(out / "pair.json") >> pair;
    CHECK(pair.at("seed").get<std::uint64_t>() == 11);
    auto j_gt = pair.at("j_gt").get<std::vector<int>>();
    REQUIRE(static_cast<int>(j_gt.size()) == orig.frame_count());
    for (std::size_t i = 0; i < j_gt.size(); ++i) CHECK(j_gt[i] == static_cast<int>(i));
    for (const auto& [op, applied] : pair.at("applied_ops").items())
        CHECK_FALSE(applied.get<bool>());
    fs::remove_all(dir);
}

TEST_CASE("augment without a seed records the one it drew") {
    fs::path dir = generate_tiny_dataset("aug_seed");
    fs::path cfg = dir / "cfg.json";
    write_text(cfg, "{}");
    fs::path out = dir / "pair";
    REQUIRE(cli::run({"augment", "--in", (dir / "data" / "swing_01.json").string(), "--out",
                      out.string(), "--config", cfg.string()}) == 0);
    nlohmann::json pair;
    std::ifstream(out / "pair.json") >> pair;
    CHECK(pair.contains("seed"));
    auto j_gt = pair.at("j_gt").get<std::vector<int>>();
    for (std::size_t i = 1; i < j_gt.size(); ++i) CHECK(j_gt[i] > j_gt[i - 1]);
    fs::remove_all(dir);
}

TEST_CASE("train writes metrics and checkpoints, and resume extends the epoch count") {
    fs::path dir = generate_tiny_dataset("train");
    fs::path manifest = dir / "data" / "manifest.json";
    fs::path cfg = dir / "cfg.json";
    write_text(cfg, tiny_train_config(3));
    fs::path run1 = dir / "run1";
    REQUIRE(cli::run({"train", "--manifest", manifest.string(), "--config", cfg.string(), "--out",
                      run1.string()}) == 0);
    CHECK(fs::exists(run1 / "checkpoint.json"));

    std::ifstream metrics(run1 / "metrics.jsonl");
    std::string line;
    int lines = 0;
    int last_epoch = 0;
    while (std::getline(metrics, line)) {
        nlohmann::json rec = nlohmann::json::parse(line);
        CHECK(rec.contains("mean_loss"));
        last_epoch = rec.at("epoch").get<int>();
        ++lines;
    }
    CHECK(lines == 3);
    CHECK(last_epoch == 3);

    write_text(cfg, tiny_train_config(2));
    fs::path run2 = dir / "run2";
    REQUIRE(cli::run({"train", "--manifest", manifest.string(), "--config", cfg.string(), "--out",
                      run2.string(), "--resume", (run1 / "checkpoint.json").string()}) == 0);
    nlohmann::json ckpt;
    std::ifstream(run2 / "checkpoint.json") >> ckpt;
    CHECK(ckpt.at("epoch").get<int>() == 5);
    fs::remove_all(dir);
}

TEST_CASE("align of a sequence with itself is the identity matching") {
    fs::path dir = generate_tiny_dataset("align");
    fs::path manifest = dir / "data" / "manifest.json";
    fs::path cfg = dir / "cfg.json";
    write_text(cfg, tiny_train_config(1));
    fs::path run1 = dir / "run1";
    REQUIRE(cli::run({"train", "--manifest", manifest.string(), "--config", cfg.string(), "--out",
                      run1.string()}) == 0);

    fs::path seq = dir / "data" / "swing_04.json";
    fs::path out = dir / "alignment.json";
    REQUIRE(cli::run({"align", "--ckpt", (run1 / "checkpoint.json").string(), "--a", seq.string(),
                      "--b", seq.string(), "--out", out.string()}) == 0);
    nlohmann::json al;
    std::ifstream(out) >> al;
    auto nn = al.at("nn").get<std::vector<int>>();
    REQUIRE(nn.size() == al.at("source").get<std::size_t>());
    for (std::size_t i = 0; i < nn.size(); ++i) CHECK(nn[i] == static_cast<int>(i));
    for (double d : al.at("distances").get<std::vector<double>>()) CHECK(d < 1e-9);

    std::string svg = read_text(dir / "alignment.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("<line") != std::string::npos);

    fs::path out2 = dir / "alignment_online.json";
    REQUIRE(cli::run({"align", "--ckpt", (run1 / "checkpoint.json").string(), "--a", seq.string(),
                      "--b", (dir / "data" / "swing_05.json").string(), "--online", "--out",
                      out2.string()}) == 0);
    nlohmann::json al2;
    std::ifstream(out2) >> al2;
    CHECK(al2.at("nn").size() == al2.at("source").get<std::size_t>());
    fs::remove_all(dir);
}

TEST_CASE("eval writes a complete report and rejects manifests without a val split") {
    fs::path dir = generate_tiny_dataset("eval");
    fs::path manifest = dir / "data" / "manifest.json";
    fs::path cfg = dir / "cfg.json";
    write_text(cfg, tiny_train_config(1));
    fs::path run1 = dir / "run1";
    REQUIRE(cli::run({"train", "--manifest", manifest.string(), "--config", cfg.string(), "--out",
                      run1.string()}) == 0);

    fs::path report_path = dir / "report.json";
    REQUIRE(cli::run({"eval", "--ckpt", (run1 / "checkpoint.json").string(), "--manifest",
                      manifest.string(), "--out", report_path.string()}) == 0);
    nlohmann::json report;
    std::ifstream(report_path) >> report;
    for (const char* key :
         {"kendalls_tau", "phase_progress_r2", "phase_classification", "ap_at_k", "num_pairs"})
        CHECK(report.contains(key));
    CHECK(report.at("kendalls_tau").get<double>() >= -1.0);
    CHECK(report.at("kendalls_tau").get<double>() <= 1.0);

    // Strip the val entries out of the manifest; eval must refuse it.
    DatasetManifest m = load_manifest(manifest.string());
    DatasetManifest train_only;
    train_only.seed = m.seed;
    train_only.entries = m.split("train");
    fs::path bad = dir / "train_only.json";
    save_manifest(train_only, bad.string());
    CHECK(cli::run({"eval", "--ckpt", (run1 / "checkpoint.json").string(), "--manifest",
                    bad.string(), "--out", report_path.string()}) == 2);
    fs::remove_all(dir);
}
