#include "casa/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "CLI11.hpp"
#include "casa/augment.hpp"
#include "casa/dataio.hpp"
#include "casa/errors.hpp"
#include "casa/evalalign.hpp"
#include "casa/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace casa::cli {

namespace {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level() {
    const char* env = std::getenv("CASA_LOG_LEVEL");
    if (!env) return LogLevel::Info;
    const std::string v(env);
    if (v == "error") return LogLevel::Error;
    if (v == "warn") return LogLevel::Warn;
    if (v == "info") return LogLevel::Info;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Info;
}

void log(LogLevel level, const std::string& msg) {
    static const LogLevel threshold = log_level();
    if (level <= threshold) {
        static const char* names[] = {"error", "warn", "info", "debug"};
        std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
    }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* name, T& out) {
    if (j.contains(name)) {
        try {
            out = j.at(name).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(std::string("config field '") + name + "' has the wrong type");
        }
    }
}

void check_known(const nlohmann::json& j, const std::vector<std::string>& known,
                 const std::string& section) {
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown config field '" + section + key + "'");
    }
}

TrainConfig parse_config(const std::string& path) {
    TrainConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    check_known(j, {"model", "augment", "train", "loss"}, "");
    if (j.contains("model")) {
        const auto& m = j["model"];
        check_known(m,
                    {"input_dim", "num_attention_layers", "num_heads", "temperature",
                     "projection_hidden_dim", "positional_base"},
                    "model.");
        read_field(m, "input_dim", cfg.model.input_dim);
        read_field(m, "num_attention_layers", cfg.model.num_attention_layers);
        read_field(m, "num_heads", cfg.model.num_heads);
        read_field(m, "temperature", cfg.model.temperature);
        read_field(m, "projection_hidden_dim", cfg.model.projection_hidden_dim);
        read_field(m, "positional_base", cfg.model.positional_base);
    }
    if (j.contains("augment")) {
        const auto& a = j["augment"];
        check_known(a,
                    {"sigma_angle_deg", "sigma_translation", "sigma_latent",
                     "geometric_probability", "temporal_min_fraction", "enable_temporal",
                     "enable_translation", "enable_flip", "enable_angle", "enable_latent"},
                    "augment.");
        read_field(a, "sigma_angle_deg", cfg.augment.sigma_angle_deg);
        read_field(a, "sigma_translation", cfg.augment.sigma_translation);
        read_field(a, "sigma_latent", cfg.augment.sigma_latent);
        read_field(a, "geometric_probability", cfg.augment.geometric_probability);
        read_field(a, "temporal_min_fraction", cfg.augment.temporal_min_fraction);
        read_field(a, "enable_temporal", cfg.augment.enable_temporal);
        read_field(a, "enable_translation", cfg.augment.enable_translation);
        read_field(a, "enable_flip", cfg.augment.enable_flip);
        read_field(a, "enable_angle", cfg.augment.enable_angle);
        read_field(a, "enable_latent", cfg.augment.enable_latent);
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        check_known(t, {"batch_size", "learning_rate", "epochs", "seed", "checkpoint_every"},
                    "train.");
        read_field(t, "batch_size", cfg.batch_size);
        read_field(t, "learning_rate", cfg.learning_rate);
        read_field(t, "epochs", cfg.epochs);
        read_field(t, "seed", cfg.seed);
        read_field(t, "checkpoint_every", cfg.checkpoint_every);
    }
    if (j.contains("loss")) {
        const auto& l = j["loss"];
        check_known(l, {"kind", "temperature"}, "loss.");
        std::string kind = "regression";
        read_field(l, "kind", kind);
        if (kind == "regression")
            cfg.loss.kind = LossConfig::Kind::Regression;
        else if (kind == "contrastive")
            cfg.loss.kind = LossConfig::Kind::Contrastive;
        else
            throw ConfigError("loss.kind must be 'regression' or 'contrastive'");
        read_field(l, "temperature", cfg.loss.temperature);
    }
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return cfg;
}

SyntheticActionSpec spec_from_json(const nlohmann::json& j) {
    SyntheticActionSpec s;
    s.topology = toy_humanoid_topology();
    if (!j.contains("name") || !j.contains("phase_keyposes"))
        throw ConfigError("action spec needs 'name' and 'phase_keyposes'");
    read_field(j, "name", s.action_name);
    try {
        s.phase_keyposes = j.at("phase_keyposes").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("phase_keyposes must be an array of pose-param vectors");
    }
    if (j.contains("phase_duration_range")) {
        auto r = j.at("phase_duration_range").get<std::vector<int>>();
        if (r.size() != 2) throw ConfigError("phase_duration_range must have 2 entries");
        s.phase_duration_range = {r[0], r[1]};
    }
    read_field(j, "subject_variation_std", s.subject_variation_std);
    read_field(j, "speed_jitter", s.speed_jitter);
    read_field(j, "fps", s.fps);
    try {
        s.validate();
    } catch (const InvalidSpec& e) {
        throw ConfigError(e.what());
    }
    return s;
}

int cmd_gen(const std::string& out_dir, std::uint64_t seed, const std::string& spec_path) {
    if (spec_path.empty()) {
        DatasetManifest m = default_benchmark(out_dir, seed);
        std::cout << (fs::path(out_dir) / "manifest.json").string() << "\n";
        log(LogLevel::Info, "generated " + std::to_string(m.entries.size()) + " sequences");
        return 0;
    }
    std::ifstream in(spec_path);
    if (!in) throw ConfigError("cannot read spec file " + spec_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("spec " + spec_path + ": " + e.what());
    }
    check_known(j, {"actions", "train_per_action", "val_per_action"}, "");
    int train_n = 20, val_n = 8;
    read_field(j, "train_per_action", train_n);
    read_field(j, "val_per_action", val_n);
    if (!j.contains("actions") || !j["actions"].is_array() || j["actions"].empty())
        throw ConfigError("spec needs a non-empty 'actions' array");

    fs::create_directories(out_dir);
    DatasetManifest relative;
    relative.seed = seed;
    std::uint64_t action_idx = 0;
    for (const auto& aj : j["actions"]) {
        SyntheticActionSpec spec = spec_from_json(aj);
        Rng rng = Rng::substream(seed, {action_idx++});
        auto seqs = generate(spec, train_n + val_n, rng);
        for (std::size_t s = 0; s < seqs.size(); ++s) {
            std::string name = spec.action_name + "_" + (s < 10 ? "0" : "") + std::to_string(s) +
                               ".json";
            save_sequence(seqs[s], (fs::path(out_dir) / name).string());
            relative.entries.push_back(
                {name, spec.action_name, s < static_cast<std::size_t>(train_n) ? "train" : "val"});
        }
    }
    const std::string mpath = (fs::path(out_dir) / "manifest.json").string();
    save_manifest(relative, mpath);
    std::cout << mpath << "\n";
    return 0;
}

int cmd_augment(const std::string& in_path, const std::string& out_dir,
                const std::string& config_path, std::uint64_t seed, bool have_seed) {
    TrainConfig cfg = parse_config(config_path);
    if (!have_seed) {
        std::random_device rd;
        seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
    SkeletonSequence seq = normalize(load_sequence(in_path));
    PoseParamSequence poses = inverse_kinematics_angles(seq);
    PcaLatentSpace latent = PcaLatentSpace::fit({poses});

    Rng rng(seed);
    AugmentedPair pair = make_pair(seq, poses, cfg.augment, rng, &latent);

    fs::create_directories(out_dir);
    const std::string orig_path = (fs::path(out_dir) / "original.json").string();
    const std::string aug_path = (fs::path(out_dir) / "augmented.json").string();
    save_sequence(pair.original, orig_path);
    save_sequence(pair.augmented, aug_path);

    nlohmann::json manifest;
    manifest["original"] = orig_path;
    manifest["augmented"] = aug_path;
    manifest["j_gt"] = pair.j_gt;
    manifest["applied_ops"] = {{"latent", pair.applied_ops.latent},
                               {"angle", pair.applied_ops.angle},
                               {"temporal", pair.applied_ops.temporal},
                               {"translation", pair.applied_ops.translation},
                               {"flip", pair.applied_ops.flip}};
    manifest["seed"] = seed;
    std::ofstream mout((fs::path(out_dir) / "pair.json").string());
    if (!mout) throw Error("cannot write pair manifest");
    mout << manifest.dump();

    std::cout << "applied_ops: latent=" << pair.applied_ops.latent
              << " angle=" << pair.applied_ops.angle << " temporal=" << pair.applied_ops.temporal
              << " translation=" << pair.applied_ops.translation
              << " flip=" << pair.applied_ops.flip << " (" << pair.augmented.frame_count() << "/"
              << pair.original.frame_count() << " frames, seed " << seed << ")\n";
    return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& config_path,
              const std::string& out_dir, const std::string& resume_path) {
    TrainConfig cfg = parse_config(config_path);
    DatasetManifest manifest = load_manifest(manifest_path);
    Checkpoint resume;
    const Checkpoint* resume_ptr = nullptr;
    if (!resume_path.empty()) {
        resume = load_checkpoint(resume_path);
        resume_ptr = &resume;
    }
    TrainResult result = train(manifest, cfg, out_dir, resume_ptr);
    const double final_loss = result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back();
    std::cout << "final mean loss: " << final_loss << " (epoch " << result.checkpoint.epoch
              << ")\n";
    return 0;
}

int cmd_align(const std::string& ckpt_path, const std::string& a_path, const std::string& b_path,
              bool online, const std::string& out_path, int every_kth) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    SkeletonSequence a = normalize(load_sequence(a_path));
    SkeletonSequence b = normalize(load_sequence(b_path));
    Alignment alignment;
    if (online) {
        alignment = align_online(a, b, ckpt.params, ckpt.config);
    } else {
        auto [ea, eb] = encode_pair(a, b, ckpt.params, ckpt.config);
        alignment = align(ea.U, eb.U);
    }
    save_alignment(alignment, out_path);
    fs::path svg = out_path;
    svg.replace_extension(".svg");
    save_alignment_svg(alignment, svg.string(), every_kth);
    std::cout << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& manifest_path,
             const std::string& out_path, int online_pairs, std::uint64_t seed) {
    DatasetManifest manifest = load_manifest(manifest_path);
    if (manifest.split("val").empty()) throw ConfigError("manifest has no val split");
    if (manifest.split("train").empty()) throw ConfigError("manifest has no train split");
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    EvalConfig cfg;
    cfg.seed = seed;
    cfg.online_pairs_per_action = online_pairs;
    EvalReport report = evaluate(ckpt, manifest, cfg);
    save_report(report, out_path);
    std::cout << "tau=" << report.kendalls_tau << " r2=" << report.phase_progress_r2
              << " acc(1.0)=" << report.phase_classification.at("1.0")
              << " ap@5=" << report.ap_at_k.at(5);
    if (report.online_kendalls_tau >= -1.0) std::cout << " online_tau=" << report.online_kendalls_tau;
    std::cout << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"CASA: context-aware skeletal sequence alignment"};
    app.require_subcommand(1);

    std::string out_dir, spec_path, config_path, in_path, manifest_path, ckpt_path;
    std::string a_path, b_path, out_path, resume_path;
    std::uint64_t seed = 42;
    bool online = false;
    int every_kth = 1;
    int online_pairs = 0;
    std::uint64_t eval_seed = 0;

    auto* gen = app.add_subcommand("gen", "Generate the synthetic benchmark dataset");
    gen->add_option("--out", out_dir, "Output directory")->required();
    gen->add_option("--seed", seed, "Generator seed");
    gen->add_option("--spec", spec_path, "Custom action spec JSON");

    auto* aug = app.add_subcommand("augment", "Create an augmented pair from a sequence");
    aug->add_option("--in", in_path, "Input sequence JSON")->required();
    aug->add_option("--out", out_dir, "Output directory")->required();
    aug->add_option("--config", config_path, "Config JSON")->required();
    auto* aug_seed = aug->add_option("--seed", seed, "Augmentation seed");

    auto* tr = app.add_subcommand("train", "Train the alignment model");
    tr->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    tr->add_option("--config", config_path, "Config JSON")->required();
    tr->add_option("--out", out_dir, "Checkpoint directory")->required();
    tr->add_option("--resume", resume_path, "Checkpoint to resume from");

    auto* al = app.add_subcommand("align", "Align two sequences");
    al->add_option("--ckpt", ckpt_path, "Model checkpoint")->required();
    al->add_option("--a", a_path, "Source sequence")->required();
    al->add_option("--b", b_path, "Target sequence")->required();
    al->add_flag("--online", online, "Causal (online) alignment");
    al->add_option("--out", out_path, "Output alignment JSON")->required();
    al->add_option("--every-kth", every_kth, "Draw every k-th matching line in the SVG");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    ev->add_option("--ckpt", ckpt_path, "Model checkpoint")->required();
    ev->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    ev->add_option("--out", out_path, "Output report JSON")->required();
    ev->add_option("--online-pairs", online_pairs, "Same-action pairs per action for online tau");
    ev->add_option("--seed", eval_seed, "Evaluation seed");

    std::vector<const char*> argv;
    argv.push_back("casa");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(out_dir, seed, spec_path);
        if (aug->parsed()) return cmd_augment(in_path, out_dir, config_path, seed, aug_seed->count() > 0);
        if (tr->parsed()) return cmd_train(manifest_path, config_path, out_dir, resume_path);
        if (al->parsed()) return cmd_align(ckpt_path, a_path, b_path, online, out_path, every_kth);
        if (ev->parsed()) return cmd_eval(ckpt_path, manifest_path, out_path, online_pairs, eval_seed);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace casa::cli
