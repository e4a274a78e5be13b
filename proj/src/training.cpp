#include "casa/training.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <thread>

#include "casa/dataio.hpp"
#include "casa/errors.hpp"
#include "casa/numeric.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace casa {

void LossConfig::validate() const {
    if (temperature <= 0.0) throw ConfigError("loss temperature must be positive");
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    augment.validate();
    loss.validate();
}

Matrix match_probabilities(const Matrix& z, const Matrix& z_aug, double temperature) {
    Tape t;
    Var zv = t.leaf(z), av = t.leaf(z_aug);
    Var d = t.pairwise_l2(av, zv);
    return t.value(t.row_softmax(t.scale(d, -1.0), temperature));
}

double predicted_index(const std::vector<double>& gamma_row) {
    double s = 0.0;
    for (std::size_t i = 0; i < gamma_row.size(); ++i) s += gamma_row[i] * static_cast<double>(i);
    return s;
}

Var regression_loss_on_tape(Tape& t, Var z, Var z_aug, const std::vector<int>& j_gt,
                            double temperature) {
    const int m = t.value(z).rows();
    const int n = t.value(z_aug).rows();
    if (static_cast<int>(j_gt.size()) != n)
        throw ShapeMismatch("regression_loss: j_gt length vs augmented frames");
    Var d = t.pairwise_l2(z_aug, z);  // N x M
    Var gamma = t.row_softmax(t.scale(d, -1.0), temperature);
    Matrix idx(m, 1);
    for (int i = 0; i < m; ++i) idx(i, 0) = static_cast<double>(i);
    Var jhat = t.matmul(gamma, t.leaf(idx));  // N x 1
    Matrix gt(n, 1);
    for (int i = 0; i < n; ++i) {
        if (j_gt[i] < 0 || j_gt[i] >= m) throw IndexOutOfRange("regression_loss j_gt");
        gt(i, 0) = static_cast<double>(j_gt[i]);
    }
    Var diff = t.sub(t.leaf(gt), jhat);
    return t.mean(t.hadamard(diff, diff));
}

Var contrastive_loss_on_tape(Tape& t, Var z, Var z_aug, const std::vector<int>& j_gt,
                             double temperature) {
    const int n = t.value(z_aug).rows();
    if (static_cast<int>(j_gt.size()) != n)
        throw ShapeMismatch("contrastive_loss: j_gt length vs augmented frames");
    Var pos = t.select_rows(z, j_gt);          // N x d, originals at j_gt
    Var d = t.pairwise_l2(pos, z_aug);         // N x N, negatives over augmented frames
    Var gamma = t.row_softmax(t.scale(d, -1.0), temperature);
    return t.scale(t.mean(t.log(t.diag(gamma))), -1.0);
}

double regression_loss(const Matrix& z, const Matrix& z_aug, const std::vector<int>& j_gt,
                       double temperature) {
    Tape t;
    return t.value(regression_loss_on_tape(t, t.leaf(z), t.leaf(z_aug), j_gt, temperature))(0, 0);
}

double contrastive_loss(const Matrix& z, const Matrix& z_aug, const std::vector<int>& j_gt,
                        double temperature) {
    Tape t;
    return t.value(contrastive_loss_on_tape(t, t.leaf(z), t.leaf(z_aug), j_gt, temperature))(0, 0);
}

namespace {

constexpr std::uint64_t kShuffleTag = 0x73687566ULL;

struct PairGradResult {
    double loss = 0.0;
    std::map<std::string, Matrix> grads;
};

}  // namespace

double validation_loss(const std::vector<SkeletonSequence>& sequences, const Checkpoint& ckpt,
                       const AugmentConfig& augment, const LossConfig& loss, std::uint64_t seed) {
    if (sequences.empty()) throw EmptyDataset("validation_loss on empty set");
    std::vector<PoseParamSequence> poses;
    poses.reserve(sequences.size());
    for (const auto& s : sequences) poses.push_back(inverse_kinematics_angles(s));
    PcaLatentSpace latent = PcaLatentSpace::fit(poses);
    double total = 0.0;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        Rng rng = Rng::substream(seed, {0x76616cULL, i});
        AugmentedPair pair = make_pair(sequences[i], poses[i], augment, rng, &latent);
        auto [ea, eb] = encode_pair(pair.original, pair.augmented, ckpt.params, ckpt.config);
        total += loss.kind == LossConfig::Kind::Regression
                     ? regression_loss(ea.Z, eb.Z, pair.j_gt, loss.temperature)
                     : contrastive_loss(ea.Z, eb.Z, pair.j_gt, loss.temperature);
    }
    return total / static_cast<double>(sequences.size());
}

TrainResult train(const DatasetManifest& manifest, const TrainConfig& cfg,
                  const std::string& out_dir, const Checkpoint* resume) {
    cfg.validate();
    auto train_entries = manifest.split("train");
    if (train_entries.empty()) throw EmptyDataset("manifest has no train split");

    std::vector<SkeletonSequence> sequences;
    sequences.reserve(train_entries.size());
    for (const auto& e : train_entries) sequences.push_back(load_sequence(e.path));

    ModelConfig model_cfg = cfg.model;
    if (model_cfg.input_dim == 0) model_cfg.input_dim = 3 * sequences[0].joint_count();
    model_cfg.validate();

    std::vector<PoseParamSequence> poses;
    poses.reserve(sequences.size());
    for (const auto& s : sequences) poses.push_back(inverse_kinematics_angles(s));
    PcaLatentSpace latent = PcaLatentSpace::fit(poses);

    Checkpoint ckpt;
    AdamState adam;
    adam.learning_rate = cfg.learning_rate;
    if (resume) {
        ckpt = *resume;
        if (ckpt.config.input_dim != model_cfg.input_dim)
            throw ConfigError("resume checkpoint input_dim mismatch");
        adam.m = ckpt.opt_m;
        adam.v = ckpt.opt_v;
        adam.step = ckpt.opt_step;
    } else {
        ckpt.config = model_cfg;
        ckpt.params = init_params(model_cfg, cfg.seed);
        ckpt.rng_seed = cfg.seed;
        ckpt.epoch = 0;
    }

    if (!out_dir.empty()) fs::create_directories(out_dir);
    std::ofstream metrics;
    if (!out_dir.empty())
        metrics.open((fs::path(out_dir) / "metrics.jsonl").string(),
                     resume ? std::ios::app : std::ios::out);

    const int n = static_cast<int>(sequences.size());
    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    TrainResult result;

    auto eval_pair = [&](int seq_idx, int epoch) {
        Rng rng = Rng::substream(cfg.seed, {static_cast<std::uint64_t>(epoch),
                                            static_cast<std::uint64_t>(seq_idx)});
        AugmentedPair pair = make_pair(sequences[seq_idx], poses[seq_idx], cfg.augment, rng, &latent);
        Tape t;
        auto pv = params_on_tape(t, ckpt.params);
        EncodeVars e = encode_on_tape(t, flatten_frames(pair.original),
                                      flatten_frames(pair.augmented), pv, model_cfg);
        Var loss = cfg.loss.kind == LossConfig::Kind::Regression
                       ? regression_loss_on_tape(t, e.z_a, e.z_b, pair.j_gt, cfg.loss.temperature)
                       : contrastive_loss_on_tape(t, e.z_a, e.z_b, pair.j_gt, cfg.loss.temperature);
        t.backward(loss);
        PairGradResult out;
        out.loss = t.value(loss)(0, 0);
        for (const auto& [name, var] : pv) out.grads.emplace(name, t.grad(var));
        return out;
    };

    const int start_epoch = ckpt.epoch;
    for (int epoch = start_epoch; epoch < start_epoch + cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        // Deterministic per-epoch shuffle.
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        Rng shuffle_rng = Rng::substream(cfg.seed, {static_cast<std::uint64_t>(epoch), kShuffleTag});
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle_rng.uniform_index(i + 1));
            std::swap(order[i], order[j]);
        }

        double epoch_loss = 0.0;
        for (int b = 0; b < n; b += cfg.batch_size) {
            const int count = std::min(cfg.batch_size, n - b);
            std::vector<std::future<PairGradResult>> futs;
            futs.reserve(count);
            for (int i = 0; i < count; ++i) {
                const int seq_idx = order[b + i];
                futs.push_back(std::async(count > 1 && workers > 1 ? std::launch::async
                                                                   : std::launch::deferred,
                                          eval_pair, seq_idx, epoch));
            }
            std::map<std::string, Matrix> acc;
            for (int i = 0; i < count; ++i) {
                PairGradResult r = futs[i].get();  // fixed order keeps the sum deterministic
                epoch_loss += r.loss;
                for (auto& [name, g] : r.grads) {
                    auto it = acc.find(name);
                    if (it == acc.end())
                        acc.emplace(name, std::move(g));
                    else
                        it->second = add(it->second, g);
                }
            }
            for (auto& [name, g] : acc) g = scale(g, 1.0 / count);
            adam_step(adam, ckpt.params.weights, acc);
        }
        epoch_loss /= n;
        result.epoch_losses.push_back(epoch_loss);
        ckpt.epoch = epoch + 1;

        if (metrics.is_open()) {
            const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
            nlohmann::json rec = {{"epoch", epoch + 1},
                                  {"mean_loss", epoch_loss},
                                  {"lr", cfg.learning_rate},
                                  {"wall_ms", wall}};
            metrics << rec.dump() << "\n";
            metrics.flush();
        }
        if (!out_dir.empty() && (epoch + 1) % cfg.checkpoint_every == 0) {
            ckpt.opt_m = adam.m;
            ckpt.opt_v = adam.v;
            ckpt.opt_step = adam.step;
            save_checkpoint(ckpt, (fs::path(out_dir) / ("checkpoint_epoch" +
                                                        std::to_string(epoch + 1) + ".json"))
                                      .string());
        }
    }

    ckpt.opt_m = adam.m;
    ckpt.opt_v = adam.v;
    ckpt.opt_step = adam.step;
    if (!out_dir.empty())
        save_checkpoint(ckpt, (fs::path(out_dir) / "checkpoint.json").string());
    result.checkpoint = std::move(ckpt);
    return result;
}

}  // namespace casa
