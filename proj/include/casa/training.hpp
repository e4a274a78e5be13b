#pragma once

#include <optional>
#include <string>
#include <vector>

#include "casa/augment.hpp"
#include "casa/encoder.hpp"

namespace casa {

struct DatasetManifest;  // dataio

struct LossConfig {
    enum class Kind { Regression, Contrastive };
    Kind kind = Kind::Regression;
    double temperature = 0.1;  // lambda_temp

    void validate() const;
};

struct TrainConfig {
    int batch_size = 4;  // pairs per ADAM step
    double learning_rate = 3e-4;
    int epochs = 200;
    std::uint64_t seed = 0;
    int checkpoint_every = 50;
    AugmentConfig augment;
    ModelConfig model;
    LossConfig loss;

    void validate() const;
};

// Soft matching probabilities of Eq-style softmax over negative scaled L2
// distances: row j of the result is the distribution of augmented frame j
// over the M original frames. Distances are plain L2 norms, not squares.
Matrix match_probabilities(const Matrix& z, const Matrix& z_aug, double temperature);

// Expected index under one probability row (0-based).
double predicted_index(const std::vector<double>& gamma_row);

// Tape-level losses; z / z_aug are projection-head outputs.
Var regression_loss_on_tape(Tape& t, Var z, Var z_aug, const std::vector<int>& j_gt,
                            double temperature);
Var contrastive_loss_on_tape(Tape& t, Var z, Var z_aug, const std::vector<int>& j_gt,
                             double temperature);

double regression_loss(const Matrix& z, const Matrix& z_aug, const std::vector<int>& j_gt,
                       double temperature);
double contrastive_loss(const Matrix& z, const Matrix& z_aug, const std::vector<int>& j_gt,
                        double temperature);

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> epoch_losses;
};

// Self-supervised loop: one augmented pair per training sequence per epoch,
// gradients averaged over batch_size pairs, one ADAM step per batch.
// Deterministic given cfg.seed. Writes checkpoint.json, periodic epoch
// checkpoints and metrics.jsonl under out_dir (when non-empty).
TrainResult train(const DatasetManifest& manifest, const TrainConfig& cfg,
                  const std::string& out_dir, const Checkpoint* resume = nullptr);

// Mean loss over fixed-seed augmented pairs of the given sequences; used for
// validation tracking and the augmentation ablation.
double validation_loss(const std::vector<SkeletonSequence>& sequences, const Checkpoint& ckpt,
                       const AugmentConfig& augment, const LossConfig& loss, std::uint64_t seed);

}  // namespace casa
