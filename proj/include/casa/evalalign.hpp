#pragma once

#include <map>
#include <string>
#include <vector>

#include "casa/encoder.hpp"
#include "casa/matrix.hpp"
#include "casa/rng.hpp"

namespace casa {

struct DatasetManifest;  // dataio

struct Alignment {
    int source_len = 0;
    int target_len = 0;
    std::vector<int> nn;          // nearest target frame per source frame
    std::vector<double> distances;
};

// Nearest neighbor per source frame over pre-projection embeddings, ties
// broken by smallest index. No post-processing.
Alignment align(const Matrix& u_a, const Matrix& u_b);

// Causal variant: frame t is matched from embeddings computed on the prefix
// a[0..t] (b acts as the full reference side).
Alignment align_online(const SkeletonSequence& a, const SkeletonSequence& b,
                       const ModelParams& params, const ModelConfig& cfg);

// Tau-a over all source index pairs: ties contribute zero, denominator
// M*(M-1)/2. 1 = order-preserving, -1 = reversed.
double kendalls_tau(const Alignment& alignment);

// Linear regressor (bias column, ridge-regularized least squares) from
// train embeddings to progress; returns the R-squared on the test set.
double phase_progress_r2(const Matrix& u_train, const std::vector<double>& y_train,
                         const Matrix& u_test, const std::vector<double>& y_test);

// k-NN majority vote on a seeded uniform subsample of the labeled training
// frames; ties go to the smallest label.
double phase_classification(const Matrix& u_train, const std::vector<int>& labels_train,
                            const Matrix& u_test, const std::vector<int>& labels_test,
                            double fraction, int k, Rng& rng);

// AP@K with the retrieval pool excluding the query's own sequence.
double retrieval_ap_at_k(const std::vector<Matrix>& u_per_sequence,
                         const std::vector<std::vector<int>>& labels_per_sequence, int k);

struct EvalConfig {
    std::uint64_t seed = 0;
    int knn_k = 1;
    // Pairs per action for the (expensive) online tau; 0 disables it.
    int online_pairs_per_action = 0;
};

struct EvalReport {
    double kendalls_tau = 0.0;
    double phase_progress_r2 = 0.0;
    std::map<std::string, double> phase_classification;  // keys "0.1","0.5","1.0"
    std::map<int, double> ap_at_k;                       // keys 5, 10, 15
    int num_pairs = 0;
    std::uint64_t seed = 0;
    double online_kendalls_tau = -2.0;  // -2 when not computed
};

// Embeds every sequence with encode_single and runs the metric suite:
// tau averaged over ordered same-action validation pairs, progress R^2,
// classification at fractions {0.1, 0.5, 1.0}, AP@{5,10,15}.
EvalReport evaluate(const Checkpoint& ckpt, const DatasetManifest& manifest,
                    const EvalConfig& cfg);

void save_report(const EvalReport& report, const std::string& path);
void save_alignment(const Alignment& alignment, const std::string& path);
// Timeline SVG with matching lines between the two sequences.
void save_alignment_svg(const Alignment& alignment, const std::string& path, int every_kth = 1);

}  // namespace casa
