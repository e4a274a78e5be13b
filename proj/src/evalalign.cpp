#include "casa/evalalign.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "casa/dataio.hpp"
#include "casa/errors.hpp"
#include "casa/numeric.hpp"
#include "json.hpp"

namespace casa {

namespace {

double sq_dist_rows(const Matrix& a, int i, const Matrix& b, int j) {
    double s = 0.0;
    for (int k = 0; k < a.cols(); ++k) {
        const double d = a(i, k) - b(j, k);
        s += d * d;
    }
    return s;
}

}  // namespace

Alignment align(const Matrix& u_a, const Matrix& u_b) {
    if (u_a.cols() != u_b.cols())
        throw DimMismatch("align embedding dims " + shape_str(u_a) + " vs " + shape_str(u_b));
    Alignment out;
    out.source_len = u_a.rows();
    out.target_len = u_b.rows();
    out.nn.resize(u_a.rows());
    out.distances.resize(u_a.rows());
    for (int i = 0; i < u_a.rows(); ++i) {
        int best = 0;
        double best_d = sq_dist_rows(u_a, i, u_b, 0);
        for (int j = 1; j < u_b.rows(); ++j) {
            const double d = sq_dist_rows(u_a, i, u_b, j);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        out.nn[i] = best;
        out.distances[i] = std::sqrt(best_d);
    }
    return out;
}

Alignment align_online(const SkeletonSequence& a, const SkeletonSequence& b,
                       const ModelParams& params, const ModelConfig& cfg) {
    Alignment out;
    out.source_len = a.frame_count();
    out.target_len = b.frame_count();
    for (int t = 0; t < a.frame_count(); ++t) {
        auto [ea, eb] = encode_causal(a, b, params, cfg, t);
        int best = 0;
        double best_d = sq_dist_rows(ea.U, t, eb.U, 0);
        for (int j = 1; j < eb.U.rows(); ++j) {
            const double d = sq_dist_rows(ea.U, t, eb.U, j);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        out.nn.push_back(best);
        out.distances.push_back(std::sqrt(best_d));
    }
    return out;
}

double kendalls_tau(const Alignment& alignment) {
    const int m = alignment.source_len;
    if (m < 2) throw TooShort("kendalls_tau needs at least 2 frames");
    long concordant = 0, discordant = 0;
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            if (alignment.nn[i] < alignment.nn[j])
                ++concordant;
            else if (alignment.nn[i] > alignment.nn[j])
                ++discordant;
        }
    }
    const double pairs = static_cast<double>(m) * (m - 1) / 2.0;
    return static_cast<double>(concordant - discordant) / pairs;
}

double phase_progress_r2(const Matrix& u_train, const std::vector<double>& y_train,
                         const Matrix& u_test, const std::vector<double>& y_test) {
    if (static_cast<int>(y_train.size()) != u_train.rows() ||
        static_cast<int>(y_test.size()) != u_test.rows())
        throw DimMismatch("phase_progress_r2 label counts");
    if (u_train.cols() != u_test.cols()) throw DimMismatch("phase_progress_r2 embedding dims");
    const double y0 = y_test.empty() ? 0.0 : y_test[0];
    bool distinct = false;
    for (double y : y_test)
        if (y != y0) distinct = true;
    if (!distinct) throw DegenerateLabels("test progress labels are all equal");

    Matrix a(u_train.rows(), u_train.cols() + 1);
    for (int i = 0; i < u_train.rows(); ++i) {
        for (int j = 0; j < u_train.cols(); ++j) a(i, j) = u_train(i, j);
        a(i, u_train.cols()) = 1.0;
    }
    Matrix b(u_train.rows(), 1);
    for (int i = 0; i < u_train.rows(); ++i) b(i, 0) = y_train[i];
    Matrix w = least_squares(a, b);

    double ybar = 0.0;
    for (double y : y_test) ybar += y;
    ybar /= static_cast<double>(y_test.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (int i = 0; i < u_test.rows(); ++i) {
        double pred = w(u_test.cols(), 0);
        for (int j = 0; j < u_test.cols(); ++j) pred += u_test(i, j) * w(j, 0);
        ss_res += (y_test[i] - pred) * (y_test[i] - pred);
        ss_tot += (y_test[i] - ybar) * (y_test[i] - ybar);
    }
    return 1.0 - ss_res / ss_tot;
}

double phase_classification(const Matrix& u_train, const std::vector<int>& labels_train,
                            const Matrix& u_test, const std::vector<int>& labels_test,
                            double fraction, int k, Rng& rng) {
    if (static_cast<int>(labels_train.size()) != u_train.rows() ||
        static_cast<int>(labels_test.size()) != u_test.rows())
        throw DimMismatch("phase_classification label counts");
    if (u_train.cols() != u_test.cols()) throw DimMismatch("phase_classification embedding dims");
    if (k < 1) throw ConfigError("k must be >= 1");
    const int total = u_train.rows();
    const int subset = static_cast<int>(std::ceil(fraction * total));
    if (subset < 1) throw EmptyTrainSubset("fraction selects no training frames");

    // Seeded uniform subsample without replacement (selection sampling).
    std::vector<int> chosen;
    chosen.reserve(subset);
    int need = subset;
    for (int i = 0; i < total && need > 0; ++i) {
        if (rng.uniform() * (total - i) < need) {
            chosen.push_back(i);
            --need;
        }
    }

    const int kk = std::min(k, subset);
    int correct = 0;
    std::vector<std::pair<double, int>> dists(chosen.size());
    for (int q = 0; q < u_test.rows(); ++q) {
        for (std::size_t c = 0; c < chosen.size(); ++c)
            dists[c] = {sq_dist_rows(u_test, q, u_train, chosen[c]), labels_train[chosen[c]]};
        std::partial_sort(dists.begin(), dists.begin() + kk, dists.end());
        std::map<int, int> votes;
        for (int i = 0; i < kk; ++i) ++votes[dists[i].second];
        int best_label = votes.begin()->first, best_count = votes.begin()->second;
        for (const auto& [label, count] : votes) {
            if (count > best_count) {  // ties keep the smallest label
                best_count = count;
                best_label = label;
            }
        }
        if (best_label == labels_test[q]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(u_test.rows());
}

double retrieval_ap_at_k(const std::vector<Matrix>& u_per_sequence,
                         const std::vector<std::vector<int>>& labels_per_sequence, int k) {
    if (k < 1) throw ConfigError("K must be >= 1");
    if (u_per_sequence.size() != labels_per_sequence.size())
        throw DimMismatch("retrieval: sequences vs label lists");
    const int s = static_cast<int>(u_per_sequence.size());
    double total_precision = 0.0;
    long queries = 0;
    std::vector<std::pair<double, int>> pool;
    for (int qs = 0; qs < s; ++qs) {
        // Pool: every frame outside the query's own sequence.
        long pool_size = 0;
        for (int ps = 0; ps < s; ++ps)
            if (ps != qs) pool_size += u_per_sequence[ps].rows();
        if (pool_size < k)
            throw PoolTooSmall("retrieval pool has " + std::to_string(pool_size) +
                               " frames, need " + std::to_string(k));
        for (int qf = 0; qf < u_per_sequence[qs].rows(); ++qf) {
            pool.clear();
            for (int ps = 0; ps < s; ++ps) {
                if (ps == qs) continue;
                for (int pf = 0; pf < u_per_sequence[ps].rows(); ++pf)
                    pool.push_back({sq_dist_rows(u_per_sequence[qs], qf, u_per_sequence[ps], pf),
                                    labels_per_sequence[ps][pf]});
            }
            std::partial_sort(pool.begin(), pool.begin() + k, pool.end());
            int hit = 0;
            for (int i = 0; i < k; ++i)
                if (pool[i].second == labels_per_sequence[qs][qf]) ++hit;
            total_precision += static_cast<double>(hit) / k;
            ++queries;
        }
    }
    return total_precision / static_cast<double>(queries);
}

EvalReport evaluate(const Checkpoint& ckpt, const DatasetManifest& manifest,
                    const EvalConfig& cfg) {
    const auto train_entries = manifest.split("train");
    const auto val_entries = manifest.split("val");
    if (train_entries.empty()) throw EmptyDataset("manifest has no train split");
    if (val_entries.empty()) throw EmptyDataset("manifest has no val split");

    struct Embedded {
        SkeletonSequence seq;
        Matrix u;
        std::string action;
    };
    auto embed = [&](const std::vector<ManifestEntry>& entries) {
        std::vector<Embedded> out;
        for (const auto& e : entries) {
            Embedded emb;
            emb.seq = load_sequence(e.path);
            emb.u = encode_single(emb.seq, ckpt.params, ckpt.config).U;
            emb.action = e.action;
            out.push_back(std::move(emb));
        }
        return out;
    };
    std::vector<Embedded> train = embed(train_entries);
    std::vector<Embedded> val = embed(val_entries);

    EvalReport report;
    report.seed = cfg.seed;

    // Kendall's tau over ordered same-action validation pairs.
    double tau_sum = 0.0;
    int tau_pairs = 0;
    for (std::size_t i = 0; i < val.size(); ++i) {
        for (std::size_t j = 0; j < val.size(); ++j) {
            if (i == j || val[i].action != val[j].action) continue;
            tau_sum += kendalls_tau(align(val[i].u, val[j].u));
            ++tau_pairs;
        }
    }
    if (tau_pairs == 0) throw EmptyDataset("no same-action validation pairs");
    report.kendalls_tau = tau_sum / tau_pairs;
    report.num_pairs = tau_pairs;

    // Stack per-frame train/val embeddings with labels.
    auto stack = [](const std::vector<Embedded>& set) {
        int rows = 0;
        for (const auto& e : set) rows += e.u.rows();
        Matrix u(rows, set[0].u.cols());
        std::vector<int> labels;
        std::vector<double> progress;
        int r = 0;
        for (const auto& e : set) {
            for (int f = 0; f < e.u.rows(); ++f, ++r) {
                for (int c = 0; c < e.u.cols(); ++c) u(r, c) = e.u(f, c);
                labels.push_back(e.seq.phase_labels ? (*e.seq.phase_labels)[f] : 0);
                progress.push_back(e.seq.progress ? (*e.seq.progress)[f] : 0.0);
            }
        }
        return std::make_tuple(std::move(u), std::move(labels), std::move(progress));
    };
    auto [u_train, l_train, p_train] = stack(train);
    auto [u_val, l_val, p_val] = stack(val);

    report.phase_progress_r2 = phase_progress_r2(u_train, p_train, u_val, p_val);

    for (double fraction : {0.1, 0.5, 1.0}) {
        Rng rng = Rng::substream(cfg.seed, {0x636c73ULL, static_cast<std::uint64_t>(fraction * 10)});
        const double acc =
            phase_classification(u_train, l_train, u_val, l_val, fraction, cfg.knn_k, rng);
        char key[8];
        std::snprintf(key, sizeof(key), "%.1f", fraction);
        report.phase_classification[key] = acc;
    }

    std::vector<Matrix> val_u;
    std::vector<std::vector<int>> val_labels;
    for (const auto& e : val) {
        val_u.push_back(e.u);
        std::vector<int> labels(e.u.rows(), 0);
        if (e.seq.phase_labels) labels = *e.seq.phase_labels;
        val_labels.push_back(std::move(labels));
    }
    for (int k : {5, 10, 15}) report.ap_at_k[k] = retrieval_ap_at_k(val_u, val_labels, k);

    if (cfg.online_pairs_per_action > 0) {
        double online_sum = 0.0;
        int online_pairs = 0;
        std::map<std::string, int> used;
        for (std::size_t i = 0; i < val.size() && online_pairs < 64; ++i) {
            for (std::size_t j = 0; j < val.size(); ++j) {
                if (i == j || val[i].action != val[j].action) continue;
                if (used[val[i].action] >= cfg.online_pairs_per_action) break;
                online_sum +=
                    kendalls_tau(align_online(val[i].seq, val[j].seq, ckpt.params, ckpt.config));
                ++used[val[i].action];
                ++online_pairs;
                break;  // one partner per source sequence
            }
        }
        if (online_pairs > 0) report.online_kendalls_tau = online_sum / online_pairs;
    }
    return report;
}

void save_report(const EvalReport& report, const std::string& path) {
    nlohmann::json j;
    j["kendalls_tau"] = report.kendalls_tau;
    j["phase_progress_r2"] = report.phase_progress_r2;
    j["phase_classification"] = report.phase_classification;
    nlohmann::json ap = nlohmann::json::object();
    for (const auto& [k, v] : report.ap_at_k) ap[std::to_string(k)] = v;
    j["ap_at_k"] = std::move(ap);
    j["num_pairs"] = report.num_pairs;
    j["seed"] = report.seed;
    if (report.online_kendalls_tau >= -1.0) j["online_kendalls_tau"] = report.online_kendalls_tau;
    std::ofstream out(path);
    if (!out) throw Error("cannot write report " + path);
    out << j.dump(2) << "\n";
}

void save_alignment(const Alignment& alignment, const std::string& path) {
    nlohmann::json j;
    j["source"] = alignment.source_len;
    j["target"] = alignment.target_len;
    j["nn"] = alignment.nn;
    j["distances"] = alignment.distances;
    std::ofstream out(path);
    if (!out) throw Error("cannot write alignment " + path);
    out << j.dump();
}

void save_alignment_svg(const Alignment& alignment, const std::string& path, int every_kth) {
    if (every_kth < 1) throw ConfigError("every_kth must be >= 1");
    const int width = 800, height = 220, margin = 40;
    const int y_src = 60, y_tgt = 160;
    auto x_of = [&](int idx, int len) {
        return len <= 1 ? width / 2.0
                        : margin + (width - 2.0 * margin) * idx / static_cast<double>(len - 1);
    };
    std::ofstream out(path);
    if (!out) throw Error("cannot write svg " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << y_src << "\" x2=\"" << width - margin
        << "\" y2=\"" << y_src << "\" stroke=\"#333\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << y_tgt << "\" x2=\"" << width - margin
        << "\" y2=\"" << y_tgt << "\" stroke=\"#333\"/>\n";
    for (int i = 0; i < alignment.source_len; i += every_kth) {
        out << "<line x1=\"" << x_of(i, alignment.source_len) << "\" y1=\"" << y_src
            << "\" x2=\"" << x_of(alignment.nn[i], alignment.target_len) << "\" y2=\"" << y_tgt
            << "\" stroke=\"#4a90d9\" stroke-width=\"0.8\"/>\n";
    }
    out << "<text x=\"" << margin << "\" y=\"" << y_src - 12 << "\" font-size=\"12\">source</text>\n";
    out << "<text x=\"" << margin << "\" y=\"" << y_tgt + 20 << "\" font-size=\"12\">target</text>\n";
    out << "</svg>\n";
}

}  // namespace casa
