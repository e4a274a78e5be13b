#include "casa/encoder.hpp"

#include <cmath>
#include <fstream>

#include "casa/errors.hpp"
#include "casa/rng.hpp"
#include "json.hpp"

namespace casa {

void ModelConfig::validate() const {
    if (input_dim <= 0) throw ConfigError("input_dim must be positive");
    if (num_attention_layers < 1) throw ConfigError("num_attention_layers must be >= 1");
    if (num_heads < 1 || input_dim % num_heads != 0)
        throw ConfigError("num_heads must divide input_dim");
    if (temperature <= 0.0) throw ConfigError("temperature must be positive");
    if (projection_hidden_dim < 0) throw ConfigError("projection_hidden_dim must be >= 0");
    if (positional_base <= 1.0) throw ConfigError("positional_base must exceed 1");
}

namespace {

Matrix uniform_init(int rows, int cols, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    Matrix m(rows, cols);
    for (double& v : m.raw()) v = rng.uniform(-bound, bound);
    return m;
}

std::vector<std::string> attention_weight_names(const ModelConfig& cfg) {
    std::vector<std::string> names;
    for (int l = 0; l < cfg.num_attention_layers; ++l) {
        for (const char* kind : {"self", "cross"}) {
            for (const char* w : {"wq", "wk", "wv", "wo"}) {
                names.push_back("layer" + std::to_string(l) + "." + kind + "." + w);
            }
        }
    }
    return names;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const int d = cfg.input_dim;
    const int h = cfg.hidden_dim();
    ModelParams p;
    Rng rng = Rng::substream(seed, {0x6d6f64656cULL});
    p.weights["mlp.w1"] = uniform_init(d, d, rng);
    p.weights["mlp.b1"] = uniform_init(1, d, rng);
    p.weights["mlp.w2"] = uniform_init(d, d, rng);
    p.weights["mlp.b2"] = uniform_init(1, d, rng);
    for (const auto& name : attention_weight_names(cfg)) p.weights[name] = uniform_init(d, d, rng);
    p.weights["proj.w1"] = uniform_init(d, h, rng);
    p.weights["proj.b1"] = uniform_init(1, h, rng);
    p.weights["proj.w2"] = uniform_init(h, d, rng);
    p.weights["proj.b2"] = uniform_init(1, d, rng);
    return p;
}

Matrix positional_encoding(int frames, int dim, double base) {
    if (frames <= 0 || dim <= 0) throw ShapeMismatch("positional_encoding dims");
    const int padded = dim % 2 == 0 ? dim : dim + 1;
    Matrix pe(frames, dim);
    for (int i = 0; i < frames; ++i) {
        for (int l = 0; 2 * l < padded; ++l) {
            const double w = std::pow(base, -2.0 * l / static_cast<double>(padded));
            pe(i, 2 * l) = std::sin(w * i);
            if (2 * l + 1 < dim) pe(i, 2 * l + 1) = std::cos(w * i);
        }
    }
    return pe;
}

namespace {

struct AttnWeights {
    Var wq, wk, wv, wo;
};

Var attention_heads_on_tape(Tape& t, Var q_in, Var kv_in, const AttnWeights& w, int heads) {
    Var q = t.matmul(q_in, w.wq);
    Var k = t.matmul(kv_in, w.wk);
    Var v = t.matmul(kv_in, w.wv);
    const int d = t.value(q).cols();
    const int dh = d / heads;
    std::vector<Var> outs;
    outs.reserve(heads);
    for (int h = 0; h < heads; ++h) {
        Var qh = t.elu_plus_one(t.slice_cols(q, h * dh, dh));
        Var kh = t.elu_plus_one(t.slice_cols(k, h * dh, dh));
        Var vh = t.slice_cols(v, h * dh, dh);
        Var kv = t.matmul(t.transpose(kh), vh);          // dh x dh
        Var num = t.matmul(qh, kv);                      // Mq x dh
        Var ksum = t.sum_rows(kh);                       // 1 x dh
        Var denom = t.matmul(qh, t.transpose(ksum));     // Mq x 1, strictly positive
        outs.push_back(t.rowwise_div(num, denom));
    }
    Var cat = heads == 1 ? outs[0] : t.concat_cols(outs);
    return t.matmul(cat, w.wo);
}

Var mlp_and_pe(Tape& t, const Matrix& x, const std::map<std::string, Var>& p,
               const ModelConfig& cfg) {
    Var in = t.leaf(x);
    Var h1 = t.relu(t.add_row_broadcast(t.matmul(in, p.at("mlp.w1")), p.at("mlp.b1")));
    Var h2 = t.relu(t.add_row_broadcast(t.matmul(h1, p.at("mlp.w2")), p.at("mlp.b2")));
    Var pe = t.leaf(positional_encoding(x.rows(), cfg.input_dim, cfg.positional_base));
    return t.add(h2, pe);
}

Var projection_head(Tape& t, Var u, const std::map<std::string, Var>& p) {
    Var h = t.relu(t.add_row_broadcast(t.matmul(u, p.at("proj.w1")), p.at("proj.b1")));
    return t.add_row_broadcast(t.matmul(h, p.at("proj.w2")), p.at("proj.b2"));
}

}  // namespace

EncodeVars encode_on_tape(Tape& t, const Matrix& xa, const Matrix& xb,
                          const std::map<std::string, Var>& p, const ModelConfig& cfg) {
    cfg.validate();
    if (xa.cols() != cfg.input_dim || xb.cols() != cfg.input_dim)
        throw ShapeMismatch("encode input dims " + shape_str(xa) + ", " + shape_str(xb) +
                            " vs d=" + std::to_string(cfg.input_dim));
    Var a = mlp_and_pe(t, xa, p, cfg);
    Var b = mlp_and_pe(t, xb, p, cfg);
    for (int l = 0; l < cfg.num_attention_layers; ++l) {
        const std::string prefix = "layer" + std::to_string(l) + ".";
        AttnWeights self{p.at(prefix + "self.wq"), p.at(prefix + "self.wk"),
                         p.at(prefix + "self.wv"), p.at(prefix + "self.wo")};
        AttnWeights cross{p.at(prefix + "cross.wq"), p.at(prefix + "cross.wk"),
                          p.at(prefix + "cross.wv"), p.at(prefix + "cross.wo")};
        // Self-attention for both sides, then cross-attention against the
        // partner's post-self state. The weight stack is shared (Siamese).
        Var a_self = t.add(a, attention_heads_on_tape(t, a, a, self, cfg.num_heads));
        Var b_self = t.add(b, attention_heads_on_tape(t, b, b, self, cfg.num_heads));
        a = t.add(a_self, attention_heads_on_tape(t, a_self, b_self, cross, cfg.num_heads));
        b = t.add(b_self, attention_heads_on_tape(t, b_self, a_self, cross, cfg.num_heads));
    }
    EncodeVars out;
    out.u_a = a;
    out.u_b = b;
    out.z_a = projection_head(t, a, p);
    out.z_b = projection_head(t, b, p);
    return out;
}

std::map<std::string, Var> params_on_tape(Tape& t, const ModelParams& params) {
    std::map<std::string, Var> out;
    for (const auto& [name, w] : params.weights) out[name] = t.leaf(w);
    return out;
}

Matrix linear_attention(const Matrix& q, const Matrix& k, const Matrix& v, int heads) {
    if (q.cols() != k.cols() || k.rows() != v.rows())
        throw ShapeMismatch("linear_attention shapes " + shape_str(q) + ", " + shape_str(k) +
                            ", " + shape_str(v));
    if (heads < 1 || q.cols() % heads != 0 || v.cols() % heads != 0)
        throw ShapeMismatch("linear_attention heads must divide feature dims");
    Tape t;
    Var qv = t.leaf(q), kv = t.leaf(k), vv = t.leaf(v);
    const int dq = q.cols() / heads;
    const int dv = v.cols() / heads;
    std::vector<Var> outs;
    for (int h = 0; h < heads; ++h) {
        Var qh = t.elu_plus_one(t.slice_cols(qv, h * dq, dq));
        Var kh = t.elu_plus_one(t.slice_cols(kv, h * dq, dq));
        Var vh = t.slice_cols(vv, h * dv, dv);
        Var num = t.matmul(qh, t.matmul(t.transpose(kh), vh));
        Var denom = t.matmul(qh, t.transpose(t.sum_rows(kh)));
        outs.push_back(t.rowwise_div(num, denom));
    }
    return t.value(heads == 1 ? outs[0] : t.concat_cols(outs));
}

std::pair<EmbeddingSequence, EmbeddingSequence> encode_pair(const SkeletonSequence& a,
                                                            const SkeletonSequence& b,
                                                            const ModelParams& params,
                                                            const ModelConfig& cfg) {
    Tape t;
    auto p = params_on_tape(t, params);
    EncodeVars e = encode_on_tape(t, flatten_frames(a), flatten_frames(b), p, cfg);
    return {EmbeddingSequence{t.value(e.u_a), t.value(e.z_a)},
            EmbeddingSequence{t.value(e.u_b), t.value(e.z_b)}};
}

EmbeddingSequence encode_single(const SkeletonSequence& a, const ModelParams& params,
                                const ModelConfig& cfg) {
    return encode_pair(a, a, params, cfg).first;
}

std::pair<EmbeddingSequence, EmbeddingSequence> encode_causal(const SkeletonSequence& a,
                                                              const SkeletonSequence& b,
                                                              const ModelParams& params,
                                                              const ModelConfig& cfg, int t) {
    if (t < 0 || t >= a.frame_count())
        throw IndexOutOfRange("encode_causal t=" + std::to_string(t) + " of " +
                              std::to_string(a.frame_count()));
    SkeletonSequence prefix = a;
    prefix.frames.resize(t + 1);
    if (prefix.phase_labels) prefix.phase_labels->resize(t + 1);
    if (prefix.progress) prefix.progress->resize(t + 1);
    return encode_pair(prefix, b, params, cfg);
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.raw()}};
}

Matrix matrix_from_json(const nlohmann::json& j, const std::string& name) {
    try {
        const int rows = j.at("rows").get<int>();
        const int cols = j.at("cols").get<int>();
        std::vector<double> data = j.at("data").get<std::vector<double>>();
        return Matrix(rows, cols, std::move(data));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("matrix '" + name + "': " + e.what());
    } catch (const ShapeMismatch& e) {
        throw ParseError("matrix '" + name + "': " + e.what());
    }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["config"] = {{"input_dim", ckpt.config.input_dim},
                   {"num_attention_layers", ckpt.config.num_attention_layers},
                   {"num_heads", ckpt.config.num_heads},
                   {"temperature", ckpt.config.temperature},
                   {"projection_hidden_dim", ckpt.config.projection_hidden_dim},
                   {"positional_base", ckpt.config.positional_base}};
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [name, w] : ckpt.params.weights) params[name] = matrix_to_json(w);
    j["params"] = std::move(params);
    j["rng_seed"] = ckpt.rng_seed;
    j["epoch"] = ckpt.epoch;
    if (!ckpt.opt_m.empty()) {
        nlohmann::json opt;
        opt["step"] = ckpt.opt_step;
        nlohmann::json m = nlohmann::json::object(), v = nlohmann::json::object();
        for (const auto& [name, w] : ckpt.opt_m) m[name] = matrix_to_json(w);
        for (const auto& [name, w] : ckpt.opt_v) v[name] = matrix_to_json(w);
        opt["m"] = std::move(m);
        opt["v"] = std::move(v);
        j["optimizer"] = std::move(opt);
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot write checkpoint " + path);
    out << j.dump();
    if (!out) throw Error("short write on checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read checkpoint " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("checkpoint " + path + ": " + e.what());
    }
    Checkpoint c;
    try {
        if (j.at("format_version").get<int>() != 1)
            throw ParseError("checkpoint " + path + ": unsupported format_version");
        const auto& cfg = j.at("config");
        c.config.input_dim = cfg.at("input_dim").get<int>();
        c.config.num_attention_layers = cfg.at("num_attention_layers").get<int>();
        c.config.num_heads = cfg.at("num_heads").get<int>();
        c.config.temperature = cfg.at("temperature").get<double>();
        c.config.projection_hidden_dim = cfg.at("projection_hidden_dim").get<int>();
        c.config.positional_base = cfg.at("positional_base").get<double>();
        for (const auto& [name, jm] : j.at("params").items())
            c.params.weights[name] = matrix_from_json(jm, name);
        c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
        c.epoch = j.at("epoch").get<int>();
        if (j.contains("optimizer")) {
            const auto& opt = j.at("optimizer");
            c.opt_step = opt.at("step").get<long>();
            for (const auto& [name, jm] : opt.at("m").items())
                c.opt_m[name] = matrix_from_json(jm, name);
            for (const auto& [name, jm] : opt.at("v").items())
                c.opt_v[name] = matrix_from_json(jm, name);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("checkpoint " + path + ": " + e.what());
    }
    c.config.validate();
    // Shape validation against the config.
    ModelParams expected = init_params(c.config, 0);
    for (const auto& [name, w] : expected.weights) {
        auto it = c.params.weights.find(name);
        if (it == c.params.weights.end())
            throw InvariantViolation("checkpoint missing parameter " + name);
        if (!it->second.same_shape(w))
            throw InvariantViolation("checkpoint parameter " + name + " has shape " +
                                     shape_str(it->second) + ", expected " + shape_str(w));
    }
    if (c.params.weights.size() != expected.weights.size())
        throw InvariantViolation("checkpoint has unexpected extra parameters");
    for (const auto& [name, w] : c.params.weights)
        for (double v : w.raw())
            if (!std::isfinite(v)) throw InvariantViolation("non-finite weight in " + name);
    return c;
}

}  // namespace casa
