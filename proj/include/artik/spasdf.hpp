#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "artik/rng.hpp"
#include "artik/tensor.hpp"

namespace artik {

// ---------------------------------------------------------------------------
// Pose-conditioned signed distance model. A shape network turns a query point
// (plus positional encoding and the category latent code) into a structural
// embedding; an articulation-aware decoder fuses that embedding with a
// Fourier-encoded joint state to predict the signed distance. A linear part
// head on the structural embedding provides an auxiliary training signal and
// is unused at inference.
// ---------------------------------------------------------------------------

struct SpasdfConfig {
    int latent_dim = 256;   // d
    int fourier_freqs = 16; // L, articulation encoding
    int pe_freqs = 10;      // K, spatial positional encoding

    int fs_layers = 5;
    int fs_width = 256;
    int fs_skip_layer = 3;  // 1-based layer whose input re-injects the network input; 0 disables
    int fa_layers = 4;
    int fa_width = 256;
    int pose_width = 64;    // two-layer MLP on the articulation encoding

    int part_count = 2;
    double lambda_latent = 1e-4;
    double lambda_part = 0.1;

    // Joint range used to normalize psi before Fourier encoding.
    double psi_min = 0.0;
    double psi_max = 1.0;

    // Ablation switches; disabling one removes its parameters entirely.
    bool use_pe = true;
    bool use_shape_latent = true;
    bool use_pose = true;
    bool use_part_head = true;

    // L1 loss clamps both prediction and target to [-clamp_dist, clamp_dist];
    // disable to use the plain L1 objective.
    bool use_clamp = true;
    double clamp_dist = 0.1;

    int pe_dim() const { return use_pe ? 6 * pe_freqs : 0; }
    int gamma_dim() const { return 2 * fourier_freqs; }
    int fs_input_dim() const { return 3 + pe_dim() + (use_shape_latent ? latent_dim : 0); }
    int fa_input_dim() const { return 3 + pe_dim() + fs_width + (use_pose ? pose_width : 0); }
};

inline void validate_config(const SpasdfConfig& c) {
    if (c.latent_dim < 1 || c.fourier_freqs < 1 || c.pe_freqs < 1)
        throw ConfigError("spasdf config: d, L, K must all be >= 1");
    if (c.lambda_latent < 0.0 || c.lambda_part < 0.0)
        throw ConfigError("spasdf config: lambda values must be >= 0");
    if (!(c.psi_min < c.psi_max)) throw ConfigError("spasdf config: psi_min must be < psi_max");
    if (c.fs_layers < 1 || c.fa_layers < 2 || c.fs_width < 1 || c.fa_width < 1 || c.pose_width < 1)
        throw ConfigError("spasdf config: invalid layer sizes");
    if (c.fs_skip_layer < 0 || c.fs_skip_layer > c.fs_layers)
        throw ConfigError("spasdf config: fs_skip_layer out of range");
    if (c.part_count < 1) throw ConfigError("spasdf config: part_count must be >= 1");
    if (c.use_clamp && !(c.clamp_dist > 0.0)) throw ConfigError("spasdf config: clamp_dist must be > 0");
}

// ---------------------------------------------------------------------------
// Encodings
// ---------------------------------------------------------------------------

// Multi-frequency positional encoding, 6K values per point, laid out
// k-major, then axis, then (sin, cos): column k*6 + j*2 + {0,1} holds
// sin/cos(2^k * pi * x_j).
inline Matrix positional_encode(const Matrix& points, int k_freqs) {
    if (points.cols() != 3) throw ShapeError("positional_encode: points must be (n x 3)");
    Matrix out(points.rows(), 6 * k_freqs);
    double freq = kPi;  // 2^0 * pi
    for (int k = 0; k < k_freqs; ++k, freq *= 2.0) {
        for (int j = 0; j < 3; ++j) {
            out.col(k * 6 + j * 2 + 0) = (points.col(j) * freq).array().sin();
            out.col(k * 6 + j * 2 + 1) = (points.col(j) * freq).array().cos();
        }
    }
    return out;
}

// Fourier articulation features of the normalized joint state
// psi_tilde = 2*pi*(psi - psi_min)/(psi_max - psi_min) in [0, 2*pi]:
// [sin(2^k psi_tilde), cos(2^k psi_tilde)] for k = 0..L-1.
inline Eigen::RowVectorXd articulation_encode(double psi, double psi_min, double psi_max, int l_freqs) {
    if (!(psi_min < psi_max)) throw ConfigError("articulation_encode: empty psi range");
    if (psi < psi_min || psi > psi_max)
        throw ContractError("articulation_encode: psi " + std::to_string(psi) + " outside [" +
                            std::to_string(psi_min) + ", " + std::to_string(psi_max) + "]");
    const double psi_tilde = 2.0 * kPi * (psi - psi_min) / (psi_max - psi_min);
    Eigen::RowVectorXd out(2 * l_freqs);
    double f = 1.0;
    for (int k = 0; k < l_freqs; ++k, f *= 2.0) {
        out(2 * k + 0) = std::sin(f * psi_tilde);
        out(2 * k + 1) = std::cos(f * psi_tilde);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct SpasdfParams {
    std::vector<Matrix> fs_w, fs_b;
    std::vector<Matrix> fa_w, fa_b;
    std::vector<Matrix> pose_w, pose_b;  // empty when pose conditioning is off
    Matrix part_w, part_b;               // empty when the part head is off
    Matrix phi;                          // 1 x d; empty when the shape latent is off

    // Stable (name, matrix) view in checkpoint order.
    template <typename Fn>
    void for_each(Fn&& fn) {
        for (std::size_t i = 0; i < fs_w.size(); ++i) {
            fn("fs_w" + std::to_string(i), fs_w[i]);
            fn("fs_b" + std::to_string(i), fs_b[i]);
        }
        for (std::size_t i = 0; i < fa_w.size(); ++i) {
            fn("fa_w" + std::to_string(i), fa_w[i]);
            fn("fa_b" + std::to_string(i), fa_b[i]);
        }
        for (std::size_t i = 0; i < pose_w.size(); ++i) {
            fn("pose_w" + std::to_string(i), pose_w[i]);
            fn("pose_b" + std::to_string(i), pose_b[i]);
        }
        if (part_w.size() > 0) {
            fn("part_w", part_w);
            fn("part_b", part_b);
        }
        if (phi.size() > 0) fn("phi", phi);
    }

    template <typename Fn>
    void for_each(Fn&& fn) const {
        const_cast<SpasdfParams*>(this)->for_each(
            [&](const std::string& name, Matrix& m) { fn(name, const_cast<const Matrix&>(m)); });
    }

    std::vector<Matrix*> parameter_list() {
        std::vector<Matrix*> out;
        for_each([&](const std::string&, Matrix& m) { out.push_back(&m); });
        return out;
    }
};

namespace detail {

inline Matrix kaiming_uniform(int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    Matrix w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
    return w;
}

inline int fs_layer_input_dim(const SpasdfConfig& c, int layer_1based) {
    int dim = layer_1based == 1 ? c.fs_input_dim() : c.fs_width;
    if (layer_1based != 1 && layer_1based == c.fs_skip_layer) dim += c.fs_input_dim();
    return dim;
}

}  // namespace detail

inline SpasdfParams init_params(const SpasdfConfig& config, std::uint64_t seed) {
    validate_config(config);
    Rng rng = Rng(seed).child("spasdf_init");
    SpasdfParams p;
    for (int i = 1; i <= config.fs_layers; ++i) {
        const int in = detail::fs_layer_input_dim(config, i);
        p.fs_w.push_back(detail::kaiming_uniform(in, config.fs_width, rng));
        p.fs_b.push_back(Matrix::Zero(1, config.fs_width));
    }
    for (int i = 1; i <= config.fa_layers; ++i) {
        const int in = i == 1 ? config.fa_input_dim() : config.fa_width;
        const int out = i == config.fa_layers ? 1 : config.fa_width;
        p.fa_w.push_back(detail::kaiming_uniform(in, out, rng));
        p.fa_b.push_back(Matrix::Zero(1, out));
    }
    if (config.use_pose) {
        p.pose_w.push_back(detail::kaiming_uniform(config.gamma_dim(), config.pose_width, rng));
        p.pose_b.push_back(Matrix::Zero(1, config.pose_width));
        p.pose_w.push_back(detail::kaiming_uniform(config.pose_width, config.pose_width, rng));
        p.pose_b.push_back(Matrix::Zero(1, config.pose_width));
    }
    if (config.use_part_head) {
        p.part_w = detail::kaiming_uniform(config.fs_width, config.part_count, rng);
        p.part_b = Matrix::Zero(1, config.part_count);
    }
    if (config.use_shape_latent) {
        p.phi = Matrix(1, config.latent_dim);
        // DeepSDF-style small normal init keeps the latent term near zero at start.
        for (Eigen::Index j = 0; j < p.phi.cols(); ++j) p.phi(0, j) = rng.normal(0.0, 0.01);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Forward, straight-line route (inference and the loss-component oracle).
// ---------------------------------------------------------------------------

struct ForwardOut {
    Eigen::VectorXd sdf;  // n
    Matrix part_logits;   // n x part_count (empty when the head is off)
};

inline ForwardOut forward_eval(const SpasdfParams& params, const SpasdfConfig& config, const Matrix& points,
                               double psi) {
    if (points.cols() != 3) throw ShapeError("forward: points must be (n x 3)");
    const Eigen::Index n = points.rows();

    Matrix input(n, config.fs_input_dim());
    Eigen::Index col = 0;
    input.middleCols(col, 3) = points;
    col += 3;
    if (config.use_pe) {
        input.middleCols(col, config.pe_dim()) = positional_encode(points, config.pe_freqs);
        col += config.pe_dim();
    }
    if (config.use_shape_latent) {
        input.middleCols(col, config.latent_dim) = params.phi.replicate(n, 1);
        col += config.latent_dim;
    }

    auto check = [](const Matrix& m, const std::string& where) {
        if (!m.allFinite()) throw NumericError("forward: non-finite values after " + where);
    };

    Matrix h = input;
    for (int i = 1; i <= config.fs_layers; ++i) {
        Matrix in;
        if (i != 1 && i == config.fs_skip_layer) {
            in.resize(n, h.cols() + input.cols());
            in.leftCols(h.cols()) = h;
            in.rightCols(input.cols()) = input;
        } else {
            in = std::move(h);
        }
        h = ((in * params.fs_w[static_cast<std::size_t>(i - 1)]).rowwise() +
             params.fs_b[static_cast<std::size_t>(i - 1)].row(0))
                .cwiseMax(0.0);
        check(h, "fs layer " + std::to_string(i));
    }
    const Matrix& h_s = h;

    Matrix e_psi;
    if (config.use_pose) {
        const Eigen::RowVectorXd gamma =
            articulation_encode(psi, config.psi_min, config.psi_max, config.fourier_freqs);
        Matrix g = gamma;
        Matrix hidden = ((g * params.pose_w[0]).rowwise() + params.pose_b[0].row(0)).cwiseMax(0.0);
        e_psi = (hidden * params.pose_w[1]).rowwise() + params.pose_b[1].row(0);
        check(e_psi, "pose mlp");
    }

    Matrix a_in(n, config.fa_input_dim());
    col = 0;
    a_in.middleCols(col, 3 + config.pe_dim()) = input.leftCols(3 + config.pe_dim());
    col += 3 + config.pe_dim();
    a_in.middleCols(col, config.fs_width) = h_s;
    col += config.fs_width;
    if (config.use_pose) {
        a_in.middleCols(col, config.pose_width) = e_psi.replicate(n, 1);
        col += config.pose_width;
    }

    Matrix ha = a_in;
    for (int i = 1; i <= config.fa_layers; ++i) {
        ha = (ha * params.fa_w[static_cast<std::size_t>(i - 1)]).rowwise() +
             params.fa_b[static_cast<std::size_t>(i - 1)].row(0);
        if (i != config.fa_layers) ha = ha.cwiseMax(0.0);
        check(ha, "fa layer " + std::to_string(i));
    }

    ForwardOut out;
    out.sdf = ha.col(0);
    if (config.use_part_head) {
        out.part_logits = (h_s * params.part_w).rowwise() + params.part_b.row(0);
        check(out.part_logits, "part head");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Forward, tape route (training).
// ---------------------------------------------------------------------------

// Tape handles for one training step's parameter leaves, in the same order
// as SpasdfParams::for_each.
struct TapeParams {
    std::vector<Value> fs_w, fs_b, fa_w, fa_b, pose_w, pose_b;
    Value part_w, part_b, phi;
};

inline TapeParams make_leaves(Tape& tape, const SpasdfParams& params) {
    TapeParams t;
    for (const auto& m : params.fs_w) t.fs_w.push_back(tape.leaf(m));
    for (const auto& m : params.fs_b) t.fs_b.push_back(tape.leaf(m));
    for (const auto& m : params.fa_w) t.fa_w.push_back(tape.leaf(m));
    for (const auto& m : params.fa_b) t.fa_b.push_back(tape.leaf(m));
    for (const auto& m : params.pose_w) t.pose_w.push_back(tape.leaf(m));
    for (const auto& m : params.pose_b) t.pose_b.push_back(tape.leaf(m));
    if (params.part_w.size() > 0) {
        t.part_w = tape.leaf(params.part_w);
        t.part_b = tape.leaf(params.part_b);
    }
    if (params.phi.size() > 0) t.phi = tape.leaf(params.phi);
    return t;
}

struct TapeForwardOut {
    Value sdf;          // n x 1
    Value part_logits;  // invalid when the head is off
};

inline TapeForwardOut forward_tape(Tape& tape, const TapeParams& leaves, const SpasdfConfig& config,
                                   const Matrix& points, double psi) {
    if (points.cols() != 3) throw ShapeError("forward: points must be (n x 3)");
    const Eigen::Index n = points.rows();

    Matrix base(n, 3 + config.pe_dim());
    base.leftCols(3) = points;
    if (config.use_pe) base.rightCols(config.pe_dim()) = positional_encode(points, config.pe_freqs);
    Value base_v = tape.leaf(base, /*requires_grad=*/false);

    Value input = base_v;
    if (config.use_shape_latent) input = tape.concat(base_v, tape.broadcast_row(leaves.phi, n));

    Value h = input;
    for (int i = 1; i <= config.fs_layers; ++i) {
        Value in = (i != 1 && i == config.fs_skip_layer) ? tape.concat(h, input) : h;
        h = tape.relu(tape.add_bias(tape.matmul(in, leaves.fs_w[static_cast<std::size_t>(i - 1)]),
                                    leaves.fs_b[static_cast<std::size_t>(i - 1)]));
    }
    Value h_s = h;

    Value a_in = tape.concat(base_v, h_s);
    if (config.use_pose) {
        const Eigen::RowVectorXd gamma =
            articulation_encode(psi, config.psi_min, config.psi_max, config.fourier_freqs);
        Value g = tape.leaf(Matrix(gamma), /*requires_grad=*/false);
        Value hidden = tape.relu(tape.add_bias(tape.matmul(g, leaves.pose_w[0]), leaves.pose_b[0]));
        Value e_psi = tape.add_bias(tape.matmul(hidden, leaves.pose_w[1]), leaves.pose_b[1]);
        a_in = tape.concat(a_in, tape.broadcast_row(e_psi, n));
    }

    Value ha = a_in;
    for (int i = 1; i <= config.fa_layers; ++i) {
        ha = tape.add_bias(tape.matmul(ha, leaves.fa_w[static_cast<std::size_t>(i - 1)]),
                           leaves.fa_b[static_cast<std::size_t>(i - 1)]);
        if (i != config.fa_layers) ha = tape.relu(ha);
    }
    if (!ha.data().allFinite()) throw NumericError("forward: non-finite signed distance output");

    TapeForwardOut out;
    out.sdf = ha;
    if (config.use_part_head)
        out.part_logits = tape.add_bias(tape.matmul(h_s, leaves.part_w), leaves.part_b);
    return out;
}

// ---------------------------------------------------------------------------
// Loss: clamped L1 on signed distance + latent l2 + part cross-entropy.
// ---------------------------------------------------------------------------

struct SdfBatch {
    Matrix points;                       // n x 3
    Eigen::VectorXd sdf;                 // n
    std::vector<std::int32_t> part_ids;  // n
    double psi = 0.0;
};

struct LossComponents {
    double l_sdf = 0.0;
    double l_latent = 0.0;
    double l_part = 0.0;
    double total = 0.0;
};

struct TapeLoss {
    Value total;
    LossComponents components;
};

inline TapeLoss loss_tape(Tape& tape, const TapeParams& leaves, const SpasdfConfig& config,
                          const SdfBatch& batch) {
    if (batch.points.rows() == 0) throw InvalidInputError("loss: empty batch");
    TapeForwardOut fwd = forward_tape(tape, leaves, config, batch.points, batch.psi);

    Matrix target = batch.sdf;
    Value pred = fwd.sdf;
    if (config.use_clamp) {
        pred = tape.clamp(pred, -config.clamp_dist, config.clamp_dist);
        target = target.cwiseMax(-config.clamp_dist).cwiseMin(config.clamp_dist);
    }
    Value l_sdf = tape.mean_abs(pred, target);
    Value total = l_sdf;

    TapeLoss out;
    out.components.l_sdf = l_sdf.scalar();
    if (config.use_shape_latent) {
        Value l_latent = tape.sum_sq(leaves.phi);
        out.components.l_latent = l_latent.scalar();
        total = tape.add(total, tape.scale(l_latent, config.lambda_latent));
    }
    if (config.use_part_head) {
        Value l_part = tape.softmax_cross_entropy(fwd.part_logits, batch.part_ids);
        out.components.l_part = l_part.scalar();
        total = tape.add(total, tape.scale(l_part, config.lambda_part));
    }
    out.total = total;
    out.components.total = total.scalar();
    return out;
}

// Independent straight-line evaluation of the same objective; shares no code
// with the tape route and serves as its oracle.
inline LossComponents loss_eval(const SpasdfParams& params, const SpasdfConfig& config,
                                const SdfBatch& batch) {
    if (batch.points.rows() == 0) throw InvalidInputError("loss: empty batch");
    ForwardOut fwd = forward_eval(params, config, batch.points, batch.psi);

    LossComponents c;
    Eigen::VectorXd pred = fwd.sdf;
    Eigen::VectorXd target = batch.sdf;
    if (config.use_clamp) {
        pred = pred.cwiseMax(-config.clamp_dist).cwiseMin(config.clamp_dist);
        target = target.cwiseMax(-config.clamp_dist).cwiseMin(config.clamp_dist);
    }
    c.l_sdf = (pred - target).cwiseAbs().mean();
    c.total = c.l_sdf;
    if (config.use_shape_latent) {
        c.l_latent = params.phi.squaredNorm();
        c.total += config.lambda_latent * c.l_latent;
    }
    if (config.use_part_head) {
        double ce = 0.0;
        for (Eigen::Index i = 0; i < fwd.part_logits.rows(); ++i) {
            const std::int32_t cls = batch.part_ids[static_cast<std::size_t>(i)];
            const double m = fwd.part_logits.row(i).maxCoeff();
            const double lse = m + std::log((fwd.part_logits.row(i).array() - m).exp().sum());
            ce += lse - fwd.part_logits(i, cls);
        }
        c.l_part = ce / static_cast<double>(fwd.part_logits.rows());
        c.total += config.lambda_part * c.l_part;
    }
    return c;
}

}  // namespace artik
