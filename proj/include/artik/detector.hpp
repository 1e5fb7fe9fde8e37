#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "artik/checkpoint.hpp"
#include "artik/dataset.hpp"
#include "artik/datagen.hpp"

namespace artik {

// ---------------------------------------------------------------------------
// Articulation estimation by reconstruction-energy grid search plus a
// golden-section refinement inside the two cells around the grid argmin.
// ---------------------------------------------------------------------------

struct DetectorOptions {
    int grid_size = 256;
    // Points used for the energy curve; 0 = the whole cloud. A strided
    // subsample keeps grid search cheap on large clouds; scoring always uses
    // every point.
    std::size_t energy_point_cap = 0;
    int refine_iters = 48;
    double top_k_fraction = 0.01;
};

struct ArticulationEstimate {
    double psi_star = 0.0;
    std::vector<std::pair<double, double>> energy_curve;  // (psi, energy), grid order
};

struct AnomalyResult {
    double psi_star = 0.0;
    Eigen::VectorXd point_scores;
    double object_score = 0.0;
    std::vector<std::pair<double, double>> energy_curve;
};

namespace detector_detail {

inline Matrix energy_points(const Matrix& points, std::size_t cap) {
    if (cap == 0 || static_cast<std::size_t>(points.rows()) <= cap) return points;
    const auto n = static_cast<std::size_t>(points.rows());
    const double stride = static_cast<double>(n) / static_cast<double>(cap);
    Matrix out(static_cast<Eigen::Index>(cap), 3);
    for (std::size_t i = 0; i < cap; ++i)
        out.row(static_cast<Eigen::Index>(i)) =
            points.row(static_cast<Eigen::Index>(static_cast<std::size_t>(i * stride)));
    return out;
}

inline double energy_at(const SpasdfParams& params, const SpasdfConfig& config, const Matrix& pts,
                        double psi) {
    return forward_eval(params, config, pts, psi).sdf.cwiseAbs().mean();
}

}  // namespace detector_detail

inline ArticulationEstimate estimate_articulation(const Checkpoint& ck, const Matrix& cloud_points,
                                                  const DetectorOptions& opts = {}) {
    if (opts.grid_size < 2) throw ConfigError("detector: grid_size must be >= 2");
    const SpasdfConfig& c = ck.config;
    const Matrix pts = detector_detail::energy_points(cloud_points, opts.energy_point_cap);

    ArticulationEstimate est;
    est.energy_curve.reserve(static_cast<std::size_t>(opts.grid_size));
    double best_energy = std::numeric_limits<double>::infinity();
    double best_psi = c.psi_min;
    for (int i = 0; i < opts.grid_size; ++i) {
        const double psi =
            c.psi_min + (c.psi_max - c.psi_min) * static_cast<double>(i) / (opts.grid_size - 1);
        const double e = detector_detail::energy_at(ck.params, c, pts, psi);
        est.energy_curve.emplace_back(psi, e);
        if (e < best_energy) {  // strict comparison keeps the smallest psi on ties
            best_energy = e;
            best_psi = psi;
        }
    }

    // Golden-section pass over the two cells neighboring the grid argmin.
    const double cell = (c.psi_max - c.psi_min) / (opts.grid_size - 1);
    double lo = std::max(c.psi_min, best_psi - cell);
    double hi = std::min(c.psi_max, best_psi + cell);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = detector_detail::energy_at(ck.params, c, pts, x1);
    double f2 = detector_detail::energy_at(ck.params, c, pts, x2);
    for (int it = 0; it < opts.refine_iters; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = detector_detail::energy_at(ck.params, c, pts, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = detector_detail::energy_at(ck.params, c, pts, x2);
        }
    }
    const double refined = f1 < f2 ? x1 : x2;
    const double refined_energy = std::min(f1, f2);
    // The argmin definition must hold even if the local slice is not
    // unimodal: fall back to the grid argmin unless refinement improved it.
    est.psi_star = refined_energy < best_energy ? refined : best_psi;
    return est;
}

// Pointwise anomaly scores |s_hat| at psi_star; object score is the mean of
// the ceil(k_fraction * N) largest pointwise scores.
inline AnomalyResult score(const Checkpoint& ck, const Matrix& cloud_points, double psi_star,
                           double k_fraction, ArticulationEstimate estimate = {}) {
    if (psi_star < ck.config.psi_min || psi_star > ck.config.psi_max)
        throw RangeError("score: psi_star outside the joint range");
    if (!(k_fraction > 0.0) || k_fraction > 1.0)
        throw ConfigError("score: k_fraction must be in (0, 1]");
    AnomalyResult result;
    result.psi_star = psi_star;
    result.energy_curve = std::move(estimate.energy_curve);
    result.point_scores = forward_eval(ck.params, ck.config, cloud_points, psi_star).sdf.cwiseAbs();

    const auto n = static_cast<std::size_t>(result.point_scores.size());
    const auto k = std::min(n, static_cast<std::size_t>(
                                   std::ceil(k_fraction * static_cast<double>(n))));
    std::vector<double> top(result.point_scores.data(), result.point_scores.data() + n);
    std::nth_element(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(n - k), top.end());
    double sum = 0.0;
    for (std::size_t i = n - k; i < n; ++i) sum += top[i];
    result.object_score = sum / static_cast<double>(k);
    return result;
}

// ---------------------------------------------------------------------------
// AUROC: probability a random positive outranks a random negative, ties
// counted half (Mann-Whitney), computed by sorting in O(n log n).
// ---------------------------------------------------------------------------

inline double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size())
        throw InvalidInputError("auroc: scores and labels must be aligned");
    std::size_t positives = 0;
    for (auto l : labels) positives += l ? 1 : 0;
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0)
        throw UndefinedMetricError("auroc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Average ranks across tied groups, then the rank-sum statistic.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]]) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double n_pos = static_cast<double>(positives), n_neg = static_cast<double>(negatives);
    return (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

// ---------------------------------------------------------------------------
// Split evaluation
// ---------------------------------------------------------------------------

struct SampleEval {
    std::string id;
    double psi_true = 0.0;
    double psi_star = 0.0;
    double object_score = 0.0;
    double min_energy = 0.0;
    bool is_abnormal = false;
    std::string anomaly_kind;
};

struct EvalReport {
    std::string split;
    double pt_auroc = 0.0;             // pooled over all abnormal samples' points
    double pt_auroc_sample_mean = 0.0; // mean of per-sample point AUROCs
    double obj_auroc = 0.0;
    std::vector<SampleEval> samples;
    bool include_normal_points = false;
};

inline EvalReport evaluate(const Checkpoint& ck, const std::filesystem::path& manifest_dir,
                           const DatasetManifest& manifest, Split split, const DetectorOptions& opts = {},
                           int jobs = 1, bool include_normal_points = false) {
    if (split == Split::kTrain) throw InvalidInputError("evaluate: split must be seen or unseen");
    if (ck.category != manifest.category)
        throw InvalidInputError("evaluate: checkpoint category '" + ck.category +
                                "' does not match manifest category '" + manifest.category + "'");
    const auto entries = manifest.split_samples(split);
    if (entries.empty()) throw InvalidInputError("evaluate: split has no samples");

    EvalReport report;
    report.split = to_string(split);
    report.include_normal_points = include_normal_points;
    report.samples.resize(entries.size());

    std::vector<std::vector<double>> point_scores(entries.size());
    std::vector<std::vector<std::uint8_t>> point_labels(entries.size());

    datagen_detail::parallel_for(entries.size(), jobs, [&](std::size_t i) {
        const SampleEntry& entry = *entries[i];
        const LabeledPointCloud cloud = load_sample_cloud(manifest_dir, manifest, entry);
        const Matrix pts = cloud.points_matrix();
        const ArticulationEstimate est = estimate_articulation(ck, pts, opts);
        AnomalyResult res = score(ck, pts, est.psi_star, opts.top_k_fraction, est);

        SampleEval& ev = report.samples[i];
        ev.id = entry.id;
        ev.psi_true = entry.psi;
        ev.psi_star = res.psi_star;
        ev.object_score = res.object_score;
        ev.is_abnormal = entry.is_abnormal;
        ev.anomaly_kind = entry.anomaly_kind;
        double min_e = std::numeric_limits<double>::infinity();
        for (const auto& [psi, e] : res.energy_curve) min_e = std::min(min_e, e);
        ev.min_energy = min_e;

        if (entry.is_abnormal || include_normal_points) {
            point_scores[i].assign(res.point_scores.data(),
                                   res.point_scores.data() + res.point_scores.size());
            if (entry.is_abnormal)
                point_labels[i].assign(cloud.anomaly_labels.begin(), cloud.anomaly_labels.end());
            else
                point_labels[i].assign(cloud.points.size(), 0);
        }
    });

    // Object-level AUROC over all samples.
    std::vector<double> obj_scores;
    std::vector<std::uint8_t> obj_labels;
    for (const auto& ev : report.samples) {
        obj_scores.push_back(ev.object_score);
        obj_labels.push_back(ev.is_abnormal ? 1 : 0);
    }
    report.obj_auroc = auroc(obj_scores, obj_labels);

    // Point-level AUROC pooled across abnormal samples (plus all-negative
    // normal samples when include_normal_points is set).
    std::vector<double> pooled_scores;
    std::vector<std::uint8_t> pooled_labels;
    double per_sample_sum = 0.0;
    std::size_t per_sample_count = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (point_scores[i].empty()) continue;
        pooled_scores.insert(pooled_scores.end(), point_scores[i].begin(), point_scores[i].end());
        pooled_labels.insert(pooled_labels.end(), point_labels[i].begin(), point_labels[i].end());
        if (entries[i]->is_abnormal) {
            per_sample_sum += auroc(point_scores[i], point_labels[i]);
            per_sample_count++;
        }
    }
    report.pt_auroc = auroc(pooled_scores, pooled_labels);
    report.pt_auroc_sample_mean = per_sample_count > 0
                                      ? per_sample_sum / static_cast<double>(per_sample_count)
                                      : 0.0;
    return report;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : r.samples) {
        samples.push_back(nlohmann::json{{"id", s.id},
                                         {"psi_true", s.psi_true},
                                         {"psi_star", s.psi_star},
                                         {"object_score", s.object_score},
                                         {"min_energy", s.min_energy},
                                         {"is_abnormal", s.is_abnormal},
                                         {"anomaly_kind", s.anomaly_kind}});
    }
    return nlohmann::json{{"split", r.split},
                          {"pt_auroc", r.pt_auroc},
                          {"pt_auroc_sample_mean", r.pt_auroc_sample_mean},
                          {"obj_auroc", r.obj_auroc},
                          {"include_normal_points", r.include_normal_points},
                          {"samples", samples}};
}

inline void save_report(const std::filesystem::path& json_path, const EvalReport& r) {
    std::ofstream os(json_path);
    if (!os) throw FormatError("cannot write report: " + json_path.string());
    os << report_to_json(r).dump(2) << "\n";

    // Companion CSV with per-sample rows.
    std::filesystem::path csv_path = json_path;
    csv_path.replace_extension(".csv");
    std::ofstream cs(csv_path);
    if (!cs) throw FormatError("cannot write report: " + csv_path.string());
    cs << "id,psi_true,psi_star,object_score,min_energy,is_abnormal,anomaly_kind\n";
    for (const auto& s : r.samples) {
        char line[512];
        std::snprintf(line, sizeof(line), "%s,%.17g,%.17g,%.17g,%.17g,%d,%s\n", s.id.c_str(), s.psi_true,
                      s.psi_star, s.object_score, s.min_energy, s.is_abnormal ? 1 : 0,
                      s.anomaly_kind.c_str());
        cs << line;
    }
}

// ---------------------------------------------------------------------------
// Heatmap export: per-vertex score plus an 8-bit inferno-style colormap.
// ---------------------------------------------------------------------------

inline std::array<std::uint8_t, 3> score_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    // Piecewise-linear dark-blue -> red -> yellow ramp.
    const double r = std::clamp(3.0 * t, 0.0, 1.0);
    const double g = std::clamp(3.0 * t - 1.5, 0.0, 1.0);
    const double b = std::clamp(1.0 - 2.5 * t, 0.0, 1.0);
    return {static_cast<std::uint8_t>(std::lround(255 * r)),
            static_cast<std::uint8_t>(std::lround(255 * g)),
            static_cast<std::uint8_t>(std::lround(255 * b))};
}

inline void save_heatmap_ply(const std::filesystem::path& path, const LabeledPointCloud& cloud,
                             const Eigen::VectorXd& scores) {
    if (static_cast<std::size_t>(scores.size()) != cloud.points.size())
        throw InvalidInputError("heatmap: scores not aligned with cloud points");
    PointCloudFile file;
    file.points = cloud.points;
    PlyProperty score{"score", PlyProperty::Type::kF32, {}};
    score.values.resize(cloud.points.size());
    for (std::size_t i = 0; i < cloud.points.size(); ++i)
        score.values[i] = round_f32(scores(static_cast<Eigen::Index>(i)));
    const double max_score = scores.size() > 0 ? scores.maxCoeff() : 1.0;
    PlyProperty red{"red", PlyProperty::Type::kU8, {}};
    PlyProperty green{"green", PlyProperty::Type::kU8, {}};
    PlyProperty blue{"blue", PlyProperty::Type::kU8, {}};
    red.values.resize(cloud.points.size());
    green.values.resize(cloud.points.size());
    blue.values.resize(cloud.points.size());
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const auto rgb = score_color(max_score > 0 ? scores(static_cast<Eigen::Index>(i)) / max_score : 0.0);
        red.values[i] = rgb[0];
        green.values[i] = rgb[1];
        blue.values[i] = rgb[2];
    }
    file.props.push_back(std::move(score));
    file.props.push_back(std::move(red));
    file.props.push_back(std::move(green));
    file.props.push_back(std::move(blue));
    write_point_cloud_ply(path, file);
}

}  // namespace artik
