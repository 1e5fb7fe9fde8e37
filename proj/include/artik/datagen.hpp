#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "artik/anomaly.hpp"
#include "artik/category.hpp"
#include "artik/dataset.hpp"
#include "artik/knn.hpp"
#include "artik/mesh_sample.hpp"

namespace artik {

struct DatagenOptions {
    std::size_t points_per_cloud = 16384;
    std::size_t dense_points = 100000;
    std::size_t tuples_per_sample = 30000;
    // Query class mix: on-surface, near-surface, sample-bbox, global volume.
    double frac_on = 0.4;
    double frac_near = 0.4;
    double frac_bbox = 0.1;
    double near_sigma_fine = 0.005;   // normalized units, half the near points
    double near_sigma_coarse = 0.05;  // the other half
    double global_extent = 1.1;       // global queries in [-1.1, 1.1]^3
};

// ---------------------------------------------------------------------------
// Normal sample generation
// ---------------------------------------------------------------------------

// Unnormalized surface points of the posed model; the exact draw that
// generate_normal will use for the same (psi, seed), so normalization can be
// fitted on the true training clouds before full generation.
inline std::vector<Vec3> sample_posed_surface(const ArticulatedModel& model, double psi, std::size_t n,
                                              std::uint64_t sample_seed) {
    const auto posed = pose_model(model, psi);
    const TriangleMesh merged = merge_meshes(posed);
    const auto samples = sample_surface(merged, n, Rng(sample_seed).child_seed("surface"));
    std::vector<Vec3> out;
    out.reserve(n);
    for (const auto& s : samples) out.push_back(s.point);
    return out;
}

struct NormalSample {
    LabeledPointCloud cloud;
    SdfTupleSet tuples;  // sdf values in f64; rounding to f32 happens on save
};

inline NormalSample generate_normal(const ArticulatedModel& model, double psi,
                                    const NormalizationParams& norm, std::uint64_t sample_seed,
                                    const DatagenOptions& opts = {}) {
    Rng rng(sample_seed);
    const auto posed = pose_model(model, psi);
    const TriangleMesh merged = merge_meshes(posed);

    // Surface cloud and part assignment in world coordinates.
    const auto surf = sample_surface(merged, opts.points_per_cloud, rng.child_seed("surface"));
    std::vector<MeshBvh> part_bvhs;
    part_bvhs.reserve(posed.size());
    for (const auto& part : posed) part_bvhs.emplace_back(part);

    NormalSample out;
    out.cloud.points.reserve(surf.size());
    out.cloud.part_ids.reserve(surf.size());
    for (const auto& s : surf) {
        out.cloud.points.push_back(round_f32(normalize_point(s.point, norm)));
        out.cloud.part_ids.push_back(static_cast<std::uint8_t>(nearest_part(s.point, part_bvhs)));
    }
    out.cloud.psi = psi;
    out.cloud.category = model.name;
    out.cloud.is_abnormal = false;

    // SDF supervision against the normalized merged mesh.
    const TriangleMesh merged_norm = normalize_mesh(merged, norm);
    SignedDistanceField field(merged_norm);
    KdTree cloud_tree(out.cloud.points);

    const std::size_t n_t = opts.tuples_per_sample;
    const auto n_on = static_cast<std::size_t>(opts.frac_on * static_cast<double>(n_t));
    const auto n_near = static_cast<std::size_t>(opts.frac_near * static_cast<double>(n_t));
    const auto n_bbox = static_cast<std::size_t>(opts.frac_bbox * static_cast<double>(n_t));
    const std::size_t n_global = n_t - n_on - n_near - n_bbox;
    out.tuples.points.resize(static_cast<Eigen::Index>(n_t), 3);
    out.tuples.sdf.resize(static_cast<Eigen::Index>(n_t));
    out.tuples.part_ids.resize(n_t);
    out.tuples.psi = psi;
    out.tuples.class_counts = {static_cast<std::int64_t>(n_on), static_cast<std::int64_t>(n_near),
                               static_cast<std::int64_t>(n_bbox), static_cast<std::int64_t>(n_global)};

    Rng tuple_rng = rng.child("tuple");
    Aabb cloud_box;
    for (const auto& p : out.cloud.points) cloud_box.expand(p);

    Eigen::Index row = 0;
    auto emit = [&](const Vec3& x, std::optional<std::uint8_t> known_part) {
        out.tuples.points.row(row) = x;
        out.tuples.sdf(row) = field.signed_distance(x);
        out.tuples.part_ids[static_cast<std::size_t>(row)] =
            known_part ? *known_part
                       : out.cloud.part_ids[static_cast<std::size_t>(cloud_tree.nearest(x))];
        row++;
    };

    for (std::size_t i = 0; i < n_on; ++i) {
        const auto idx = static_cast<std::size_t>(tuple_rng.uniform_index(out.cloud.points.size()));
        emit(out.cloud.points[idx], out.cloud.part_ids[idx]);
    }
    for (std::size_t i = 0; i < n_near; ++i) {
        const double sigma = i < n_near / 2 ? opts.near_sigma_fine : opts.near_sigma_coarse;
        const auto idx = static_cast<std::size_t>(tuple_rng.uniform_index(out.cloud.points.size()));
        const Vec3 x = out.cloud.points[idx] +
                       Vec3(tuple_rng.normal(0, sigma), tuple_rng.normal(0, sigma), tuple_rng.normal(0, sigma));
        emit(x, std::nullopt);
    }
    for (std::size_t i = 0; i < n_bbox; ++i) {
        const Vec3 x(tuple_rng.uniform(cloud_box.lo.x(), cloud_box.hi.x()),
                     tuple_rng.uniform(cloud_box.lo.y(), cloud_box.hi.y()),
                     tuple_rng.uniform(cloud_box.lo.z(), cloud_box.hi.z()));
        emit(x, std::nullopt);
    }
    for (std::size_t i = 0; i < n_global; ++i) {
        const double e = opts.global_extent;
        const Vec3 x(tuple_rng.uniform(-e, e), tuple_rng.uniform(-e, e), tuple_rng.uniform(-e, e));
        emit(x, std::nullopt);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Abnormal sample generation
// ---------------------------------------------------------------------------

// tau = alpha * || bbox_max - bbox_min ||_2 with alpha = 0.001, in the same
// (unnormalized) coordinates as the distance query.
inline double anomaly_threshold(const TriangleMesh& normal_mesh, double alpha = 0.001) {
    return alpha * normal_mesh.bounds().diagonal();
}

inline std::vector<std::uint8_t> label_anomaly_with_tau(const std::vector<Vec3>& points,
                                                        const TriangleMesh& normal_mesh, double tau) {
    MeshBvh bvh(normal_mesh);
    std::vector<std::uint8_t> labels(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        labels[i] = bvh.unsigned_distance(points[i]) > tau ? 1 : 0;
    return labels;
}

inline std::vector<std::uint8_t> label_anomaly(const std::vector<Vec3>& points,
                                               const TriangleMesh& normal_mesh, double alpha = 0.001) {
    return label_anomaly_with_tau(points, normal_mesh, anomaly_threshold(normal_mesh, alpha));
}

struct AbnormalSample {
    LabeledPointCloud cloud;
    DenseCloud dense;
};

inline AbnormalSample generate_abnormal(const ArticulatedModel& model, double psi, const AnomalySpec& spec,
                                        const NormalizationParams& norm, std::uint64_t sample_seed,
                                        const DatagenOptions& opts = {}) {
    Rng rng(sample_seed);
    const auto posed = pose_model(model, psi);
    const TriangleMesh normal_merged = merge_meshes(posed);

    const RigidTransform target_tf = model.is_moving(spec.target_part)
                                         ? transform_for(model.joint, psi)
                                         : RigidTransform{};
    const auto deformed = inject_anomaly(posed, spec, target_tf);
    const TriangleMesh deformed_merged = merge_meshes(deformed);

    // Dense cloud: sample, part-label against the deformed parts, then
    // anomaly-label against the pose-aligned normal mesh.
    const auto dense_samples = sample_surface(deformed_merged, opts.dense_points, rng.child_seed("dense"));
    AbnormalSample out;
    out.dense.points.reserve(dense_samples.size());
    for (const auto& s : dense_samples) out.dense.points.push_back(round_f32(s.point));

    std::vector<MeshBvh> part_bvhs;
    part_bvhs.reserve(deformed.size());
    for (const auto& part : deformed) part_bvhs.emplace_back(part);
    out.dense.part_ids.reserve(out.dense.points.size());
    for (const auto& p : out.dense.points)
        out.dense.part_ids.push_back(static_cast<std::uint8_t>(nearest_part(p, part_bvhs)));
    out.dense.anomaly_labels = label_anomaly(out.dense.points, normal_merged);

    // Shuffle, keep the first points_per_cloud, normalize.
    std::vector<std::size_t> perm(out.dense.points.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng sub_rng = rng.child("subsample");
    sub_rng.shuffle(perm);
    out.cloud.points.reserve(opts.points_per_cloud);
    out.cloud.part_ids.reserve(opts.points_per_cloud);
    out.cloud.anomaly_labels.reserve(opts.points_per_cloud);
    for (std::size_t i = 0; i < opts.points_per_cloud; ++i) {
        const std::size_t j = perm[i];
        out.cloud.points.push_back(round_f32(normalize_point(out.dense.points[j], norm)));
        out.cloud.part_ids.push_back(out.dense.part_ids[j]);
        out.cloud.anomaly_labels.push_back(out.dense.anomaly_labels[j]);
    }
    out.cloud.psi = psi;
    out.cloud.category = model.name;
    out.cloud.is_abnormal = true;
    return out;
}

// ---------------------------------------------------------------------------
// Split construction
// ---------------------------------------------------------------------------

// Defaults sized for the builtin categories (parts around unit scale, plate
// thickness >= 0.1); custom categories should scale these to their geometry.
struct AnomalyRanges {
    double radius_min = 0.09, radius_max = 0.16;         // model units
    double magnitude_min = 0.05, magnitude_max = 0.075;  // displacement kinds
    double bend_min = 0.15, bend_max = 0.3;              // radians
};

struct SplitConfig {
    int train_poses = 40;
    int test_poses_per_split = 20;
    double train_fraction = 0.7;  // lower fraction of the joint range is trainable
    // true: every anomaly kind at every test pose; false: one kind per test
    // pose, cycling through the six kinds.
    bool all_kinds_per_pose = true;
    DatagenOptions datagen;
    AnomalyRanges anomaly;
    int max_anomaly_attempts = 10;
    double max_positive_fraction = 0.3;
    int jobs = 1;
};

inline AnomalySpec sample_anomaly_spec(const ArticulatedModel& model, AnomalyKind kind, Rng& rng,
                                       const AnomalyRanges& ranges) {
    AnomalySpec spec;
    spec.kind = kind;
    spec.target_part = static_cast<int>(rng.uniform_index(model.parts.size()));
    const auto& part = model.parts[static_cast<std::size_t>(spec.target_part)];
    const auto anchor = sample_surface(part, 1, rng.next_u64());
    spec.center = anchor.front().point;
    spec.radius = rng.uniform(ranges.radius_min, ranges.radius_max);
    spec.magnitude = kind == AnomalyKind::kBend ? rng.uniform(ranges.bend_min, ranges.bend_max)
                                                : rng.uniform(ranges.magnitude_min, ranges.magnitude_max);
    spec.seed = rng.next_u64();
    return spec;
}

namespace datagen_detail {

// Test poses avoiding the training grid: uniform draws rejected within 5% of
// a cell width of any grid value.
inline std::vector<double> draw_test_psis(Rng& rng, double lo, double hi, int count,
                                          const std::vector<double>& grid) {
    if (!(hi > lo)) throw ConfigError("build_splits: psi interval [" + std::to_string(lo) + ", " +
                                      std::to_string(hi) + "] too narrow");
    const double cell = grid.size() > 1 ? (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1)
                                        : (hi - lo);
    std::vector<double> out;
    int guard = 0;
    while (static_cast<int>(out.size()) < count) {
        if (++guard > 100000)
            throw ConfigError("build_splits: could not place test poses away from the training grid");
        const double psi = rng.uniform(lo, hi);
        bool ok = true;
        for (double g : grid)
            if (std::abs(psi - g) < 0.05 * cell) ok = false;
        if (ok) out.push_back(psi);
    }
    return out;
}

// Fan a list of index jobs over N threads; results land in caller storage by
// index so the outcome is independent of scheduling.
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace datagen_detail

// Generates the full dataset for one category into out_dir and returns the
// manifest (also written as manifest.json). Training poses live on a uniform
// grid over the lower train_fraction of the joint range; seen-test poses
// interpolate inside that interval, unseen-test poses sit in the excluded
// upper remainder.
inline DatasetManifest build_splits(const ArticulatedModel& model, std::uint64_t seed,
                                    const std::filesystem::path& out_dir, const SplitConfig& cfg = {}) {
    validate_model(model);
    if (cfg.train_poses < 2) throw ConfigError("build_splits: need at least 2 training poses");
    const double span = model.joint.psi_max - model.joint.psi_min;
    if (!(span > 0) || !(cfg.train_fraction > 0) || !(cfg.train_fraction < 1))
        throw ConfigError("build_splits: invalid joint range or train fraction");

    std::filesystem::create_directories(out_dir);
    Rng root(seed);

    const double train_lo = model.joint.psi_min;
    const double train_hi = model.joint.psi_min + cfg.train_fraction * span;

    std::vector<double> train_psis(static_cast<std::size_t>(cfg.train_poses));
    for (int i = 0; i < cfg.train_poses; ++i)
        train_psis[static_cast<std::size_t>(i)] =
            train_lo + (train_hi - train_lo) * static_cast<double>(i) / (cfg.train_poses - 1);

    Rng pose_rng = root.child("poses");
    const auto seen_psis =
        datagen_detail::draw_test_psis(pose_rng, train_lo, train_hi, cfg.test_poses_per_split, train_psis);
    const double unseen_margin = 1e-9 * span;
    const auto unseen_psis = datagen_detail::draw_test_psis(
        pose_rng, train_hi + unseen_margin, model.joint.psi_max, cfg.test_poses_per_split, train_psis);

    // Pass 1: fit category normalization on the training clouds.
    std::vector<std::vector<Vec3>> train_clouds(train_psis.size());
    datagen_detail::parallel_for(train_psis.size(), cfg.jobs, [&](std::size_t i) {
        const std::string id = "train_" + std::to_string(i);
        train_clouds[i] = sample_posed_surface(model, train_psis[i], cfg.datagen.points_per_cloud,
                                               root.child_seed("sample:" + id));
    });
    const NormalizationParams norm = fit_normalization(train_clouds);
    train_clouds.clear();
    train_clouds.shrink_to_fit();
    {
        std::ofstream os(out_dir / "norm.json");
        if (!os) throw FormatError("cannot write normalization params");
        os << normalization_to_json(norm).dump(2) << "\n";
    }

    DatasetManifest manifest;
    manifest.category = model.name;
    manifest.part_count = static_cast<int>(model.parts.size());
    manifest.joint_kind = to_string(model.joint.kind);
    manifest.psi_min = model.joint.psi_min;
    manifest.psi_max = model.joint.psi_max;
    manifest.train_psi_lo = train_lo;
    manifest.train_psi_hi = train_hi;
    manifest.seed = seed;
    manifest.normalization_file = "norm.json";

    // Plan every sample up front so generation can run in any order.
    struct Job {
        SampleEntry entry;
        std::optional<AnomalyKind> kind;
    };
    std::vector<Job> jobs_list;
    auto plan = [&](const std::string& id, Split split, double psi, std::optional<AnomalyKind> kind,
                    bool with_tuples) {
        Job job;
        job.entry.id = id;
        job.entry.split = split;
        job.entry.psi = psi;
        job.entry.is_abnormal = kind.has_value();
        job.entry.cloud_file = id + ".ply";
        if (kind) {
            job.entry.anomaly_kind = to_string(*kind);
            job.entry.dense_file = id + "_dense.ply";
        }
        if (with_tuples) job.entry.tuple_file = id + ".asdf";
        job.kind = kind;
        jobs_list.push_back(std::move(job));
    };

    for (std::size_t i = 0; i < train_psis.size(); ++i)
        plan("train_" + std::to_string(i), Split::kTrain, train_psis[i], std::nullopt, true);
    for (int s = 0; s < 2; ++s) {
        const Split split = s == 0 ? Split::kSeen : Split::kUnseen;
        const auto& psis = s == 0 ? seen_psis : unseen_psis;
        const std::string prefix = s == 0 ? "seen_" : "unseen_";
        for (std::size_t i = 0; i < psis.size(); ++i) {
            plan(prefix + std::to_string(i) + "_normal", split, psis[i], std::nullopt, false);
            if (cfg.all_kinds_per_pose) {
                for (AnomalyKind kind : all_anomaly_kinds())
                    plan(prefix + std::to_string(i) + "_" + to_string(kind), split, psis[i], kind, false);
            } else {
                const AnomalyKind kind = all_anomaly_kinds()[i % all_anomaly_kinds().size()];
                plan(prefix + std::to_string(i) + "_" + to_string(kind), split, psis[i], kind, false);
            }
        }
    }

    datagen_detail::parallel_for(jobs_list.size(), cfg.jobs, [&](std::size_t j) {
        const Job& job = jobs_list[j];
        const std::uint64_t sample_seed = root.child_seed("sample:" + job.entry.id);
        if (!job.kind) {
            NormalSample sample = generate_normal(model, job.entry.psi, norm, sample_seed, cfg.datagen);
            sample.cloud.split = job.entry.split;
            validate_cloud(sample.cloud, cfg.datagen.points_per_cloud);
            save_cloud_ply(out_dir / job.entry.cloud_file, sample.cloud);
            if (!job.entry.tuple_file.empty()) save_tuples_asdf(out_dir / job.entry.tuple_file, sample.tuples);
            return;
        }
        // Abnormal: resample the spec until injection and labeling succeed.
        Rng spec_rng = Rng(sample_seed).child("spec");
        std::string last_error = "no attempts made";
        for (int attempt = 0; attempt < cfg.max_anomaly_attempts; ++attempt) {
            const AnomalySpec spec = sample_anomaly_spec(model, *job.kind, spec_rng, cfg.anomaly);
            try {
                AbnormalSample sample =
                    generate_abnormal(model, job.entry.psi, spec, norm, sample_seed, cfg.datagen);
                std::size_t positives = 0;
                for (auto l : sample.cloud.anomaly_labels) positives += l;
                if (positives == 0) throw RetryableError("anomaly left no labeled points");
                if (static_cast<double>(positives) >
                    cfg.max_positive_fraction * static_cast<double>(sample.cloud.size()))
                    throw RetryableError("anomaly labeled too many points");
                sample.cloud.split = job.entry.split;
                validate_cloud(sample.cloud, cfg.datagen.points_per_cloud);
                save_cloud_ply(out_dir / job.entry.cloud_file, sample.cloud);
                save_dense_ply(out_dir / job.entry.dense_file, sample.dense);
                return;
            } catch (const RetryableError& e) {
                last_error = e.what();
            }
        }
        throw InvalidInputError("sample " + job.entry.id + ": anomaly injection failed after " +
                                std::to_string(cfg.max_anomaly_attempts) + " attempts: " + last_error);
    });

    for (auto& job : jobs_list) manifest.samples.push_back(std::move(job.entry));

    // Tuple class counts echo the generation options.
    for (auto& e : manifest.samples) {
        if (e.tuple_file.empty()) continue;
        const auto n_t = cfg.datagen.tuples_per_sample;
        const auto n_on = static_cast<std::int64_t>(cfg.datagen.frac_on * static_cast<double>(n_t));
        const auto n_near = static_cast<std::int64_t>(cfg.datagen.frac_near * static_cast<double>(n_t));
        const auto n_bbox = static_cast<std::int64_t>(cfg.datagen.frac_bbox * static_cast<double>(n_t));
        e.tuple_class_counts = {n_on, n_near, n_bbox,
                                static_cast<std::int64_t>(n_t) - n_on - n_near - n_bbox};
    }

    save_manifest(out_dir / "manifest.json", manifest);
    return manifest;
}

}  // namespace artik
