#pragma once

#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "artik/checkpoint.hpp"
#include "artik/dataset.hpp"
#include "artik/rng.hpp"

namespace artik {

struct TrainConfig {
    int epochs = 800;
    double learning_rate = 1e-4;
    int batch_size = 4096;
    // Articulation samples visited per epoch; 0 = all of them.
    int samples_per_epoch = 0;
    // Batches drawn from each visited sample per epoch; 0 = a full pass over
    // its tuples.
    int batches_per_sample = 0;
    std::uint64_t seed = 0;
    int checkpoint_every = 100;

    // Ablation switches, copied onto the model config at train start.
    bool use_pe = true;
    bool use_shape_latent = true;
    bool use_pose = true;
    bool use_part_head = true;
    bool use_clamp = true;
};

struct EpochLog {
    int epoch = 0;
    LossComponents mean;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochLog> history;
    std::filesystem::path checkpoint_path;
    LossComponents validation_before;
    LossComponents validation_after;
};

namespace trainer_detail {

inline SdfBatch slice_batch(const SdfTupleSet& tuples, const std::vector<std::size_t>& order,
                            std::size_t begin, std::size_t end) {
    SdfBatch b;
    const auto n = static_cast<Eigen::Index>(end - begin);
    b.points.resize(n, 3);
    b.sdf.resize(n);
    b.part_ids.reserve(static_cast<std::size_t>(n));
    for (std::size_t i = begin; i < end; ++i) {
        const auto src = static_cast<Eigen::Index>(order[i]);
        b.points.row(static_cast<Eigen::Index>(i - begin)) = tuples.points.row(src);
        b.sdf(static_cast<Eigen::Index>(i - begin)) = tuples.sdf(src);
        b.part_ids.push_back(tuples.part_ids[order[i]]);
    }
    b.psi = tuples.psi;
    return b;
}

inline void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochLog>& history) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write loss log: " + path.string());
    os << "epoch,l_sdf,l_latent,l_part,total\n";
    char line[256];
    for (const auto& e : history) {
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.mean.l_sdf,
                      e.mean.l_latent, e.mean.l_part, e.mean.total);
        os << line;
    }
}

}  // namespace trainer_detail

// Optimizes network weights and the category latent jointly with Adam over
// the train split's tuple sets. Batching unit is one articulation sample, so
// each batch shares a single psi. Deterministic given the seed.
inline TrainResult train(const std::filesystem::path& manifest_dir, const DatasetManifest& manifest,
                         SpasdfConfig model_config, const TrainConfig& config,
                         const std::filesystem::path& checkpoint_path,
                         const std::filesystem::path& loss_csv_path = {}) {
    if (config.epochs < 1 || config.batch_size < 1)
        throw ConfigError("train config: epochs and batch size must be >= 1");

    model_config.use_pe = config.use_pe;
    model_config.use_shape_latent = config.use_shape_latent;
    model_config.use_pose = config.use_pose;
    model_config.use_part_head = config.use_part_head;
    model_config.use_clamp = config.use_clamp;
    model_config.psi_min = manifest.psi_min;
    model_config.psi_max = manifest.psi_max;
    model_config.part_count = manifest.part_count;
    validate_config(model_config);

    const auto train_entries = manifest.split_samples(Split::kTrain);
    if (train_entries.empty()) throw InvalidInputError("train: manifest has no train-split samples");
    std::vector<SdfTupleSet> tuple_sets;
    tuple_sets.reserve(train_entries.size());
    for (const auto* e : train_entries) tuple_sets.push_back(load_sample_tuples(manifest_dir, *e));

    Checkpoint ck;
    ck.config = model_config;
    ck.params = init_params(model_config, config.seed);
    ck.category = manifest.category;
    ck.seed = config.seed;
    ck.epoch = 0;

    // Fixed validation batch: the first batch_size tuples of the first
    // sample, untouched by shuffling.
    const auto val_n = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                             static_cast<std::size_t>(tuple_sets.front().size()));
    std::vector<std::size_t> val_order(val_n);
    std::iota(val_order.begin(), val_order.end(), std::size_t{0});
    const SdfBatch val_batch = trainer_detail::slice_batch(tuple_sets.front(), val_order, 0, val_n);

    TrainResult result;
    result.validation_before = loss_eval(ck.params, model_config, val_batch);

    AdamState adam;
    adam.learning_rate = config.learning_rate;
    std::vector<Matrix*> param_list = ck.params.parameter_list();

    Rng epoch_rng = Rng(config.seed).child("train");
    std::filesystem::path last_good;

    const auto samples_per_epoch = config.samples_per_epoch > 0
                                       ? std::min<std::size_t>(static_cast<std::size_t>(config.samples_per_epoch),
                                                               tuple_sets.size())
                                       : tuple_sets.size();

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::vector<std::size_t> sample_order(tuple_sets.size());
        std::iota(sample_order.begin(), sample_order.end(), std::size_t{0});
        epoch_rng.shuffle(sample_order);
        sample_order.resize(samples_per_epoch);

        LossComponents epoch_mean;
        std::size_t batches_done = 0;
        for (std::size_t s : sample_order) {
            const SdfTupleSet& tuples = tuple_sets[s];
            std::vector<std::size_t> order(static_cast<std::size_t>(tuples.size()));
            std::iota(order.begin(), order.end(), std::size_t{0});
            epoch_rng.shuffle(order);

            const auto full_batches = (order.size() + static_cast<std::size_t>(config.batch_size) - 1) /
                                      static_cast<std::size_t>(config.batch_size);
            const auto batches = config.batches_per_sample > 0
                                     ? std::min<std::size_t>(static_cast<std::size_t>(config.batches_per_sample),
                                                             full_batches)
                                     : full_batches;
            for (std::size_t b = 0; b < batches; ++b) {
                const std::size_t lo = b * static_cast<std::size_t>(config.batch_size);
                const std::size_t hi =
                    std::min(order.size(), lo + static_cast<std::size_t>(config.batch_size));
                const SdfBatch batch = trainer_detail::slice_batch(tuples, order, lo, hi);

                Tape tape;
                TapeParams leaves = make_leaves(tape, ck.params);
                TapeLoss loss;
                try {
                    loss = loss_tape(tape, leaves, model_config, batch);
                    if (!std::isfinite(loss.components.total))
                        throw NumericError("training loss is not finite");
                    tape.backward(loss.total);
                } catch (const NumericError& e) {
                    throw TrainingDivergedError(std::string("training diverged at epoch ") +
                                                    std::to_string(epoch) + ": " + e.what(),
                                                last_good.string());
                }

                std::vector<const Matrix*> grads;
                auto push_grads = [&](const std::vector<Value>& vs) {
                    for (const auto& v : vs) grads.push_back(&v.grad());
                };
                push_grads(leaves.fs_w);
                push_grads(leaves.fs_b);
                push_grads(leaves.fa_w);
                push_grads(leaves.fa_b);
                push_grads(leaves.pose_w);
                push_grads(leaves.pose_b);
                if (leaves.part_w.valid()) {
                    grads.push_back(&leaves.part_w.grad());
                    grads.push_back(&leaves.part_b.grad());
                }
                if (leaves.phi.valid()) grads.push_back(&leaves.phi.grad());

                // Parameter list order is for_each order (weights and biases
                // interleaved); grads above are grouped. Rebuild a matching
                // pointer list instead.
                std::vector<Matrix*> ordered;
                for (auto& m : ck.params.fs_w) ordered.push_back(&m);
                for (auto& m : ck.params.fs_b) ordered.push_back(&m);
                for (auto& m : ck.params.fa_w) ordered.push_back(&m);
                for (auto& m : ck.params.fa_b) ordered.push_back(&m);
                for (auto& m : ck.params.pose_w) ordered.push_back(&m);
                for (auto& m : ck.params.pose_b) ordered.push_back(&m);
                if (ck.params.part_w.size() > 0) {
                    ordered.push_back(&ck.params.part_w);
                    ordered.push_back(&ck.params.part_b);
                }
                if (ck.params.phi.size() > 0) ordered.push_back(&ck.params.phi);

                try {
                    adam_step(ordered, grads, adam);
                } catch (TrainingDivergedError& e) {
                    throw TrainingDivergedError(std::string("training diverged at epoch ") +
                                                    std::to_string(epoch) + ": " + e.what(),
                                                last_good.string());
                }

                epoch_mean.l_sdf += loss.components.l_sdf;
                epoch_mean.l_latent += loss.components.l_latent;
                epoch_mean.l_part += loss.components.l_part;
                epoch_mean.total += loss.components.total;
                batches_done++;
            }
        }
        if (batches_done > 0) {
            const double inv = 1.0 / static_cast<double>(batches_done);
            epoch_mean.l_sdf *= inv;
            epoch_mean.l_latent *= inv;
            epoch_mean.l_part *= inv;
            epoch_mean.total *= inv;
        }
        result.history.push_back({epoch, epoch_mean});
        ck.epoch = epoch;

        if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 &&
            epoch != config.epochs) {
            const auto periodic = checkpoint_path.parent_path() /
                                  (checkpoint_path.stem().string() + "_epoch" + std::to_string(epoch) +
                                   checkpoint_path.extension().string());
            save_checkpoint(periodic, ck);
            last_good = periodic;
        }
        log_debug("epoch %d: total %.6f sdf %.6f latent %.6f part %.6f", epoch, epoch_mean.total,
                  epoch_mean.l_sdf, epoch_mean.l_latent, epoch_mean.l_part);
    }

    save_checkpoint(checkpoint_path, ck);
    result.checkpoint = std::move(ck);
    result.checkpoint_path = checkpoint_path;
    result.validation_after = loss_eval(result.checkpoint.params, model_config, val_batch);
    if (!loss_csv_path.empty()) trainer_detail::write_loss_csv(loss_csv_path, result.history);
    return result;
}

}  // namespace artik
