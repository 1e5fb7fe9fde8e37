#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "artik/trainer.hpp"
#include "artik/datagen.hpp"

using namespace artik;

namespace {

struct TinyDataset {
    std::filesystem::path dir;
    DatasetManifest manifest;
};

// One tiny hinge dataset shared by the trainer tests.
const TinyDataset& tiny_dataset() {
    static const TinyDataset ds = [] {
        TinyDataset out;
        out.dir = std::filesystem::temp_directory_path() / "artik_trainer_ds";
        std::filesystem::remove_all(out.dir);
        SplitConfig cfg;
        cfg.train_poses = 4;
        cfg.test_poses_per_split = 1;
        cfg.all_kinds_per_pose = false;
        cfg.datagen.points_per_cloud = 1024;
        cfg.datagen.dense_points = 8000;
        cfg.datagen.tuples_per_sample = 1200;
        out.manifest = build_splits(make_builtin_hinge(), 99, out.dir, cfg);
        return out;
    }();
    return ds;
}

SpasdfConfig tiny_model() {
    SpasdfConfig c;
    c.latent_dim = 8;
    c.fourier_freqs = 3;
    c.pe_freqs = 3;
    c.fs_layers = 3;
    c.fs_width = 24;
    c.fs_skip_layer = 2;
    c.fa_layers = 3;
    c.fa_width = 24;
    c.pose_width = 12;
    return c;
}

TrainConfig smoke_train(int epochs) {
    TrainConfig t;
    t.epochs = epochs;
    t.learning_rate = 1e-3;
    t.batch_size = 256;
    t.batches_per_sample = 2;
    t.seed = 7;
    t.checkpoint_every = 0;
    return t;
}

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("training lowers the fixed validation loss after one epoch") {
    const auto& ds = tiny_dataset();
    const auto ck_path = ds.dir / "smoke1.bin";
    const TrainResult result = train(ds.dir, ds.manifest, tiny_model(), smoke_train(1), ck_path);
    REQUIRE(result.validation_after.total < result.validation_before.total);
    REQUIRE(result.history.size() == 1);
    REQUIRE(std::filesystem::exists(ck_path));
}

TEST_CASE("two runs with the same seed are bit-identical") {
    const auto& ds = tiny_dataset();
    const auto p1 = ds.dir / "det1.bin";
    const auto p2 = ds.dir / "det2.bin";
    const TrainResult a = train(ds.dir, ds.manifest, tiny_model(), smoke_train(3), p1);
    const TrainResult b = train(ds.dir, ds.manifest, tiny_model(), smoke_train(3), p2);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        REQUIRE(a.history[i].mean.total == b.history[i].mean.total);
        REQUIRE(a.history[i].mean.l_sdf == b.history[i].mean.l_sdf);
    }
    REQUIRE(file_bytes(p1) == file_bytes(p2));
}

TEST_CASE("use_pose=false trains and stores a checkpoint without pose parameters") {
    const auto& ds = tiny_dataset();
    const auto path = ds.dir / "nopose.bin";
    TrainConfig t = smoke_train(1);
    t.use_pose = false;
    const TrainResult result = train(ds.dir, ds.manifest, tiny_model(), t, path);
    REQUIRE(result.checkpoint.params.pose_w.empty());
    const Checkpoint loaded = load_checkpoint(path);
    REQUIRE(loaded.params.pose_w.empty());
    REQUIRE_FALSE(loaded.config.use_pose);
}

TEST_CASE("loss CSV has the documented columns") {
    const auto& ds = tiny_dataset();
    const auto ck_path = ds.dir / "csv.bin";
    const auto csv_path = ds.dir / "loss.csv";
    train(ds.dir, ds.manifest, tiny_model(), smoke_train(2), ck_path, csv_path);
    std::ifstream is(csv_path);
    std::string header;
    std::getline(is, header);
    REQUIRE(header == "epoch,l_sdf,l_latent,l_part,total");
    int rows = 0;
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) rows++;
    REQUIRE(rows == 2);
}

TEST_CASE("training on an empty split is an invalid-input error") {
    const auto& ds = tiny_dataset();
    DatasetManifest empty = ds.manifest;
    empty.samples.clear();
    REQUIRE_THROWS_AS(train(ds.dir, empty, tiny_model(), smoke_train(1), ds.dir / "x.bin"),
                      InvalidInputError);
}

TEST_CASE("latent regularizer keeps phi near its initialization scale") {
    const auto& ds = tiny_dataset();
    SpasdfConfig model = tiny_model();
    const double init_norm = init_params(model, 7).phi.norm();
    const TrainResult result =
        train(ds.dir, ds.manifest, model, smoke_train(10), ds.dir / "reg.bin");
    REQUIRE(result.checkpoint.params.phi.norm() < 10.0 * init_norm);
}
