#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "artik/detector.hpp"

using namespace artik;

namespace {

// O(n^2) pairwise oracle with half credit for ties.
double brute_auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            pairs++;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

Checkpoint tiny_checkpoint(std::uint64_t seed = 3) {
    SpasdfConfig c;
    c.latent_dim = 4;
    c.fourier_freqs = 2;
    c.pe_freqs = 2;
    c.fs_layers = 2;
    c.fs_width = 8;
    c.fs_skip_layer = 0;
    c.fa_layers = 2;
    c.fa_width = 8;
    c.pose_width = 4;
    c.part_count = 2;
    c.psi_min = 0.0;
    c.psi_max = 100.0;
    Checkpoint ck;
    ck.config = c;
    ck.params = init_params(c, seed);
    ck.category = "test";
    return ck;
}

}  // namespace

TEST_CASE("auroc: documented example and exact symmetries") {
    REQUIRE(auroc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == Catch::Approx(0.75).margin(1e-15));
    REQUIRE(auroc({0.0, 0.1, 0.9, 1.0}, {0, 0, 1, 1}) == 1.0);
    REQUIRE(auroc({0.0, 0.1, 0.9, 1.0}, {1, 1, 0, 0}) == 0.0);
    REQUIRE_THROWS_AS(auroc({0.5, 0.7}, {1, 1}), UndefinedMetricError);
    REQUIRE_THROWS_AS(auroc({0.5}, {0}), UndefinedMetricError);
}

TEST_CASE("auroc matches the pairwise oracle on random sets with ties") {
    Rng rng(60);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(400);
        std::vector<double> scores(n);
        std::vector<std::uint8_t> labels(n);
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            // Quantized scores force plenty of exact ties.
            scores[i] = std::floor(rng.uniform(0, 10)) / (trial % 2 ? 10.0 : 3.0);
            labels[i] = rng.uniform() < 0.4 ? 1 : 0;
            (labels[i] ? has_pos : has_neg) = true;
        }
        if (!has_pos) labels[0] = 1;
        if (!has_neg) labels[n - 1] = 0;
        REQUIRE(auroc(scores, labels) == Catch::Approx(brute_auroc(scores, labels)).margin(1e-9));
    }
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
    Rng rng(61);
    std::vector<double> scores(300);
    std::vector<std::uint8_t> labels(300);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = rng.uniform(-3, 3);
        labels[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    const double base = auroc(scores, labels);
    std::vector<double> exp_scores = scores, affine_scores = scores;
    for (auto& s : exp_scores) s = std::exp(s);
    for (auto& s : affine_scores) s = 5.0 * s + 11.0;
    REQUIRE(auroc(exp_scores, labels) == Catch::Approx(base).margin(1e-12));
    REQUIRE(auroc(affine_scores, labels) == Catch::Approx(base).margin(1e-12));
}

TEST_CASE("random scores against random labels sit near 0.5") {
    Rng rng(62);
    std::vector<double> scores(4000);
    std::vector<std::uint8_t> labels(4000);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = rng.uniform();
        labels[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    REQUIRE(auroc(scores, labels) == Catch::Approx(0.5).margin(0.1));
}

TEST_CASE("score: top-k examples") {
    Checkpoint ck = tiny_checkpoint();
    // Bypass the model: feed scores through the top-k aggregation by scoring
    // a tiny cloud, then checking aggregation on hand-built vectors instead.
    // k = 2 of [1,2,3,4] -> 3.5
    AnomalyResult r;
    r.point_scores = Eigen::Vector4d(1, 2, 3, 4);
    {
        std::vector<double> top(r.point_scores.data(), r.point_scores.data() + 4);
        std::nth_element(top.begin(), top.begin() + 2, top.end());
        REQUIRE(0.5 * (top[2] + top[3]) == Catch::Approx(3.5));
    }

    // Through the public surface: an all-equal score field gives the same
    // object score at any k.
    Matrix pts = Matrix::Zero(8, 3);
    const auto res_small = score(ck, pts, 50.0, 0.01);
    const auto res_all = score(ck, pts, 50.0, 1.0);
    // all 8 points identical -> identical |s|, so both ks agree
    REQUIRE(res_small.object_score == Catch::Approx(res_all.object_score).margin(1e-12));

    // k = N equals the plain mean.
    Matrix pts2(4, 3);
    pts2 << 0.1, 0.2, 0.3, -0.4, 0.5, -0.6, 0.7, -0.8, 0.9, -0.1, -0.2, -0.3;
    const auto res_mean = score(ck, pts2, 50.0, 1.0);
    REQUIRE(res_mean.object_score ==
            Catch::Approx(res_mean.point_scores.mean()).margin(1e-12));

    REQUIRE_THROWS_AS(score(ck, pts2, 101.0, 0.01), RangeError);
    REQUIRE_THROWS_AS(score(ck, pts2, 50.0, 0.0), ConfigError);
}

TEST_CASE("object score is monotone in every point score") {
    Checkpoint ck = tiny_checkpoint();
    Rng rng(63);
    Matrix pts(64, 3);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts(i) = rng.uniform(-1, 1);
    const auto base = score(ck, pts, 30.0, 0.05);

    // Raising any single |s| by perturbing the input toward higher distance
    // can only raise (or keep) the object score: verify by direct aggregation
    // over a modified copy of the scores.
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd bumped = base.point_scores;
        bumped(static_cast<Eigen::Index>(rng.uniform_index(64))) += rng.uniform(0, 1);
        std::vector<double> top(bumped.data(), bumped.data() + bumped.size());
        const std::size_t k = static_cast<std::size_t>(std::ceil(0.05 * 64));
        std::nth_element(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(64 - k), top.end());
        double sum = 0;
        for (std::size_t i = 64 - k; i < 64; ++i) sum += top[i];
        REQUIRE(sum / static_cast<double>(k) >= base.object_score - 1e-12);
    }
}

TEST_CASE("estimate_articulation: constant-zero model gives a flat curve and the tie rule") {
    Checkpoint ck = tiny_checkpoint();
    // Zero every parameter: f == 0 identically, so the energy curve is flat
    // and the argmin tie resolves to psi_min.
    ck.params.for_each([](const std::string&, Matrix& m) { m.setZero(); });
    Matrix pts = Matrix::Random(128, 3);
    DetectorOptions opts;
    opts.grid_size = 64;
    const auto est = estimate_articulation(ck, pts, opts);
    REQUIRE(est.energy_curve.size() == 64);
    for (std::size_t i = 1; i < est.energy_curve.size(); ++i) {
        REQUIRE(est.energy_curve[i].first > est.energy_curve[i - 1].first);
        REQUIRE(est.energy_curve[i].second == est.energy_curve[0].second);
    }
    REQUIRE(est.psi_star == ck.config.psi_min);
}

TEST_CASE("estimate_articulation: psi_star energy never exceeds any grid energy") {
    Checkpoint ck = tiny_checkpoint(9);
    Rng rng(64);
    Matrix pts(256, 3);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts(i) = rng.uniform(-1, 1);
    DetectorOptions opts;
    opts.grid_size = 32;
    const auto est = estimate_articulation(ck, pts, opts);
    const double e_star =
        forward_eval(ck.params, ck.config, pts, est.psi_star).sdf.cwiseAbs().mean();
    for (const auto& [psi, e] : est.energy_curve) REQUIRE(e_star <= e + 1e-12);
}

TEST_CASE("energy point cap subsamples deterministically") {
    Checkpoint ck = tiny_checkpoint(10);
    Rng rng(65);
    Matrix pts(512, 3);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts(i) = rng.uniform(-1, 1);
    DetectorOptions capped;
    capped.grid_size = 16;
    capped.energy_point_cap = 64;
    const auto a = estimate_articulation(ck, pts, capped);
    const auto b = estimate_articulation(ck, pts, capped);
    REQUIRE(a.psi_star == b.psi_star);
    for (std::size_t i = 0; i < a.energy_curve.size(); ++i)
        REQUIRE(a.energy_curve[i].second == b.energy_curve[i].second);
}
