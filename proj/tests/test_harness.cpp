#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include "adler/harness.hpp"
#include "doctest.h"

using namespace adler;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("adler_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), (std::streamsize)bytes.size());
}

void push_be32(std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back((unsigned char)(x >> 24));
    v.push_back((unsigned char)(x >> 16));
    v.push_back((unsigned char)(x >> 8));
    v.push_back((unsigned char)x);
}

std::string blobs_config(const fs::path& out) {
    return std::string(R"({
        "model": {"input_shape": [2], "output_dim": 3,
                  "layers": [{"dense": 8}, {"activation": "tanh"}, {"dense": 3}]},
        "dataset": {"kind": "gaussian_blobs", "n": 60, "test_n": 30, "c": 3, "noise": 0.3},
        "optimizer": {"method": "adler"},
        "batch_size": 20, "epochs": 2, "seed": 7, "out": ")") +
           out.string() + "\"}";
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("gen_synthetic blobs: exact centers at zero noise") {
    Dataset ds = gen_synthetic(SyntheticKind::GaussianBlobs, 9, 3, 0.0, 123);
    CHECK(ds.num_classes == 3);
    CHECK(ds.size() == 9);
    constexpr double kPi = 3.14159265358979323846;
    for (std::size_t i = 0; i < 9; ++i) {
        const int label = (int)(i % 3);
        CHECK(ds.labels[i] == label);
        const double angle = 2.0 * kPi * label / 3.0;
        CHECK(ds.inputs.at2(i, 0) == doctest::Approx(2.0 * std::cos(angle)).epsilon(1e-15));
        CHECK(ds.inputs.at2(i, 1) == doctest::Approx(2.0 * std::sin(angle)).epsilon(1e-15));
    }
}

TEST_CASE("gen_synthetic blobs: nearest center recovers labels at low noise") {
    Dataset ds = gen_synthetic(SyntheticKind::GaussianBlobs, 120, 4, 0.2, 5);
    constexpr double kPi = 3.14159265358979323846;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        int best = -1;
        double best_d = 1e300;
        for (int cl = 0; cl < 4; ++cl) {
            const double a = 2.0 * kPi * cl / 4.0;
            const double dx = ds.inputs.at2(i, 0) - 2.0 * std::cos(a);
            const double dy = ds.inputs.at2(i, 1) - 2.0 * std::sin(a);
            if (dx * dx + dy * dy < best_d) {
                best_d = dx * dx + dy * dy;
                best = cl;
            }
        }
        CHECK(best == ds.labels[i]);
    }
}

TEST_CASE("gen_synthetic spirals and determinism") {
    Dataset a = gen_synthetic(SyntheticKind::TwoSpirals, 40, 5, 0.1, 9);
    CHECK(a.num_classes == 2);  // arms ignore the requested class count
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.labels[i] == (int)(i % 2));
    Dataset b = gen_synthetic(SyntheticKind::TwoSpirals, 40, 5, 0.1, 9);
    CHECK(a.inputs.data == b.inputs.data);
    Dataset c = gen_synthetic(SyntheticKind::TwoSpirals, 40, 5, 0.1, 10);
    CHECK(a.inputs.data != c.inputs.data);

    // Zero noise: points lie on radius 0.2 + 2t, t in (0,1).
    Dataset clean = gen_synthetic(SyntheticKind::TwoSpirals, 30, 2, 0.0, 11);
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const double r = std::hypot(clean.inputs.at2(i, 0), clean.inputs.at2(i, 1));
        CHECK(r >= 0.2);
        CHECK(r <= 2.2);
    }

    CHECK_THROWS_AS(gen_synthetic(SyntheticKind::GaussianBlobs, 10, 3, -0.1, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(gen_synthetic(SyntheticKind::GaussianBlobs, 2, 3, 0.1, 1),
                    std::invalid_argument);
}

TEST_CASE("load_idx parses a hand-built file pair") {
    fs::path dir = temp_dir("idx");
    std::vector<unsigned char> img;
    push_be32(img, 0x00000803u);
    push_be32(img, 2);  // two images
    push_be32(img, 2);  // 2x2
    push_be32(img, 2);
    for (unsigned char p : {0, 51, 102, 255, 10, 20, 30, 40}) img.push_back(p);
    std::vector<unsigned char> lab;
    push_be32(lab, 0x00000801u);
    push_be32(lab, 2);
    lab.push_back(1);
    lab.push_back(0);
    write_bytes(dir / "img.idx", img);
    write_bytes(dir / "lab.idx", lab);

    Dataset ds = load_idx((dir / "img.idx").string(), (dir / "lab.idx").string());
    CHECK(ds.inputs.shape == std::vector<std::size_t>{2, 1, 2, 2});
    CHECK(ds.inputs.data[0] == 0.0);
    CHECK(ds.inputs.data[1] == doctest::Approx(51.0 / 255.0).epsilon(1e-15));
    CHECK(ds.inputs.data[3] == 1.0);
    CHECK(ds.inputs.data[7] == doctest::Approx(40.0 / 255.0).epsilon(1e-15));
    CHECK(ds.labels == std::vector<int>{1, 0});
    CHECK(ds.num_classes == 2);

    // Corrupt magic.
    std::vector<unsigned char> bad = img;
    bad[3] = 0x99;
    write_bytes(dir / "bad.idx", bad);
    CHECK_THROWS_AS(load_idx((dir / "bad.idx").string(), (dir / "lab.idx").string()),
                    std::runtime_error);

    // Label count mismatch.
    std::vector<unsigned char> lab3;
    push_be32(lab3, 0x00000801u);
    push_be32(lab3, 3);
    lab3.insert(lab3.end(), {0, 1, 0});
    write_bytes(dir / "lab3.idx", lab3);
    CHECK_THROWS_AS(load_idx((dir / "img.idx").string(), (dir / "lab3.idx").string()),
                    std::runtime_error);

    CHECK_THROWS_AS(load_idx((dir / "missing.idx").string(), (dir / "lab.idx").string()),
                    std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("epoch_batches: shuffled full-coverage chunks, remainder dropped") {
    Dataset ds = gen_synthetic(SyntheticKind::GaussianBlobs, 10, 2, 0.5, 3);
    Rng rng(77);
    auto batches = epoch_batches(ds, 3, rng, LossKind::SoftmaxCrossEntropy);
    CHECK(batches.size() == 3);  // 10/3, short tail dropped
    std::multiset<double> seen;
    for (const Batch& b : batches) {
        CHECK(b.inputs.shape == std::vector<std::size_t>{3, 2});
        CHECK(b.labels.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) seen.insert(b.inputs.at2(i, 0));
    }
    CHECK(seen.size() == 9);  // 9 distinct examples, no repeats

    Rng r1(5), r2(5);
    auto b1 = epoch_batches(ds, 5, r1, LossKind::SoftmaxCrossEntropy);
    auto b2 = epoch_batches(ds, 5, r2, LossKind::SoftmaxCrossEntropy);
    REQUIRE(b1.size() == b2.size());
    for (std::size_t i = 0; i < b1.size(); ++i) CHECK(b1[i].inputs.data == b2[i].inputs.data);

    Rng r3(5);
    CHECK_THROWS_AS(epoch_batches(ds, 11, r3, LossKind::SoftmaxCrossEntropy),
                    std::invalid_argument);
}

TEST_CASE("make_batch builds one-hot targets for mse") {
    Dataset ds = gen_synthetic(SyntheticKind::GaussianBlobs, 6, 3, 0.0, 2);
    Batch b = make_batch(ds, {0, 4}, LossKind::Mse);
    CHECK(b.targets.shape == std::vector<std::size_t>{2, 3});
    CHECK(b.targets.at2(0, 0) == 1.0);  // label of example 0 is 0
    CHECK(b.targets.at2(1, 1) == 1.0);  // label of example 4 is 4 % 3 = 1
    double sum = 0.0;
    for (double x : b.targets.data) sum += x;
    CHECK(sum == 2.0);
    CHECK(b.labels.empty());
}

TEST_CASE("config json round trip is idempotent") {
    fs::path dir = temp_dir("cfg");
    TrainConfig cfg = parse_config_json(blobs_config(dir / "out"));
    const std::string once = config_to_json(cfg);
    const std::string twice = config_to_json(parse_config_json(once));
    CHECK(once == twice);
    CHECK(cfg.batch_size == 20);
    CHECK(cfg.epochs == 2);
    CHECK(cfg.optimizer.method == Method::Adler);
    CHECK(cfg.model.layers.size() == 3);
    fs::remove_all(dir);
}

TEST_CASE("config validation rejects bad fields") {
    fs::path dir = temp_dir("cfgbad");
    std::string base = blobs_config(dir / "out");
    auto with = [&](const std::string& from, const std::string& to) {
        std::string s = base;
        s.replace(s.find(from), from.size(), to);
        return s;
    };
    CHECK_THROWS_AS(parse_config_json(with("\"epochs\": 2", "\"epochs\": 0")),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_config_json(with("\"adler\"", "\"mystery\"")), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_json(with("\"batch_size\": 20", "\"batch_size\": 100")),
                    std::invalid_argument);
    // sgd without a rate
    CHECK_THROWS_AS(parse_config_json(with("\"adler\"", "\"sgd\"")), std::invalid_argument);
    fs::remove_all(dir);
}

TEST_CASE("run_training learns blobs and logs metrics") {
    fs::path dir = temp_dir("train");
    TrainConfig cfg = parse_config_json(blobs_config(dir / "out"));
    cfg.epochs = 8;
    RunResult res = run_training(cfg);
    CHECK(!res.diverged);
    CHECK(res.steps.size() == 8 * 3);  // 60/20 steps per epoch
    CHECK(res.epochs.size() == 8);
    CHECK(res.epochs.back().train_loss < res.epochs.front().train_loss);
    CHECK(res.epochs.back().train_acc > 0.9);
    CHECK(fs::exists(dir / "out" / "steps.jsonl"));
    CHECK(fs::exists(dir / "out" / "epochs.jsonl"));
    for (const auto& s : res.steps) {
        CHECK(s.eta > 0.0);
        CHECK(std::isfinite(s.loss));
    }
    fs::remove_all(dir);
}

TEST_CASE("run_training is deterministic modulo wall time") {
    fs::path dir = temp_dir("det");
    TrainConfig cfg = parse_config_json(blobs_config(dir / "a"));
    RunResult ra = run_training(cfg);
    cfg.out = (dir / "b").string();
    RunResult rb = run_training(cfg);
    CHECK(metrics_equal_ignoring_walltime((dir / "a" / "steps.jsonl").string(),
                                          (dir / "b" / "steps.jsonl").string()));
    CHECK(metrics_equal_ignoring_walltime((dir / "a" / "epochs.jsonl").string(),
                                          (dir / "b" / "epochs.jsonl").string()));
    CHECK(ra.final_params.flatten() == rb.final_params.flatten());  // bit-exact

    // A different seed produces a different trajectory.
    cfg.seed = 8;
    cfg.out = (dir / "c").string();
    run_training(cfg);
    CHECK(!metrics_equal_ignoring_walltime((dir / "a" / "steps.jsonl").string(),
                                           (dir / "c" / "steps.jsonl").string()));
    fs::remove_all(dir);
}

TEST_CASE("grid_search ranks arms and writes a summary") {
    fs::path dir = temp_dir("grid");
    TrainConfig cfg = parse_config_json(blobs_config(dir / "out"));
    GridResult grid = grid_search(cfg, {1e-4, 1e-1});
    REQUIRE(grid.arms.size() == 2);
    CHECK(grid.arms[0].lr == 1e-4);
    CHECK(grid.arms[1].lr == 1e-1);
    // The tiny rate barely moves; the larger one must fit better.
    CHECK(grid.best_by_train_loss == 1);
    CHECK(grid.arms[1].final_train_loss < grid.arms[0].final_train_loss);
    CHECK(fs::exists(dir / "out" / "grid_summary.json"));
    CHECK(fs::exists(dir / "out" / "arm0" / "steps.jsonl"));
    CHECK(fs::exists(dir / "out" / "arm1" / "steps.jsonl"));
    CHECK_THROWS_AS(grid_search(cfg, {}), std::invalid_argument);
    CHECK_THROWS_AS(grid_search(cfg, {0.0}), std::invalid_argument);
    fs::remove_all(dir);
}

TEST_CASE("export_plot_data flattens step logs into csv") {
    fs::path dir = temp_dir("csv");
    TrainConfig cfg = parse_config_json(blobs_config(dir / "runA"));
    run_training(cfg);
    export_plot_data({(dir / "runA" / "steps.jsonl").string()}, (dir / "plot.csv").string());
    std::ifstream f(dir / "plot.csv");
    std::string header, first;
    std::getline(f, header);
    std::getline(f, first);
    CHECK(header == "series,k,h_I,eta,eta_hat");
    CHECK(first.rfind("runA,0,", 0) == 0);  // series from the parent directory
    std::size_t rows = 1;
    std::string line;
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 6);  // 2 epochs x 3 steps

    CHECK_THROWS_AS(export_plot_data({(dir / "nope.jsonl").string()}, (dir / "x.csv").string()),
                    std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("accuracy") {
    Tensor preds = Tensor::matrix(3, 2, {0.9, 0.1, 0.2, 0.8, 0.6, 0.4});
    CHECK(accuracy(preds, {0, 1, 0}) == 1.0);
    CHECK(accuracy(preds, {1, 1, 0}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}
