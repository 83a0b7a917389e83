#include "adler/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace adler {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Elementwise activation_from_string(const std::string& s) {
    if (s == "relu") return Elementwise::Relu;
    if (s == "sigmoid") return Elementwise::Sigmoid;
    if (s == "tanh") return Elementwise::Tanh;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

std::string activation_to_string(Elementwise a) {
    switch (a) {
        case Elementwise::Relu: return "relu";
        case Elementwise::Sigmoid: return "sigmoid";
        case Elementwise::Tanh: return "tanh";
        default: throw std::invalid_argument("activation must be relu/sigmoid/tanh");
    }
}

LayerSpec layer_from_json(const json& j);

std::vector<LayerSpec> layers_from_json(const json& j) {
    std::vector<LayerSpec> layers;
    for (const auto& lj : j) layers.push_back(layer_from_json(lj));
    return layers;
}

LayerSpec layer_from_json(const json& j) {
    if (j.is_string() && j.get<std::string>() == "flatten") return LayerSpec::flatten();
    if (!j.is_object() || j.size() != 1)
        throw std::invalid_argument("layer must be a single-key object, got " + j.dump());
    const auto it = j.begin();
    const std::string key = it.key();
    if (key == "dense") return LayerSpec::dense(it.value().get<int>());
    if (key == "activation") return LayerSpec::activation(activation_from_string(it.value()));
    if (key == "flatten") return LayerSpec::flatten();
    if (key == "residual") return LayerSpec::residual(layers_from_json(it.value()));
    if (key == "conv") {
        const json& cj = it.value();
        Padding pad = Padding::Same;
        if (cj.contains("padding")) {
            const std::string p = cj.at("padding");
            if (p == "same") pad = Padding::Same;
            else if (p == "valid") pad = Padding::Valid;
            else throw std::invalid_argument("conv padding must be same|valid, got '" + p + "'");
        }
        return LayerSpec::conv(cj.at("channels").get<int>(), cj.at("kernel").get<int>(), pad);
    }
    throw std::invalid_argument("unknown layer kind '" + key + "'");
}

json layer_to_json(const LayerSpec& l) {
    switch (l.kind) {
        case LayerSpec::Kind::Dense: return json{{"dense", l.out_dim}};
        case LayerSpec::Kind::Activation: return json{{"activation", activation_to_string(l.act)}};
        case LayerSpec::Kind::Flatten: return json("flatten");
        case LayerSpec::Kind::Conv: {
            json cj{{"channels", l.out_channels},
                    {"kernel", l.kernel},
                    {"padding", l.pad == Padding::Same ? "same" : "valid"}};
            return json{{"conv", cj}};
        }
        case LayerSpec::Kind::Residual: {
            json inner = json::array();
            for (const auto& il : l.inner) inner.push_back(layer_to_json(il));
            return json{{"residual", inner}};
        }
    }
    throw std::logic_error("layer_to_json: unreachable");
}

ModelSpec model_from_json(const json& j) {
    ModelSpec spec;
    for (const auto& d : j.at("input_shape")) spec.input_shape.push_back(d.get<std::size_t>());
    spec.output_dim = j.at("output_dim").get<int>();
    spec.layers = layers_from_json(j.at("layers"));
    return spec;
}

json model_to_json(const ModelSpec& spec) {
    json layers = json::array();
    for (const auto& l : spec.layers) layers.push_back(layer_to_json(l));
    return json{{"input_shape", spec.input_shape},
                {"output_dim", spec.output_dim},
                {"layers", layers}};
}

}  // namespace

void TrainConfig::validate() const {
    model.validate();
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (dataset.kind != "idx" && batch_size > dataset.n)
        throw std::invalid_argument("config: batch_size " + std::to_string(batch_size) +
                                    " exceeds dataset size " + std::to_string(dataset.n));
    if (optimizer.method == Method::Sgd && !optimizer.fixed_lr)
        throw std::invalid_argument("config: sgd requires optimizer.fixed_lr");
    if (optimizer.fixed_lr && *optimizer.fixed_lr <= 0.0)
        throw std::invalid_argument("config: fixed_lr must be positive");
}

TrainConfig parse_config_json(const std::string& json_text) {
    json j = json::parse(json_text);
    TrainConfig cfg;
    cfg.model = model_from_json(j.at("model"));
    const json& dj = j.at("dataset");
    cfg.dataset.kind = dj.at("kind");
    if (cfg.dataset.kind == "idx") {
        cfg.dataset.images = dj.at("images");
        cfg.dataset.labels = dj.at("labels");
        cfg.dataset.test_images = dj.value("test_images", "");
        cfg.dataset.test_labels = dj.value("test_labels", "");
    } else {
        cfg.dataset.n = dj.at("n").get<std::size_t>();
        cfg.dataset.test_n = dj.value("test_n", cfg.dataset.n / 5);
        cfg.dataset.c = dj.at("c").get<int>();
        cfg.dataset.noise = dj.value("noise", 0.0);
        synthetic_kind_from_string(cfg.dataset.kind);  // validates
    }
    const json& oj = j.at("optimizer");
    cfg.optimizer.method = method_from_string(oj.at("method"));
    cfg.optimizer.beta = oj.value("beta", 0.99);
    cfg.optimizer.epsilon = oj.value("epsilon", 1e-10);
    if (oj.contains("fixed_lr")) cfg.optimizer.fixed_lr = oj.at("fixed_lr").get<double>();
    const std::string loss = j.value("loss", "softmax_cross_entropy");
    if (loss == "mse") cfg.loss = LossKind::Mse;
    else if (loss == "softmax_cross_entropy") cfg.loss = LossKind::SoftmaxCrossEntropy;
    else throw std::invalid_argument("unknown loss '" + loss + "'");
    cfg.batch_size = j.value("batch_size", (std::size_t)64);
    cfg.epochs = j.value("epochs", (std::size_t)1);
    cfg.seed = j.value("seed", (std::uint64_t)1);
    cfg.out = j.value("out", "");
    cfg.validate();
    return cfg;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_json(ss.str());
}

std::string config_to_json(const TrainConfig& config) {
    json dj;
    dj["kind"] = config.dataset.kind;
    if (config.dataset.kind == "idx") {
        dj["images"] = config.dataset.images;
        dj["labels"] = config.dataset.labels;
        dj["test_images"] = config.dataset.test_images;
        dj["test_labels"] = config.dataset.test_labels;
    } else {
        dj["n"] = config.dataset.n;
        dj["test_n"] = config.dataset.test_n;
        dj["c"] = config.dataset.c;
        dj["noise"] = config.dataset.noise;
    }
    json oj;
    oj["method"] = method_to_string(config.optimizer.method);
    oj["beta"] = config.optimizer.beta;
    oj["epsilon"] = config.optimizer.epsilon;
    if (config.optimizer.fixed_lr) oj["fixed_lr"] = *config.optimizer.fixed_lr;
    json j;
    j["model"] = model_to_json(config.model);
    j["dataset"] = dj;
    j["optimizer"] = oj;
    j["loss"] = config.loss == LossKind::Mse ? "mse" : "softmax_cross_entropy";
    j["batch_size"] = config.batch_size;
    j["epochs"] = config.epochs;
    j["seed"] = config.seed;
    j["out"] = config.out;
    return j.dump(2) + "\n";
}

std::pair<Dataset, Dataset> build_datasets(const TrainConfig& config) {
    if (config.dataset.kind == "idx") {
        Dataset train = load_idx(config.dataset.images, config.dataset.labels);
        Dataset test = config.dataset.test_images.empty()
                           ? train
                           : load_idx(config.dataset.test_images, config.dataset.test_labels);
        return {std::move(train), std::move(test)};
    }
    const SyntheticKind kind = synthetic_kind_from_string(config.dataset.kind);
    Dataset train = gen_synthetic(kind, config.dataset.n, config.dataset.c, config.dataset.noise,
                                  Rng::mix(config.seed, 10));
    Dataset test = gen_synthetic(kind, std::max<std::size_t>(config.dataset.test_n, 1),
                                 config.dataset.c, config.dataset.noise, Rng::mix(config.seed, 11));
    return {std::move(train), std::move(test)};
}

double accuracy(const Tensor& preds, const std::vector<int>& labels) {
    const std::size_t b = preds.shape[0], c = preds.shape[1];
    std::size_t hits = 0;
    for (std::size_t k = 0; k < b; ++k) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (preds.at2(k, j) > preds.at2(k, best)) best = j;
        if ((int)best == labels[k]) ++hits;
    }
    return (double)hits / (double)b;
}

namespace {

json step_to_json(const StepRecord& r) {
    json j;
    j["k"] = r.k;
    j["h_I"] = r.loss;
    j["g_dot_g"] = r.g_dot_g;
    j["v_q_v"] = r.v_q_v;
    j["eta"] = r.eta;
    j["eta_hat"] = r.eta_hat;
    j["wall_ms"] = r.wall_ms;
    if (r.degenerate) j["degenerate"] = true;
    return j;
}

void write_metrics(const std::string& out_dir, const RunResult& result) {
    fs::create_directories(out_dir);
    {
        std::ofstream f(out_dir + "/steps.jsonl");
        for (const auto& r : result.steps) f << step_to_json(r).dump() << "\n";
    }
    {
        std::ofstream f(out_dir + "/epochs.jsonl");
        for (const auto& e : result.epochs) {
            json j;
            j["epoch"] = e.epoch;
            j["train_loss"] = e.train_loss;
            j["test_loss"] = e.test_loss;
            j["train_acc"] = e.train_acc;
            j["test_acc"] = e.test_acc;
            f << j.dump() << "\n";
        }
    }
}

}  // namespace

RunResult run_training(const TrainConfig& config, bool allow_divergence) {
    config.validate();
    auto [train, test] = build_datasets(config);
    if (config.batch_size > train.size())
        throw std::invalid_argument("batch_size exceeds training set size");

    Graph graph = build_graph(config.model, config.batch_size);
    Rng init_rng(Rng::mix(config.seed, 1));
    ParamSet params = init_params(config.model, init_rng);
    Rng data_rng(Rng::mix(config.seed, 2));

    LrAggregatorState state;
    state.beta = config.optimizer.beta;
    state.mode = config.optimizer.lr_mode();

    Batch train_eval = full_batch(train, config.loss);
    Batch test_eval = full_batch(test, config.loss);

    RunResult result;
    long k = 0;
    const auto run_start = std::chrono::steady_clock::now();
    try {
        for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
            for (Batch& batch : epoch_batches(train, config.batch_size, data_rng, config.loss)) {
                const auto t0 = std::chrono::steady_clock::now();
                StepResult step = optimizer_step(params, graph, batch, config.loss, state,
                                                 config.optimizer);
                const auto t1 = std::chrono::steady_clock::now();
                params = std::move(step.params);
                state = step.state;
                step.record.k = k++;
                step.record.wall_ms =
                    std::chrono::duration<double, std::milli>(t1 - t0).count();
                if (!std::isfinite(step.record.loss))
                    throw std::runtime_error("non-finite minibatch loss at step " +
                                             std::to_string(step.record.k));
                result.steps.push_back(step.record);
            }
            EpochRecord er;
            er.epoch = epoch;
            Tensor train_preds = evaluate(graph, params, train_eval.inputs);
            Tensor test_preds = evaluate(graph, params, test_eval.inputs);
            er.train_loss = loss_value(train_preds, train_eval, config.loss);
            er.test_loss = loss_value(test_preds, test_eval, config.loss);
            er.train_acc = accuracy(train_preds, train.labels);
            er.test_acc = accuracy(test_preds, test.labels);
            result.epochs.push_back(er);
        }
    } catch (const std::runtime_error&) {
        result.diverged = true;
        if (!allow_divergence) {
            if (!config.out.empty()) write_metrics(config.out, result);
            throw;
        }
    }
    const auto run_end = std::chrono::steady_clock::now();
    result.total_wall_ms = std::chrono::duration<double, std::milli>(run_end - run_start).count();
    result.final_params = std::move(params);
    if (!config.out.empty()) {
        write_metrics(config.out, result);
        result.steps_path = config.out + "/steps.jsonl";
        result.epochs_path = config.out + "/epochs.jsonl";
    }
    return result;
}

GridResult grid_search(const TrainConfig& config, const std::vector<double>& lr_grid) {
    if (lr_grid.empty()) throw std::invalid_argument("grid_search: empty grid");
    for (double lr : lr_grid)
        if (lr <= 0.0) throw std::invalid_argument("grid_search: rates must be positive");
    GridResult result;
    for (std::size_t i = 0; i < lr_grid.size(); ++i) {
        TrainConfig arm = config;
        arm.optimizer.method = Method::Sgd;
        arm.optimizer.fixed_lr = lr_grid[i];
        if (!config.out.empty()) arm.out = config.out + "/arm" + std::to_string(i);
        RunResult run = run_training(arm, /*allow_divergence=*/true);
        GridArm summary;
        summary.lr = lr_grid[i];
        summary.wall_ms = run.total_wall_ms;
        summary.diverged = run.diverged;
        if (!run.epochs.empty()) {
            const EpochRecord& last = run.epochs.back();
            summary.final_train_loss = last.train_loss;
            summary.final_test_loss = last.test_loss;
            summary.train_acc = last.train_acc;
            summary.test_acc = last.test_acc;
        } else {
            summary.final_train_loss = std::numeric_limits<double>::infinity();
            summary.final_test_loss = std::numeric_limits<double>::infinity();
        }
        if (summary.diverged)
            summary.final_train_loss = std::numeric_limits<double>::infinity();
        result.total_wall_ms += run.total_wall_ms;
        result.arms.push_back(summary);
    }
    for (std::size_t i = 1; i < result.arms.size(); ++i) {
        if (result.arms[i].final_train_loss <
            result.arms[result.best_by_train_loss].final_train_loss)
            result.best_by_train_loss = i;
        if (result.arms[i].test_acc > result.arms[result.best_by_test_acc].test_acc)
            result.best_by_test_acc = i;
    }
    if (!config.out.empty()) {
        fs::create_directories(config.out);
        json arms = json::array();
        for (const auto& a : result.arms) {
            json j;
            j["lr"] = a.lr;
            j["final_train_loss"] = a.final_train_loss;
            j["final_test_loss"] = a.final_test_loss;
            j["train_acc"] = a.train_acc;
            j["test_acc"] = a.test_acc;
            j["wall_ms"] = a.wall_ms;
            j["diverged"] = a.diverged;
            arms.push_back(j);
        }
        json summary;
        summary["arms"] = arms;
        summary["best_by_train_loss"] = result.best_by_train_loss;
        summary["best_by_test_acc"] = result.best_by_test_acc;
        summary["total_wall_ms"] = result.total_wall_ms;
        std::ofstream f(config.out + "/grid_summary.json");
        f << summary.dump(2) << "\n";
    }
    return result;
}

void export_plot_data(const std::vector<std::string>& metrics_paths, const std::string& out_csv) {
    std::ofstream out(out_csv);
    if (!out) throw std::runtime_error("cannot open output csv " + out_csv);
    out << "series,k,h_I,eta,eta_hat\n";
    for (const std::string& path : metrics_paths) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot open metrics file " + path);
        fs::path p(path);
        std::string series =
            p.filename() == "steps.jsonl" ? p.parent_path().filename().string() : p.stem().string();
        if (series.empty()) series = path;
        std::string line;
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            out << series << "," << j.at("k") << "," << j.at("h_I").dump() << ","
                << j.at("eta").dump() << "," << j.at("eta_hat").dump() << "\n";
        }
    }
}

bool metrics_equal_ignoring_walltime(const std::string& path_a, const std::string& path_b) {
    std::ifstream fa(path_a), fb(path_b);
    if (!fa || !fb) throw std::runtime_error("cannot open metrics files for comparison");
    std::string la, lb;
    while (true) {
        const bool ga = (bool)std::getline(fa, la);
        const bool gb = (bool)std::getline(fb, lb);
        if (ga != gb) return false;
        if (!ga) return true;
        json ja = json::parse(la), jb = json::parse(lb);
        ja.erase("wall_ms");
        jb.erase("wall_ms");
        if (ja.dump() != jb.dump()) return false;
    }
}

}  // namespace adler
