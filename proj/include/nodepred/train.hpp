#pragma once

// Joint training of GNN and MLP parameters on labeled example sets, with a
// fixed held-out validation split, patience-based early stopping with
// best-parameter restoration, and meaningless-run detection (a model that
// collapses to one output class).

#include <nodepred/examples.hpp>
#include <nodepred/graph.hpp>
#include <nodepred/model.hpp>
#include <nodepred/nn.hpp>
#include <nodepred/rng.hpp>

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nodepred {

struct TrainConfig {
    int max_epochs = 50;
    int patience = 8;
    double validation_fraction = 0.10;
    std::int64_t batch_size = 0;  // 0 -> max(32, num_nodes / 16)
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    void validate() const {
        if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
        if (patience < 1 || patience >= max_epochs)
            throw std::invalid_argument("TrainConfig: need 1 <= patience < max_epochs");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
            throw std::invalid_argument("TrainConfig: validation_fraction must be in (0, 1)");
        if (batch_size < 0) throw std::invalid_argument("TrainConfig: negative batch_size");
        if (!(learning_rate > 0.0))
            throw std::invalid_argument("TrainConfig: learning_rate must be positive");
    }
};

inline std::int64_t default_batch_size(NodeId num_nodes) {
    return std::max<std::int64_t>(32, num_nodes / 16);
}

struct TrainReport {
    int epochs_run = 0;
    bool stopped_early = false;
    int best_epoch = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<double> train_loss;  // one entry per epoch
    std::vector<double> val_loss;
    bool meaningless = false;
    std::string abort_reason;  // non-empty when training aborted
    std::int64_t batch_size_used = 0;
    std::size_t optimization_examples = 0;
    std::size_t validation_examples = 0;
    // Wall time is informational only; it is reported in run manifests but
    // never written into deterministic artifacts.
    double wall_time_seconds = 0.0;
};

// Patience rule: training stops once the best validation epoch lies
// `patience` epochs in the past; the best epoch's parameters are the result.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {
        if (patience < 1) throw std::invalid_argument("EarlyStopper: patience must be >= 1");
    }

    // Record epoch's validation loss; true when it strictly improves the best.
    bool observe(int epoch, double val_loss) {
        if (val_loss < best_loss_) {
            best_loss_ = val_loss;
            best_epoch_ = epoch;
            return true;
        }
        return false;
    }

    bool should_stop(int epoch) const { return epoch - best_epoch_ >= patience_; }
    int best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }

private:
    int patience_;
    int best_epoch_ = 0;
    double best_loss_ = std::numeric_limits<double>::infinity();
};

// True when a prediction vector carries no signal: every thresholded
// prediction lands in the same class, or accuracy sits within 2 points of
// 50% while the predictions barely vary.
template <class T>
bool detect_meaningless(std::span<const T> predictions, std::span<const T> labels) {
    if (predictions.empty() || predictions.size() != labels.size())
        throw std::invalid_argument("detect_meaningless: empty or mismatched inputs");

    bool all_same = true;
    const bool first = predictions[0] >= T(0.5);
    std::size_t correct = 0;
    double mean = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool cls = predictions[i] >= T(0.5);
        if (cls != first) all_same = false;
        if (cls == (labels[i] >= T(0.5))) ++correct;
        mean += static_cast<double>(predictions[i]);
    }
    if (all_same) return true;

    mean /= static_cast<double>(predictions.size());
    double var = 0.0;
    for (const T p : predictions) {
        const double d = static_cast<double>(p) - mean;
        var += d * d;
    }
    var /= static_cast<double>(predictions.size());
    const double acc =
        100.0 * static_cast<double>(correct) / static_cast<double>(predictions.size());
    return std::abs(acc - 50.0) <= 2.0 && var < 1e-6;
}

// Train a fresh model on the examples.  Per optimizer step: full-graph GNN
// forward over g_train, mean BCE over one shuffled batch of examples, manual
// backward, one Adam step.  Returns the best-validation parameters.
template <class T>
std::pair<Model<T>, TrainReport> train(const InducedGraph& g_train, const ExampleSet& examples,
                                       const TrainConfig& config, GnnConfig model_config) {
    config.validate();
    if (examples.scope != ExampleScope::train)
        throw std::invalid_argument("train: example set must have train scope");
    if (!g_train.graph.has_features())
        throw std::invalid_argument("train: training graph carries no features");

    const auto t_start = std::chrono::steady_clock::now();
    const Mat<T> features = cast_features<T>(g_train.graph.features());
    if (model_config.input_dim == 0)
        model_config.input_dim = static_cast<int>(features.cols());
    else if (model_config.input_dim != static_cast<int>(features.cols()))
        throw std::invalid_argument("train: feature dim disagrees with model input_dim");
    model_config.validate();

    const auto local = localize_examples<T>(examples, g_train);

    // Fixed held-out validation split over examples.
    std::vector<std::size_t> order(local.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng split_rng(mix_seed(config.seed, 0x76616cull));  // "val" stream
    split_rng.shuffle(order);
    auto val_count = static_cast<std::size_t>(
        std::llround(config.validation_fraction * static_cast<double>(local.size())));
    val_count = std::max<std::size_t>(1, std::min(val_count, local.size() - 1));
    const std::vector<std::size_t> val_idx(order.begin(),
                                           order.begin() + static_cast<std::ptrdiff_t>(val_count));
    std::vector<std::size_t> opt_idx(order.begin() + static_cast<std::ptrdiff_t>(val_count),
                                     order.end());
    if (opt_idx.empty()) throw std::invalid_argument("train: no optimization examples left");

    Model<T> model = init_model<T>(model_config, mix_seed(config.seed, 0x696e6974ull));
    const auto plan = build_plan<T>(g_train.graph, model_config.layer_kind);
    auto params = model.param_ptrs();
    AdamConfig adam_config;
    adam_config.learning_rate = config.learning_rate;
    Adam<T> adam(params, adam_config);

    TrainReport report;
    report.batch_size_used = config.batch_size > 0 ? config.batch_size
                                                   : default_batch_size(g_train.graph.num_nodes());
    report.optimization_examples = opt_idx.size();
    report.validation_examples = val_idx.size();

    EarlyStopper stopper(config.patience);
    std::vector<Mat<T>> best_params;
    best_params.reserve(model.params.size());
    for (const auto& p : model.params) best_params.push_back(p.value);

    Workspace<T> ws;
    const auto batch = static_cast<std::size_t>(report.batch_size_used);

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng epoch_rng(mix_seed(config.seed, 0x65706f6368ull, static_cast<std::uint64_t>(epoch)));
        epoch_rng.shuffle(opt_idx);

        double loss_sum = 0.0;
        try {
            for (std::size_t begin = 0; begin < opt_idx.size(); begin += batch) {
                const std::size_t end = std::min(opt_idx.size(), begin + batch);
                const std::span<const std::size_t> step_batch(opt_idx.data() + begin,
                                                              end - begin);
                model.zero_grads();
                const T loss =
                    model_loss_forward(model, plan, features,
                                       std::span<const LocalExample<T>>(local), step_batch, ws);
                if (!std::isfinite(static_cast<double>(loss)))
                    throw std::runtime_error("non-finite training loss");
                model_loss_backward(model, plan, std::span<const LocalExample<T>>(local),
                                    step_batch, ws);
                adam.step(params);
                loss_sum += static_cast<double>(loss) * static_cast<double>(step_batch.size());
            }
        } catch (const std::runtime_error& e) {
            report.meaningless = true;
            report.abort_reason = e.what();
            report.epochs_run = epoch;
            break;
        }
        report.train_loss.push_back(loss_sum / static_cast<double>(opt_idx.size()));

        double val = 0.0;
        try {
            val = static_cast<double>(
                model_loss_forward(model, plan, features, std::span<const LocalExample<T>>(local),
                                   std::span<const std::size_t>(val_idx), ws));
        } catch (const std::runtime_error& e) {
            report.meaningless = true;
            report.abort_reason = e.what();
            report.epochs_run = epoch;
            break;
        }
        report.val_loss.push_back(val);
        report.epochs_run = epoch;

        if (stopper.observe(epoch, val))
            for (std::size_t k = 0; k < model.params.size(); ++k)
                best_params[k] = model.params[k].value;

        if (stopper.should_stop(epoch)) {
            report.stopped_early = true;
            break;
        }
    }

    // Restore the best validation epoch's parameters (initialization when no
    // epoch completed).
    if (stopper.best_epoch() > 0)
        for (std::size_t k = 0; k < model.params.size(); ++k)
            model.params[k].value = best_params[k];
    report.best_epoch = stopper.best_epoch();
    report.best_val_loss = stopper.best_loss();
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(model), std::move(report)};
}

// --- report serialization -------------------------------------------------------------

// Deterministic artifact: no clocks, no host details (those live in the run
// manifest).
inline void write_train_report(const std::string& path, const TrainReport& report) {
    nlohmann::ordered_json j;
    j["format"] = "nodepred-train-report";
    j["version"] = 1;
    j["epochs_run"] = report.epochs_run;
    j["stopped_early"] = report.stopped_early;
    j["best_epoch"] = report.best_epoch;
    j["best_val_loss"] = report.best_val_loss;
    j["meaningless"] = report.meaningless;
    j["abort_reason"] = report.abort_reason;
    j["batch_size"] = report.batch_size_used;
    j["optimization_examples"] = report.optimization_examples;
    j["validation_examples"] = report.validation_examples;
    j["train_loss"] = report.train_loss;
    j["val_loss"] = report.val_loss;
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::invalid_argument("write failed: " + path);
}

inline void write_loss_curve_csv(const std::string& path, const TrainReport& report) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open for writing: " + path);
    out << "#nodepred-loss-curve 1\n";
    out << "epoch,train_loss,val_loss\n";
    char buf[64];
    for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
        out << (e + 1) << ",";
        int len = std::snprintf(buf, sizeof buf, "%.17g", report.train_loss[e]);
        out.write(buf, len);
        out << ",";
        if (e < report.val_loss.size()) {
            len = std::snprintf(buf, sizeof buf, "%.17g", report.val_loss[e]);
            out.write(buf, len);
        }
        out << "\n";
    }
    if (!out) throw std::invalid_argument("write failed: " + path);
}

}  // namespace nodepred
