#pragma once

// Test-time evaluation: accuracy at a 0.5 threshold, rank-based Hits@k and
// MRR of positive examples against a shared pool of negative-example scores,
// repeated over several freshly generated test example sets, plus a
// composition breakdown (how many members of each test example are train vs
// test nodes, bucketed by 5).

#include <nodepred/examples.hpp>
#include <nodepred/graph.hpp>
#include <nodepred/model.hpp>
#include <nodepred/train.hpp>

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace nodepred {

struct EvalConfig {
    std::vector<int> ks{1, 2, 3, 5, 10, 20, 30, 50};
    int num_test_runs = 5;
    // 0 means "every negative test example of the run" (about one per test
    // node); smaller values subsample the pool, larger ones clamp.
    std::size_t negative_pool_size = 0;
    Purity test_purity;
    std::uint64_t seed = 0;

    void validate() const {
        if (ks.empty()) throw std::invalid_argument("EvalConfig: ks must be non-empty");
        for (std::size_t i = 0; i < ks.size(); ++i) {
            if (ks[i] < 1) throw std::invalid_argument("EvalConfig: ks must be positive");
            if (i > 0 && ks[i] <= ks[i - 1])
                throw std::invalid_argument("EvalConfig: ks must be strictly ascending");
        }
        if (num_test_runs < 1)
            throw std::invalid_argument("EvalConfig: num_test_runs must be >= 1");
        test_purity.validate();
    }
};

// --- point metrics ---------------------------------------------------------------

// Percentage of thresholded predictions matching labels; prediction >=
// threshold classifies as positive.
template <class T>
double accuracy(std::span<const T> predictions, std::span<const T> labels,
                double threshold = 0.5) {
    if (predictions.empty() || predictions.size() != labels.size())
        throw std::invalid_argument("accuracy: empty or mismatched inputs");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool cls = static_cast<double>(predictions[i]) >= threshold;
        if (cls == (labels[i] >= T(0.5))) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(predictions.size());
}

// 1 + number of negative scores >= the positive score (ties count against
// the positive).
template <class T>
std::size_t rank_positive(T pos_score, std::span<const T> neg_scores) {
    if (neg_scores.empty()) throw std::invalid_argument("rank_positive: empty negative pool");
    std::size_t rank = 1;
    for (const T s : neg_scores)
        if (s >= pos_score) ++rank;
    return rank;
}

// hits[k] = fraction of positives ranking within the top k of the shared
// negative pool; mrr = mean reciprocal rank.
template <class T>
std::pair<std::map<int, double>, double> hits_and_mrr(std::span<const T> pos_scores,
                                                      std::span<const T> neg_scores,
                                                      const std::vector<int>& ks) {
    if (pos_scores.empty() || neg_scores.empty())
        throw std::invalid_argument("hits_and_mrr: empty inputs");
    std::map<int, double> hits;
    for (int k : ks) hits[k] = 0.0;
    double mrr = 0.0;
    for (const T p : pos_scores) {
        const std::size_t rank = rank_positive(p, neg_scores);
        for (int k : ks)
            if (rank <= static_cast<std::size_t>(k)) hits[k] += 1.0;
        mrr += 1.0 / static_cast<double>(rank);
    }
    const auto n = static_cast<double>(pos_scores.size());
    for (auto& [k, v] : hits) v /= n;
    return {std::move(hits), mrr / n};
}

// --- composition table --------------------------------------------------------------

// Buckets of width 5 with a terminal open bucket: 0-4, 5-9, ..., 45-49, 50+.
struct CompositionTable {
    static constexpr int kBucketWidth = 5;
    static constexpr int kNumBuckets = 11;

    struct Cell {
        std::size_t correct = 0;
        std::size_t total = 0;
    };

    // rows: train-member bucket; columns: test-member bucket
    std::array<std::array<Cell, kNumBuckets>, kNumBuckets> cells{};

    static int bucket_of(std::size_t count) {
        const auto b = count / kBucketWidth;
        return b >= kNumBuckets ? kNumBuckets - 1 : static_cast<int>(b);
    }

    static std::string bucket_label(int bucket) {
        if (bucket >= kNumBuckets - 1) return std::to_string((kNumBuckets - 1) * kBucketWidth) + "+";
        return std::to_string(bucket * kBucketWidth) + "-" +
               std::to_string(bucket * kBucketWidth + kBucketWidth - 1);
    }

    void add(std::size_t train_members, std::size_t test_members, bool correct) {
        auto& cell = cells[static_cast<std::size_t>(bucket_of(train_members))]
                          [static_cast<std::size_t>(bucket_of(test_members))];
        cell.total += 1;
        if (correct) cell.correct += 1;
    }

    std::size_t total() const {
        std::size_t t = 0;
        for (const auto& row : cells)
            for (const auto& c : row) t += c.total;
        return t;
    }

    std::size_t total_correct() const {
        std::size_t t = 0;
        for (const auto& row : cells)
            for (const auto& c : row) t += c.correct;
        return t;
    }
};

// --- evaluation driver ----------------------------------------------------------------

struct RunMetrics {
    double accuracy = 0.0;  // percent
    std::map<int, double> hits;
    double mrr = 0.0;
    bool meaningless = false;
    std::size_t num_examples = 0;
    std::size_t num_positive = 0;
    std::size_t num_negative = 0;
    std::size_t pool_size = 0;
    std::size_t skipped_positive = 0;
    std::size_t skipped_negative = 0;
    std::uint64_t example_seed = 0;
};

struct EvalReport {
    std::vector<RunMetrics> runs;
    // Aggregates: arithmetic mean over non-meaningless runs.
    double accuracy = 0.0;
    std::map<int, double> hits;
    double mrr = 0.0;
    int meaningless_runs_excluded = 0;
    bool inconclusive = false;  // every run was meaningless
    CompositionTable composition;  // accumulated over non-meaningless runs
};

// Scores frozen model parameters over num_test_runs freshly generated test
// example sets.  Node embeddings are computed once (the model and graph are
// fixed); each run regenerates examples with its own seed.
template <class T>
EvalReport evaluate(Model<T>& model, const Graph& g, const NegativeGraph& neg_whole,
                    const Partition& partition, const EvalConfig& config) {
    config.validate();
    if (!g.has_features()) throw std::invalid_argument("evaluate: graph carries no features");
    if (static_cast<int>(g.features().cols()) != model.config.input_dim)
        throw std::invalid_argument(
            "evaluate: config mismatch - graph feature dim != model input_dim");
    if (partition.num_nodes() != g.num_nodes())
        throw std::invalid_argument("evaluate: partition size != graph size");

    const Mat<T> features = cast_features<T>(g.features());
    const auto plan = build_plan<T>(g, model.config.layer_kind);
    GnnTrace<T> trace;
    const Mat<T>& emb = gnn_forward(plan, features, model, trace);

    EvalReport report;
    MlpTrace<T> mlp_trace;

    for (int run = 0; run < config.num_test_runs; ++run) {
        const std::uint64_t run_seed =
            mix_seed(config.seed, 0x72756eull, static_cast<std::uint64_t>(run));  // "run"
        const ExampleSet set =
            generate_test_examples(g, neg_whole, partition, config.test_purity, run_seed);

        Mat<T> batch(set.examples.size(), 2 * static_cast<std::size_t>(model.config.embed_dim));
        std::vector<T> labels(set.examples.size());
        for (std::size_t i = 0; i < set.examples.size(); ++i) {
            const auto& ex = set.examples[i];
            embed_example(emb, std::span<const NodeId>(ex.members), ex.target, batch.row(i));
            labels[i] = static_cast<T>(ex.label);
        }
        const auto& probs = mlp_forward(model, batch, mlp_trace);

        RunMetrics metrics;
        metrics.example_seed = run_seed;
        metrics.num_examples = set.examples.size();
        metrics.skipped_positive = set.skipped_positive;
        metrics.skipped_negative = set.skipped_negative;
        metrics.accuracy = accuracy<T>(probs, labels);
        metrics.meaningless = detect_meaningless<T>(probs, labels);

        std::vector<T> pos_scores, neg_scores;
        for (std::size_t i = 0; i < probs.size(); ++i)
            (set.examples[i].label == 1 ? pos_scores : neg_scores).push_back(probs[i]);
        metrics.num_positive = pos_scores.size();
        metrics.num_negative = neg_scores.size();

        std::vector<T> pool = neg_scores;
        if (config.negative_pool_size > 0 && config.negative_pool_size < pool.size()) {
            Rng pool_rng(mix_seed(run_seed, 0x706f6f6cull));  // "pool"
            pool = pool_rng.sample_without_replacement(std::span<const T>(neg_scores),
                                                       config.negative_pool_size);
        }
        metrics.pool_size = pool.size();

        if (!pos_scores.empty() && !pool.empty()) {
            auto [hits, mrr] =
                hits_and_mrr<T>(pos_scores, std::span<const T>(pool), config.ks);
            metrics.hits = std::move(hits);
            metrics.mrr = mrr;
        } else {
            for (int k : config.ks) metrics.hits[k] = 0.0;
        }

        if (!metrics.meaningless)
            for (std::size_t i = 0; i < probs.size(); ++i) {
                const auto& ex = set.examples[i];
                const auto [train_members, test_members] = example_composition(ex, partition);
                const bool correct = (probs[i] >= T(0.5)) == (ex.label == 1);
                report.composition.add(train_members, test_members, correct);
            }

        report.runs.push_back(std::move(metrics));
    }

    int used = 0;
    for (int k : config.ks) report.hits[k] = 0.0;
    for (const auto& run : report.runs) {
        if (run.meaningless) {
            ++report.meaningless_runs_excluded;
            continue;
        }
        ++used;
        report.accuracy += run.accuracy;
        report.mrr += run.mrr;
        for (const auto& [k, v] : run.hits) report.hits[k] += v;
    }
    if (used == 0) {
        report.inconclusive = true;
        report.accuracy = 0.0;
        report.mrr = 0.0;
    } else {
        report.accuracy /= used;
        report.mrr /= used;
        for (auto& [k, v] : report.hits) v /= used;
    }
    return report;
}

// --- report serialization ---------------------------------------------------------------

// Deterministic artifact: no clocks (timing lives in the run manifest).
inline void write_eval_report(const std::string& path, const EvalReport& report,
                              const EvalConfig& config) {
    nlohmann::ordered_json j;
    j["format"] = "nodepred-eval-report";
    j["version"] = 1;
    j["test_purity"] = {{"min_pure", config.test_purity.min_pure},
                        {"max_spurious", config.test_purity.max_spurious}};
    j["ks"] = config.ks;
    j["num_test_runs"] = config.num_test_runs;
    j["negative_pool_size"] = config.negative_pool_size;
    j["seed"] = config.seed;
    j["inconclusive"] = report.inconclusive;
    j["meaningless_runs_excluded"] = report.meaningless_runs_excluded;
    j["accuracy"] = report.accuracy;
    nlohmann::ordered_json hits;
    for (const auto& [k, v] : report.hits) hits[std::to_string(k)] = v;
    j["hits_at_k"] = hits;
    j["mrr"] = report.mrr;

    j["runs"] = nlohmann::ordered_json::array();
    for (const auto& run : report.runs) {
        nlohmann::ordered_json r;
        r["accuracy"] = run.accuracy;
        nlohmann::ordered_json rh;
        for (const auto& [k, v] : run.hits) rh[std::to_string(k)] = v;
        r["hits_at_k"] = rh;
        r["mrr"] = run.mrr;
        r["meaningless"] = run.meaningless;
        r["num_examples"] = run.num_examples;
        r["num_positive"] = run.num_positive;
        r["num_negative"] = run.num_negative;
        r["pool_size"] = run.pool_size;
        r["skipped_positive"] = run.skipped_positive;
        r["skipped_negative"] = run.skipped_negative;
        r["example_seed"] = run.example_seed;
        j["runs"].push_back(std::move(r));
    }

    j["composition_total"] = report.composition.total();
    j["composition_correct"] = report.composition.total_correct();
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::invalid_argument("write failed: " + path);
}

// Long-form CSV: one row per (train bucket, test bucket) cell.
inline void write_composition_csv(const std::string& path, const CompositionTable& table) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open for writing: " + path);
    out << "#nodepred-composition 1\n";
    out << "train_bucket,test_bucket,correct,total\n";
    for (int tr = 0; tr < CompositionTable::kNumBuckets; ++tr)
        for (int te = 0; te < CompositionTable::kNumBuckets; ++te) {
            const auto& cell =
                table.cells[static_cast<std::size_t>(tr)][static_cast<std::size_t>(te)];
            out << CompositionTable::bucket_label(tr) << "," << CompositionTable::bucket_label(te)
                << "," << cell.correct << "," << cell.total << "\n";
        }
    if (!out) throw std::invalid_argument("write failed: " + path);
}

}  // namespace nodepred
