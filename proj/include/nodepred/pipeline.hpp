#pragma once

// End-to-end run orchestration shared by the CLI and the acceptance suite:
// resolve inputs, derive per-stage seeds from one master seed, run
// train/eval/gradcheck, and write every artifact plus a run manifest.
//
// Determinism layout: artifacts that feed comparisons (checkpoint, reports,
// curves, examples, partitions) are pure functions of (inputs, seeds) and
// contain no clocks or host details; the manifest carries timing and
// timestamps and is therefore excluded from byte-identity checks.

#include <nodepred/eval.hpp>
#include <nodepred/examples.hpp>
#include <nodepred/gradcheck.hpp>
#include <nodepred/graph.hpp>
#include <nodepred/graph_io.hpp>
#include <nodepred/model.hpp>
#include <nodepred/synth.hpp>
#include <nodepred/train.hpp>

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nodepred {

// CLI exit codes (spec'd interface of every subcommand).
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitMeaningless = 3;
inline constexpr int kExitInconclusive = 4;

// --- features --------------------------------------------------------------------

inline constexpr int kDummyFeatureDim = 3;

// Seeded uniform [-1, 1] features, one independent row per node.
inline Mat<double> random_features(NodeId num_nodes, int dim, std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("random features: dim must be >= 1");
    Mat<double> f(static_cast<std::size_t>(num_nodes), static_cast<std::size_t>(dim));
    Rng rng(mix_seed(seed, 0x66656174ull));  // "feat"
    for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] = 2.0 * rng.uniform_real() - 1.0;
    return f;
}

// `spec` is the literal "dummy" (constant all-ones 3-vector per node),
// "random:<dim>" (seeded uniform noise, an identity-only ablation), or a
// feature file path.
inline Mat<double> resolve_features(const std::string& spec, NodeId num_nodes,
                                    std::uint64_t seed) {
    if (spec.empty())
        throw std::invalid_argument("features: empty spec (use 'dummy', 'random:<dim>', or a path)");
    if (spec == "dummy")
        return Mat<double>(static_cast<std::size_t>(num_nodes), kDummyFeatureDim, 1.0);
    if (spec.rfind("random:", 0) == 0) {
        int dim = 0;
        try {
            dim = std::stoi(spec.substr(7));
        } catch (const std::exception&) {
            throw std::invalid_argument("features: bad random spec (use random:<dim>): " + spec);
        }
        return random_features(num_nodes, dim, seed);
    }
    Mat<double> f = read_features(spec);
    if (static_cast<NodeId>(f.rows()) != num_nodes)
        throw std::invalid_argument(spec + ": feature rows (" + std::to_string(f.rows()) +
                                    ") != graph nodes (" + std::to_string(num_nodes) + ")");
    return f;
}

// --- manifests --------------------------------------------------------------------

struct ManifestInput {
    std::string role;
    std::string path;
    std::uint64_t digest = 0;
};

inline std::string iso8601_utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void write_manifest(const std::string& path, const std::string& command,
                           const nlohmann::ordered_json& params,
                           const nlohmann::ordered_json& seeds,
                           const std::vector<ManifestInput>& inputs,
                           const std::vector<std::string>& artifacts, double wall_seconds) {
    nlohmann::ordered_json j;
    j["format"] = "nodepred-manifest";
    j["version"] = 1;
    j["command"] = command;
    j["timestamp_utc"] = iso8601_utc_now();
    j["wall_time_seconds"] = wall_seconds;
    j["parameters"] = params;
    j["seeds"] = seeds;
    j["inputs"] = nlohmann::ordered_json::array();
    for (const auto& in : inputs) {
        nlohmann::ordered_json e;
        e["role"] = in.role;
        e["path"] = in.path;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(in.digest));
        e["fnv1a64"] = buf;
        j["inputs"].push_back(std::move(e));
    }
    j["artifacts"] = artifacts;
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::invalid_argument("write failed: " + path);
}

// --- train runs -------------------------------------------------------------------

struct TrainRunParams {
    std::string graph_path;
    std::string features = "dummy";    // "dummy" or file path
    std::string partition_path;        // empty -> split with test_fraction
    double test_fraction = 0.2;
    std::optional<std::size_t> negative_count;  // nullopt -> one per positive edge
    Purity train_purity;
    LayerKind layer_kind = LayerKind::sage;
    int num_layers = 5;
    int embed_dim = 128;
    bool normalize_after_relu = true;
    std::vector<int> mlp_hidden_dims;  // empty -> default
    TrainConfig train;                 // train.seed is derived from `seed` below
    std::string precision = "double";
    int threads = 1;
    std::uint64_t seed = 0;
    std::string out_dir;
};

struct TrainRunResult {
    int exit_code = kExitOk;
    TrainReport report;
    std::string checkpoint_path;
    std::string partition_path;
    std::string features_path;
    std::string examples_path;
    std::string report_path;
    std::string manifest_path;
};

namespace detail {

template <class T>
std::pair<Model<T>, TrainReport> train_run_impl(const InducedGraph& g_train,
                                                const ExampleSet& examples,
                                                const TrainRunParams& params) {
    GnnConfig config;
    config.layer_kind = params.layer_kind;
    config.num_layers = params.num_layers;
    config.embed_dim = params.embed_dim;
    config.normalize_after_relu = params.normalize_after_relu;
    config.mlp_hidden_dims = params.mlp_hidden_dims;
    config.input_dim = 0;  // resolved from the features by train()

    TrainConfig train_config = params.train;
    train_config.seed = mix_seed(params.seed, 0x747261696eull);  // "train"
    return train<T>(g_train, examples, train_config, config);
}

inline nlohmann::ordered_json purity_json(const Purity& p) {
    return {{"min_pure", p.min_pure}, {"max_spurious", p.max_spurious}};
}

}  // namespace detail

inline TrainRunResult run_train(const TrainRunParams& params) {
    if (params.precision != "double" && params.precision != "float")
        throw std::invalid_argument("precision must be 'double' or 'float'");
    if (params.out_dir.empty()) throw std::invalid_argument("train: missing output directory");
    const auto t_start = std::chrono::steady_clock::now();
    set_thread_count(params.threads);
    std::filesystem::create_directories(params.out_dir);
    const auto artifact = [&](const char* name) { return params.out_dir + "/" + name; };

    Graph g = read_edge_list(params.graph_path);
    g.set_features(resolve_features(params.features, g.num_nodes(), params.seed));

    const std::uint64_t split_seed = mix_seed(params.seed, 0x73706c6974ull);     // "split"
    const std::uint64_t neg_seed = mix_seed(params.seed, 0x6e6567ull);           // "neg"
    const std::uint64_t examples_seed = mix_seed(params.seed, 0x6578616d70ull);  // "examp"

    const Partition partition = params.partition_path.empty()
                                    ? split_nodes(g, params.test_fraction, split_seed)
                                    : read_partition(params.partition_path, g.num_nodes());

    TrainRunResult result;
    result.partition_path = artifact("partition.txt");
    write_partition(result.partition_path, partition);
    // Materialize the resolved features so a later eval can ingest exactly
    // what training saw (essential for the random:<dim> spec).
    result.features_path = artifact("features.csv");
    write_features(result.features_path, g.features());

    const InducedGraph g_train = induced_subgraph(g, partition.train_nodes());
    const NegativeGraph neg_train =
        generate_negative_graph(g, NegScope::train_only, partition.train_nodes(),
                                params.negative_count, neg_seed);
    const ExampleSet examples =
        generate_train_examples(g_train, neg_train, params.train_purity, examples_seed);
    result.examples_path = artifact("train_examples.txt");
    write_examples(result.examples_path, examples);

    result.checkpoint_path = artifact("checkpoint.txt");
    if (params.precision == "double") {
        auto [model, report] = detail::train_run_impl<double>(g_train, examples, params);
        write_checkpoint(result.checkpoint_path, model);
        result.report = std::move(report);
    } else {
        auto [model, report] = detail::train_run_impl<float>(g_train, examples, params);
        write_checkpoint(result.checkpoint_path, model);
        result.report = std::move(report);
    }

    result.report_path = artifact("train_report.json");
    write_train_report(result.report_path, result.report);
    write_loss_curve_csv(artifact("loss_curve.csv"), result.report);

    nlohmann::ordered_json p;
    p["graph"] = params.graph_path;
    p["features"] = params.features;
    p["partition"] =
        params.partition_path.empty() ? "(split)" : params.partition_path;
    p["test_fraction"] = params.test_fraction;
    if (params.negative_count)
        p["negative_count"] = *params.negative_count;
    else
        p["negative_count"] = "auto";
    p["train_purity"] = detail::purity_json(params.train_purity);
    p["gnn"] = layer_kind_name(params.layer_kind);
    p["num_layers"] = params.num_layers;
    p["embed_dim"] = params.embed_dim;
    p["normalize_after_relu"] = params.normalize_after_relu;
    p["mlp_hidden_dims"] = params.mlp_hidden_dims;
    p["max_epochs"] = params.train.max_epochs;
    p["patience"] = params.train.patience;
    p["validation_fraction"] = params.train.validation_fraction;
    p["batch_size"] = params.train.batch_size;
    p["learning_rate"] = params.train.learning_rate;
    p["precision"] = params.precision;
    p["threads"] = params.threads;

    nlohmann::ordered_json seeds;
    seeds["master"] = params.seed;
    seeds["split"] = split_seed;
    seeds["negative"] = neg_seed;
    seeds["examples"] = examples_seed;
    seeds["train"] = mix_seed(params.seed, 0x747261696eull);
    if (params.features.rfind("random:", 0) == 0)
        seeds["features"] = mix_seed(params.seed, 0x66656174ull);

    std::vector<ManifestInput> inputs{
        {"graph", params.graph_path, file_digest(params.graph_path)}};
    const bool features_from_file =
        params.features != "dummy" && params.features.rfind("random:", 0) != 0;
    if (features_from_file)
        inputs.push_back({"features", params.features, file_digest(params.features)});
    if (!params.partition_path.empty())
        inputs.push_back(
            {"partition", params.partition_path, file_digest(params.partition_path)});

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    result.manifest_path = artifact("manifest.json");
    write_manifest(result.manifest_path, "train", p, seeds, inputs,
                   {result.partition_path, result.features_path, result.examples_path,
                    result.checkpoint_path, result.report_path, artifact("loss_curve.csv")},
                   wall);

    result.exit_code = result.report.meaningless ? kExitMeaningless : kExitOk;
    return result;
}

// --- eval runs --------------------------------------------------------------------

struct EvalRunParams {
    std::string graph_path;
    std::string features = "dummy";
    std::string partition_path;  // required
    std::string checkpoint_path;
    std::optional<std::size_t> negative_count;  // whole-graph scope
    EvalConfig eval;                            // eval.seed is derived from `seed` below
    int threads = 1;
    std::uint64_t seed = 0;
    std::string out_dir;
};

struct EvalRunResult {
    int exit_code = kExitOk;
    EvalReport report;
    std::string report_path;
    std::string composition_path;
    std::string manifest_path;
};

inline EvalRunResult run_eval(const EvalRunParams& params) {
    if (params.out_dir.empty()) throw std::invalid_argument("eval: missing output directory");
    if (params.partition_path.empty())
        throw std::invalid_argument("eval: a partition file is required");
    const auto t_start = std::chrono::steady_clock::now();
    set_thread_count(params.threads);
    std::filesystem::create_directories(params.out_dir);
    const auto artifact = [&](const char* name) { return params.out_dir + "/" + name; };

    Graph g = read_edge_list(params.graph_path);
    g.set_features(resolve_features(params.features, g.num_nodes(), params.seed));
    const Partition partition = read_partition(params.partition_path, g.num_nodes());

    const std::uint64_t neg_seed = mix_seed(params.seed, 0x6e6567ull);  // "neg"
    std::vector<NodeId> all_nodes(static_cast<std::size_t>(g.num_nodes()));
    for (NodeId i = 0; i < g.num_nodes(); ++i) all_nodes[static_cast<std::size_t>(i)] = i;
    const NegativeGraph neg_whole = generate_negative_graph(
        g, NegScope::whole_graph, all_nodes, params.negative_count, neg_seed);

    EvalConfig eval_config = params.eval;
    eval_config.seed = mix_seed(params.seed, 0x6576616cull);  // "eval"

    const CheckpointInfo info = checkpoint_info(params.checkpoint_path);
    EvalRunResult result;
    if (info.precision == "double") {
        Model<double> model = load_checkpoint<double>(params.checkpoint_path);
        result.report = evaluate(model, g, neg_whole, partition, eval_config);
    } else {
        Model<float> model = load_checkpoint<float>(params.checkpoint_path);
        result.report = evaluate(model, g, neg_whole, partition, eval_config);
    }

    result.report_path = artifact("eval_report.json");
    write_eval_report(result.report_path, result.report, eval_config);
    result.composition_path = artifact("composition.csv");
    write_composition_csv(result.composition_path, result.report.composition);

    nlohmann::ordered_json p;
    p["graph"] = params.graph_path;
    p["features"] = params.features;
    p["partition"] = params.partition_path;
    p["checkpoint"] = params.checkpoint_path;
    if (params.negative_count)
        p["negative_count"] = *params.negative_count;
    else
        p["negative_count"] = "auto";
    p["test_purity"] = detail::purity_json(params.eval.test_purity);
    p["ks"] = params.eval.ks;
    p["num_test_runs"] = params.eval.num_test_runs;
    p["negative_pool_size"] = params.eval.negative_pool_size;
    p["checkpoint_precision"] = info.precision;
    p["threads"] = params.threads;

    nlohmann::ordered_json seeds;
    seeds["master"] = params.seed;
    seeds["negative"] = neg_seed;
    seeds["eval"] = eval_config.seed;

    const std::vector<ManifestInput> inputs{
        {"graph", params.graph_path, file_digest(params.graph_path)},
        {"partition", params.partition_path, file_digest(params.partition_path)},
        {"checkpoint", params.checkpoint_path, file_digest(params.checkpoint_path)}};

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    result.manifest_path = artifact("manifest.json");
    write_manifest(result.manifest_path, "eval", p, seeds, inputs,
                   {result.report_path, result.composition_path}, wall);

    result.exit_code = result.report.inconclusive ? kExitInconclusive : kExitOk;
    return result;
}

// --- gradient checks ----------------------------------------------------------------

struct GradcheckParams {
    NodeId nodes = 20;
    double edge_probability = 0.3;
    int input_dim = 8;
    LayerKind layer_kind = LayerKind::sage;
    int num_layers = 5;
    int embed_dim = 16;
    std::vector<int> mlp_hidden_dims;  // empty -> default
    bool normalize_after_relu = true;
    Purity purity{80.0, 10.0};
    double tolerance = 1e-4;
    std::size_t coords_per_param = 64;
    std::uint64_t seed = 1;
    bool self_test = false;  // corrupt one gradient array; the check must fail
};

// Builds a random graph + example batch, computes analytic gradients of the
// full model loss, and compares them against central finite differences.
inline GradCheckReport run_gradcheck(const GradcheckParams& params) {
    if (params.nodes < 4) throw std::invalid_argument("gradcheck: need at least 4 nodes");
    if (!(params.tolerance > 0.0)) throw std::invalid_argument("gradcheck: bad tolerance");

    Graph g = erdos_renyi(params.nodes, params.edge_probability,
                          mix_seed(params.seed, 0x6772617068ull));  // "graph"
    Mat<double> features(static_cast<std::size_t>(params.nodes),
                         static_cast<std::size_t>(params.input_dim));
    Rng feat_rng(mix_seed(params.seed, 0x66656174ull));  // "feat"
    for (std::size_t i = 0; i < features.size(); ++i)
        features.data()[i] = 2.0 * feat_rng.uniform_real() - 1.0;
    g.set_features(std::move(features));

    std::vector<NodeId> all_nodes(static_cast<std::size_t>(g.num_nodes()));
    for (NodeId i = 0; i < g.num_nodes(); ++i) all_nodes[static_cast<std::size_t>(i)] = i;
    const InducedGraph whole = induced_subgraph(g, all_nodes);
    const NegativeGraph neg = generate_negative_graph(
        g, NegScope::train_only, all_nodes, std::nullopt, mix_seed(params.seed, 0x6e6567ull));
    const ExampleSet set =
        generate_train_examples(whole, neg, params.purity, mix_seed(params.seed, 0x6578ull));

    GnnConfig config;
    config.layer_kind = params.layer_kind;
    config.num_layers = params.num_layers;
    config.embed_dim = params.embed_dim;
    config.input_dim = params.input_dim;
    config.normalize_after_relu = params.normalize_after_relu;
    config.mlp_hidden_dims = params.mlp_hidden_dims;

    Model<double> model = init_model<double>(config, mix_seed(params.seed, 0x696e6974ull));
    const auto plan = build_plan<double>(g, config.layer_kind);
    const Mat<double> feat = cast_features<double>(g.features());
    const auto local = localize_examples<double>(set, whole);
    std::vector<std::size_t> batch(local.size());
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;

    Workspace<double> ws;
    const auto span_local = std::span<const LocalExample<double>>(local);
    const auto span_batch = std::span<const std::size_t>(batch);

    model.zero_grads();
    model_loss_forward(model, plan, feat, span_local, span_batch, ws);
    model_loss_backward(model, plan, span_local, span_batch, ws);
    if (params.self_test) {
        // Corrupt the gradient of one whole parameter array; every sampled
        // coordinate of it must now miss the numeric derivative.
        auto& grad = model.params[0].grad;
        for (std::size_t i = 0; i < grad.size(); ++i)
            grad.data()[i] = 2.0 * grad.data()[i] + 0.01 * (1.0 + std::abs(grad.data()[i]));
    }

    auto loss_fn = [&]() -> LossEval {
        const double loss =
            model_loss_forward(model, plan, feat, span_local, span_batch, ws);
        return {loss, branch_signature(model, ws)};
    };
    return finite_diff_check(model.param_ptrs(), loss_fn, params.tolerance,
                             mix_seed(params.seed, 0x636865636bull), params.coords_per_param);
}

}  // namespace nodepred
