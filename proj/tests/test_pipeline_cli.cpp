// End-to-end runs through the library pipeline (feature resolution, train and
// eval runs with their artifact sets, gradient-check driver) plus subprocess
// tests of the command-line tool's interface contract.

#include <nodepred/pipeline.hpp>
#include <nodepred/synth.hpp>

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>

using namespace nodepred;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string output;
};

// Runs the CLI with the given argument string; captures stdout+stderr.
CmdResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    const std::string cmd = env_prefix + std::string(NODEPRED_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("popen failed");
    CmdResult result;
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) result.output.append(buf, n);
    const int status = ::pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

bool exists(const std::string& path) { return std::filesystem::exists(path); }

// Writes a small BA benchmark graph and returns its path.
std::string write_ba_graph(const fixtures::TempDir& dir, NodeId n, int m, std::uint64_t seed) {
    const Graph g = barabasi_albert(n, m, seed);
    const std::string path = dir.file("graph.txt");
    write_edge_list(path, g);
    return path;
}

TrainRunParams small_train_params(const std::string& graph, const std::string& out) {
    TrainRunParams p;
    p.graph_path = graph;
    p.features = "random:6";
    p.train_purity = Purity{80.0, 10.0};
    p.num_layers = 2;
    p.embed_dim = 8;
    p.mlp_hidden_dims = {8};
    p.train.max_epochs = 6;
    p.train.patience = 2;
    p.seed = 5;
    p.out_dir = out;
    return p;
}

}  // namespace

TEST(ResolveFeatures, DummyRandomAndFileSpecs) {
    const Mat<double> dummy = resolve_features("dummy", 5, 1);
    ASSERT_EQ(dummy.rows(), 5u);
    ASSERT_EQ(dummy.cols(), static_cast<std::size_t>(kDummyFeatureDim));
    for (std::size_t i = 0; i < dummy.size(); ++i) ASSERT_DOUBLE_EQ(dummy.data()[i], 1.0);

    const Mat<double> r1 = resolve_features("random:4", 6, 9);
    const Mat<double> r2 = resolve_features("random:4", 6, 9);
    const Mat<double> r3 = resolve_features("random:4", 6, 10);
    ASSERT_EQ(r1.rows(), 6u);
    ASSERT_EQ(r1.cols(), 4u);
    EXPECT_TRUE(r1 == r2);
    EXPECT_FALSE(r1 == r3);
    for (std::size_t i = 0; i < r1.size(); ++i) {
        ASSERT_GE(r1.data()[i], -1.0);
        ASSERT_LE(r1.data()[i], 1.0);
    }

    fixtures::TempDir dir("feat");
    write_features(dir.file("f.csv"), r1);
    const Mat<double> from_file = resolve_features(dir.file("f.csv"), 6, 999);
    EXPECT_TRUE(from_file == r1);  // seed is irrelevant for file specs
    EXPECT_THROW(resolve_features(dir.file("f.csv"), 7, 1), std::invalid_argument);
    EXPECT_THROW(resolve_features("", 5, 1), std::invalid_argument);
    EXPECT_THROW(resolve_features("random:zero", 5, 1), std::invalid_argument);
    EXPECT_THROW(resolve_features("random:0", 5, 1), std::invalid_argument);
}

TEST(RunGradcheck, PassesOnHealthyGradientsAndFailsOnCorruptedOnes) {
    GradcheckParams p;
    p.nodes = 14;
    p.num_layers = 2;
    p.embed_dim = 6;
    p.input_dim = 4;
    p.mlp_hidden_dims = {6};
    p.coords_per_param = 24;
    p.seed = 3;
    const GradCheckReport healthy = run_gradcheck(p);
    EXPECT_TRUE(healthy.passed()) << healthy.max_rel_error << " @ " << healthy.worst_param;
    EXPECT_GT(healthy.coords_checked, 0u);

    p.self_test = true;
    const GradCheckReport corrupted = run_gradcheck(p);
    EXPECT_FALSE(corrupted.passed());
    EXPECT_GT(corrupted.max_rel_error, corrupted.tolerance);

    p.nodes = 2;
    EXPECT_THROW(run_gradcheck(p), std::invalid_argument);
}

TEST(RunTrain, ProducesFullArtifactSet) {
    fixtures::TempDir dir("runtrain");
    const std::string graph = write_ba_graph(dir, 80, 3, 7);
    const TrainRunParams params = small_train_params(graph, dir.file("out"));
    const TrainRunResult result = run_train(params);

    EXPECT_EQ(result.exit_code, kExitOk);
    for (const std::string& path :
         {result.partition_path, result.features_path, result.examples_path,
          result.checkpoint_path, result.report_path, result.manifest_path})
        EXPECT_TRUE(exists(path)) << path;
    EXPECT_TRUE(exists(dir.file("out/loss_curve.csv")));

    // The partition artifact re-reads cleanly and matches the graph size.
    const Partition part = read_partition(result.partition_path, 80);
    EXPECT_GT(part.test_nodes().size(), 0u);
    // Materialized features match the requested width.
    const Mat<double> feats = read_features(result.features_path);
    EXPECT_EQ(feats.rows(), 80u);
    EXPECT_EQ(feats.cols(), 6u);
    // Checkpoint declares the precision used.
    EXPECT_EQ(checkpoint_info(result.checkpoint_path).precision, "double");

    // Manifest: valid JSON with the documented identity fields.
    const auto manifest = nlohmann::json::parse(fixtures::read_file(result.manifest_path));
    EXPECT_EQ(manifest.at("format"), "nodepred-manifest");
    EXPECT_EQ(manifest.at("command"), "train");
    EXPECT_TRUE(manifest.contains("timestamp_utc"));
    EXPECT_TRUE(manifest.contains("wall_time_seconds"));
    EXPECT_EQ(manifest.at("seeds").at("master"), 5);
    ASSERT_GE(manifest.at("inputs").size(), 1u);
    EXPECT_EQ(manifest.at("inputs")[0].at("role"), "graph");
    EXPECT_EQ(manifest.at("inputs")[0].at("fnv1a64").get<std::string>().size(), 16u);
    EXPECT_EQ(manifest.at("artifacts").size(), 6u);
}

TEST(RunEval, ConsumesTrainArtifacts) {
    fixtures::TempDir dir("runeval");
    const std::string graph = write_ba_graph(dir, 80, 3, 7);
    const TrainRunResult trained = run_train(small_train_params(graph, dir.file("out")));
    ASSERT_EQ(trained.exit_code, kExitOk);

    EvalRunParams ep;
    ep.graph_path = graph;
    ep.features = trained.features_path;  // exactly what training saw
    ep.partition_path = trained.partition_path;
    ep.checkpoint_path = trained.checkpoint_path;
    ep.eval.ks = {1, 2, 5};
    ep.eval.num_test_runs = 3;
    ep.eval.test_purity = Purity{80.0, 10.0};
    ep.seed = 6;
    ep.out_dir = dir.file("eval");
    const EvalRunResult result = run_eval(ep);

    ASSERT_TRUE(result.exit_code == kExitOk || result.exit_code == kExitInconclusive);
    EXPECT_TRUE(exists(result.report_path));
    EXPECT_TRUE(exists(result.composition_path));
    EXPECT_TRUE(exists(result.manifest_path));
    EXPECT_EQ(result.report.runs.size(), 3u);

    const auto manifest = nlohmann::json::parse(fixtures::read_file(result.manifest_path));
    EXPECT_EQ(manifest.at("command"), "eval");
    EXPECT_EQ(manifest.at("inputs").size(), 3u);  // graph, partition, checkpoint

    // Missing partition is a hard error: out-of-graph evaluation must score
    // the exact train/test boundary used at training time.
    EvalRunParams missing = ep;
    missing.partition_path.clear();
    EXPECT_THROW(run_eval(missing), std::invalid_argument);
}

TEST(RunEval, ZeroedCheckpointIsInconclusive) {
    fixtures::TempDir dir("inconclusive");
    const Graph g = fixtures::tiny_graph();
    const std::string graph = dir.file("tiny.txt");
    write_edge_list(graph, g);
    write_partition(dir.file("part.txt"), fixtures::tiny_partition());

    GnnConfig config;
    config.num_layers = 2;
    config.embed_dim = 4;
    config.input_dim = kDummyFeatureDim;
    config.mlp_hidden_dims = {4};
    Model<double> model = init_model<double>(config, 1);
    for (auto& p : model.params) p.value.fill(0.0);
    write_checkpoint(dir.file("zero.ckpt"), model);

    EvalRunParams ep;
    ep.graph_path = graph;
    ep.features = "dummy";
    ep.partition_path = dir.file("part.txt");
    ep.checkpoint_path = dir.file("zero.ckpt");
    ep.eval.ks = {1};
    ep.eval.num_test_runs = 2;
    ep.seed = 9;
    ep.out_dir = dir.file("eval");
    const EvalRunResult result = run_eval(ep);
    EXPECT_EQ(result.exit_code, kExitInconclusive);
    EXPECT_TRUE(result.report.inconclusive);
}

TEST(RunTrain, RepeatedRunsAreByteIdenticalExceptManifest) {
    // Two sequential identical train+eval runs: every artifact byte-equal
    // except the manifests (volatile timing fields live only there).
    fixtures::TempDir dir("bytes");
    const std::string graph = write_ba_graph(dir, 60, 3, 11);

    auto one_round = [&](const std::string& tag) {
        const TrainRunResult t = run_train(small_train_params(graph, dir.file(tag + "/train")));
        EvalRunParams ep;
        ep.graph_path = graph;
        ep.features = t.features_path;
        ep.partition_path = t.partition_path;
        ep.checkpoint_path = t.checkpoint_path;
        ep.eval.ks = {1, 5};
        ep.eval.num_test_runs = 2;
        ep.eval.test_purity = Purity{80.0, 10.0};
        ep.seed = 12;
        ep.out_dir = dir.file(tag + "/eval");
        run_eval(ep);
    };
    one_round("a");
    one_round("b");

    for (const char* rel :
         {"train/partition.txt", "train/features.csv", "train/train_examples.txt",
          "train/checkpoint.txt", "train/train_report.json", "train/loss_curve.csv",
          "eval/eval_report.json", "eval/composition.csv"}) {
        const std::string a = fixtures::read_file(dir.file(std::string("a/") + rel));
        const std::string b = fixtures::read_file(dir.file(std::string("b/") + rel));
        EXPECT_EQ(a, b) << rel;
        EXPECT_FALSE(a.empty()) << rel;
    }
}

TEST(RunTrain, FloatPrecisionCheckpointRoundTrips) {
    fixtures::TempDir dir("floatrun");
    const std::string graph = write_ba_graph(dir, 60, 3, 13);
    TrainRunParams params = small_train_params(graph, dir.file("out"));
    params.precision = "float";
    const TrainRunResult result = run_train(params);
    EXPECT_EQ(checkpoint_info(result.checkpoint_path).precision, "float");

    EvalRunParams ep;
    ep.graph_path = graph;
    ep.features = result.features_path;
    ep.partition_path = result.partition_path;
    ep.checkpoint_path = result.checkpoint_path;
    ep.eval.ks = {1};
    ep.eval.num_test_runs = 2;
    ep.seed = 3;
    ep.out_dir = dir.file("eval");
    const EvalRunResult ev = run_eval(ep);  // float branch of the dispatch
    EXPECT_TRUE(ev.exit_code == kExitOk || ev.exit_code == kExitInconclusive);

    TrainRunParams bad = params;
    bad.precision = "half";
    EXPECT_THROW(run_train(bad), std::invalid_argument);
}

// --- command-line interface -------------------------------------------------------

TEST(Cli, HelpAndUsageErrors) {
    EXPECT_EQ(run_cli("--help").exit_code, 0);
    EXPECT_EQ(run_cli("train --help").exit_code, 0);

    EXPECT_EQ(run_cli("").exit_code, kExitUsage);             // subcommand required
    EXPECT_EQ(run_cli("frobnicate").exit_code, kExitUsage);   // unknown subcommand
    EXPECT_EQ(run_cli("synth --family ba --nodes 50").exit_code, kExitUsage);  // missing --out
    EXPECT_EQ(run_cli("train --graph /nonexistent.txt").exit_code, kExitUsage);  // missing --out
    const CmdResult bad_purity = run_cli("gradcheck --purity banana");
    EXPECT_EQ(bad_purity.exit_code, kExitUsage);
}

TEST(Cli, SynthAndSplitRoundTrip) {
    fixtures::TempDir dir("clisynth");
    const CmdResult synth = run_cli("synth --family ba --nodes 70 --m 3 --seed 4 --out " +
                                    dir.file("g.txt"));
    ASSERT_EQ(synth.exit_code, 0) << synth.output;
    ASSERT_TRUE(exists(dir.file("g.txt")));
    ASSERT_TRUE(exists(dir.file("g.txt.meta.json")));
    const Graph g = read_edge_list(dir.file("g.txt"));
    EXPECT_EQ(g.num_nodes(), 70);
    EXPECT_EQ(g.num_edges(), (70 - 3) * 3u);
    const auto meta = nlohmann::json::parse(fixtures::read_file(dir.file("g.txt.meta.json")));
    EXPECT_EQ(meta.at("family"), "ba");
    EXPECT_EQ(meta.at("realized").at("nodes"), 70);

    const CmdResult split = run_cli("split --graph " + dir.file("g.txt") +
                                    " --test-fraction 0.25 --seed 2 --out " +
                                    dir.file("part.txt"));
    ASSERT_EQ(split.exit_code, 0) << split.output;
    const Partition part = read_partition(dir.file("part.txt"), 70);
    EXPECT_EQ(part.test_nodes().size(), 18u);  // round(70 * 0.25)
}

TEST(Cli, TrainEvalGradcheckHappyPath) {
    fixtures::TempDir dir("clitrain");
    ASSERT_EQ(run_cli("synth --family ba --nodes 90 --m 3 --seed 8 --out " + dir.file("g.txt"))
                  .exit_code,
              0);

    const CmdResult train = run_cli(
        "train --graph " + dir.file("g.txt") +
        " --features random:6 --train-purity 80,10 --layers 2 --dim 8 --mlp 8 --epochs 6"
        " --patience 2 --seed 5 --out " +
        dir.file("train"));
    ASSERT_EQ(train.exit_code, 0) << train.output;
    ASSERT_TRUE(exists(dir.file("train/checkpoint.txt")));

    const CmdResult eval = run_cli(
        "eval --graph " + dir.file("g.txt") + " --features " + dir.file("train/features.csv") +
        " --partition " + dir.file("train/partition.txt") + " --checkpoint " +
        dir.file("train/checkpoint.txt") +
        " --test-purity 80,10 --ks 1,2,5 --runs 2 --seed 6 --out " + dir.file("eval"));
    ASSERT_TRUE(eval.exit_code == kExitOk || eval.exit_code == kExitInconclusive)
        << eval.output;
    EXPECT_TRUE(exists(dir.file("eval/eval_report.json")));
    EXPECT_TRUE(exists(dir.file("eval/composition.csv")));

    const CmdResult gc = run_cli(
        "gradcheck --nodes 14 --layers 2 --dim 6 --input-dim 4 --mlp 6 --coords 16 --seed 3");
    EXPECT_EQ(gc.exit_code, 0) << gc.output;
    // Self-test mode passes exactly when the corrupted gradients are caught.
    const CmdResult st = run_cli(
        "gradcheck --nodes 14 --layers 2 --dim 6 --input-dim 4 --mlp 6 --coords 16 --seed 3"
        " --self-test");
    EXPECT_EQ(st.exit_code, 0) << st.output;
}

TEST(Cli, OutputDirectoryEnvironmentOverride) {
    fixtures::TempDir dir("clienv");
    ASSERT_EQ(run_cli("synth --family ba --nodes 60 --m 2 --seed 3 --out " + dir.file("g.txt"))
                  .exit_code,
              0);
    const CmdResult train = run_cli(
        "train --graph " + dir.file("g.txt") +
            " --features random:4 --layers 1 --dim 6 --mlp 6 --epochs 4 --patience 2 --seed 2",
        "NODEPRED_OUTDIR=" + dir.file("envout") + " ");
    ASSERT_EQ(train.exit_code, 0) << train.output;
    EXPECT_TRUE(exists(dir.file("envout/checkpoint.txt")));
}

TEST(Cli, SweepWritesIndexAndCells) {
    fixtures::TempDir dir("clisweep");
    ASSERT_EQ(run_cli("synth --family ba --nodes 60 --m 2 --seed 3 --out " + dir.file("g.txt"))
                  .exit_code,
              0);
    const CmdResult sweep = run_cli(
        "sweep --graph " + dir.file("g.txt") +
        " --features random:4 --layers 1 --dim 6 --mlp 6 --epochs 4 --patience 2"
        " --seeds 1,2 --lrs 0.01 --gnns sage --train-purities 80,10 --out " +
        dir.file("sweep"));
    ASSERT_EQ(sweep.exit_code, 0) << sweep.output;
    EXPECT_TRUE(exists(dir.file("sweep/sweep_index.json")));
    EXPECT_TRUE(exists(dir.file("sweep/cell_000/checkpoint.txt")));
    EXPECT_TRUE(exists(dir.file("sweep/cell_001/checkpoint.txt")));
    const auto index = nlohmann::json::parse(fixtures::read_file(dir.file("sweep/sweep_index.json")));
    EXPECT_EQ(index.at("cells").size(), 2u);
}
