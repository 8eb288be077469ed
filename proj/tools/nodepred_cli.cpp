// nodepred — train and evaluate neighborhood-based link predictors for
// out-of-graph ("new") nodes on synthetic and file-based graphs.
//
// Subcommands: synth, split, train, eval, gradcheck, sweep.
// Exit codes: 0 success, 2 invalid arguments, 3 meaningless training run,
// 4 inconclusive evaluation, 1 any other failure.

#include <nodepred/nodepred.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace nodepred;

// "min,max" -> Purity{min_pure, max_spurious}
Purity parse_purity(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos)
        throw CLI::ValidationError("purity", "expected 'minPure,maxSpurious' (e.g. 80,10): " + text);
    Purity p;
    try {
        p.min_pure = std::stod(text.substr(0, comma));
        p.max_spurious = std::stod(text.substr(comma + 1));
    } catch (const std::exception&) {
        throw CLI::ValidationError("purity", "non-numeric purity value: " + text);
    }
    p.validate();
    return p;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw CLI::ValidationError(what, "non-integer list entry: " + item);
        }
    }
    if (out.empty()) throw CLI::ValidationError(what, "empty list");
    return out;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw CLI::ValidationError(what, "non-numeric list entry: " + item);
        }
    }
    if (out.empty()) throw CLI::ValidationError(what, "empty list");
    return out;
}

std::vector<std::string> split_on(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

LayerKind parse_layer_kind(const std::string& name) {
    if (name == "gcn") return LayerKind::gcn;
    if (name == "sage") return LayerKind::sage;
    throw CLI::ValidationError("gnn", "unknown gnn kind (use gcn or sage): " + name);
}

// --- synth ------------------------------------------------------------------------

struct SynthArgs {
    std::string family;
    NodeId nodes = 0;
    int m = 4;
    double p = -1.0;
    std::int64_t edges = -1;  // er convenience: derive p from a target edge count
    std::string base;         // ego / top-degree / sample+ba input graph
    NodeId test_count = 0;
    double band_lower = 2.0 / 3.0;
    double band_upper = 3.0 / 2.0;
    int max_attempts = 100;
    std::uint64_t seed = 0;
    std::string out;
    std::string partition_out;  // sample+ba only; default <out>.partition
};

int cmd_synth(const SynthArgs& a) {
    nlohmann::ordered_json meta;
    meta["format"] = "nodepred-synth-meta";
    meta["version"] = 1;
    meta["family"] = a.family;
    meta["seed"] = a.seed;

    std::optional<Graph> g;
    if (a.family == "ba") {
        if (a.nodes < 2) throw std::invalid_argument("synth ba: --nodes required (>= 2)");
        g = barabasi_albert(a.nodes, a.m, a.seed);
        meta["m"] = a.m;
    } else if (a.family == "er") {
        if (a.nodes < 1) throw std::invalid_argument("synth er: --nodes required");
        double p = a.p;
        if (a.edges >= 0) {
            if (a.p >= 0.0)
                throw std::invalid_argument("synth er: give --p or --edges, not both");
            p = er_probability_for_edges(a.nodes, static_cast<std::size_t>(a.edges));
            meta["target_edges"] = a.edges;
        }
        if (p < 0.0) throw std::invalid_argument("synth er: --p or --edges required");
        g = erdos_renyi(a.nodes, p, a.seed);
        meta["p"] = p;
    } else if (a.family == "ego") {
        if (a.base.empty()) throw std::invalid_argument("synth ego: --base graph required");
        if (a.nodes < 1) throw std::invalid_argument("synth ego: --nodes target required");
        const Graph base = read_edge_list(a.base);
        EgoBand band{a.band_lower, a.band_upper};
        const EgoResult r = ego_sample(base, a.nodes, band, a.seed, a.max_attempts);
        if (!r.ok) {
            std::fprintf(stderr,
                         "synth ego: no acceptable sample after %d attempts "
                         "(target %lld, band [%g, %g])\n",
                         r.attempts, static_cast<long long>(a.nodes),
                         band.lower * a.nodes, band.upper * a.nodes);
            return kExitFailure;
        }
        g = r.sample.graph;
        meta["base"] = a.base;
        meta["target_nodes"] = a.nodes;
        meta["attempts"] = r.attempts;
        meta["hops"] = r.hops;
        meta["to_original"] = r.sample.to_original;
    } else if (a.family == "top-degree") {
        if (a.base.empty())
            throw std::invalid_argument("synth top-degree: --base graph required");
        if (a.nodes < 1) throw std::invalid_argument("synth top-degree: --nodes required");
        const Graph base = read_edge_list(a.base);
        InducedGraph r = top_degree_sample(base, a.nodes);
        g = std::move(r.graph);
        meta["base"] = a.base;
        meta["to_original"] = r.to_original;
    } else if (a.family == "sample+ba") {
        if (a.base.empty())
            throw std::invalid_argument("synth sample+ba: --train-graph required");
        if (a.test_count < 1)
            throw std::invalid_argument("synth sample+ba: --test-count required");
        const Graph base = read_edge_list(a.base);
        SamplePlusBa r = sample_plus_ba(base, a.test_count, a.m, a.seed);
        g = std::move(r.graph);
        const std::string part_path =
            a.partition_out.empty() ? a.out + ".partition" : a.partition_out;
        write_partition(part_path, r.partition);
        meta["train_graph"] = a.base;
        meta["test_count"] = a.test_count;
        meta["m"] = a.m;
        meta["partition"] = part_path;
        std::printf("wrote %s\n", part_path.c_str());
    } else {
        throw std::invalid_argument("synth: unknown family: " + a.family);
    }

    write_edge_list(a.out, *g);
    meta["realized"] = {{"nodes", g->num_nodes()},
                        {"edges", g->num_edges()},
                        {"directed", g->directed()}};
    {
        std::ofstream mf(a.out + ".meta.json");
        if (!mf) throw std::invalid_argument("cannot open for writing: " + a.out + ".meta.json");
        mf << meta.dump(2) << "\n";
    }
    std::printf("wrote %s (%lld nodes, %zu edges)\n", a.out.c_str(),
                static_cast<long long>(g->num_nodes()), g->num_edges());
    return kExitOk;
}

// --- split ------------------------------------------------------------------------

int cmd_split(const std::string& graph_path, double test_fraction, std::uint64_t seed,
              const std::string& out) {
    const Graph g = read_edge_list(graph_path);
    const Partition part = split_nodes(g, test_fraction, seed);
    write_partition(out, part);
    std::printf("wrote %s (%zu train, %zu test)\n", out.c_str(), part.train_nodes().size(),
                part.test_nodes().size());
    return kExitOk;
}

// --- train ------------------------------------------------------------------------

int cmd_train(const TrainRunParams& params) {
    const TrainRunResult r = run_train(params);
    std::printf("epochs run: %d%s (best epoch %d, best validation loss %.6f)\n",
                r.report.epochs_run, r.report.stopped_early ? " [early stop]" : "",
                r.report.best_epoch, r.report.best_val_loss);
    std::printf("examples: %zu optimization + %zu validation, batch size %lld\n",
                r.report.optimization_examples, r.report.validation_examples,
                static_cast<long long>(r.report.batch_size_used));
    if (r.report.meaningless)
        std::printf("meaningless run%s\n", r.report.abort_reason.empty()
                                               ? ""
                                               : (": " + r.report.abort_reason).c_str());
    std::printf("wrote %s\n", r.checkpoint_path.c_str());
    std::printf("wrote %s\n", r.report_path.c_str());
    std::printf("wrote %s\n", r.manifest_path.c_str());
    return r.exit_code;
}

// --- eval -------------------------------------------------------------------------

int cmd_eval(const EvalRunParams& params) {
    const EvalRunResult r = run_eval(params);
    if (r.report.inconclusive) {
        std::printf("inconclusive: every test run was meaningless\n");
    } else {
        std::printf("accuracy: %.2f%%  (mean of %zu runs, %d meaningless excluded)\n",
                    r.report.accuracy, r.report.runs.size() - r.report.meaningless_runs_excluded,
                    r.report.meaningless_runs_excluded);
        std::printf("mrr: %.4f\n", r.report.mrr);
        for (const auto& [k, v] : r.report.hits) std::printf("hits@%d: %.4f\n", k, v);
    }
    std::printf("wrote %s\n", r.report_path.c_str());
    std::printf("wrote %s\n", r.manifest_path.c_str());
    return r.exit_code;
}

// --- gradcheck ---------------------------------------------------------------------

int cmd_gradcheck(const GradcheckParams& params) {
    const GradCheckReport report = run_gradcheck(params);
    std::printf("coords checked: %zu (skipped %zu near kinks)\n", report.coords_checked,
                report.coords_skipped_kink);
    std::printf("max relative error: %.3e (tolerance %.1e)\n", report.max_rel_error,
                report.tolerance);
    std::printf("mean relative error: %.3e\n", report.mean_rel_error);
    if (!report.worst_param.empty())
        std::printf("worst: %s[%zu] analytic %.9e vs numeric %.9e\n", report.worst_param.c_str(),
                    report.worst_index, report.worst_analytic, report.worst_numeric);
    if (params.self_test) {
        // The gradient was deliberately corrupted; the check proving it can
        // detect that is the pass condition.
        if (!report.passed()) {
            std::printf("self-test ok: corrupted gradient detected\n");
            return kExitOk;
        }
        std::fprintf(stderr, "self-test FAILED: corrupted gradient went undetected\n");
        return kExitFailure;
    }
    std::printf(report.passed() ? "PASS\n" : "FAIL\n");
    return report.passed() ? kExitOk : kExitFailure;
}

// --- sweep ------------------------------------------------------------------------

struct SweepArgs {
    TrainRunParams base;  // shared flags
    std::vector<std::uint64_t> seeds;
    std::vector<double> lrs;
    std::vector<std::string> gnns;
    std::vector<std::string> purities;  // "min,max" entries
};

int cmd_sweep(const SweepArgs& a) {
    const std::string root = a.base.out_dir;
    nlohmann::ordered_json index;
    index["format"] = "nodepred-sweep-index";
    index["version"] = 1;
    index["cells"] = nlohmann::ordered_json::array();
    int cell = 0;
    int failures = 0;
    for (const auto& gnn : a.gnns)
        for (const auto& purity : a.purities)
            for (const double lr : a.lrs)
                for (const std::uint64_t seed : a.seeds) {
                    TrainRunParams params = a.base;
                    params.layer_kind = parse_layer_kind(gnn);
                    params.train_purity = parse_purity(purity);
                    params.train.learning_rate = lr;
                    params.seed = seed;
                    char name[32];
                    std::snprintf(name, sizeof name, "cell_%03d", cell);
                    params.out_dir = root + "/" + name;
                    nlohmann::ordered_json entry;
                    entry["cell"] = name;
                    entry["gnn"] = gnn;
                    entry["train_purity"] = purity;
                    entry["learning_rate"] = lr;
                    entry["seed"] = seed;
                    try {
                        const TrainRunResult r = run_train(params);
                        entry["exit_code"] = r.exit_code;
                        entry["best_val_loss"] = r.report.best_val_loss;
                        entry["epochs_run"] = r.report.epochs_run;
                        entry["meaningless"] = r.report.meaningless;
                        entry["manifest"] = r.manifest_path;
                        std::printf("%s: gnn=%s purity=%s lr=%g seed=%llu -> exit %d\n", name,
                                    gnn.c_str(), purity.c_str(), lr,
                                    static_cast<unsigned long long>(seed), r.exit_code);
                    } catch (const std::exception& e) {
                        entry["exit_code"] = kExitFailure;
                        entry["error"] = e.what();
                        std::fprintf(stderr, "%s: failed: %s\n", name, e.what());
                        ++failures;
                    }
                    index["cells"].push_back(std::move(entry));
                    ++cell;
                }
    std::filesystem::create_directories(root);
    const std::string index_path = root + "/sweep_index.json";
    std::ofstream out(index_path);
    if (!out) throw std::invalid_argument("cannot open for writing: " + index_path);
    out << index.dump(2) << "\n";
    std::printf("wrote %s (%d cells, %d failed)\n", index_path.c_str(), cell, failures);
    return failures == 0 ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"train/evaluate link prediction for nodes unseen during training"};
    app.require_subcommand(1);

    // --- synth
    SynthArgs synth;
    auto* sc_synth = app.add_subcommand("synth", "generate a synthetic graph");
    sc_synth->add_option("--family", synth.family, "ba | er | ego | top-degree | sample+ba")
        ->required();
    sc_synth->add_option("--nodes", synth.nodes, "node count (target for ego)");
    sc_synth->add_option("--m", synth.m, "edges per arriving node (ba, sample+ba)");
    sc_synth->add_option("--p", synth.p, "edge probability (er)");
    sc_synth->add_option("--edges", synth.edges, "target edge count (er; derives --p)");
    sc_synth->add_option("--base", synth.base, "base graph file (ego, top-degree)");
    sc_synth->add_option("--train-graph", synth.base, "base graph file (sample+ba)");
    sc_synth->add_option("--test-count", synth.test_count, "appended node count (sample+ba)");
    sc_synth->add_option("--band-lower", synth.band_lower, "ego acceptance band lower factor");
    sc_synth->add_option("--band-upper", synth.band_upper, "ego acceptance band upper factor");
    sc_synth->add_option("--max-attempts", synth.max_attempts, "ego sampling attempts");
    sc_synth->add_option("--seed", synth.seed, "random seed");
    sc_synth->add_option("--out", synth.out, "output edge-list path")->required();
    sc_synth->add_option("--partition-out", synth.partition_out,
                         "partition output path (sample+ba; default <out>.partition)");

    // --- split
    std::string split_graph, split_out;
    double split_fraction = 0.2;
    std::uint64_t split_seed = 0;
    auto* sc_split = app.add_subcommand("split", "write a train/test node partition");
    sc_split->add_option("--graph", split_graph, "edge-list file")->required();
    sc_split->add_option("--test-fraction", split_fraction, "test-node fraction in (0,1)");
    sc_split->add_option("--seed", split_seed, "random seed");
    sc_split->add_option("--out", split_out, "partition output path")->required();

    // --- shared train/eval option plumbing
    const auto add_train_options = [](CLI::App* sc, TrainRunParams& p, std::string& purity,
                                      std::string& mlp, std::string& gnn) {
        sc->add_option("--graph", p.graph_path, "edge-list file")->required();
        sc->add_option("--features", p.features, "feature file, 'dummy', or 'random:<dim>'");
        sc->add_option("--partition", p.partition_path,
                       "partition file (default: split by --test-fraction)");
        sc->add_option("--test-fraction", p.test_fraction, "test fraction when splitting");
        sc->add_option("--neg-count", [&p](const std::vector<std::string>& v) {
              p.negative_count = static_cast<std::size_t>(std::stoull(v.at(0)));
              return true;
          },
          "training negative edge count (default: one per positive edge)");
        sc->add_option("--gnn", gnn, "gcn | sage");
        sc->add_option("--layers", p.num_layers, "gnn layer count");
        sc->add_option("--dim", p.embed_dim, "embedding width");
        sc->add_option("--mlp", mlp, "comma list of mlp hidden widths (default 2k,k)");
        sc->add_flag("--no-normalize", [&p](std::int64_t) { p.normalize_after_relu = false; },
                     "disable row normalization after activations");
        sc->add_option("--epochs", p.train.max_epochs, "epoch cap");
        sc->add_option("--patience", p.train.patience, "early-stopping patience");
        sc->add_option("--val-fraction", p.train.validation_fraction, "validation fraction");
        sc->add_option("--batch", p.train.batch_size, "batch size (0 = max(32, nodes/16))");
        sc->add_option("--lr", p.train.learning_rate, "adam learning rate");
        sc->add_option("--precision", p.precision, "double | float");
        sc->add_option("--threads", p.threads, "worker threads (1 = deterministic reference)")
            ->envname("NODEPRED_THREADS");
        sc->add_option("--seed", p.seed, "master seed");
        sc->add_option("--out", p.out_dir, "output directory")
            ->envname("NODEPRED_OUTDIR")
            ->required();
        (void)purity;
    };

    // --- train
    TrainRunParams train_params;
    std::string train_purity = "100,0", train_mlp, train_gnn = "sage";
    auto* sc_train = app.add_subcommand("train", "train a model and write a checkpoint");
    add_train_options(sc_train, train_params, train_purity, train_mlp, train_gnn);
    sc_train->add_option("--train-purity", train_purity, "training purity 'minPure,maxSpurious'");

    // --- eval
    EvalRunParams eval_params;
    std::string eval_purity = "100,0", eval_ks;
    auto* sc_eval = app.add_subcommand("eval", "evaluate a checkpoint on test nodes");
    sc_eval->add_option("--graph", eval_params.graph_path, "edge-list file")->required();
    sc_eval->add_option("--features", eval_params.features, "feature file, 'dummy', or 'random:<dim>'");
    sc_eval->add_option("--partition", eval_params.partition_path, "partition file")->required();
    sc_eval->add_option("--checkpoint", eval_params.checkpoint_path, "model checkpoint")
        ->required();
    sc_eval->add_option("--test-purity", eval_purity, "test purity 'minPure,maxSpurious'");
    sc_eval->add_option("--ks", eval_ks, "comma list of hits@k cutoffs");
    sc_eval->add_option("--runs", eval_params.eval.num_test_runs, "independent test runs");
    sc_eval->add_option("--pool", eval_params.eval.negative_pool_size,
                        "ranking pool size (0 = all negative test examples)");
    sc_eval->add_option("--neg-count", [&eval_params](const std::vector<std::string>& v) {
          eval_params.negative_count = static_cast<std::size_t>(std::stoull(v.at(0)));
          return true;
      },
      "negative edge count for test example pools");
    sc_eval->add_option("--threads", eval_params.threads, "worker threads")
        ->envname("NODEPRED_THREADS");
    sc_eval->add_option("--seed", eval_params.seed, "master seed");
    sc_eval->add_option("--out", eval_params.out_dir, "output directory")
        ->envname("NODEPRED_OUTDIR")
        ->required();

    // --- gradcheck
    GradcheckParams gc;
    std::string gc_gnn = "sage", gc_mlp, gc_purity = "80,10";
    auto* sc_gc = app.add_subcommand("gradcheck",
                                     "finite-difference check of the analytic gradients");
    sc_gc->add_option("--nodes", gc.nodes, "random graph size");
    sc_gc->add_option("--p", gc.edge_probability, "edge probability");
    sc_gc->add_option("--input-dim", gc.input_dim, "feature width");
    sc_gc->add_option("--gnn", gc_gnn, "gcn | sage");
    sc_gc->add_option("--layers", gc.num_layers, "gnn layer count");
    sc_gc->add_option("--dim", gc.embed_dim, "embedding width");
    sc_gc->add_option("--mlp", gc_mlp, "comma list of mlp hidden widths");
    sc_gc->add_flag("--no-normalize", [&gc](std::int64_t) { gc.normalize_after_relu = false; },
                    "disable row normalization after activations");
    sc_gc->add_option("--purity", gc_purity, "example purity 'minPure,maxSpurious'");
    sc_gc->add_option("--tolerance", gc.tolerance, "max relative error allowed");
    sc_gc->add_option("--coords", gc.coords_per_param, "coordinates sampled per parameter");
    sc_gc->add_option("--seed", gc.seed, "random seed");
    sc_gc->add_flag("--self-test", gc.self_test,
                    "corrupt one gradient and require the check to fail");

    // --- sweep
    SweepArgs sweep;
    std::string sweep_purity = "100,0", sweep_mlp, sweep_gnn = "sage";
    std::string sweep_seeds = "0", sweep_lrs, sweep_gnns, sweep_purities;
    auto* sc_sweep = app.add_subcommand("sweep", "train over a cartesian product of settings");
    add_train_options(sc_sweep, sweep.base, sweep_purity, sweep_mlp, sweep_gnn);
    sc_sweep->add_option("--seeds", sweep_seeds, "comma list of master seeds");
    sc_sweep->add_option("--lrs", sweep_lrs, "comma list of learning rates");
    sc_sweep->add_option("--gnns", sweep_gnns, "comma list of gnn kinds");
    sc_sweep->add_option("--train-purities", sweep_purities,
                         "semicolon list of purities, e.g. '100,0;80,10'");

    try {
        app.parse(argc, argv);

        if (sc_synth->parsed()) return cmd_synth(synth);
        if (sc_split->parsed()) return cmd_split(split_graph, split_fraction, split_seed, split_out);
        if (sc_train->parsed()) {
            train_params.layer_kind = parse_layer_kind(train_gnn);
            train_params.train_purity = parse_purity(train_purity);
            if (!train_mlp.empty())
                train_params.mlp_hidden_dims = parse_int_list(train_mlp, "mlp");
            return cmd_train(train_params);
        }
        if (sc_eval->parsed()) {
            eval_params.eval.test_purity = parse_purity(eval_purity);
            if (!eval_ks.empty()) eval_params.eval.ks = parse_int_list(eval_ks, "ks");
            return cmd_eval(eval_params);
        }
        if (sc_gc->parsed()) {
            gc.layer_kind = parse_layer_kind(gc_gnn);
            gc.purity = parse_purity(gc_purity);
            if (!gc_mlp.empty()) gc.mlp_hidden_dims = parse_int_list(gc_mlp, "mlp");
            return cmd_gradcheck(gc);
        }
        if (sc_sweep->parsed()) {
            sweep.base.layer_kind = parse_layer_kind(sweep_gnn);
            sweep.base.train_purity = parse_purity(sweep_purity);
            if (!sweep_mlp.empty())
                sweep.base.mlp_hidden_dims = parse_int_list(sweep_mlp, "mlp");
            for (const auto& s : split_on(sweep_seeds, ','))
                sweep.seeds.push_back(std::stoull(s));
            sweep.lrs = sweep_lrs.empty()
                            ? std::vector<double>{sweep.base.train.learning_rate}
                            : parse_double_list(sweep_lrs, "lrs");
            sweep.gnns = sweep_gnns.empty() ? std::vector<std::string>{sweep_gnn}
                                            : split_on(sweep_gnns, ',');
            sweep.purities = sweep_purities.empty() ? std::vector<std::string>{sweep_purity}
                                                    : split_on(sweep_purities, ';');
            if (sweep.seeds.empty()) sweep.seeds.push_back(0);
            return cmd_sweep(sweep);
        }
        return kExitUsage;  // unreachable: require_subcommand(1)
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
}
