#pragma once

// The prediction model: an L-layer GNN over the whole graph producing one
// embedding per node, an example-embedding assembly (mean of member
// embeddings concatenated with the target embedding, dimension 2k), and an
// MLP with sigmoid head scoring each example.  GNN and MLP parameters are
// trained jointly; every backward pass here is written out by hand.
//
// Layer kinds:
//   gcn   Z = D^{-1/2} (A+I) D^{-1/2} · H · W   (degree-normalized mean
//         including self; on directed graphs A aggregates incoming arcs and
//         D counts them plus the self-connection)
//   sage  Z = H·W_self + mean_{in-neighbors}(H)·W_neigh  (empty mean = 0)
//
// After every layer but the last: ReLU, then (flag-controlled) row-wise L2
// normalization; the final layer output skips ReLU but is row-normalized
// under the same flag.

#include <nodepred/examples.hpp>
#include <nodepred/graph.hpp>
#include <nodepred/graph_io.hpp>
#include <nodepred/matrix.hpp>
#include <nodepred/nn.hpp>
#include <nodepred/rng.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace nodepred {

enum class LayerKind { gcn, sage };

inline const char* layer_kind_name(LayerKind k) {
    return k == LayerKind::gcn ? "gcn" : "sage";
}

inline LayerKind layer_kind_from_name(const std::string& s) {
    if (s == "gcn") return LayerKind::gcn;
    if (s == "sage") return LayerKind::sage;
    throw std::invalid_argument("unknown layer kind '" + s + "' (expected gcn|sage)");
}

struct GnnConfig {
    LayerKind layer_kind = LayerKind::sage;
    int num_layers = 5;
    int embed_dim = 128;
    int input_dim = 0;
    bool normalize_after_relu = true;
    std::vector<int> mlp_hidden_dims;  // empty -> default {2k, k}

    void validate() const {
        if (num_layers < 1) throw std::invalid_argument("GnnConfig: num_layers must be >= 1");
        if (embed_dim < 1) throw std::invalid_argument("GnnConfig: embed_dim must be >= 1");
        if (input_dim < 1) throw std::invalid_argument("GnnConfig: input_dim must be >= 1");
        for (int d : mlp_hidden_dims)
            if (d < 1) throw std::invalid_argument("GnnConfig: mlp hidden dims must be >= 1");
    }

    std::vector<int> resolved_mlp_hidden_dims() const {
        if (!mlp_hidden_dims.empty()) return mlp_hidden_dims;
        return {2 * embed_dim, embed_dim};
    }
};

// --- aggregation plans ------------------------------------------------------------

// Compressed sparse rows; one matrix per propagation direction.
template <class T>
struct Csr {
    std::vector<std::int64_t> offsets;  // size rows+1
    std::vector<std::int64_t> cols;
    std::vector<T> vals;

    std::size_t rows() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

// y = S x, rows computed independently in a fixed accumulation order.
template <class T>
void spmm(const Csr<T>& s, const Mat<T>& x, Mat<T>& y) {
    if (s.rows() == 0) throw std::invalid_argument("spmm: empty plan");
    y.reshape_for(s.rows(), x.cols());
    const std::size_t cols = x.cols();
    parallel_rows(s.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            T* out = y.row(r);
            std::fill(out, out + cols, T(0));
            for (std::int64_t k = s.offsets[r]; k < s.offsets[r + 1]; ++k) {
                const T* src = x.row(static_cast<std::size_t>(s.cols[k]));
                const T w = s.vals[k];
                for (std::size_t c = 0; c < cols; ++c) out[c] += w * src[c];
            }
        }
    });
}

namespace detail {

template <class T>
Csr<T> csr_from_triplets(std::size_t rows,
                         std::vector<std::tuple<std::int64_t, std::int64_t, T>> trip) {
    std::sort(trip.begin(), trip.end());
    Csr<T> csr;
    csr.offsets.assign(rows + 1, 0);
    csr.cols.reserve(trip.size());
    csr.vals.reserve(trip.size());
    for (const auto& [r, c, v] : trip) ++csr.offsets[static_cast<std::size_t>(r) + 1];
    for (std::size_t r = 0; r < rows; ++r) csr.offsets[r + 1] += csr.offsets[r];
    for (const auto& [r, c, v] : trip) {
        csr.cols.push_back(c);
        csr.vals.push_back(v);
    }
    return csr;
}

}  // namespace detail

// Forward and transposed aggregation operators for one graph and layer kind.
template <class T>
struct GraphPlan {
    LayerKind kind = LayerKind::sage;
    NodeId num_nodes = 0;
    Csr<T> forward;   // aggregation operator S
    Csr<T> backward;  // S^T
};

template <class T>
GraphPlan<T> build_plan(const Graph& g, LayerKind kind) {
    GraphPlan<T> plan;
    plan.kind = kind;
    plan.num_nodes = g.num_nodes();
    const auto n = static_cast<std::size_t>(g.num_nodes());
    std::vector<std::tuple<std::int64_t, std::int64_t, T>> fw, bw;

    if (kind == LayerKind::gcn) {
        // Normalized adjacency with self-connections: entry (n, m) =
        // 1 / sqrt(d(n) d(m)) with d(x) = |in(x)| + 1.
        std::vector<T> inv_sqrt_deg(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto deg =
                g.neighbors(static_cast<NodeId>(i), NeighborMode::in).size() + 1;
            inv_sqrt_deg[i] = T(1) / std::sqrt(static_cast<T>(deg));
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = static_cast<std::int64_t>(i);
            fw.emplace_back(row, row, inv_sqrt_deg[i] * inv_sqrt_deg[i]);
            bw.emplace_back(row, row, inv_sqrt_deg[i] * inv_sqrt_deg[i]);
            for (NodeId m : g.neighbors(static_cast<NodeId>(i), NeighborMode::in)) {
                const T v = inv_sqrt_deg[i] * inv_sqrt_deg[static_cast<std::size_t>(m)];
                fw.emplace_back(row, m, v);
                bw.emplace_back(m, row, v);
            }
        }
    } else {
        // Row-mean over incoming neighbors; nodes without incoming arcs get
        // an all-zero row (empty mean = zero vector).
        for (std::size_t i = 0; i < n; ++i) {
            const auto& neigh = g.neighbors(static_cast<NodeId>(i), NeighborMode::in);
            if (neigh.empty()) continue;
            const T v = T(1) / static_cast<T>(neigh.size());
            for (NodeId m : neigh) {
                fw.emplace_back(static_cast<std::int64_t>(i), m, v);
                bw.emplace_back(m, static_cast<std::int64_t>(i), v);
            }
        }
    }

    plan.forward = detail::csr_from_triplets<T>(n, std::move(fw));
    plan.backward = detail::csr_from_triplets<T>(n, std::move(bw));
    return plan;
}

// --- model parameters --------------------------------------------------------------

template <class T>
struct Model {
    GnnConfig config;
    std::uint64_t init_seed = 0;
    std::vector<Param<T>> params;

    int gnn_params_per_layer() const { return config.layer_kind == LayerKind::gcn ? 1 : 2; }
    int num_mlp_layers() const {
        return static_cast<int>(config.resolved_mlp_hidden_dims().size()) + 1;
    }

    Param<T>& gnn_w(int layer) {
        return params[static_cast<std::size_t>(layer * gnn_params_per_layer())];
    }
    Param<T>& gnn_w_self(int layer) { return gnn_w(layer); }
    Param<T>& gnn_w_neigh(int layer) {
        return params[static_cast<std::size_t>(layer * gnn_params_per_layer() + 1)];
    }
    Param<T>& mlp_w(int layer) {
        return params[static_cast<std::size_t>(config.num_layers * gnn_params_per_layer() +
                                               2 * layer)];
    }
    Param<T>& mlp_b(int layer) {
        return params[static_cast<std::size_t>(config.num_layers * gnn_params_per_layer() +
                                               2 * layer + 1)];
    }
    const Param<T>& gnn_w(int layer) const { return const_cast<Model*>(this)->gnn_w(layer); }
    const Param<T>& gnn_w_self(int layer) const { return gnn_w(layer); }
    const Param<T>& gnn_w_neigh(int layer) const {
        return const_cast<Model*>(this)->gnn_w_neigh(layer);
    }
    const Param<T>& mlp_w(int layer) const { return const_cast<Model*>(this)->mlp_w(layer); }
    const Param<T>& mlp_b(int layer) const { return const_cast<Model*>(this)->mlp_b(layer); }

    std::vector<Param<T>*> param_ptrs() {
        std::vector<Param<T>*> out;
        out.reserve(params.size());
        for (auto& p : params) out.push_back(&p);
        return out;
    }

    void zero_grads() {
        for (auto& p : params) p.grad.fill(T(0));
    }
};

// Glorot-uniform weights (±sqrt(6/(fan_in+fan_out))), zero biases; each
// parameter array draws from its own substream of `seed` in a fixed order.
template <class T>
Model<T> init_model(const GnnConfig& config, std::uint64_t seed) {
    config.validate();
    Model<T> model;
    model.config = config;
    model.init_seed = seed;

    auto glorot = [&](Param<T>& p, std::uint64_t index) {
        Rng rng(mix_seed(seed, 0x696e6974ull, index));  // "init" stream
        const double limit =
            std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
        T* d = p.value.data();
        for (std::size_t i = 0, n = p.value.size(); i < n; ++i)
            d[i] = static_cast<T>((2.0 * rng.uniform_real() - 1.0) * limit);
    };

    std::uint64_t index = 0;
    for (int l = 0; l < config.num_layers; ++l) {
        const int in_dim = (l == 0) ? config.input_dim : config.embed_dim;
        if (config.layer_kind == LayerKind::gcn) {
            auto& w = model.params.emplace_back("gnn." + std::to_string(l) + ".w",
                                                static_cast<std::size_t>(in_dim),
                                                static_cast<std::size_t>(config.embed_dim));
            glorot(w, index++);
        } else {
            auto& ws = model.params.emplace_back("gnn." + std::to_string(l) + ".w_self",
                                                 static_cast<std::size_t>(in_dim),
                                                 static_cast<std::size_t>(config.embed_dim));
            glorot(ws, index++);
            auto& wn = model.params.emplace_back("gnn." + std::to_string(l) + ".w_neigh",
                                                 static_cast<std::size_t>(in_dim),
                                                 static_cast<std::size_t>(config.embed_dim));
            glorot(wn, index++);
        }
    }

    const auto hidden = config.resolved_mlp_hidden_dims();
    int in_dim = 2 * config.embed_dim;
    for (std::size_t j = 0; j <= hidden.size(); ++j) {
        const int out_dim = (j < hidden.size()) ? hidden[j] : 1;
        auto& w = model.params.emplace_back("mlp." + std::to_string(j) + ".w",
                                            static_cast<std::size_t>(in_dim),
                                            static_cast<std::size_t>(out_dim));
        glorot(w, index++);
        model.params.emplace_back("mlp." + std::to_string(j) + ".b", static_cast<std::size_t>(1),
                                  static_cast<std::size_t>(out_dim));
        ++index;  // biases start at zero but keep the stream layout stable
        in_dim = out_dim;
    }
    return model;
}

// --- single layers ----------------------------------------------------------------

// scratch receives the aggregated features S*h; out the layer output.
template <class T>
void gcn_layer_forward(const GraphPlan<T>& plan, const Mat<T>& h, const Mat<T>& w,
                       Mat<T>& scratch, Mat<T>& out) {
    if (plan.kind != LayerKind::gcn) throw std::invalid_argument("gcn_layer_forward: plan kind");
    if (static_cast<NodeId>(h.rows()) != plan.num_nodes)
        throw std::invalid_argument("gcn_layer_forward: feature row count != node count");
    spmm(plan.forward, h, scratch);
    matmul(scratch, w, out);
}

template <class T>
void sage_layer_forward(const GraphPlan<T>& plan, const Mat<T>& h, const Mat<T>& w_self,
                        const Mat<T>& w_neigh, Mat<T>& scratch, Mat<T>& out) {
    if (plan.kind != LayerKind::sage)
        throw std::invalid_argument("sage_layer_forward: plan kind");
    if (static_cast<NodeId>(h.rows()) != plan.num_nodes)
        throw std::invalid_argument("sage_layer_forward: feature row count != node count");
    spmm(plan.forward, h, scratch);
    matmul(h, w_self, out);
    matmul_add(scratch, w_neigh, out);
}

// --- full GNN ---------------------------------------------------------------------

// Intermediates retained for the backward pass.
template <class T>
struct GnnTrace {
    std::vector<Mat<T>> h;               // h[0] = input features .. h[L] = embeddings
    std::vector<Mat<T>> agg;             // agg[l] = S * h[l]
    std::vector<Mat<T>> pre;             // pre[l] = layer output before activation
    std::vector<std::vector<T>> norms;   // row norms recorded per normalized layer

    void reset(int num_layers) {
        h.resize(static_cast<std::size_t>(num_layers) + 1);
        agg.resize(static_cast<std::size_t>(num_layers));
        pre.resize(static_cast<std::size_t>(num_layers));
        norms.assign(static_cast<std::size_t>(num_layers), {});
    }
};

template <class T>
Mat<T> cast_features(const Mat<double>& f) {
    Mat<T> out(f.rows(), f.cols());
    for (std::size_t i = 0; i < f.size(); ++i) out.data()[i] = static_cast<T>(f.data()[i]);
    return out;
}

// Runs all layers over the graph; returns the final embeddings (also kept in
// trace.h.back()).  Aborts with the offending layer index if a non-finite
// value appears.
template <class T>
const Mat<T>& gnn_forward(const GraphPlan<T>& plan, const Mat<T>& features,
                          Model<T>& model, GnnTrace<T>& trace) {
    const auto& cfg = model.config;
    if (static_cast<NodeId>(features.rows()) != plan.num_nodes)
        throw std::invalid_argument("gnn_forward: feature row count != node count");
    if (static_cast<int>(features.cols()) != cfg.input_dim)
        throw std::invalid_argument("gnn_forward: feature dim != config input_dim");

    trace.reset(cfg.num_layers);
    trace.h[0] = features;
    for (int l = 0; l < cfg.num_layers; ++l) {
        const auto lu = static_cast<std::size_t>(l);
        if (cfg.layer_kind == LayerKind::gcn)
            gcn_layer_forward(plan, trace.h[lu], model.gnn_w(l).value, trace.agg[lu],
                              trace.pre[lu]);
        else
            sage_layer_forward(plan, trace.h[lu], model.gnn_w_self(l).value,
                               model.gnn_w_neigh(l).value, trace.agg[lu], trace.pre[lu]);
        if (!trace.pre[lu].all_finite())
            throw std::runtime_error("gnn_forward: non-finite values at layer " +
                                     std::to_string(l));
        trace.h[lu + 1] = trace.pre[lu];
        const bool last = (l == cfg.num_layers - 1);
        if (!last) relu_inplace(trace.h[lu + 1]);
        if (cfg.normalize_after_relu) trace.norms[lu] = normalize_rows(trace.h[lu + 1]);
    }
    return trace.h.back();
}

// Convenience overload building a throwaway plan.
template <class T>
Mat<T> gnn_forward(const Graph& g, const Mat<T>& features, Model<T>& model) {
    const auto plan = build_plan<T>(g, model.config.layer_kind);
    GnnTrace<T> trace;
    return gnn_forward(plan, features, model, trace);
}

// Accumulates parameter gradients from d(loss)/d(embeddings); `grad_emb` is
// consumed as scratch.  Model grads must have been zeroed by the caller at
// step start (gradients accumulate across calls by design).
template <class T>
void gnn_backward(const GraphPlan<T>& plan, Model<T>& model, GnnTrace<T>& trace,
                  Mat<T>& grad_emb) {
    const auto& cfg = model.config;
    Mat<T> scratch, scratch2;
    for (int l = cfg.num_layers - 1; l >= 0; --l) {
        const auto lu = static_cast<std::size_t>(l);
        const bool last = (l == cfg.num_layers - 1);
        if (cfg.normalize_after_relu)
            normalize_rows_backward(trace.h[lu + 1], trace.norms[lu], grad_emb);
        if (!last) relu_backward(trace.pre[lu], grad_emb);

        // grad_emb now holds d(loss)/d(pre[l]).
        if (cfg.layer_kind == LayerKind::gcn) {
            matmul_tn_add(trace.agg[lu], grad_emb, model.gnn_w(l).grad);
            if (l > 0) {
                matmul_nt(grad_emb, model.gnn_w(l).value, scratch);
                spmm(plan.backward, scratch, grad_emb);
            }
        } else {
            matmul_tn_add(trace.h[lu], grad_emb, model.gnn_w_self(l).grad);
            matmul_tn_add(trace.agg[lu], grad_emb, model.gnn_w_neigh(l).grad);
            if (l > 0) {
                matmul_nt(grad_emb, model.gnn_w_neigh(l).value, scratch);
                spmm(plan.backward, scratch, scratch2);
                matmul_nt(grad_emb, model.gnn_w_self(l).value, scratch);
                add_inplace(scratch, scratch2);
                std::swap(grad_emb, scratch);
            }
        }
    }
}

// --- example embeddings --------------------------------------------------------------

// out must point at 2*embed_dim slots: mean of member rows, then target row.
template <class T>
void embed_example(const Mat<T>& emb, std::span<const NodeId> members, NodeId target, T* out) {
    if (members.empty()) throw std::invalid_argument("embed_example: empty member set");
    const auto k = emb.cols();
    auto check = [&](NodeId n) {
        if (n < 0 || static_cast<std::size_t>(n) >= emb.rows())
            throw std::invalid_argument("embed_example: node id out of range");
    };
    check(target);
    std::fill(out, out + k, T(0));
    for (NodeId m : members) {
        check(m);
        const T* row = emb.row(static_cast<std::size_t>(m));
        for (std::size_t c = 0; c < k; ++c) out[c] += row[c];
    }
    const T inv = T(1) / static_cast<T>(members.size());
    for (std::size_t c = 0; c < k; ++c) out[c] *= inv;
    std::copy(emb.row(static_cast<std::size_t>(target)),
              emb.row(static_cast<std::size_t>(target)) + k, out + k);
}

template <class T>
Mat<T> embed_example(const Mat<T>& emb, const Example& ex) {
    Mat<T> out(1, 2 * emb.cols());
    embed_example(emb, std::span<const NodeId>(ex.members), ex.target, out.row(0));
    return out;
}

// An example with node ids living in the index space of the embedding matrix
// (original ids for whole-graph evaluation, induced-local ids for training).
template <class T>
struct LocalExample {
    std::vector<NodeId> members;
    NodeId target = -1;
    T label = T(0);
};

template <class T>
std::vector<LocalExample<T>> localize_examples(const ExampleSet& set,
                                               const InducedGraph& g_train) {
    std::vector<LocalExample<T>> out;
    out.reserve(set.examples.size());
    for (const auto& ex : set.examples) {
        LocalExample<T> lx;
        lx.target = g_train.local_of(ex.target);
        if (lx.target < 0)
            throw std::invalid_argument("localize_examples: target outside train graph");
        lx.members.reserve(ex.members.size());
        for (NodeId m : ex.members) {
            const NodeId local = g_train.local_of(m);
            if (local < 0)
                throw std::invalid_argument("localize_examples: member outside train graph");
            lx.members.push_back(local);
        }
        lx.label = static_cast<T>(ex.label);
        out.push_back(std::move(lx));
    }
    return out;
}

template <class T>
std::vector<LocalExample<T>> localize_examples(const ExampleSet& set) {
    std::vector<LocalExample<T>> out;
    out.reserve(set.examples.size());
    for (const auto& ex : set.examples) {
        LocalExample<T> lx;
        lx.target = ex.target;
        lx.members = ex.members;
        lx.label = static_cast<T>(ex.label);
        out.push_back(std::move(lx));
    }
    return out;
}

// --- MLP head -------------------------------------------------------------------------

template <class T>
struct MlpTrace {
    std::vector<Mat<T>> x;    // x[0] = example embeddings; x[j+1] = relu(u[j])
    std::vector<Mat<T>> u;    // pre-activations; u.back() = logits (B x 1)
    std::vector<T> probs;

    void reset(int num_layers) {
        x.resize(static_cast<std::size_t>(num_layers));
        u.resize(static_cast<std::size_t>(num_layers));
    }
};

template <class T>
const std::vector<T>& mlp_forward(Model<T>& model, const Mat<T>& examples, MlpTrace<T>& trace) {
    const int layers = model.num_mlp_layers();
    trace.reset(layers);
    trace.x[0] = examples;
    for (int j = 0; j < layers; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        affine_forward(trace.x[ju], model.mlp_w(j).value, model.mlp_b(j).value, trace.u[ju]);
        if (j + 1 < layers) {
            trace.x[ju + 1] = trace.u[ju];
            relu_inplace(trace.x[ju + 1]);
        }
    }
    const Mat<T>& logits = trace.u.back();
    if (logits.cols() != 1) throw std::logic_error("mlp_forward: final layer must be 1-wide");
    trace.probs.resize(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) trace.probs[r] = sigmoid(logits(r, 0));
    return trace.probs;
}

// d_logits: d(loss)/d(pre-sigmoid logits), one per row.  Accumulates MLP
// parameter grads and writes d(loss)/d(example embeddings) into d_examples.
template <class T>
void mlp_backward(Model<T>& model, MlpTrace<T>& trace, std::span<const T> d_logits,
                  Mat<T>& d_examples) {
    const int layers = model.num_mlp_layers();
    Mat<T> grad(trace.u.back().rows(), 1);
    for (std::size_t r = 0; r < grad.rows(); ++r) grad(r, 0) = d_logits[r];

    Mat<T> d_input;
    for (int j = layers - 1; j >= 0; --j) {
        const auto ju = static_cast<std::size_t>(j);
        Mat<T>* dx = (j == 0) ? &d_examples : &d_input;
        affine_backward(trace.x[ju], model.mlp_w(j).value, grad, dx, model.mlp_w(j).grad,
                        model.mlp_b(j).grad);
        if (j > 0) {
            relu_backward(trace.u[ju - 1], d_input);
            grad = std::move(d_input);
            d_input = Mat<T>();
        }
    }
}

// Probability that the example embedding describes a true neighborhood.
template <class T>
T predict(std::span<const T> example_embedding, Model<T>& model) {
    if (static_cast<int>(example_embedding.size()) != 2 * model.config.embed_dim)
        throw std::invalid_argument("predict: embedding length must be 2*embed_dim");
    Mat<T> e(1, example_embedding.size());
    std::copy(example_embedding.begin(), example_embedding.end(), e.row(0));
    MlpTrace<T> trace;
    return mlp_forward(model, e, trace)[0];
}

// --- full-model forward/backward ------------------------------------------------------

// Reusable buffers for one forward/backward step.
template <class T>
struct Workspace {
    GnnTrace<T> gnn;
    MlpTrace<T> mlp;
    Mat<T> examples;   // batch example embeddings (B x 2k)
    Mat<T> d_examples;
    Mat<T> d_emb;      // gradient wrt node embeddings (N x k)
    std::vector<T> labels;
};

// Full pipeline over one batch: whole-graph GNN forward, example assembly,
// MLP scores, mean BCE.  `batch` indexes into `examples`.
template <class T>
T model_loss_forward(Model<T>& model, const GraphPlan<T>& plan, const Mat<T>& features,
                     std::span<const LocalExample<T>> examples,
                     std::span<const std::size_t> batch, Workspace<T>& ws) {
    if (batch.empty()) throw std::invalid_argument("model_loss_forward: empty batch");
    const Mat<T>& emb = gnn_forward(plan, features, model, ws.gnn);

    const auto k = static_cast<std::size_t>(model.config.embed_dim);
    ws.examples.reshape_for(batch.size(), 2 * k);
    ws.labels.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& ex = examples[batch[i]];
        embed_example(emb, std::span<const NodeId>(ex.members), ex.target, ws.examples.row(i));
        ws.labels[i] = ex.label;
    }

    const auto& probs = mlp_forward(model, ws.examples, ws.mlp);
    return bce_loss<T>(probs, ws.labels);
}

// Backward of model_loss_forward; call immediately after it with the same
// arguments.  Parameter gradients accumulate (caller zeroes at step start).
template <class T>
void model_loss_backward(Model<T>& model, const GraphPlan<T>& plan,
                         std::span<const LocalExample<T>> examples,
                         std::span<const std::size_t> batch, Workspace<T>& ws) {
    const auto d_logits = bce_sigmoid_backward<T>(ws.mlp.probs, ws.labels);
    mlp_backward(model, ws.mlp, std::span<const T>(d_logits), ws.d_examples);

    const Mat<T>& emb = ws.gnn.h.back();
    const auto k = static_cast<std::size_t>(model.config.embed_dim);
    ws.d_emb.reshape_for(emb.rows(), k);
    ws.d_emb.fill(T(0));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& ex = examples[batch[i]];
        const T* de = ws.d_examples.row(i);
        const T inv = T(1) / static_cast<T>(ex.members.size());
        for (NodeId m : ex.members) {
            T* row = ws.d_emb.row(static_cast<std::size_t>(m));
            for (std::size_t c = 0; c < k; ++c) row[c] += de[c] * inv;
        }
        T* target_row = ws.d_emb.row(static_cast<std::size_t>(ex.target));
        for (std::size_t c = 0; c < k; ++c) target_row[c] += de[k + c];
    }

    gnn_backward(plan, model, ws.gnn, ws.d_emb);
}

// Branch signature of the most recent forward pass in ws: hashes ReLU
// activation masks, zero-norm rows, and probability clamp hits, so a
// finite-difference probe can detect when a perturbation crosses a kink.
template <class T>
std::uint64_t branch_signature(const Model<T>& model, const Workspace<T>& ws) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto feed = [&h](std::uint8_t byte) {
        h ^= byte;
        h *= 0x100000001b3ull;
    };
    const int gnn_layers = model.config.num_layers;
    for (int l = 0; l + 1 < gnn_layers; ++l) {
        const auto& pre = ws.gnn.pre[static_cast<std::size_t>(l)];
        for (std::size_t i = 0; i < pre.size(); ++i) feed(pre.data()[i] > T(0) ? 1 : 0);
    }
    if (model.config.normalize_after_relu)
        for (const auto& norms : ws.gnn.norms)
            for (T v : norms) feed(v > T(0) ? 1 : 0);
    for (int j = 0; j + 1 < model.num_mlp_layers(); ++j) {
        const auto& u = ws.mlp.u[static_cast<std::size_t>(j)];
        for (std::size_t i = 0; i < u.size(); ++i) feed(u.data()[i] > T(0) ? 1 : 0);
    }
    const T eps = static_cast<T>(kBceClamp);
    for (T p : ws.mlp.probs) feed(p < eps ? 1 : (p > T(1) - eps ? 2 : 0));
    return h;
}

// --- checkpoints ----------------------------------------------------------------------

inline constexpr const char* kCheckpointHeader = "#nodepred-checkpoint 1";

template <class T>
const char* precision_name() {
    return sizeof(T) == sizeof(double) ? "double" : "float";
}

template <class T>
void write_checkpoint(const std::string& path, const Model<T>& model) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open for writing: " + path);
    const auto& cfg = model.config;
    out << kCheckpointHeader << "\n";
    out << "precision " << precision_name<T>() << "\n";
    out << "layer_kind " << layer_kind_name(cfg.layer_kind) << "\n";
    out << "num_layers " << cfg.num_layers << "\n";
    out << "embed_dim " << cfg.embed_dim << "\n";
    out << "input_dim " << cfg.input_dim << "\n";
    out << "normalize_after_relu " << (cfg.normalize_after_relu ? 1 : 0) << "\n";
    out << "mlp_hidden_dims";
    for (int d : cfg.resolved_mlp_hidden_dims()) out << " " << d;
    out << "\n";
    out << "init_seed " << model.init_seed << "\n";
    out << "params " << model.params.size() << "\n";

    char buf[64];
    const char* fmt = sizeof(T) == sizeof(double) ? "%.17g" : "%.9g";
    for (const auto& p : model.params) {
        out << "param " << p.name << " " << p.value.rows() << " " << p.value.cols() << "\n";
        for (std::size_t r = 0; r < p.value.rows(); ++r) {
            for (std::size_t c = 0; c < p.value.cols(); ++c) {
                const int len =
                    std::snprintf(buf, sizeof buf, fmt, static_cast<double>(p.value(r, c)));
                if (c) out << " ";
                out.write(buf, len);
            }
            out << "\n";
        }
    }
    if (!out) throw std::invalid_argument("write failed: " + path);
}

struct CheckpointInfo {
    GnnConfig config;
    std::string precision;
    std::uint64_t init_seed = 0;
};

namespace detail {

inline std::string checkpoint_line(std::istream& in, const std::string& path,
                                   std::size_t& line_no) {
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!blank(line)) return line;
    }
    throw std::invalid_argument(path + ": truncated checkpoint");
}

inline CheckpointInfo read_checkpoint_head(std::istream& in, const std::string& path,
                                           std::size_t& line_no, std::size_t& param_count) {
    auto expect = [&](const char* key) {
        std::istringstream fields(checkpoint_line(in, path, line_no));
        std::string tag;
        fields >> tag;
        if (tag != key)
            throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": expected '" +
                                        key + "', found '" + tag + "'");
        return fields;
    };

    const std::string header = checkpoint_line(in, path, line_no);
    if (header != kCheckpointHeader)
        throw std::invalid_argument(path + ": bad checkpoint header '" + header + "'");

    CheckpointInfo info;
    {
        auto f = expect("precision");
        f >> info.precision;
        if (info.precision != "double" && info.precision != "float")
            throw std::invalid_argument(path + ": unknown precision '" + info.precision + "'");
    }
    {
        auto f = expect("layer_kind");
        std::string kind;
        f >> kind;
        info.config.layer_kind = layer_kind_from_name(kind);
    }
    expect("num_layers") >> info.config.num_layers;
    expect("embed_dim") >> info.config.embed_dim;
    expect("input_dim") >> info.config.input_dim;
    {
        int flag = 0;
        expect("normalize_after_relu") >> flag;
        info.config.normalize_after_relu = (flag != 0);
    }
    {
        auto f = expect("mlp_hidden_dims");
        int d;
        while (f >> d) info.config.mlp_hidden_dims.push_back(d);
    }
    expect("init_seed") >> info.init_seed;
    expect("params") >> param_count;
    info.config.validate();
    return info;
}

}  // namespace detail

// Config/precision peek without loading parameter data.
inline CheckpointInfo checkpoint_info(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open for reading: " + path);
    std::size_t line_no = 0, param_count = 0;
    return detail::read_checkpoint_head(in, path, line_no, param_count);
}

template <class T>
Model<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open for reading: " + path);
    std::size_t line_no = 0, param_count = 0;
    const CheckpointInfo info = detail::read_checkpoint_head(in, path, line_no, param_count);
    if (info.precision != precision_name<T>())
        throw std::invalid_argument(path + ": checkpoint precision is " + info.precision +
                                    ", loader expects " + precision_name<T>());

    Model<T> model = init_model<T>(info.config, info.init_seed);
    if (model.params.size() != param_count)
        throw std::invalid_argument(path + ": parameter count disagrees with config");

    for (auto& p : model.params) {
        std::istringstream fields(detail::checkpoint_line(in, path, line_no));
        std::string tag, name;
        std::size_t rows = 0, cols = 0;
        if (!(fields >> tag >> name >> rows >> cols) || tag != "param")
            throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                        ": expected 'param <name> <rows> <cols>'");
        if (name != p.name || rows != p.value.rows() || cols != p.value.cols())
            throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                        ": parameter '" + name + "' disagrees with config");
        for (std::size_t r = 0; r < rows; ++r) {
            std::istringstream row(detail::checkpoint_line(in, path, line_no));
            for (std::size_t c = 0; c < cols; ++c) {
                double v;
                if (!(row >> v))
                    throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                                ": short parameter row");
                p.value(r, c) = static_cast<T>(v);
            }
        }
        p.grad.fill(T(0));
    }
    return model;
}

}  // namespace nodepred
