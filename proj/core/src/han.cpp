#include "bridgesentry/han.hpp"

#include <algorithm>
#include <cmath>

namespace bridgesentry::han {

std::string pooling_name(Pooling p) {
  switch (p) {
    case Pooling::Mean: return "mean";
    case Pooling::Max: return "max";
    case Pooling::SelfAttention: return "att";
  }
  return "max";
}

Pooling pooling_from_name(const std::string& s) {
  if (s == "mean") return Pooling::Mean;
  if (s == "max") return Pooling::Max;
  if (s == "att" || s == "self-attention") return Pooling::SelfAttention;
  throw DataError("unknown pooling method: " + s);
}

void HyperParams::validate() const {
  if (embed_dim < 1 || heads < 1 || semantic_dim < 1 || text_dim < 1) {
    throw DataError("hyperparams: dimensions must be positive");
  }
  if (embed_dim % heads != 0) {
    throw DataError("hyperparams: embed_dim must be divisible by heads");
  }
  if (num_classes != kNumClasses) {
    throw DataError("hyperparams: classifier must have 4 classes");
  }
  if (leaky_slope <= 0.0 || leaky_slope >= 1.0) {
    throw DataError("hyperparams: leaky_slope must be in (0, 1)");
  }
}

namespace {

double glorot_limit(int fan_in, int fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void fill_glorot(Eigen::MatrixXd& m, Rng& rng) {
  const double limit = glorot_limit(static_cast<int>(m.cols()), static_cast<int>(m.rows()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-limit, limit);
  }
}

void fill_glorot(Eigen::VectorXd& v, Rng& rng) {
  const double limit = glorot_limit(static_cast<int>(v.size()), 1);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-limit, limit);
}

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
inline double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  // Scalar std::exp underflows saturated entries to exact zeros, which
  // Eigen's clamped vector exp does not.
  Eigen::VectorXd out(logits.size());
  const double mx = logits.maxCoeff();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    out(i) = std::exp(logits(i) - mx);
    sum += out(i);
  }
  out /= sum;
  return out;
}

}  // namespace

ModelParams ModelParams::zeros(const HyperParams& hp, int num_paths) {
  hp.validate();
  ModelParams p;
  p.hp = hp;
  const int d = hp.embed_dim;
  const int dh = hp.head_dim();
  p.align_w.assign(kNumNodeTypes, Eigen::MatrixXd::Zero(d, hp.raw_dim()));
  p.align_b.assign(kNumNodeTypes, Eigen::VectorXd::Zero(d));
  p.head_w.assign(static_cast<std::size_t>(hp.heads), Eigen::MatrixXd::Zero(dh, d));
  p.attn_a.assign(static_cast<std::size_t>(num_paths),
                  std::vector<Eigen::VectorXd>(static_cast<std::size_t>(hp.heads),
                                               Eigen::VectorXd::Zero(2 * dh)));
  p.inter_w = Eigen::MatrixXd::Zero(hp.semantic_dim, d);
  p.inter_b = Eigen::VectorXd::Zero(hp.semantic_dim);
  p.inter_q = Eigen::VectorXd::Zero(hp.semantic_dim);
  p.pool_w = Eigen::VectorXd::Zero(d);
  p.clf_w = Eigen::MatrixXd::Zero(hp.num_classes, d);
  p.clf_b = Eigen::VectorXd::Zero(hp.num_classes);
  return p;
}

ModelParams ModelParams::glorot(const HyperParams& hp, int num_paths, Rng& rng) {
  ModelParams p = zeros(hp, num_paths);
  for (auto& w : p.align_w) fill_glorot(w, rng);
  for (auto& w : p.head_w) fill_glorot(w, rng);
  for (auto& per_path : p.attn_a) {
    for (auto& a : per_path) fill_glorot(a, rng);
  }
  fill_glorot(p.inter_w, rng);
  fill_glorot(p.inter_q, rng);
  fill_glorot(p.pool_w, rng);
  fill_glorot(p.clf_w, rng);
  return p;
}

GraphInputs GraphInputs::build(const xbhg::XbhgGraph& graph,
                               const std::vector<metapath::MetaPath>& paths) {
  const int n = graph.num_nodes();
  if (n == 0) throw DataError("GraphInputs: graph " + graph.graph_id + " has no nodes");
  const std::size_t dt = graph.nodes.front().features.size();
  if (dt == 0) {
    throw DataError("GraphInputs: graph " + graph.graph_id + " has no features; run init_features");
  }

  GraphInputs inputs;
  inputs.graph_id = graph.graph_id;
  inputs.label = graph.label;
  inputs.raw.resize(static_cast<Eigen::Index>(dt), n);
  inputs.type_of.resize(static_cast<std::size_t>(n));
  for (const auto& node : graph.nodes) {
    if (node.features.size() != dt) {
      throw DataError("GraphInputs: inconsistent feature length in graph " + graph.graph_id);
    }
    for (std::size_t i = 0; i < dt; ++i) {
      inputs.raw(static_cast<Eigen::Index>(i), node.id) = node.features[i];
    }
    inputs.type_of[static_cast<std::size_t>(node.id)] = static_cast<int>(node.ntype);
  }
  inputs.path_rows.reserve(paths.size());
  for (const auto& path : paths) {
    inputs.path_rows.push_back(metapath::neighbor_rows(graph, path));
  }
  return inputs;
}

Eigen::MatrixXd align_features(const ModelParams& params, const GraphInputs& inputs) {
  const int n = inputs.num_nodes();
  if (inputs.raw.rows() != params.hp.raw_dim()) {
    throw DataError("align_features: raw feature length " + std::to_string(inputs.raw.rows()) +
                    " does not match model raw_dim " + std::to_string(params.hp.raw_dim()) +
                    " (graph " + inputs.graph_id + ")");
  }
  Eigen::MatrixXd h(params.hp.embed_dim, n);
  for (int i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(inputs.type_of[static_cast<std::size_t>(i)]);
    h.col(i) = params.align_w[t] * inputs.raw.col(i) + params.align_b[t];
  }
  return h;
}

namespace {

// Attention over one neighbor row for one head. Fills logits, alpha and the
// pre-activation aggregate.
void attend_row(const ModelParams& params, const Eigen::MatrixXd& g, int node,
                const std::vector<int>& neighbors, const Eigen::VectorXd& attn,
                Eigen::VectorXd& logit_pre, Eigen::VectorXd& alpha, Eigen::VectorXd& aggregate) {
  const int dh = params.hp.head_dim();
  const auto a_self = attn.head(dh);
  const auto a_nbr = attn.tail(dh);
  const double base = a_self.dot(g.col(node));
  const auto count = static_cast<Eigen::Index>(neighbors.size());

  logit_pre.resize(count);
  for (Eigen::Index j = 0; j < count; ++j) {
    logit_pre(j) = base + a_nbr.dot(g.col(neighbors[static_cast<std::size_t>(j)]));
  }
  Eigen::VectorXd activated(count);
  for (Eigen::Index j = 0; j < count; ++j) {
    const double c = logit_pre(j);
    activated(j) = c > 0.0 ? c : params.hp.leaky_slope * c;
  }
  alpha = softmax(activated);
  aggregate = Eigen::VectorXd::Zero(dh);
  for (Eigen::Index j = 0; j < count; ++j) {
    aggregate += alpha(j) * g.col(neighbors[static_cast<std::size_t>(j)]);
  }
}

IntraRow make_intra_row(const ModelParams& params, const std::vector<Eigen::MatrixXd>& g,
                        int node, const std::vector<int>& neighbors, int path_index) {
  const int dh = params.hp.head_dim();
  const int heads = params.hp.heads;
  IntraRow row;
  row.node = node;
  row.logit_pre.resize(static_cast<std::size_t>(heads));
  row.alpha.resize(static_cast<std::size_t>(heads));
  row.aggregate.resize(static_cast<std::size_t>(heads));
  row.z.resize(params.hp.embed_dim);
  for (int m = 0; m < heads; ++m) {
    const auto mu = static_cast<std::size_t>(m);
    attend_row(params, g[mu], node, neighbors,
               params.attn_a[static_cast<std::size_t>(path_index)][mu], row.logit_pre[mu],
               row.alpha[mu], row.aggregate[mu]);
    row.z.segment(m * dh, dh) = row.aggregate[mu].unaryExpr([](double x) { return elu(x); });
  }
  return row;
}

std::vector<Eigen::MatrixXd> head_transforms(const ModelParams& params,
                                             const Eigen::MatrixXd& h) {
  std::vector<Eigen::MatrixXd> g;
  g.reserve(params.head_w.size());
  for (const auto& w : params.head_w) g.push_back(w * h);
  return g;
}

Eigen::MatrixXd trivial_embeddings(const ModelParams& params,
                                   const std::vector<Eigen::MatrixXd>& g) {
  const int dh = params.hp.head_dim();
  Eigen::MatrixXd z(params.hp.embed_dim, g.empty() ? 0 : g.front().cols());
  for (int m = 0; m < params.hp.heads; ++m) {
    z.middleRows(m * dh, dh) =
        g[static_cast<std::size_t>(m)].unaryExpr([](double x) { return elu(x); });
  }
  return z;
}

}  // namespace

Eigen::MatrixXd intra_path_attention(const ModelParams& params, const GraphInputs& inputs,
                                     int path_index, const Eigen::MatrixXd& H) {
  if (path_index < 0 || path_index >= params.num_paths()) {
    throw DataError("intra_path_attention: path index out of range");
  }
  if (static_cast<std::size_t>(path_index) >= inputs.path_rows.size()) {
    throw DataError("intra_path_attention: inputs carry no rows for this path");
  }
  const auto g = head_transforms(params, H);
  // Nodes without meta-path neighbors attend to themselves only.
  Eigen::MatrixXd z = trivial_embeddings(params, g);
  for (const auto& [node, neighbors] :
       inputs.path_rows[static_cast<std::size_t>(path_index)].rows) {
    z.col(node) = make_intra_row(params, g, node, neighbors, path_index).z;
  }
  return z;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> inter_path_attention(
    const ModelParams& params, const std::vector<Eigen::MatrixXd>& path_embeddings) {
  if (path_embeddings.empty()) {
    throw DataError("inter_path_attention: need at least one path embedding");
  }
  const auto p = static_cast<Eigen::Index>(path_embeddings.size());
  const auto n = path_embeddings.front().cols();
  Eigen::VectorXd scores(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const auto& z = path_embeddings[static_cast<std::size_t>(k)];
    if (z.cols() != n || z.rows() != params.hp.embed_dim) {
      throw DataError("inter_path_attention: inconsistent embedding shapes");
    }
    const Eigen::MatrixXd u = ((params.inter_w * z).colwise() + params.inter_b)
                                  .unaryExpr([](double x) { return std::tanh(x); });
    scores(k) = (params.inter_q.transpose() * u).sum() / static_cast<double>(n);
  }
  const Eigen::VectorXd beta = softmax(scores);
  Eigen::MatrixXd fused = Eigen::MatrixXd::Zero(params.hp.embed_dim, n);
  for (Eigen::Index k = 0; k < p; ++k) {
    fused += beta(k) * path_embeddings[static_cast<std::size_t>(k)];
  }
  return {std::move(fused), beta};
}

Eigen::VectorXd pool(const Eigen::MatrixXd& embeddings, Pooling method,
                     const ModelParams& params) {
  if (embeddings.cols() == 0) throw DataError("pool: empty graph");
  switch (method) {
    case Pooling::Mean:
      return embeddings.rowwise().mean();
    case Pooling::Max:
      return embeddings.rowwise().maxCoeff();
    case Pooling::SelfAttention: {
      Eigen::VectorXd out = Eigen::VectorXd::Zero(embeddings.rows());
      for (Eigen::Index i = 0; i < embeddings.cols(); ++i) {
        const double score = 1.0 / (1.0 + std::exp(-params.pool_w.dot(embeddings.col(i))));
        out += score * embeddings.col(i);
      }
      return out;
    }
  }
  throw DataError("pool: unknown method");
}

Eigen::VectorXd classify(const ModelParams& params, const Eigen::VectorXd& pooled) {
  return softmax(params.clf_w * pooled + params.clf_b);
}

double loss(const std::vector<Eigen::VectorXd>& probs, const std::vector<Label>& labels,
            const Eigen::VectorXd& class_weights) {
  if (probs.size() != labels.size() || probs.empty()) {
    throw DataError("loss: probs and labels must be nonempty and parallel");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const int y = static_cast<int>(labels[i]);
    if (y < 0 || y >= kNumClasses) throw DataError("loss: sample " + std::to_string(i) + " is unlabeled");
    total += class_weights(y) * -std::log(std::max(probs[i](y), 1e-12));
  }
  return total / static_cast<double>(probs.size());
}

ForwardTrace forward(const ModelParams& params, const GraphInputs& inputs, bool no_ham) {
  params.hp.validate();
  const int n = inputs.num_nodes();
  const int num_paths = params.num_paths();
  if (!no_ham && num_paths == 0) {
    throw DataError("forward: model has no meta-paths");
  }
  if (!no_ham && static_cast<int>(inputs.path_rows.size()) != num_paths) {
    throw DataError("forward: graph " + inputs.graph_id + " was prepared for " +
                    std::to_string(inputs.path_rows.size()) + " paths, model has " +
                    std::to_string(num_paths));
  }

  ForwardTrace trace;
  trace.no_ham = no_ham;
  trace.H = align_features(params, inputs);

  if (no_ham) {
    trace.Z = trace.H;
  } else {
    trace.G = head_transforms(params, trace.H);
    trace.Z_triv = trivial_embeddings(params, trace.G);

    trace.paths.resize(static_cast<std::size_t>(num_paths));
    for (int k = 0; k < num_paths; ++k) {
      auto& pt = trace.paths[static_cast<std::size_t>(k)];
      const auto& rows = inputs.path_rows[static_cast<std::size_t>(k)].rows;
      pt.rows.reserve(rows.size());
      for (const auto& [node, neighbors] : rows) {
        pt.rows.push_back(make_intra_row(params, trace.G, node, neighbors, k));
      }
    }

    // Inter-path attention. Path embeddings differ from the trivial
    // embedding only at their override rows, so the per-node semantic
    // scores are shared and corrected per path.
    trace.U_triv = ((params.inter_w * trace.Z_triv).colwise() + params.inter_b)
                       .unaryExpr([](double x) { return std::tanh(x); });
    trace.t_triv = trace.U_triv.transpose() * params.inter_q;
    const double base_sum = trace.t_triv.sum();

    Eigen::VectorXd scores(num_paths);
    for (int k = 0; k < num_paths; ++k) {
      auto& pt = trace.paths[static_cast<std::size_t>(k)];
      double s = base_sum;
      for (auto& row : pt.rows) {
        row.u = ((params.inter_w * row.z) + params.inter_b)
                    .unaryExpr([](double x) { return std::tanh(x); });
        s += params.inter_q.dot(row.u) - trace.t_triv(row.node);
      }
      pt.score = s / static_cast<double>(n);
      scores(k) = pt.score;
    }
    trace.beta = softmax(scores);

    trace.Z = trace.Z_triv;
    for (int k = 0; k < num_paths; ++k) {
      const auto& pt = trace.paths[static_cast<std::size_t>(k)];
      for (const auto& row : pt.rows) {
        trace.Z.col(row.node) += trace.beta(k) * (row.z - trace.Z_triv.col(row.node));
      }
    }
  }

  switch (params.hp.pooling) {
    case Pooling::Mean:
      trace.pooled = trace.Z.rowwise().mean();
      break;
    case Pooling::Max: {
      trace.pooled.resize(trace.Z.rows());
      trace.argmax_node.assign(static_cast<std::size_t>(trace.Z.rows()), 0);
      for (Eigen::Index r = 0; r < trace.Z.rows(); ++r) {
        int best = 0;
        for (int i = 1; i < n; ++i) {
          if (trace.Z(r, i) > trace.Z(r, best)) best = i;
        }
        trace.argmax_node[static_cast<std::size_t>(r)] = best;
        trace.pooled(r) = trace.Z(r, best);
      }
      break;
    }
    case Pooling::SelfAttention: {
      trace.att_score.resize(n);
      trace.pooled = Eigen::VectorXd::Zero(trace.Z.rows());
      for (int i = 0; i < n; ++i) {
        trace.att_score(i) = 1.0 / (1.0 + std::exp(-params.pool_w.dot(trace.Z.col(i))));
        trace.pooled += trace.att_score(i) * trace.Z.col(i);
      }
      break;
    }
  }

  trace.logits = params.clf_w * trace.pooled + params.clf_b;
  trace.probs = softmax(trace.logits);
  return trace;
}

Label predict(const Eigen::VectorXd& probs) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(probs.size()); ++c) {
    if (probs(c) > probs(best)) best = c;
  }
  return static_cast<Label>(best);
}

}  // namespace bridgesentry::han
