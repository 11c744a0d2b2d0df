#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "bridgesentry/metapath.hpp"
#include "bridgesentry/rng.hpp"
#include "bridgesentry/types.hpp"
#include "bridgesentry/xbhg.hpp"

namespace bridgesentry::han {

enum class Pooling { Mean, Max, SelfAttention };

std::string pooling_name(Pooling p);
Pooling pooling_from_name(const std::string& s);

struct HyperParams {
  int embed_dim = 64;     // d; equals heads * head_dim
  int heads = 4;          // M
  int semantic_dim = 64;  // d_s
  int num_classes = kNumClasses;
  Pooling pooling = Pooling::Max;
  double leaky_slope = 0.2;
  int text_dim = 64;  // raw feature length is 2 + text_dim for every type

  int head_dim() const { return embed_dim / heads; }
  int raw_dim() const { return 2 + text_dim; }
  void validate() const;
};

// All trainable parameters. The per-head transform is shared across
// meta-paths; the attention vector is per (path, head).
struct ModelParams {
  HyperParams hp;
  std::vector<Eigen::MatrixXd> align_w;              // per node type, d x d_t
  std::vector<Eigen::VectorXd> align_b;              // per node type, d
  std::vector<Eigen::MatrixXd> head_w;               // per head, d_head x d
  std::vector<std::vector<Eigen::VectorXd>> attn_a;  // per path, per head, 2*d_head
  Eigen::MatrixXd inter_w;                           // d_s x d
  Eigen::VectorXd inter_b;                           // d_s
  Eigen::VectorXd inter_q;                           // d_s
  Eigen::VectorXd pool_w;                            // d
  Eigen::MatrixXd clf_w;                             // C x d
  Eigen::VectorXd clf_b;                             // C

  int num_paths() const { return static_cast<int>(attn_a.size()); }

  static ModelParams glorot(const HyperParams& hp, int num_paths, Rng& rng);
  static ModelParams zeros(const HyperParams& hp, int num_paths);

  // Visits every tensor as (name, Eigen::MatrixXd&) or (name,
  // Eigen::VectorXd&), in a fixed order shared by the optimizer, the
  // checkpoint writer and the gradient checks.
  template <typename Self, typename F>
  static void visit_impl(Self& p, F&& f) {
    for (int t = 0; t < kNumNodeTypes; ++t) {
      const std::string sym(1, node_type_symbol(static_cast<NodeType>(t)));
      f("align.W." + sym, p.align_w[static_cast<std::size_t>(t)]);
      f("align.b." + sym, p.align_b[static_cast<std::size_t>(t)]);
    }
    for (std::size_t m = 0; m < p.head_w.size(); ++m) {
      f("head.W.h" + std::to_string(m), p.head_w[m]);
    }
    for (std::size_t k = 0; k < p.attn_a.size(); ++k) {
      for (std::size_t m = 0; m < p.attn_a[k].size(); ++m) {
        f("intra.a.p" + std::to_string(k) + ".h" + std::to_string(m), p.attn_a[k][m]);
      }
    }
    f("inter.W", p.inter_w);
    f("inter.b", p.inter_b);
    f("inter.q", p.inter_q);
    f("pool.w", p.pool_w);
    f("clf.W", p.clf_w);
    f("clf.b", p.clf_b);
  }
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, std::forward<F>(f));
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, std::forward<F>(f));
  }
};

// Model-ready view of one graph: raw feature matrix, node types, label and
// the per-path nontrivial neighbor rows.
struct GraphInputs {
  Eigen::MatrixXd raw;       // d_t x N
  std::vector<int> type_of;  // node -> node type index
  Label label = Label::Unlabeled;
  std::string graph_id;
  std::vector<metapath::PathNeighborRows> path_rows;  // one per selected path

  int num_nodes() const { return static_cast<int>(type_of.size()); }

  static GraphInputs build(const xbhg::XbhgGraph& graph,
                           const std::vector<metapath::MetaPath>& paths);
};

// Forward intermediates kept for backprop and for invariant checks.
struct IntraRow {
  int node = 0;
  std::vector<Eigen::VectorXd> logit_pre;  // per head: pre-LeakyReLU logits over neighbors
  std::vector<Eigen::VectorXd> alpha;      // per head: softmax weights over neighbors
  std::vector<Eigen::VectorXd> aggregate;  // per head: pre-ELU aggregate (d_head)
  Eigen::VectorXd z;                       // d, concat over heads
  Eigen::VectorXd u;                       // d_s, tanh(inter.W z + inter.b)
};

struct PathTrace {
  std::vector<IntraRow> rows;  // parallel to GraphInputs::path_rows[k].rows
  double score = 0.0;          // w_psi before softmax
};

struct ForwardTrace {
  bool no_ham = false;
  Eigen::MatrixXd H;               // d x N aligned features
  std::vector<Eigen::MatrixXd> G;  // per head, d_head x N
  Eigen::MatrixXd Z_triv;          // d x N: embedding of a node with no path neighbors
  Eigen::MatrixXd U_triv;          // d_s x N
  Eigen::VectorXd t_triv;          // N: q . U_triv column
  std::vector<PathTrace> paths;
  Eigen::VectorXd beta;    // P path weights
  Eigen::MatrixXd Z;       // d x N fused embeddings
  Eigen::VectorXd pooled;  // d
  std::vector<int> argmax_node;  // max pooling: winning node per coordinate
  Eigen::VectorXd att_score;     // self-attention pooling: sigmoid scores
  Eigen::VectorXd logits;        // C
  Eigen::VectorXd probs;         // C
};

// h = W_t x + b_t per node; columns are nodes.
Eigen::MatrixXd align_features(const ModelParams& params, const GraphInputs& inputs);

// Z^psi for one selected path (columns are nodes).
Eigen::MatrixXd intra_path_attention(const ModelParams& params, const GraphInputs& inputs,
                                     int path_index, const Eigen::MatrixXd& H);

// Fuses per-path embeddings; returns (Z, beta).
std::pair<Eigen::MatrixXd, Eigen::VectorXd> inter_path_attention(
    const ModelParams& params, const std::vector<Eigen::MatrixXd>& path_embeddings);

Eigen::VectorXd pool(const Eigen::MatrixXd& embeddings, Pooling method,
                     const ModelParams& params);

Eigen::VectorXd classify(const ModelParams& params, const Eigen::VectorXd& pooled);

// Class-weighted cross entropy, mean over the batch; log is clamped at 1e-12.
double loss(const std::vector<Eigen::VectorXd>& probs, const std::vector<Label>& labels,
            const Eigen::VectorXd& class_weights);

ForwardTrace forward(const ModelParams& params, const GraphInputs& inputs,
                     bool no_ham = false);

Label predict(const Eigen::VectorXd& probs);

// Adds d(sample_weight * CE(graph)) / d(params) into `grads`. sample_weight
// carries the class weight and the 1/batch factor.
void accumulate_gradients(const ModelParams& params, const GraphInputs& inputs,
                          const ForwardTrace& trace, double sample_weight,
                          ModelParams& grads);

struct BatchGradients {
  ModelParams grads;
  double loss = 0.0;
};

// Exact analytic gradients of the batch loss; throws on non-finite entries,
// naming the parameter.
BatchGradients gradients(const ModelParams& params,
                         const std::vector<const GraphInputs*>& batch,
                         const Eigen::VectorXd& class_weights, bool no_ham = false);

void check_finite(const ModelParams& grads);

// Adaptive moment estimation with bias correction and optional decoupled L2.
class Adam {
 public:
  Adam(const ModelParams& shape, double learning_rate, double weight_decay = 0.0);
  void step(ModelParams& params, const ModelParams& grads);

 private:
  double lr_;
  double weight_decay_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  int t_ = 0;
  ModelParams m_, v_;
};

}  // namespace bridgesentry::han
