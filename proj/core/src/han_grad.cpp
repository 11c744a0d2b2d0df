#include <cmath>

#include "bridgesentry/han.hpp"

namespace bridgesentry::han {

namespace {

inline double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

struct TensorView {
  std::string name;
  double* data;
  Eigen::Index size;
};

std::vector<TensorView> tensor_views(ModelParams& p) {
  std::vector<TensorView> out;
  p.visit([&](const std::string& name, auto& t) { out.push_back({name, t.data(), t.size()}); });
  return out;
}

}  // namespace

void accumulate_gradients(const ModelParams& params, const GraphInputs& inputs,
                          const ForwardTrace& trace, double sample_weight,
                          ModelParams& grads) {
  const int n = inputs.num_nodes();
  const int d = params.hp.embed_dim;
  const int dh = params.hp.head_dim();
  const int heads = params.hp.heads;
  const int num_classes = params.hp.num_classes;
  const int y = static_cast<int>(inputs.label);
  if (y < 0 || y >= num_classes) {
    throw DataError("gradients: graph " + inputs.graph_id + " is unlabeled");
  }

  // Loss is -sw * log(max(p_y, eps)); below the clamp the signal is zero.
  const double p_true = trace.probs(y);
  const double dp_true = p_true > 1e-12 ? -sample_weight / p_true : 0.0;
  Eigen::VectorXd dlogits(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    dlogits(c) = dp_true * p_true * ((c == y ? 1.0 : 0.0) - trace.probs(c));
  }
  grads.clf_w.noalias() += dlogits * trace.pooled.transpose();
  grads.clf_b += dlogits;
  const Eigen::VectorXd dpooled = params.clf_w.transpose() * dlogits;

  Eigen::MatrixXd dz_fused = Eigen::MatrixXd::Zero(d, n);
  switch (params.hp.pooling) {
    case Pooling::Mean: {
      const Eigen::VectorXd share = dpooled / static_cast<double>(n);
      for (int i = 0; i < n; ++i) dz_fused.col(i) = share;
      break;
    }
    case Pooling::Max:
      for (int r = 0; r < d; ++r) {
        dz_fused(r, trace.argmax_node[static_cast<std::size_t>(r)]) += dpooled(r);
      }
      break;
    case Pooling::SelfAttention:
      for (int i = 0; i < n; ++i) {
        const double score = trace.att_score(i);
        const double dscore = dpooled.dot(trace.Z.col(i)) * score * (1.0 - score);
        dz_fused.col(i) += score * dpooled + dscore * params.pool_w;
        grads.pool_w += dscore * trace.Z.col(i);
      }
      break;
  }

  const auto align_backward = [&](const Eigen::MatrixXd& dh_mat) {
    for (int i = 0; i < n; ++i) {
      const auto t = static_cast<std::size_t>(inputs.type_of[static_cast<std::size_t>(i)]);
      grads.align_w[t].noalias() += dh_mat.col(i) * inputs.raw.col(i).transpose();
      grads.align_b[t] += dh_mat.col(i);
    }
  };

  if (trace.no_ham) {
    align_backward(dz_fused);
    return;
  }

  const int num_paths = params.num_paths();

  // beta backward: dbeta_k = <dZ, Z^k>, where Z^k deviates from the trivial
  // embedding only at its override rows.
  const double base_inner = dz_fused.cwiseProduct(trace.Z_triv).sum();
  Eigen::VectorXd dbeta(num_paths);
  for (int k = 0; k < num_paths; ++k) {
    double v = base_inner;
    for (const auto& row : trace.paths[static_cast<std::size_t>(k)].rows) {
      v += dz_fused.col(row.node).dot(row.z - trace.Z_triv.col(row.node));
    }
    dbeta(k) = v;
  }
  const double beta_inner = trace.beta.dot(dbeta);
  const Eigen::VectorXd dscore =
      trace.beta.cwiseProduct(dbeta - Eigen::VectorXd::Constant(num_paths, beta_inner));

  // Per-node totals over the paths that override the node.
  Eigen::VectorXd beta_over = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd dscore_over = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < num_paths; ++k) {
    for (const auto& row : trace.paths[static_cast<std::size_t>(k)].rows) {
      beta_over(row.node) += trace.beta(k);
      dscore_over(row.node) += dscore(k);
    }
  }
  const double dscore_sum = dscore.sum();
  const double inv_n = 1.0 / static_cast<double>(n);

  // Shared (trivial) contributions: fusion plus the semantic-score term of
  // every path that does not override the node.
  Eigen::MatrixXd dz_triv = Eigen::MatrixXd::Zero(d, n);
  for (int i = 0; i < n; ++i) {
    dz_triv.col(i) += (1.0 - beta_over(i)) * dz_fused.col(i);
    const double coeff = (dscore_sum - dscore_over(i)) * inv_n;
    const Eigen::VectorXd tanh_grad =
        Eigen::VectorXd::Ones(params.hp.semantic_dim) - trace.U_triv.col(i).cwiseProduct(trace.U_triv.col(i));
    const Eigen::VectorXd dv = coeff * params.inter_q.cwiseProduct(tanh_grad);
    grads.inter_w.noalias() += dv * trace.Z_triv.col(i).transpose();
    grads.inter_b += dv;
    grads.inter_q += coeff * trace.U_triv.col(i);
    dz_triv.col(i).noalias() += params.inter_w.transpose() * dv;
  }

  // Override rows: fusion + semantic score, then intra attention.
  std::vector<Eigen::MatrixXd> dg(static_cast<std::size_t>(heads),
                                  Eigen::MatrixXd::Zero(dh, n));
  for (int k = 0; k < num_paths; ++k) {
    const auto& pt = trace.paths[static_cast<std::size_t>(k)];
    const auto& k_rows = inputs.path_rows[static_cast<std::size_t>(k)].rows;
    for (std::size_t ri = 0; ri < pt.rows.size(); ++ri) {
      const IntraRow& row = pt.rows[ri];
      const std::vector<int>& neighbors = k_rows[ri].second;
      const int i = row.node;

      Eigen::VectorXd dz_row = trace.beta(k) * dz_fused.col(i);
      const double coeff = dscore(k) * inv_n;
      const Eigen::VectorXd tanh_grad =
          Eigen::VectorXd::Ones(params.hp.semantic_dim) - row.u.cwiseProduct(row.u);
      const Eigen::VectorXd dv = coeff * params.inter_q.cwiseProduct(tanh_grad);
      grads.inter_w.noalias() += dv * row.z.transpose();
      grads.inter_b += dv;
      grads.inter_q += coeff * row.u;
      dz_row.noalias() += params.inter_w.transpose() * dv;

      for (int m = 0; m < heads; ++m) {
        const auto mu = static_cast<std::size_t>(m);
        const auto& g = trace.G[mu];
        const auto& attn = params.attn_a[static_cast<std::size_t>(k)][mu];
        const auto count = static_cast<Eigen::Index>(neighbors.size());

        const Eigen::VectorXd ds =
            dz_row.segment(m * dh, dh)
                .cwiseProduct(row.aggregate[mu].unaryExpr([](double x) { return elu_grad(x); }));

        Eigen::VectorXd dalpha(count);
        for (Eigen::Index j = 0; j < count; ++j) {
          const int nbr = neighbors[static_cast<std::size_t>(j)];
          dalpha(j) = ds.dot(g.col(nbr));
          dg[mu].col(nbr) += row.alpha[mu](j) * ds;
        }
        const double alpha_inner = row.alpha[mu].dot(dalpha);
        Eigen::VectorXd dc(count);
        for (Eigen::Index j = 0; j < count; ++j) {
          const double dact = row.alpha[mu](j) * (dalpha(j) - alpha_inner);
          dc(j) = dact * (row.logit_pre[mu](j) > 0.0 ? 1.0 : params.hp.leaky_slope);
        }
        const double dc_sum = dc.sum();
        auto& ga = grads.attn_a[static_cast<std::size_t>(k)][mu];
        ga.head(dh) += dc_sum * g.col(i);
        dg[mu].col(i) += dc_sum * attn.head(dh);
        for (Eigen::Index j = 0; j < count; ++j) {
          const int nbr = neighbors[static_cast<std::size_t>(j)];
          ga.tail(dh) += dc(j) * g.col(nbr);
          dg[mu].col(nbr) += dc(j) * attn.tail(dh);
        }
      }
    }
  }

  // Trivial embedding backward through the per-head ELU.
  for (int m = 0; m < heads; ++m) {
    const auto mu = static_cast<std::size_t>(m);
    dg[mu] += dz_triv.middleRows(m * dh, dh)
                  .cwiseProduct(trace.G[mu].unaryExpr([](double x) { return elu_grad(x); }));
  }

  Eigen::MatrixXd dh_mat = Eigen::MatrixXd::Zero(d, n);
  for (int m = 0; m < heads; ++m) {
    const auto mu = static_cast<std::size_t>(m);
    grads.head_w[mu].noalias() += dg[mu] * trace.H.transpose();
    dh_mat.noalias() += params.head_w[mu].transpose() * dg[mu];
  }
  align_backward(dh_mat);
}

void check_finite(const ModelParams& grads) {
  grads.visit([](const std::string& name, const auto& tensor) {
    if (!tensor.allFinite()) {
      throw DataError("non-finite gradient in parameter " + name);
    }
  });
}

BatchGradients gradients(const ModelParams& params, const std::vector<const GraphInputs*>& batch,
                         const Eigen::VectorXd& class_weights, bool no_ham) {
  if (batch.empty()) throw DataError("gradients: empty batch");
  BatchGradients out;
  out.grads = ModelParams::zeros(params.hp, params.num_paths());
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (const GraphInputs* inputs : batch) {
    const ForwardTrace trace = forward(params, *inputs, no_ham);
    const int y = static_cast<int>(inputs->label);
    if (y < 0 || y >= params.hp.num_classes) {
      throw DataError("gradients: graph " + inputs->graph_id + " is unlabeled");
    }
    out.loss += class_weights(y) * -std::log(std::max(trace.probs(y), 1e-12)) * inv_batch;
    accumulate_gradients(params, *inputs, trace, class_weights(y) * inv_batch, out.grads);
  }
  check_finite(out.grads);
  return out;
}

Adam::Adam(const ModelParams& shape, double learning_rate, double weight_decay)
    : lr_(learning_rate),
      weight_decay_(weight_decay),
      m_(ModelParams::zeros(shape.hp, shape.num_paths())),
      v_(ModelParams::zeros(shape.hp, shape.num_paths())) {}

void Adam::step(ModelParams& params, const ModelParams& grads) {
  ++t_;
  const double correction1 = 1.0 - std::pow(beta1_, t_);
  const double correction2 = 1.0 - std::pow(beta2_, t_);

  auto p_views = tensor_views(params);
  auto g_views = tensor_views(const_cast<ModelParams&>(grads));
  auto m_views = tensor_views(m_);
  auto v_views = tensor_views(v_);
  if (p_views.size() != g_views.size()) {
    throw DataError("Adam: parameter/gradient shape mismatch");
  }
  for (std::size_t i = 0; i < p_views.size(); ++i) {
    double* p = p_views[i].data;
    const double* g = g_views[i].data;
    double* m = m_views[i].data;
    double* v = v_views[i].data;
    if (p_views[i].size != g_views[i].size) {
      throw DataError("Adam: size mismatch in " + p_views[i].name);
    }
    for (Eigen::Index j = 0; j < p_views[i].size; ++j) {
      const double grad = g[j] + weight_decay_ * p[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * grad;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * grad * grad;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

}  // namespace bridgesentry::han
