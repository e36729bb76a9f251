#include "codesign/tape.hpp"

#include "codesign/errors.hpp"

namespace codesign {

Tape::NodeId Tape::push(Eigen::MatrixXd value,
                        std::function<void(Tape&, const Eigen::MatrixXd&)> back) {
  Node n;
  n.value = std::move(value);
  n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

void Tape::accumulate(NodeId id, const Eigen::MatrixXd& g) { nodes_[id].grad += g; }

Tape::NodeId Tape::constant(const Eigen::MatrixXd& v) { return push(v, nullptr); }

Tape::NodeId Tape::leaf(const Eigen::MatrixXd& v) { return push(v, nullptr); }

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  if (nodes_[a].value.cols() != nodes_[b].value.rows())
    throw DimensionError("tape matmul: inner dimensions differ");
  return push(nodes_[a].value * nodes_[b].value, [a, b](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, g * t.nodes_[b].value.transpose());
    t.accumulate(b, t.nodes_[a].value.transpose() * g);
  });
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  if (nodes_[a].value.rows() != nodes_[b].value.rows() ||
      nodes_[a].value.cols() != nodes_[b].value.cols())
    throw DimensionError("tape add: shape mismatch");
  return push(nodes_[a].value + nodes_[b].value, [a, b](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  if (nodes_[a].value.rows() != nodes_[b].value.rows() ||
      nodes_[a].value.cols() != nodes_[b].value.cols())
    throw DimensionError("tape sub: shape mismatch");
  return push(nodes_[a].value - nodes_[b].value, [a, b](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Tape::NodeId Tape::add_bias(NodeId a, NodeId bias) {
  if (nodes_[bias].value.cols() != 1 || nodes_[bias].value.rows() != nodes_[a].value.rows())
    throw DimensionError("tape add_bias: bias must be a matching column vector");
  return push(nodes_[a].value.colwise() + Eigen::VectorXd(nodes_[bias].value.col(0)),
              [a, bias](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a, g);
                t.accumulate(bias, g.rowwise().sum());
              });
}

Tape::NodeId Tape::relu(NodeId a) {
  return push(nodes_[a].value.cwiseMax(0.0), [a](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, (t.nodes_[a].value.array() > 0).cast<double>().matrix().cwiseProduct(g));
  });
}

Tape::NodeId Tape::scale(NodeId a, double alpha) {
  return push(alpha * nodes_[a].value, [a, alpha](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, alpha * g);
  });
}

Tape::NodeId Tape::reshape(NodeId a, int rows, int cols) {
  if (nodes_[a].value.size() != static_cast<long>(rows) * cols)
    throw DimensionError("tape reshape: element count mismatch");
  Eigen::MatrixXd v = Eigen::Map<const Eigen::MatrixXd>(nodes_[a].value.data(), rows, cols);
  return push(std::move(v), [a](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, Eigen::Map<const Eigen::MatrixXd>(g.data(), t.nodes_[a].value.rows(),
                                                      t.nodes_[a].value.cols()));
  });
}

Tape::NodeId Tape::columns(NodeId a, int first, int count) {
  if (first < 0 || first + count > nodes_[a].value.cols())
    throw DimensionError("tape columns: range out of bounds");
  return push(nodes_[a].value.middleCols(first, count),
              [a, first, count](Tape& t, const Eigen::MatrixXd& g) {
                Eigen::MatrixXd full = Eigen::MatrixXd::Zero(t.nodes_[a].value.rows(),
                                                             t.nodes_[a].value.cols());
                full.middleCols(first, count) = g;
                t.accumulate(a, full);
              });
}

Tape::NodeId Tape::sum_sq(NodeId a) {
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = nodes_[a].value.squaredNorm();
  return push(v, [a](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, 2.0 * g(0, 0) * t.nodes_[a].value);
  });
}

Tape::NodeId Tape::qp_plan(const QpJacobianContext& ctx, NodeId s_hat,
                           const Eigen::MatrixXd& u_plan, NodeId x_node) {
  if (nodes_[s_hat].value.rows() != ctx.n || nodes_[s_hat].value.cols() != ctx.H)
    throw DimensionError("tape qp_plan: forecast node must be p x H");
  return push(u_plan, [ctx, s_hat, x_node](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(s_hat, qp_plan_vjp(ctx, g));
    if (x_node >= 0) t.accumulate(x_node, qp_plan_vjp_state(ctx, g));
  });
}

void Tape::backward(NodeId seed) {
  if (seed < 0 || seed >= size()) throw DimensionError("tape backward: bad seed id");
  if (nodes_[seed].value.size() != 1)
    throw DimensionError("tape backward: seed must be a scalar node");
  nodes_[seed].grad(0, 0) += 1.0;
  for (NodeId id = seed; id >= 0; --id)
    if (nodes_[id].back && nodes_[id].grad.squaredNorm() != 0)
      nodes_[id].back(*this, nodes_[id].grad);
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad.setZero();
}

// ---------------------------------------------------------------------------

namespace {

Tape::NodeId sum_nodes(Tape& tape, const std::vector<Tape::NodeId>& terms) {
  if (terms.empty()) return tape.constant(Eigen::MatrixXd::Zero(1, 1));
  Tape::NodeId acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = tape.add(acc, terms[i]);
  return acc;
}

}  // namespace

Tape::NodeId loss_total(DifferentiableRollout& ro, double lambda_f) {
  const MpcProblem& pb = *ro.problem;
  if (pb.kind != MpcKind::Linear)
    throw ConfigError("loss_total: differentiable rollouts require the linear kind");
  if (!ro.data.has_u_star) throw ConfigError("loss_total: rollout lacks u_star");
  const int T = static_cast<int>(ro.data.u_hat.cols());
  Tape& tape = ro.tape;

  // J_pi(u_hat) with the state trajectory rebuilt on-tape from the enacted
  // first controls; later plans saw x_t as a constant, matching the recorded
  // forward pass.
  std::vector<Tape::NodeId> terms;
  const Eigen::MatrixXd Lset = pb.L_set;
  Tape::NodeId x = tape.constant(ro.data.x.col(0));
  for (int t = 0; t <= T; ++t) {
    if (pb.gamma_e > 0)
      terms.push_back(
          tape.scale(tape.sum_sq(tape.relu(tape.sub(x, tape.constant(Lset)))), pb.gamma_e));
    if (pb.gamma_s > 0)
      terms.push_back(
          tape.scale(tape.sum_sq(tape.relu(tape.sub(tape.constant(Lset), x))), pb.gamma_s));
    if (t == T) break;
    const Tape::NodeId u_t = tape.columns(ro.u_plan_nodes[t], 0, 1);
    if (pb.gamma_u > 0) terms.push_back(tape.scale(tape.sum_sq(u_t), pb.gamma_u));
    x = tape.add(tape.sub(x, tape.constant(pb.C_s * ro.data.s_true.col(t))), u_t);
  }
  Tape::NodeId j_hat = sum_nodes(tape, terms);

  // J_pi(u_star): constant reference trajectory under the same true inputs
  double j_star = 0.0;
  {
    Eigen::VectorXd xs = ro.data.x.col(0);
    for (int t = 0; t < T; ++t) {
      j_star += pb.state_cost(xs) + pb.control_cost(ro.data.u_star.col(t));
      xs = pb.step(xs, ro.data.u_star.col(t), ro.data.s_true.col(t), Eigen::VectorXd());
    }
    j_star += pb.state_cost(xs);
  }

  Eigen::MatrixXd js(1, 1);
  js << j_star;
  Tape::NodeId loss = tape.scale(tape.sub(j_hat, tape.constant(js)), 1.0 / T);

  if (lambda_f > 0) {
    std::vector<Tape::NodeId> mse;
    for (int t = 0; t < T; ++t)
      mse.push_back(tape.sum_sq(tape.sub(tape.columns(ro.s_hat_nodes[t], 0, 1),
                                         tape.constant(ro.data.s_true.col(t)))));
    loss = tape.add(loss, tape.scale(sum_nodes(tape, mse), lambda_f / T));
  }
  return loss;
}

Tape::NodeId loss_surrogate(DifferentiableRollout& ro, double lambda_f) {
  const MpcProblem& pb = *ro.problem;
  if (pb.kind != MpcKind::Linear)
    throw ConfigError("loss_surrogate: differentiable rollouts require the linear kind");
  if (!ro.data.has_u_star) throw ConfigError("loss_surrogate: rollout lacks u_star");
  const int T = static_cast<int>(ro.data.u_hat.cols());
  Tape& tape = ro.tape;

  std::vector<Tape::NodeId> terms;
  for (int t = 0; t < T; ++t) {
    terms.push_back(tape.sum_sq(tape.sub(tape.columns(ro.u_plan_nodes[t], 0, 1),
                                         tape.constant(ro.data.u_star.col(t)))));
    if (lambda_f > 0)
      terms.push_back(tape.scale(tape.sum_sq(tape.sub(tape.columns(ro.s_hat_nodes[t], 0, 1),
                                                      tape.constant(ro.data.s_true.col(t)))),
                                 lambda_f));
  }
  return tape.scale(sum_nodes(tape, terms), 1.0 / T);
}

Tape::NodeId loss_mse(DifferentiableRollout& ro) {
  const int T = static_cast<int>(ro.data.u_hat.cols());
  Tape& tape = ro.tape;
  std::vector<Tape::NodeId> terms;
  for (int t = 0; t < T; ++t)
    terms.push_back(
        tape.sum_sq(tape.sub(ro.s_hat_nodes[t], tape.constant(ro.data.s_future[t]))));
  return tape.scale(sum_nodes(tape, terms), 1.0 / T);
}

}  // namespace codesign
