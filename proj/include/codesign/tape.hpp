#ifndef CODESIGN_TAPE_HPP
#define CODESIGN_TAPE_HPP

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "codesign/mpc.hpp"

namespace codesign {

// Reverse-mode tape over matrix-level operations. Values are dense matrices
// (vectors as single columns, scalars as 1x1). Nodes are appended during the
// forward pass; backward() walks them once in reverse order.
class Tape {
 public:
  using NodeId = int;

  NodeId constant(const Eigen::MatrixXd& v);
  NodeId leaf(const Eigen::MatrixXd& v);  // parameter; gradient accumulated

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId add_bias(NodeId a, NodeId bias);  // bias column broadcast over columns of a
  NodeId relu(NodeId a);                   // subgradient at 0 is 0
  NodeId scale(NodeId a, double alpha);
  NodeId reshape(NodeId a, int rows, int cols);
  NodeId columns(NodeId a, int first, int count);
  NodeId sum_sq(NodeId a);  // scalar ||a||_F^2

  // Planned controls as a tape node. The value is the solved n x H plan; the
  // backward pass routes the upstream gradient through the implicit Jacobian
  // of the QP at its active set. x_node < 0 detaches the state input.
  NodeId qp_plan(const QpJacobianContext& ctx, NodeId s_hat, const Eigen::MatrixXd& u_plan,
                 NodeId x_node = -1);

  const Eigen::MatrixXd& value(NodeId id) const { return nodes_[id].value; }
  const Eigen::MatrixXd& grad(NodeId id) const { return nodes_[id].grad; }

  // Reverse pass from a 1x1 seed node with seed gradient 1.
  void backward(NodeId seed);
  void zero_grad();

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    std::function<void(Tape&, const Eigen::MatrixXd&)> back;  // upstream -> accumulate inputs
  };

  NodeId push(Eigen::MatrixXd value, std::function<void(Tape&, const Eigen::MatrixXd&)> back);
  void accumulate(NodeId id, const Eigen::MatrixXd& g);

  std::vector<Node> nodes_;
  friend struct TapeTestAccess;
};

// A rollout recorded on a tape: per-step forecast and control nodes plus the
// numeric trajectory, ready for loss construction and backprop.
struct DifferentiableRollout {
  Tape tape;
  std::vector<Tape::NodeId> s_hat_nodes;   // p x H forecast node per step
  std::vector<Tape::NodeId> u_plan_nodes;  // n x H plan node per step
  std::vector<Tape::NodeId> param_nodes;   // model leaves, optimizer order
  Rollout data;
  const MpcProblem* problem = nullptr;
};

// (1/T)(J_pi(u_hat) - J_pi(u_star)) + lambda (1/T) sum ||s_t - s_hat_t||^2,
// differentiable through the QP and the exact linear dynamics.
Tape::NodeId loss_total(DifferentiableRollout& ro, double lambda_f);

// (1/T) sum (||u_hat_t - u_star_t||^2 + lambda ||s_hat_t - s_t||^2)
Tape::NodeId loss_surrogate(DifferentiableRollout& ro, double lambda_f);

// (1/T) sum ||s_hat_t - s_{t:t+H-1}||_F^2: plain forecast MSE over the full
// window, ignoring the controller entirely.
Tape::NodeId loss_mse(DifferentiableRollout& ro);

}  // namespace codesign

#endif
