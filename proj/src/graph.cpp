#include "embryostage/graph.hpp"

#include <stdexcept>

#include "kernels.hpp"

namespace embryostage::ad {

namespace {

void check_rank2(const Tensor& t, const char* what) {
  if (t.rank() > 2) throw std::invalid_argument(std::string(what) + ": rank > 2 unsupported");
}

}  // namespace

Graph::NodeId Graph::emplace(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Graph::NodeId Graph::input(Tensor value) {
  Node node;
  node.op = Op::kLeaf;
  node.owned = std::move(value);
  node.needs_grad = false;
  return emplace(std::move(node));
}

Graph::NodeId Graph::param(const Tensor* value) {
  if (!value) throw std::invalid_argument("param: null tensor");
  Node node;
  node.op = Op::kLeaf;
  node.external = value;
  node.needs_grad = true;
  const NodeId id = emplace(std::move(node));
  param_nodes_.emplace_back(value, id);
  return id;
}

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  check_rank2(av, "matmul");
  check_rank2(bv, "matmul");
  if (av.cols() != bv.rows()) {
    throw std::invalid_argument("matmul: inner dimensions do not match");
  }
  Node node;
  node.op = Op::kMatmul;
  node.parents = {a, b};
  node.needs_grad = needs(a) || needs(b);
  node.owned = Tensor::uninit({av.rows(), bv.cols()});
  kernels::gemm(av, bv, node.owned, av.rows(), av.cols(), bv.cols());
  return emplace(std::move(node));
}

Graph::NodeId Graph::add_bias(NodeId x, NodeId bias) {
  const Tensor& xv = val(x);
  const Tensor& bv = val(bias);
  check_rank2(xv, "add_bias");
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw std::invalid_argument("add_bias: bias must be a row vector matching x's columns");
  }
  Node node;
  node.op = Op::kAddBias;
  node.parents = {x, bias};
  node.needs_grad = needs(x) || needs(bias);
  node.owned = Tensor::uninit(xv.shape());
  kernels::add_bias(xv, bv, node.owned, xv.rows(), xv.cols());
  return emplace(std::move(node));
}

Graph::NodeId Graph::relu(NodeId x) {
  const Tensor& xv = val(x);
  Node node;
  node.op = Op::kRelu;
  node.parents = {x, -1};
  node.needs_grad = needs(x);
  node.owned = Tensor::uninit(xv.shape());
  kernels::relu(xv, node.owned);
  return emplace(std::move(node));
}

Graph::NodeId Graph::max_over_points(NodeId x) {
  const Tensor& xv = val(x);
  check_rank2(xv, "max_over_points");
  if (xv.rows() < 1) throw std::invalid_argument("max_over_points: empty input");
  Node node;
  node.op = Op::kMaxOverPoints;
  node.parents = {x, -1};
  node.needs_grad = needs(x);
  node.owned = Tensor::uninit({1, xv.cols()});
  kernels::max_over_rows(xv, node.owned, node.argmax, xv.rows(), xv.cols());
  return emplace(std::move(node));
}

Graph::NodeId Graph::reshape(NodeId x, std::vector<std::int64_t> shape) {
  const Tensor& xv = val(x);
  Tensor out = Tensor::uninit(std::move(shape));
  if (out.size() != xv.size()) throw std::invalid_argument("reshape: size mismatch");
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = xv[i];
  Node node;
  node.op = Op::kReshape;
  node.parents = {x, -1};
  node.needs_grad = needs(x);
  node.owned = std::move(out);
  return emplace(std::move(node));
}

Graph::NodeId Graph::mse_loss(NodeId pred, NodeId target) {
  const Tensor& pv = val(pred);
  const Tensor& tv = val(target);
  if (!pv.same_shape(tv)) throw std::invalid_argument("mse_loss: shape mismatch");
  if (pv.size() == 0) throw std::invalid_argument("mse_loss: empty input");
  double acc = 0.0;
  for (std::int64_t i = 0; i < pv.size(); ++i) {
    const double d = pv[i] - tv[i];
    acc += d * d;
  }
  Node node;
  node.op = Op::kMseLoss;
  node.parents = {pred, target};
  node.needs_grad = needs(pred) || needs(target);
  node.owned = Tensor::full({1}, acc / static_cast<double>(pv.size()));
  return emplace(std::move(node));
}

Graph::NodeId Graph::orth_penalty(NodeId t) {
  const Tensor& tv = val(t);
  check_rank2(tv, "orth_penalty");
  if (tv.rows() != tv.cols()) throw std::invalid_argument("orth_penalty: square matrix required");
  const std::int64_t d = tv.rows();
  // residual = I - T T^T, penalty = ||residual||_F^2
  Tensor residual = Tensor::uninit({d, d});
  kernels::as_matrix(residual, d, d).noalias() =
      -(kernels::as_matrix(tv, d, d) * kernels::as_matrix(tv, d, d).transpose());
  for (std::int64_t i = 0; i < d; ++i) residual.at(i, i) += 1.0;
  double acc = 0.0;
  for (std::int64_t i = 0; i < residual.size(); ++i) acc += residual[i] * residual[i];
  Node node;
  node.op = Op::kOrthPenalty;
  node.parents = {t, -1};
  node.needs_grad = needs(t);
  node.owned = Tensor::full({1}, acc);
  // keep the residual for backward: d/dT = -4 * residual * T
  node.payload = std::move(residual);
  return emplace(std::move(node));
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch");
  Node node;
  node.op = Op::kAdd;
  node.parents = {a, b};
  node.needs_grad = needs(a) || needs(b);
  node.owned = Tensor::uninit(av.shape());
  for (std::int64_t i = 0; i < av.size(); ++i) node.owned[i] = av[i] + bv[i];
  return emplace(std::move(node));
}

Graph::NodeId Graph::scale(NodeId x, double factor) {
  const Tensor& xv = val(x);
  Node node;
  node.op = Op::kScale;
  node.parents = {x, -1};
  node.needs_grad = needs(x);
  node.factor = factor;
  node.owned = Tensor::uninit(xv.shape());
  for (std::int64_t i = 0; i < xv.size(); ++i) node.owned[i] = xv[i] * factor;
  return emplace(std::move(node));
}

const Tensor& Graph::value(NodeId id) const { return val(id); }

bool Graph::has_grad(NodeId id) const {
  return !nodes_[static_cast<std::size_t>(id)].grad.empty();
}

const Tensor& Graph::grad(NodeId id) const {
  const Node& node = nodes_[static_cast<std::size_t>(id)];
  if (node.grad.empty()) throw std::logic_error("grad: node has no gradient (run backward first)");
  return node.grad;
}

Tensor& Graph::ensure_grad(NodeId id) {
  Node& node = nodes_[static_cast<std::size_t>(id)];
  if (node.grad.empty()) node.grad = Tensor::zeros(node.val().shape());
  return node.grad;
}

void Graph::backward(NodeId root, double seed) {
  Node& root_node = nodes_[static_cast<std::size_t>(root)];
  if (root_node.val().size() != 1) {
    throw std::invalid_argument("backward: root must be a scalar");
  }
  if (!root_node.needs_grad) return;  // nothing reaches a parameter
  ensure_grad(root)[0] += seed;
  for (NodeId id = root; id >= 0; --id) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.op == Op::kLeaf || node.grad.empty() || !node.needs_grad) continue;
    backward_node(node);
  }
}

void Graph::backward_node(Node& node) {
  const Tensor& dy = node.grad;
  switch (node.op) {
    case Op::kLeaf:
      break;
    case Op::kMatmul: {
      const Tensor& a = val(node.parents[0]);
      const Tensor& b = val(node.parents[1]);
      Tensor* da = needs(node.parents[0]) ? &ensure_grad(node.parents[0]) : nullptr;
      Tensor* db = needs(node.parents[1]) ? &ensure_grad(node.parents[1]) : nullptr;
      kernels::gemm_backward(a, b, dy, da, db, a.rows(), a.cols(), b.cols());
      break;
    }
    case Op::kAddBias: {
      const std::int64_t rows = node.owned.rows();
      const std::int64_t cols = node.owned.cols();
      if (needs(node.parents[0])) {
        Tensor& dx = ensure_grad(node.parents[0]);
        for (std::int64_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
      }
      if (needs(node.parents[1])) {
        Tensor& dbias = ensure_grad(node.parents[1]);
        const double* src = dy.data();
        for (std::int64_t r = 0; r < rows; ++r, src += cols) {
          for (std::int64_t j = 0; j < cols; ++j) dbias[j] += src[j];
        }
      }
      break;
    }
    case Op::kRelu: {
      if (!needs(node.parents[0])) break;
      const Tensor& x = val(node.parents[0]);
      Tensor& dx = ensure_grad(node.parents[0]);
      for (std::int64_t i = 0; i < dy.size(); ++i) {
        if (x[i] > 0.0) dx[i] += dy[i];
      }
      break;
    }
    case Op::kMaxOverPoints: {
      if (!needs(node.parents[0])) break;
      Tensor& dx = ensure_grad(node.parents[0]);
      const std::int64_t cols = node.owned.cols();
      for (std::int64_t j = 0; j < cols; ++j) {
        dx.at(node.argmax[static_cast<std::size_t>(j)], j) += dy[j];
      }
      break;
    }
    case Op::kReshape: {
      if (!needs(node.parents[0])) break;
      Tensor& dx = ensure_grad(node.parents[0]);
      for (std::int64_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
      break;
    }
    case Op::kMseLoss: {
      const Tensor& p = val(node.parents[0]);
      const Tensor& t = val(node.parents[1]);
      const double scale = 2.0 * dy[0] / static_cast<double>(p.size());
      if (needs(node.parents[0])) {
        Tensor& dp = ensure_grad(node.parents[0]);
        for (std::int64_t i = 0; i < p.size(); ++i) dp[i] += scale * (p[i] - t[i]);
      }
      if (needs(node.parents[1])) {
        Tensor& dt = ensure_grad(node.parents[1]);
        for (std::int64_t i = 0; i < p.size(); ++i) dt[i] -= scale * (p[i] - t[i]);
      }
      break;
    }
    case Op::kOrthPenalty: {
      if (!needs(node.parents[0])) break;
      const Tensor& t = val(node.parents[0]);
      const std::int64_t d = t.rows();
      Tensor& dt = ensure_grad(node.parents[0]);
      kernels::as_matrix(dt, d, d).noalias() +=
          (-4.0 * dy[0]) * (kernels::as_matrix(node.payload, d, d) * kernels::as_matrix(t, d, d));
      break;
    }
    case Op::kAdd: {
      for (int side = 0; side < 2; ++side) {
        if (!needs(node.parents[side])) continue;
        Tensor& dp = ensure_grad(node.parents[side]);
        for (std::int64_t i = 0; i < dy.size(); ++i) dp[i] += dy[i];
      }
      break;
    }
    case Op::kScale: {
      if (!needs(node.parents[0])) break;
      Tensor& dx = ensure_grad(node.parents[0]);
      for (std::int64_t i = 0; i < dy.size(); ++i) dx[i] += node.factor * dy[i];
      break;
    }
  }
}

}  // namespace embryostage::ad
