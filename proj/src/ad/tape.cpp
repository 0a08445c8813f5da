#include "b2p/ad/tape.hpp"

#include <string>

#include "b2p/error.hpp"

namespace b2p::ad {

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), {}, false, false, {}});
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Matrix value) {
  nodes_.push_back({std::move(value), {}, false, record_, {}});
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const sparse::ParamStore& store, size_t index) {
  const auto it = params_.find(index);
  if (it != params_.end()) return {it->second};
  const Var v = leaf(store.value(index));
  params_.emplace(index, v.id);
  return v;
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
  bool needs = false;
  if (record_) {
    for (Var in : inputs) needs = needs || (in.valid() && nodes_.at(in.id).requires_grad);
  }
  nodes_.push_back({std::move(value), {}, false, needs, needs ? std::move(fn) : BackwardFn{}});
  return {static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad(Var v) {
  Node& n = nodes_.at(v.id);
  if (!n.has_grad) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  if (!requires_grad(v)) return;
  Matrix& dst = grad(v);
  if (dst.rows() != g.rows() || dst.cols() != g.cols()) {
    throw DimensionError("tape: gradient shape mismatch at node " + std::to_string(v.id));
  }
  dst += g;
}

void Tape::backward(Var loss) {
  const Matrix& l = value(loss);
  if (l.rows() != 1 || l.cols() != 1) {
    throw ContractError("backward: loss must be scalar, got " + std::to_string(l.rows()) + "x" +
                        std::to_string(l.cols()));
  }
  if (done_) throw ContractError("backward: tape already consumed");
  done_ = true;
  if (!requires_grad(loss)) return;
  grad(loss)(0, 0) += 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.has_grad && n.backward) n.backward(*this, n.grad);
  }
}

std::vector<Matrix> Tape::param_grads(const sparse::ParamStore& store) const {
  std::vector<Matrix> out;
  out.reserve(store.size());
  for (size_t i = 0; i < store.size(); ++i) {
    const auto it = params_.find(i);
    if (it != params_.end() && nodes_[it->second].has_grad) {
      out.push_back(nodes_[it->second].grad);
    } else {
      out.push_back(Matrix::Zero(store.value(i).rows(), store.value(i).cols()));
    }
  }
  return out;
}

}  // namespace b2p::ad
