#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "b2p/common.hpp"
#include "b2p/sparse/params.hpp"

namespace b2p::ad {

class Tape;

// Handle to a node of a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Accumulates the node's gradient into its inputs.
using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;

// Append-only record of matrix-valued operations. With recording off
// (inference) no backward closures are kept and no node requires grad.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Var constant(Matrix value);
  Var leaf(Matrix value);
  // Leaf bound to a parameter; repeated calls return the same node.
  Var param(const sparse::ParamStore& store, size_t index);
  Var param(const sparse::ParamStore& store, const std::string& name) { return param(store, store.index(name)); }
  // Makes later param(store, index) calls return `v` instead of a fresh leaf.
  void bind_param(size_t index, Var v) { params_[index] = v.id; }

  // Records an op; `fn` is kept only if some input requires grad.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);

  // The reference is invalidated by the next record/leaf/constant call.
  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return v.valid() && nodes_.at(v.id).requires_grad; }
  // Zero-initialized on first use.
  Matrix& grad(Var v);
  bool has_grad(Var v) const { return nodes_.at(v.id).has_grad; }
  void accumulate(Var v, const Matrix& g);

  // Seeds d loss / d loss = 1 and runs every recorded closure once in
  // reverse order. Throws ContractError unless loss is 1x1.
  void backward(Var loss);

  // Gradient of every store entry (zero when unreachable).
  std::vector<Matrix> param_grads(const sparse::ParamStore& store) const;

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  bool record_;
  bool done_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<size_t, int> params_;
};

}  // namespace b2p::ad
