#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hsva/numerics/matrix.hpp"
#include "hsva/numerics/param_store.hpp"

namespace hsva {

/// Handle to a value recorded on a Graph.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape.
///
/// Nodes are appended in evaluation order, so creation order is already a
/// topological order and backward() is a single reverse sweep. Each node
/// either wraps a constant, references a parameter of a ParamStore (no copy),
/// or is the output of a primitive op with a closure that pushes the output
/// gradient to its inputs. A node requires a gradient iff one of its inputs
/// does; parameters of frozen groups never do.
template <typename Real>
class Graph {
 public:
  using Mat = MatrixT<Real>;
  using Backward = std::function<void(Graph&, Var self, const Mat& grad_out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Parameters of `group` are treated as constants on this graph.
  void freeze(std::string group) { frozen_.insert(std::move(group)); }
  bool is_frozen(const std::string& group) const { return frozen_.count(group) != 0; }

  Var constant(Mat value, std::string_view what = "input") {
    require_finite(value, what);
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
  }

  /// Leaf bound to store.at(index). Repeated calls return the same leaf.
  Var parameter(const ParamStore<Real>& store, std::size_t index) {
    if (store_ != nullptr && store_ != &store) {
      throw ConfigError("graph already bound to a different parameter store");
    }
    store_ = &store;
    if (param_leaf_.size() < store.size()) param_leaf_.resize(store.size(), -1);
    if (param_leaf_[index] >= 0) return Var{param_leaf_[index]};
    const auto& p = store.at(index);
    Node n;
    n.external = &p.value;
    n.param_index = static_cast<std::int64_t>(index);
    n.requires_grad = !is_frozen(p.group);
    Var v = push(std::move(n));
    param_leaf_[index] = v.id;
    return v;
  }

  /// Records the output of a primitive. `backward` is only kept when some
  /// input requires a gradient.
  Var record(Mat value, std::initializer_list<Var> inputs, Backward backward) {
    Node n;
    n.value = std::move(value);
    for (Var in : inputs) {
      if (node(in).requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
  }

  const Mat& value(Var v) const {
    const Node& n = node(v);
    return n.external != nullptr ? *n.external : n.value;
  }
  Real scalar(Var v) const {
    const Mat& m = value(v);
    if (m.size() != 1) throw ShapeError("scalar(): value is " + shape_string(m));
    return m(0, 0);
  }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  bool has_grad(Var v) const { return node(v).grad_ready; }
  const Mat& grad(Var v) const { return node(v).grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Adds `delta` into the gradient of `v` (no-op if `v` needs none).
  /// During backward(), parameter leaves accumulate straight into the
  /// store's gradient slot.
  template <typename Expr>
  void accumulate(Var v, const Eigen::MatrixBase<Expr>& delta) {
    Node& n = node(v);
    if (!n.requires_grad) return;
    if (n.param_index >= 0 && sink_ != nullptr) {
      auto& p = sink_->at(static_cast<std::size_t>(n.param_index));
      if (!p.grad_ready) {
        p.grad.noalias() = delta;
        p.grad_ready = true;
      } else {
        p.grad.noalias() += delta;
      }
      n.grad_ready = true;
      return;
    }
    if (!n.grad_ready) {
      n.grad.noalias() = delta;
      n.grad_ready = true;
    } else {
      n.grad.noalias() += delta;
    }
  }

  /// Back-propagates d(loss)/d(.) and accumulates parameter gradients into
  /// `store`. Only parameters that participated are touched.
  void backward(Var loss, ParamStore<Real>& store) {
    const Mat& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ShapeError("backward: loss must be a 1x1 scalar, got " + shape_string(lv));
    }
    if (store_ != nullptr && store_ != &store) {
      throw ConfigError("backward: parameter store differs from the one used in the forward pass");
    }
    if (!std::isfinite(static_cast<double>(lv(0, 0)))) throw NumericalError("backward: loss is not finite");
    Node& root = node(loss);
    if (!root.requires_grad) return;
    sink_ = &store;
    try {
      if (root.param_index >= 0) {
        accumulate(loss, Mat::Ones(1, 1));
      } else {
        root.grad = Mat::Ones(1, 1);
        root.grad_ready = true;
      }
      for (std::int32_t i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.requires_grad || !n.grad_ready) continue;
        n.grad_ready = false;
        if (n.param_index >= 0) {
          const auto& p = store.at(static_cast<std::size_t>(n.param_index));
          if (!all_finite(p.grad)) throw NumericalError("non-finite gradient for parameter '" + p.name + "'");
        } else if (n.backward) {
          n.backward(*this, Var{i}, n.grad);
          n.grad = Mat();
        }
      }
    } catch (...) {
      sink_ = nullptr;
      throw;
    }
    sink_ = nullptr;
  }

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    std::int64_t param_index = -1;
    Mat grad;
    bool requires_grad = false;
    bool grad_ready = false;
    Backward backward;
  };

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
  }
  Node& node(Var v) {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) throw ShapeError("invalid graph variable");
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  const Node& node(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) throw ShapeError("invalid graph variable");
    return nodes_[static_cast<std::size_t>(v.id)];
  }

  std::deque<Node> nodes_;  // deque keeps value() references stable while recording
  std::vector<std::int32_t> param_leaf_;
  const ParamStore<Real>* store_ = nullptr;
  ParamStore<Real>* sink_ = nullptr;  // set only while backward() runs
  std::set<std::string> frozen_;
};

}  // namespace hsva
