// Copyright (c) 2026 The sndcr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <typeinfo>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sndcr/tensor.hpp"

namespace sndcr {

/// Debug aid: when enabled, backward() accumulates wall time per op type
/// (keyed by the mangled closure type). Off by default; costs one branch
/// per node when off.
struct BackwardProfile {
  static bool& enabled() {
    static bool on = false;
    return on;
  }
  static std::map<std::string, double>& table() {
    static std::map<std::string, double> t;
    return t;
  }
};

// Reverse-mode autodiff over a dynamically built DAG. Every op creates a
// node holding its output value, links to its parents, and a closure that
// scatters the node's gradient into the parents. backward() runs the
// closures in reverse topological order starting from a scalar root.

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.numel() != value.numel()) grad = Tensor<T>(value.shape());
  }
  void add_grad(const Tensor<T>& g) {
    ensure_grad();
    const T* src = g.data();
    T* dst = grad.data();
    for (int64_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  static Var make_op(Tensor<T> value, std::vector<Var> parents,
                     std::function<void(Node<T>&)> backward_fn) {
    Var out(std::move(value), false);
    bool needs = false;
    for (const Var& p : parents) {
      if (p.defined()) {
        out.node_->parents.push_back(p.node_);
        needs = needs || p.node_->requires_grad;
      }
    }
    out.node_->requires_grad = needs;
    if (needs) out.node_->backward_fn = std::move(backward_fn);
    return out;
  }

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  const Tensor<T>& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.numel() == node_->value.numel(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }
  std::shared_ptr<Node<T>> node() const { return node_; }

  void zero_grad() {
    if (node_) {
      node_->ensure_grad();
      node_->grad.fill(T(0));
    }
  }

  /// Value-only copy with no graph history attached.
  Var detached() const { return Var(node_->value, false); }

  /// Backpropagate from this scalar. Gradients accumulate into every
  /// reachable node with requires_grad set.
  void backward() {
    SNDCR_CHECK(node_ && node_->value.numel() == 1,
                "backward() root must be a defined scalar");
    if (!node_->requires_grad) return;
    std::vector<Node<T>*> order = topo_order();
    node_->ensure_grad();
    node_->grad[0] += T(1);
    const bool profile = BackwardProfile::enabled();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<T>* n = *it;
      if (n->requires_grad && n->backward_fn && n->grad.numel() > 0) {
        if (profile) {
          auto t0 = std::chrono::steady_clock::now();
          n->backward_fn(*n);
          auto t1 = std::chrono::steady_clock::now();
          BackwardProfile::table()[n->backward_fn.target_type().name()] +=
              std::chrono::duration<double, std::milli>(t1 - t0).count();
        } else {
          n->backward_fn(*n);
        }
      }
    }
  }

 private:
  // Iterative post-order DFS; recursion depth is unbounded for deep nets.
  std::vector<Node<T>*> topo_order() const {
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node<T>* p = n->parents[next++].get();
        if (!visited.count(p)) {
          visited.insert(p);
          stack.emplace_back(p, 0);
        }
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    return order;
  }

  std::shared_ptr<Node<T>> node_;
};

}  // namespace sndcr
