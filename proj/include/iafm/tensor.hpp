#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "iafm/common.hpp"
#include "iafm/rng.hpp"

namespace iafm {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) {
    check(e >= 0, "tensor: negative extent");
    n *= e;
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

template <class T>
struct Node;

// Value-semantic n-d array over float or double. Copies share storage; the
// grad buffer exists iff requires_grad. Non-leaf tensors built while grad
// mode is on carry a node linking them into the reverse-mode record.
template <class T>
struct Tensor {
  Shape shape;
  std::shared_ptr<std::vector<T>> data;
  bool requires_grad = false;
  std::shared_ptr<std::vector<T>> grad;
  std::shared_ptr<Node<T>> node;

  Tensor() = default;

  int64_t numel() const { return data ? static_cast<int64_t>(data->size()) : 0; }
  int64_t dim(size_t i) const { return shape.at(i); }
  size_t ndim() const { return shape.size(); }

  T* ptr() { return data->data(); }
  const T* ptr() const { return data->data(); }
  T* grad_ptr() { return grad->data(); }
  const T* grad_ptr() const { return grad->data(); }

  T item() const {
    check(numel() == 1, "item: tensor is not scalar, shape " + shape_str(shape));
    return (*data)[0];
  }

  static Tensor zeros(Shape s, bool rg = false) {
    Tensor t;
    t.shape = std::move(s);
    t.data = std::make_shared<std::vector<T>>(static_cast<size_t>(shape_numel(t.shape)), T(0));
    t.requires_grad = rg;
    if (rg) t.grad = std::make_shared<std::vector<T>>(t.data->size(), T(0));
    return t;
  }

  static Tensor full(Shape s, T value, bool rg = false) {
    Tensor t = zeros(std::move(s), rg);
    std::fill(t.data->begin(), t.data->end(), value);
    return t;
  }

  static Tensor from_vector(Shape s, std::vector<T> values, bool rg = false) {
    Tensor t;
    t.shape = std::move(s);
    check(shape_numel(t.shape) == static_cast<int64_t>(values.size()),
          "from_vector: size mismatch for shape " + shape_str(t.shape));
    t.data = std::make_shared<std::vector<T>>(std::move(values));
    t.requires_grad = rg;
    if (rg) t.grad = std::make_shared<std::vector<T>>(t.data->size(), T(0));
    return t;
  }

  static Tensor randn(Shape s, Rng& rng, double stddev = 1.0, bool rg = false) {
    Tensor t = zeros(std::move(s), rg);
    for (T& v : *t.data) v = static_cast<T>(rng.normal(0.0, stddev));
    return t;
  }

  void zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), T(0));
  }

  bool all_finite() const {
    for (T v : *data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }
};

template <class T>
struct Node {
  std::vector<Tensor<T>> parents;
  // Accumulates into parents' grad buffers given the output tensor.
  std::function<void(const Tensor<T>&)> backward;
};

// Grad-mode flag; turned off for inference and finite-difference probing.
inline thread_local bool g_grad_enabled = true;

inline bool grad_enabled() { return g_grad_enabled; }

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
  ~NoGradGuard() { g_grad_enabled = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <class T>
bool wants_grad(const Tensor<T>& t) {
  return grad_enabled() && t.requires_grad;
}

template <class T>
Tensor<T> make_op_output(Shape s, std::vector<Tensor<T>> parents,
                         std::function<void(const Tensor<T>&)> bw) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || wants_grad(p);
  Tensor<T> out = Tensor<T>::zeros(std::move(s), rg);
  if (rg) {
    out.node = std::make_shared<Node<T>>();
    out.node->parents = std::move(parents);
    out.node->backward = std::move(bw);
  }
  return out;
}

// Reverse-mode sweep from a scalar loss. Topological order via iterative DFS
// over the node graph; each node processed once even when shared.
template <class T>
void backward(Tensor<T>& loss) {
  check(loss.numel() == 1, "backward: loss must be scalar");
  if (!loss.requires_grad) return;
  (*loss.grad)[0] = T(1);
  if (!loss.node) return;

  std::vector<Tensor<T>> topo;
  std::unordered_set<Node<T>*> visited;
  struct Frame {
    Tensor<T> t;
    size_t next_child = 0;
  };
  std::vector<Frame> stack;
  visited.insert(loss.node.get());
  stack.push_back({loss, 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    Node<T>* n = f.t.node.get();
    if (f.next_child < n->parents.size()) {
      Tensor<T>& p = n->parents[f.next_child++];
      if (p.node && !visited.count(p.node.get())) {
        visited.insert(p.node.get());
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(f.t);
      stack.pop_back();
    }
  }
  for (size_t i = topo.size(); i-- > 0;) {
    Node<T>* n = topo[i].node.get();
    if (n->backward) n->backward(topo[i]);
  }
}

template <class T>
void zero_grads(std::vector<Tensor<T>>& params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace iafm
