#pragma once

#include <string>
#include <utility>

#include "iafm/ops.hpp"

namespace iafm {

// Registry of named trainable tensors; owning models hand the list to the
// optimizer and the checkpoint writer.
template <class T>
class ParamStore {
 public:
  Tensor<T> weight(const std::string& name, Shape shape, Rng& rng, double stddev) {
    auto t = Tensor<T>::randn(std::move(shape), rng, stddev, true);
    named.emplace_back(name, t);
    return t;
  }

  Tensor<T> zeros(const std::string& name, Shape shape) {
    auto t = Tensor<T>::zeros(std::move(shape), true);
    named.emplace_back(name, t);
    return t;
  }

  Tensor<T> ones(const std::string& name, Shape shape) {
    auto t = Tensor<T>::full(std::move(shape), T(1), true);
    named.emplace_back(name, t);
    return t;
  }

  std::vector<Tensor<T>> tensors() const {
    std::vector<Tensor<T>> out;
    out.reserve(named.size());
    for (const auto& [_, t] : named) out.push_back(t);
    return out;
  }

  std::vector<std::pair<std::string, Tensor<T>>> named;
};

template <class T>
struct Lnp {
  Tensor<T> g, b;
};

// No key bias: a shared key offset shifts every score in a row equally and
// cancels in the softmax, so the parameter would be inert.
template <class T>
struct AttnParams {
  Tensor<T> wq, bq, wk, wv, bv, wo, bo;
};

// Pre-norm residual block: x += attn(ln1(x)); x += mlp(ln2(x)).
template <class T>
struct Block {
  Lnp<T> ln1;
  AttnParams<T> attn;
  Lnp<T> ln2;
  Tensor<T> fc1_w, fc1_b, fc2_w, fc2_b;
};

template <class T>
Lnp<T> make_ln(ParamStore<T>& ps, const std::string& prefix, int dim) {
  return {ps.ones(prefix + ".g", {dim}), ps.zeros(prefix + ".b", {dim})};
}

template <class T>
AttnParams<T> make_attn(ParamStore<T>& ps, const std::string& prefix, int dim, Rng& rng,
                        double stddev) {
  AttnParams<T> p;
  p.wq = ps.weight(prefix + ".wq", {dim, dim}, rng, stddev);
  p.bq = ps.zeros(prefix + ".bq", {dim});
  p.wk = ps.weight(prefix + ".wk", {dim, dim}, rng, stddev);
  p.wv = ps.weight(prefix + ".wv", {dim, dim}, rng, stddev);
  p.bv = ps.zeros(prefix + ".bv", {dim});
  p.wo = ps.weight(prefix + ".wo", {dim, dim}, rng, stddev);
  p.bo = ps.zeros(prefix + ".bo", {dim});
  return p;
}

template <class T>
Block<T> make_block(ParamStore<T>& ps, const std::string& prefix, int dim, Rng& rng,
                    double stddev) {
  Block<T> b;
  b.ln1 = make_ln(ps, prefix + ".ln1", dim);
  b.attn = make_attn(ps, prefix + ".attn", dim, rng, stddev);
  b.ln2 = make_ln(ps, prefix + ".ln2", dim);
  b.fc1_w = ps.weight(prefix + ".fc1.w", {dim, 4 * dim}, rng, stddev);
  b.fc1_b = ps.zeros(prefix + ".fc1.b", {4 * dim});
  b.fc2_w = ps.weight(prefix + ".fc2.w", {4 * dim, dim}, rng, stddev);
  b.fc2_b = ps.zeros(prefix + ".fc2.b", {dim});
  return b;
}

// Self-attention over x [N, D]. mask, when given, is an additive [N, N]
// tensor of 0 / -inf; masked lanes contribute exactly zero downstream.
template <class T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const AttnParams<T>& p, int heads,
                               const Tensor<T>* mask = nullptr) {
  const int64_t D = x.dim(1);
  check(D % heads == 0, "attention: dim not divisible by head count");
  const int64_t dh = D / heads;
  auto q = add_rows(matmul(x, p.wq), p.bq);
  auto k = matmul(x, p.wk);
  auto v = add_rows(matmul(x, p.wv), p.bv);
  std::vector<Tensor<T>> head_out;
  head_out.reserve(static_cast<size_t>(heads));
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    auto qh = slice_cols(q, h * dh, dh);
    auto kh = slice_cols(k, h * dh, dh);
    auto vh = slice_cols(v, h * dh, dh);
    auto scores = scale(matmul_nt(qh, kh), inv_sqrt);
    auto att = mask ? softmax_rows_additive(scores, *mask) : softmax(scores, 1);
    head_out.push_back(matmul(att, vh));
  }
  auto merged = heads == 1 ? head_out[0] : concat_cols(head_out);
  return add_rows(matmul(merged, p.wo), p.bo);
}

template <class T>
Tensor<T> mlp_forward(const Tensor<T>& x, const Block<T>& b) {
  auto h = gelu(add_rows(matmul(x, b.fc1_w), b.fc1_b));
  return add_rows(matmul(h, b.fc2_w), b.fc2_b);
}

template <class T>
Tensor<T> block_forward(const Tensor<T>& x, const Block<T>& b, int heads,
                        const Tensor<T>* mask = nullptr) {
  auto h = add(x, multi_head_attention(layer_norm(x, b.ln1.g, b.ln1.b), b.attn, heads, mask));
  return add(h, mlp_forward(layer_norm(h, b.ln2.g, b.ln2.b), b));
}

// Additive causal mask: position i attends to j <= i.
template <class T>
Tensor<T> causal_mask(int64_t n) {
  auto m = Tensor<T>::zeros({n, n});
  const T ninf = -std::numeric_limits<T>::infinity();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = i + 1; j < n; ++j) m.ptr()[i * n + j] = ninf;
  return m;
}

}  // namespace iafm
