#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "iafm/tensor.hpp"

namespace iafm {

template <class T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  check(a.shape == b.shape, std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
}

template <class T>
void check_2d(const Tensor<T>& a, const char* op) {
  check(a.ndim() == 2, std::string(op) + ": expected 2-d tensor, got " + shape_str(a.shape));
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  Tensor<T> out = make_op_output<T>(a.shape, {a, b}, [](const Tensor<T>& o) {
    const auto& pa = o.node->parents[0];
    const auto& pb = o.node->parents[1];
    const int64_t n = o.numel();
    if (pa.requires_grad)
      for (int64_t i = 0; i < n; ++i) (*pa.grad)[i] += (*o.grad)[i];
    if (pb.requires_grad)
      for (int64_t i = 0; i < n; ++i) (*pb.grad)[i] += (*o.grad)[i];
  });
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] + (*b.data)[i];
  return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "sub");
  Tensor<T> out = make_op_output<T>(a.shape, {a, b}, [](const Tensor<T>& o) {
    const auto& pa = o.node->parents[0];
    const auto& pb = o.node->parents[1];
    const int64_t n = o.numel();
    if (pa.requires_grad)
      for (int64_t i = 0; i < n; ++i) (*pa.grad)[i] += (*o.grad)[i];
    if (pb.requires_grad)
      for (int64_t i = 0; i < n; ++i) (*pb.grad)[i] -= (*o.grad)[i];
  });
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] - (*b.data)[i];
  return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "mul");
  Tensor<T> out = make_op_output<T>(a.shape, {a, b}, [](const Tensor<T>& o) {
    const auto& pa = o.node->parents[0];
    const auto& pb = o.node->parents[1];
    const int64_t n = o.numel();
    if (pa.requires_grad)
      for (int64_t i = 0; i < n; ++i) (*pa.grad)[i] += (*o.grad)[i] * (*pb.data)[i];
    if (pb.requires_grad)
      for (int64_t i = 0; i < n; ++i) (*pb.grad)[i] += (*o.grad)[i] * (*pa.data)[i];
  });
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] * (*b.data)[i];
  return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, double c) {
  const T cc = static_cast<T>(c);
  Tensor<T> out = make_op_output<T>(x.shape, {x}, [cc](const Tensor<T>& o) {
    const auto& px = o.node->parents[0];
    if (!px.requires_grad) return;
    const int64_t n = o.numel();
    for (int64_t i = 0; i < n; ++i) (*px.grad)[i] += (*o.grad)[i] * cc;
  });
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) (*out.data)[i] = (*x.data)[i] * cc;
  return out;
}

// x: [N, D], bias: [D]
template <class T>
Tensor<T> add_rows(const Tensor<T>& x, const Tensor<T>& bias) {
  check_2d(x, "add_rows");
  check(bias.ndim() == 1 && bias.dim(0) == x.dim(1),
        "add_rows: bias shape " + shape_str(bias.shape) + " vs x " + shape_str(x.shape));
  const int64_t N = x.dim(0), D = x.dim(1);
  Tensor<T> out = make_op_output<T>(x.shape, {x, bias}, [N, D](const Tensor<T>& o) {
    const auto& px = o.node->parents[0];
    const auto& pb = o.node->parents[1];
    if (px.requires_grad) {
      const int64_t n = o.numel();
      for (int64_t i = 0; i < n; ++i) (*px.grad)[i] += (*o.grad)[i];
    }
    if (pb.requires_grad) {
      for (int64_t i = 0; i < N; ++i)
        for (int64_t j = 0; j < D; ++j) (*pb.grad)[j] += (*o.grad)[i * D + j];
    }
  });
  for (int64_t i = 0; i < N; ++i)
    for (int64_t j = 0; j < D; ++j) (*out.data)[i * D + j] = (*x.data)[i * D + j] + (*bias.data)[j];
  return out;
}

// a: [N, K], b: [K, M] -> [N, M]
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  check_2d(a, "matmul");
  check_2d(b, "matmul");
  check(a.dim(1) == b.dim(0), "matmul: inner dims " + shape_str(a.shape) + " x " + shape_str(b.shape));
  const int64_t N = a.dim(0), K = a.dim(1), M = b.dim(1);
  Tensor<T> out = make_op_output<T>({N, M}, {a, b}, [N, K, M](const Tensor<T>& o) {
    const auto& pa = o.node->parents[0];
    const auto& pb = o.node->parents[1];
    const T* A = pa.ptr();
    const T* B = pb.ptr();
    const T* G = o.grad_ptr();
    if (pa.requires_grad) {
      T* dA = pa.grad->data();
      for (int64_t i = 0; i < N; ++i)
        for (int64_t j = 0; j < M; ++j) {
          const T g = G[i * M + j];
          if (g == T(0)) continue;
          for (int64_t k = 0; k < K; ++k) dA[i * K + k] += g * B[k * M + j];
        }
    }
    if (pb.requires_grad) {
      T* dB = pb.grad->data();
      for (int64_t i = 0; i < N; ++i)
        for (int64_t k = 0; k < K; ++k) {
          const T aik = A[i * K + k];
          if (aik == T(0)) continue;
          for (int64_t j = 0; j < M; ++j) dB[k * M + j] += aik * G[i * M + j];
        }
    }
  });
  const T* A = a.ptr();
  const T* B = b.ptr();
  T* O = out.ptr();
  for (int64_t i = 0; i < N; ++i)
    for (int64_t k = 0; k < K; ++k) {
      const T aik = A[i * K + k];
      if (aik == T(0)) continue;
      for (int64_t j = 0; j < M; ++j) O[i * M + j] += aik * B[k * M + j];
    }
  return out;
}

// a: [N, K], b: [M, K] -> [N, M] = a b^T
template <class T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  check_2d(a, "matmul_nt");
  check_2d(b, "matmul_nt");
  check(a.dim(1) == b.dim(1), "matmul_nt: inner dims " + shape_str(a.shape) + " x " + shape_str(b.shape));
  const int64_t N = a.dim(0), K = a.dim(1), M = b.dim(0);
  Tensor<T> out = make_op_output<T>({N, M}, {a, b}, [N, K, M](const Tensor<T>& o) {
    const auto& pa = o.node->parents[0];
    const auto& pb = o.node->parents[1];
    const T* A = pa.ptr();
    const T* B = pb.ptr();
    const T* G = o.grad_ptr();
    if (pa.requires_grad) {
      T* dA = pa.grad->data();
      for (int64_t i = 0; i < N; ++i)
        for (int64_t j = 0; j < M; ++j) {
          const T g = G[i * M + j];
          if (g == T(0)) continue;
          for (int64_t k = 0; k < K; ++k) dA[i * K + k] += g * B[j * K + k];
        }
    }
    if (pb.requires_grad) {
      T* dB = pb.grad->data();
      for (int64_t i = 0; i < N; ++i)
        for (int64_t j = 0; j < M; ++j) {
          const T g = G[i * M + j];
          if (g == T(0)) continue;
          for (int64_t k = 0; k < K; ++k) dB[j * K + k] += g * A[i * K + k];
        }
    }
  });
  const T* A = a.ptr();
  const T* B = b.ptr();
  T* O = out.ptr();
  for (int64_t i = 0; i < N; ++i)
    for (int64_t j = 0; j < M; ++j) {
      T acc = T(0);
      for (int64_t k = 0; k < K; ++k) acc += A[i * K + k] * B[j * K + k];
      O[i * M + j] = acc;
    }
  return out;
}

// table: [V, D]; row gather with scatter-add backward.
template <class T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<int>& ids) {
  check_2d(table, "embedding");
  const int64_t V = table.dim(0), D = table.dim(1);
  for (int id : ids)
    check(id >= 0 && id < V, "embedding: id " + std::to_string(id) + " out of range [0," +
                                 std::to_string(V) + ")");
  const int64_t N = static_cast<int64_t>(ids.size());
  Tensor<T> out = make_op_output<T>({N, D}, {table}, [ids, D](const Tensor<T>& o) {
    const auto& pt = o.node->parents[0];
    if (!pt.requires_grad) return;
    T* dT = pt.grad->data();
    const T* G = o.grad_ptr();
    for (size_t r = 0; r < ids.size(); ++r) {
      const int64_t row = ids[r];
      for (int64_t j = 0; j < D; ++j) dT[row * D + j] += G[static_cast<int64_t>(r) * D + j];
    }
  });
  for (size_t r = 0; r < ids.size(); ++r)
    std::copy_n(table.ptr() + static_cast<int64_t>(ids[r]) * D, D,
                out.ptr() + static_cast<int64_t>(r) * D);
  return out;
}

template <class T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<int>& idx) {
  check_2d(x, "gather_rows");
  const int64_t N = x.dim(0), D = x.dim(1);
  for (int i : idx) check(i >= 0 && i < N, "gather_rows: row index out of range");
  const int64_t M = static_cast<int64_t>(idx.size());
  Tensor<T> out = make_op_output<T>({M, D}, {x}, [idx, D](const Tensor<T>& o) {
    const auto& px = o.node->parents[0];
    if (!px.requires_grad) return;
    T* dX = px.grad->data();
    const T* G = o.grad_ptr();
    for (size_t r = 0; r < idx.size(); ++r) {
      const int64_t row = idx[r];
      for (int64_t j = 0; j < D; ++j) dX[row * D + j] += G[static_cast<int64_t>(r) * D + j];
    }
  });
  for (size_t r = 0; r < idx.size(); ++r)
    std::copy_n(x.ptr() + static_cast<int64_t>(idx[r]) * D, D,
                out.ptr() + static_cast<int64_t>(r) * D);
  return out;
}

// Rows of src placed at idx within an [n_rows, D] zero tensor. Indices unique.
template <class T>
Tensor<T> row_scatter(int64_t n_rows, const std::vector<int>& idx, const Tensor<T>& src) {
  check_2d(src, "row_scatter");
  check(static_cast<int64_t>(idx.size()) == src.dim(0), "row_scatter: index count vs src rows");
  const int64_t D = src.dim(1);
  for (int i : idx) check(i >= 0 && i < n_rows, "row_scatter: row index out of range");
  Tensor<T> out = make_op_output<T>({n_rows, D}, {src}, [idx, D](const Tensor<T>& o) {
    const auto& ps = o.node->parents[0];
    if (!ps.requires_grad) return;
    T* dS = ps.grad->data();
    const T* G = o.grad_ptr();
    for (size_t r = 0; r < idx.size(); ++r) {
      const int64_t row = idx[r];
      for (int64_t j = 0; j < D; ++j) dS[static_cast<int64_t>(r) * D + j] += G[row * D + j];
    }
  });
  for (size_t r = 0; r < idx.size(); ++r)
    std::copy_n(src.ptr() + static_cast<int64_t>(r) * D, D,
                out.ptr() + static_cast<int64_t>(idx[r]) * D);
  return out;
}

template <class T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& xs) {
  check(!xs.empty(), "concat_rows: empty input");
  const int64_t D = xs[0].dim(1);
  int64_t N = 0;
  for (const auto& x : xs) {
    check_2d(x, "concat_rows");
    check(x.dim(1) == D, "concat_rows: column mismatch");
    N += x.dim(0);
  }
  std::vector<Tensor<T>> parents = xs;
  Tensor<T> out = make_op_output<T>({N, D}, std::move(parents), [D](const Tensor<T>& o) {
    const T* G = o.grad_ptr();
    int64_t row = 0;
    for (const auto& p : o.node->parents) {
      const int64_t rows = p.dim(0);
      if (p.requires_grad) {
        T* dP = p.grad->data();
        for (int64_t i = 0; i < rows * D; ++i) dP[i] += G[row * D + i];
      }
      row += rows;
    }
  });
  int64_t row = 0;
  for (const auto& x : xs) {
    std::copy_n(x.ptr(), x.numel(), out.ptr() + row * D);
    row += x.dim(0);
  }
  return out;
}

template <class T>
Tensor<T> slice_cols(const Tensor<T>& x, int64_t off, int64_t len) {
  check_2d(x, "slice_cols");
  const int64_t N = x.dim(0), D = x.dim(1);
  check(off >= 0 && len > 0 && off + len <= D, "slice_cols: invalid range");
  Tensor<T> out = make_op_output<T>({N, len}, {x}, [off, len, D, N](const Tensor<T>& o) {
    const auto& px = o.node->parents[0];
    if (!px.requires_grad) return;
    T* dX = px.grad->data();
    const T* G = o.grad_ptr();
    for (int64_t i = 0; i < N; ++i)
      for (int64_t j = 0; j < len; ++j) dX[i * D + off + j] += G[i * len + j];
  });
  for (int64_t i = 0; i < N; ++i)
    std::copy_n(x.ptr() + i * D + off, len, out.ptr() + i * len);
  return out;
}

template <class T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& xs) {
  check(!xs.empty(), "concat_cols: empty input");
  const int64_t N = xs[0].dim(0);
  int64_t D = 0;
  for (const auto& x : xs) {
    check_2d(x, "concat_cols");
    check(x.dim(0) == N, "concat_cols: row mismatch");
    D += x.dim(1);
  }
  std::vector<Tensor<T>> parents = xs;
  Tensor<T> out = make_op_output<T>({N, D}, std::move(parents), [N, D](const Tensor<T>& o) {
    const T* G = o.grad_ptr();
    int64_t col = 0;
    for (const auto& p : o.node->parents) {
      const int64_t pd = p.dim(1);
      if (p.requires_grad) {
        T* dP = p.grad->data();
        for (int64_t i = 0; i < N; ++i)
          for (int64_t j = 0; j < pd; ++j) dP[i * pd + j] += G[i * D + col + j];
      }
      col += pd;
    }
  });
  int64_t col = 0;
  for (const auto& x : xs) {
    const int64_t pd = x.dim(1);
    for (int64_t i = 0; i < N; ++i)
      std::copy_n(x.ptr() + i * pd, pd, out.ptr() + i * D + col);
    col += pd;
  }
  return out;
}

// x: [1, D] -> [n, D]
template <class T>
Tensor<T> tile_rows(const Tensor<T>& x, int64_t n) {
  check_2d(x, "tile_rows");
  check(x.dim(0) == 1, "tile_rows: expected single row");
  const int64_t D = x.dim(1);
  Tensor<T> out = make_op_output<T>({n, D}, {x}, [n, D](const Tensor<T>& o) {
    const auto& px = o.node->parents[0];
    if (!px.requires_grad) return;
    T* dX = px.grad->data();
    const T* G = o.grad_ptr();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < D; ++j) dX[j] += G[i * D + j];
  });
  for (int64_t i = 0; i < n; ++i) std::copy_n(x.ptr(), D, out.ptr() + i * D);
  return out;
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
  Tensor<T> out = make_op_output<T>({1}, {x}, [](const Tensor<T>& o) {
    const auto& px = o.node->parents[0];
    if (!px.requires_grad) return;
    const T g = (*o.grad)[0];
    for (int64_t i = 0; i < px.numel(); ++i) (*px.grad)[i] += g;
  });
  double acc = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) acc += static_cast<double>((*x.data)[i]);
  (*out.data)[0] = static_cast<T>(acc);
  return out;
}

// x: [N, D] -> [1, D]
template <class T>
Tensor<T> sum_rows(const Tensor<T>& x) {
  check_2d(x, "sum_rows");
  const int64_t N = x.dim(0), D = x.dim(1);
  Tensor<T> out = make_op_output<T>({1, D}, {x}, [N, D](const Tensor<T>& o) {
    const auto& px = o.node->parents[0];
    if (!px.requires_grad) return;
    T* dX = px.grad->data();
    const T* G = o.grad_ptr();
    for (int64_t i = 0; i < N; ++i)
      for (int64_t j = 0; j < D; ++j) dX[i * D + j] += G[j];
  });
  for (int64_t i = 0; i < N; ++i)
    for (int64_t j = 0; j < D; ++j) (*out.data)[j] += (*x.data)[i * D + j];
  return out;
}

// Row-wise layer norm with affine parameters. gamma, beta: [D].
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps = 1e-5) {
  check_2d(x, "layer_norm");
  const int64_t N = x.dim(0), D = x.dim(1);
  check(gamma.ndim() == 1 && gamma.dim(0) == D, "layer_norm: gamma shape");
  check(beta.ndim() == 1 && beta.dim(0) == D, "layer_norm: beta shape");

  auto xhat = std::make_shared<std::vector<T>>(static_cast<size_t>(N * D));
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(N));

  Tensor<T> out = make_op_output<T>(x.shape, {x, gamma, beta},
                                    [N, D, xhat, inv_std](const Tensor<T>& o) {
    const auto& px = o.node->parents[0];
    const auto& pg = o.node->parents[1];
    const auto& pb = o.node->parents[2];
    const T* G = o.grad_ptr();
    const T* H = xhat->data();
    for (int64_t i = 0; i < N; ++i) {
      const T* g_row = G + i * D;
      const T* h_row = H + i * D;
      if (pg.requires_grad)
        for (int64_t j = 0; j < D; ++j) (*pg.grad)[j] += g_row[j] * h_row[j];
      if (pb.requires_grad)
        for (int64_t j = 0; j < D; ++j) (*pb.grad)[j] += g_row[j];
      if (px.requires_grad) {
        T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
        const T* gm = pg.ptr();
        for (int64_t j = 0; j < D; ++j) {
          const T dxh = g_row[j] * gm[j];
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * h_row[j];
        }
        mean_dxhat /= static_cast<T>(D);
        mean_dxhat_xhat /= static_cast<T>(D);
        const T is = (*inv_std)[i];
        T* dx_row = px.grad->data() + i * D;
        for (int64_t j = 0; j < D; ++j) {
          const T dxh = g_row[j] * gm[j];
          dx_row[j] += is * (dxh - mean_dxhat - h_row[j] * mean_dxhat_xhat);
        }
      }
    }
  });

  for (int64_t i = 0; i < N; ++i) {
    const T* row = x.ptr() + i * D;
    double mean = 0.0;
    for (int64_t j = 0; j < D; ++j) mean += static_cast<double>(row[j]);
    mean /= static_cast<double>(D);
    double var = 0.0;
    for (int64_t j = 0; j < D; ++j) {
      const double d = static_cast<double>(row[j]) - mean;
      var += d * d;
    }
    var /= static_cast<double>(D);
    const T is = static_cast<T>(1.0 / std::sqrt(var + eps));
    (*inv_std)[i] = is;
    for (int64_t j = 0; j < D; ++j) {
      const T h = static_cast<T>((static_cast<double>(row[j]) - mean)) * is;
      (*xhat)[i * D + j] = h;
      (*out.data)[i * D + j] = (*gamma.data)[j] * h + (*beta.data)[j];
    }
  }
  return out;
}

// Exact GELU: x * Phi(x).
template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> out = make_op_output<T>(x.shape, {x}, [](const Tensor<T>& o) {
    const auto& px = o.node->parents[0];
    if (!px.requires_grad) return;
    const int64_t n = o.numel();
    for (int64_t i = 0; i < n; ++i) {
      const T v = (*px.data)[i];
      const T phi = static_cast<T>(0.5) * (T(1) + std::erf(v * static_cast<T>(0.7071067811865476)));
      const T pdf = std::exp(static_cast<T>(-0.5) * v * v) *
                    static_cast<T>(0.3989422804014327);
      (*px.grad)[i] += (*o.grad)[i] * (phi + v * pdf);
    }
  });
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) {
    const T v = (*x.data)[i];
    (*out.data)[i] = v * static_cast<T>(0.5) * (T(1) + std::erf(v * static_cast<T>(0.7071067811865476)));
  }
  return out;
}

// Numerically stabilized softmax along an axis. Non-finite input is an error.
template <class T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  check(axis >= 0 && axis < static_cast<int>(x.ndim()),
        "softmax: invalid axis " + std::to_string(axis) + " for " + shape_str(x.shape));
  check(x.all_finite(), "softmax: non-finite input");
  const int64_t len = x.shape[static_cast<size_t>(axis)];
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.shape[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < x.ndim(); ++i) inner *= x.shape[i];

  Tensor<T> out = make_op_output<T>(x.shape, {x}, [outer, len, inner](const Tensor<T>& o) {
    const auto& px = o.node->parents[0];
    if (!px.requires_grad) return;
    const T* Y = o.ptr();
    const T* G = o.grad_ptr();
    T* dX = px.grad->data();
    for (int64_t a = 0; a < outer; ++a)
      for (int64_t c = 0; c < inner; ++c) {
        const int64_t base = a * len * inner + c;
        T dot = T(0);
        for (int64_t b = 0; b < len; ++b) dot += G[base + b * inner] * Y[base + b * inner];
        for (int64_t b = 0; b < len; ++b) {
          const int64_t k = base + b * inner;
          dX[k] += Y[k] * (G[k] - dot);
        }
      }
  });

  const T* X = x.ptr();
  T* Y = out.ptr();
  for (int64_t a = 0; a < outer; ++a)
    for (int64_t c = 0; c < inner; ++c) {
      const int64_t base = a * len * inner + c;
      T mx = X[base];
      for (int64_t b = 1; b < len; ++b) mx = std::max(mx, X[base + b * inner]);
      T sum = T(0);
      for (int64_t b = 0; b < len; ++b) {
        const T e = std::exp(X[base + b * inner] - mx);
        Y[base + b * inner] = e;
        sum += e;
      }
      const T inv = T(1) / sum;
      for (int64_t b = 0; b < len; ++b) Y[base + b * inner] *= inv;
    }
  return out;
}

// Row softmax with an additive mask of 0 / -inf (mask is plain data, not
// differentiated). Masked lanes come out exactly 0, so downstream products
// are bitwise independent of masked inputs.
template <class T>
Tensor<T> softmax_rows_additive(const Tensor<T>& x, const Tensor<T>& mask) {
  check_2d(x, "softmax_rows_additive");
  check_same_shape(x, mask, "softmax_rows_additive");
  const int64_t N = x.dim(0), M = x.dim(1);
  Tensor<T> out = make_op_output<T>(x.shape, {x}, [N, M](const Tensor<T>& o) {
    const auto& px = o.node->parents[0];
    if (!px.requires_grad) return;
    const T* Y = o.ptr();
    const T* G = o.grad_ptr();
    T* dX = px.grad->data();
    for (int64_t i = 0; i < N; ++i) {
      T dot = T(0);
      for (int64_t j = 0; j < M; ++j) dot += G[i * M + j] * Y[i * M + j];
      for (int64_t j = 0; j < M; ++j) {
        const int64_t k = i * M + j;
        dX[k] += Y[k] * (G[k] - dot);
      }
    }
  });
  const T* X = x.ptr();
  const T* A = mask.ptr();
  T* Y = out.ptr();
  const T ninf = -std::numeric_limits<T>::infinity();
  for (int64_t i = 0; i < N; ++i) {
    T mx = ninf;
    for (int64_t j = 0; j < M; ++j) {
      const T v = A[i * M + j] == ninf ? ninf : X[i * M + j] + A[i * M + j];
      mx = std::max(mx, v);
    }
    check(mx != ninf, "softmax_rows_additive: fully masked row");
    T sum = T(0);
    for (int64_t j = 0; j < M; ++j) {
      const T v = A[i * M + j] == ninf ? ninf : X[i * M + j] + A[i * M + j];
      const T e = v == ninf ? T(0) : std::exp(v - mx);
      Y[i * M + j] = e;
      sum += e;
    }
    const T inv = T(1) / sum;
    for (int64_t j = 0; j < M; ++j) Y[i * M + j] *= inv;
  }
  return out;
}

// Summed negative log likelihood over non-ignored rows. logits: [N, K].
// Rows whose target equals ignore_index contribute nothing and are not
// counted; *counted receives the number of scored rows.
template <class T>
Tensor<T> cross_entropy_sum(const Tensor<T>& logits, const std::vector<int>& targets,
                            int ignore_index = -1, int64_t* counted = nullptr) {
  check_2d(logits, "cross_entropy");
  const int64_t N = logits.dim(0), K = logits.dim(1);
  check(static_cast<int64_t>(targets.size()) == N, "cross_entropy: target count vs rows");
  for (int t : targets)
    check(t == ignore_index || (t >= 0 && t < K),
          "cross_entropy: target " + std::to_string(t) + " out of range [0," + std::to_string(K) + ")");

  Tensor<T> out = make_op_output<T>({1}, {logits}, [targets, ignore_index, N, K](const Tensor<T>& o) {
    const auto& pl = o.node->parents[0];
    if (!pl.requires_grad) return;
    const T g = (*o.grad)[0];
    const T* L = pl.ptr();
    T* dL = pl.grad->data();
    for (int64_t i = 0; i < N; ++i) {
      if (targets[static_cast<size_t>(i)] == ignore_index) continue;
      const T* row = L + i * K;
      T mx = row[0];
      for (int64_t j = 1; j < K; ++j) mx = std::max(mx, row[j]);
      T sum = T(0);
      for (int64_t j = 0; j < K; ++j) sum += std::exp(row[j] - mx);
      const T inv = T(1) / sum;
      T* drow = dL + i * K;
      for (int64_t j = 0; j < K; ++j) drow[j] += g * std::exp(row[j] - mx) * inv;
      drow[targets[static_cast<size_t>(i)]] -= g;
    }
  });

  double loss = 0.0;
  int64_t n_counted = 0;
  const T* L = logits.ptr();
  for (int64_t i = 0; i < N; ++i) {
    const int t = targets[static_cast<size_t>(i)];
    if (t == ignore_index) continue;
    const T* row = L + i * K;
    T mx = row[0];
    for (int64_t j = 1; j < K; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < K; ++j) sum += std::exp(static_cast<double>(row[j] - mx));
    loss += static_cast<double>(mx) + std::log(sum) - static_cast<double>(row[t]);
    ++n_counted;
  }
  (*out.data)[0] = static_cast<T>(loss);
  if (counted) *counted = n_counted;
  return out;
}

}  // namespace iafm
