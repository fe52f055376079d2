#include "dirfocus/nn/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "dirfocus/error.hpp"

namespace dirfocus::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using CMapRow = Eigen::Map<const RowMat>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) +
                     " differ");
  }
}

Eigen::VectorXd& parent_grad(Node& n, std::size_t i) { return n.parents[i]->grad_buffer(); }
bool parent_wants(const Node& n, std::size_t i) { return n.parents[i]->requires_grad; }

// Spatial geometry of a convolution padded to three axes.
struct ConvGeom {
  Index batch = 0, cin = 0, cout = 0;
  std::array<Index, 3> in{1, 1, 1}, k{1, 1, 1}, s{1, 1, 1}, p{0, 0, 0}, out{1, 1, 1};
  Index in_size() const { return in[0] * in[1] * in[2]; }
  Index out_size() const { return out[0] * out[1] * out[2]; }
  Index patch() const { return cin * k[0] * k[1] * k[2]; }
};

ConvGeom conv_geometry(const Tensor& x, const Tensor& w, const std::vector<Index>& stride,
                       const std::vector<Index>& padding) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  const std::size_t nd = xs.size() >= 2 ? xs.size() - 2 : 0;
  if (nd < 1 || nd > 3 || ws.size() != xs.size()) {
    throw ShapeError("conv: input " + shape_string(xs) + " and kernel " + shape_string(ws) +
                     " must both have rank 3, 4 or 5 ([B, C, spatial...] and [Cout, Cin, kernel...])");
  }
  if (ws[1] != xs[1]) {
    throw ShapeError("conv: kernel " + shape_string(ws) + " expects " + std::to_string(ws[1]) +
                     " input channels, input " + shape_string(xs) + " has " + std::to_string(xs[1]));
  }
  if ((!stride.empty() && stride.size() != nd) || (!padding.empty() && padding.size() != nd))
    throw ShapeError("conv: stride/padding need one entry per spatial axis");
  ConvGeom g;
  g.batch = xs[0];
  g.cin = xs[1];
  g.cout = ws[0];
  const std::size_t off = 3 - nd;
  for (std::size_t i = 0; i < nd; ++i) {
    g.in[off + i] = xs[2 + i];
    g.k[off + i] = ws[2 + i];
    g.s[off + i] = stride.empty() ? 1 : stride[i];
    g.p[off + i] = padding.empty() ? 0 : padding[i];
    if (g.s[off + i] < 1 || g.p[off + i] < 0) throw ParameterError("conv: stride must be >= 1 and padding >= 0");
    const Index span = g.in[off + i] + 2 * g.p[off + i] - g.k[off + i];
    if (span < 0) {
      throw ShapeError("conv: kernel " + shape_string(ws) + " is larger than padded input " + shape_string(xs));
    }
    g.out[off + i] = span / g.s[off + i] + 1;
  }
  return g;
}

// Output positions o2 in [lo, hi) read input index o2 * s + k - p inside [0, n).
std::pair<Index, Index> valid_range(Index n, Index out, Index k, Index s, Index p) {
  auto floor_div = [](Index a, Index b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
  const Index lo = std::min(out, std::max<Index>(0, -floor_div(k - p, s)));
  const Index hi = std::max(lo, std::min(out, floor_div(n - 1 + p - k, s) + 1));
  return {lo, hi};
}

// cols[r, o]: r runs over (ci, k0, k1, k2), o over (o0, o1, o2).
void im2col(const double* x, const ConvGeom& g, double* cols) {
  const Index osz = g.out_size();
  Index r = 0;
  for (Index ci = 0; ci < g.cin; ++ci) {
    const double* xc = x + ci * g.in_size();
    for (Index k0 = 0; k0 < g.k[0]; ++k0)
      for (Index k1 = 0; k1 < g.k[1]; ++k1)
        for (Index k2 = 0; k2 < g.k[2]; ++k2, ++r) {
          double* row = cols + r * osz;
          const auto [lo, hi] = valid_range(g.in[2], g.out[2], k2, g.s[2], g.p[2]);
          for (Index o0 = 0; o0 < g.out[0]; ++o0) {
            const Index i0 = o0 * g.s[0] + k0 - g.p[0];
            for (Index o1 = 0; o1 < g.out[1]; ++o1, row += g.out[2]) {
              const Index i1 = o1 * g.s[1] + k1 - g.p[1];
              if (i0 < 0 || i0 >= g.in[0] || i1 < 0 || i1 >= g.in[1]) {
                std::fill(row, row + g.out[2], 0.0);
                continue;
              }
              const double* xr = xc + (i0 * g.in[1] + i1) * g.in[2] + k2 - g.p[2];
              std::fill(row, row + lo, 0.0);
              if (g.s[2] == 1) {
                std::copy(xr + lo, xr + hi, row + lo);
              } else {
                for (Index o2 = lo; o2 < hi; ++o2) row[o2] = xr[o2 * g.s[2]];
              }
              std::fill(row + hi, row + g.out[2], 0.0);
            }
          }
        }
  }
}

void col2im(const double* cols, const ConvGeom& g, double* dx) {
  const Index osz = g.out_size();
  Index r = 0;
  for (Index ci = 0; ci < g.cin; ++ci) {
    double* xc = dx + ci * g.in_size();
    for (Index k0 = 0; k0 < g.k[0]; ++k0)
      for (Index k1 = 0; k1 < g.k[1]; ++k1)
        for (Index k2 = 0; k2 < g.k[2]; ++k2, ++r) {
          const double* row = cols + r * osz;
          const auto [lo, hi] = valid_range(g.in[2], g.out[2], k2, g.s[2], g.p[2]);
          for (Index o0 = 0; o0 < g.out[0]; ++o0) {
            const Index i0 = o0 * g.s[0] + k0 - g.p[0];
            for (Index o1 = 0; o1 < g.out[1]; ++o1, row += g.out[2]) {
              const Index i1 = o1 * g.s[1] + k1 - g.p[1];
              if (i0 < 0 || i0 >= g.in[0] || i1 < 0 || i1 >= g.in[1]) continue;
              double* xr = xc + (i0 * g.in[1] + i1) * g.in[2] + k2 - g.p[2];
              if (g.s[2] == 1) {
                for (Index o2 = lo; o2 < hi; ++o2) xr[o2] += row[o2];
              } else {
                for (Index o2 = lo; o2 < hi; ++o2) xr[o2 * g.s[2]] += row[o2];
              }
            }
          }
        }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return make_result(a.shape(), a.value() + b.value(), {a, b}, [](Node& n) {
    for (std::size_t i = 0; i < 2; ++i)
      if (parent_wants(n, i)) parent_grad(n, i) += n.grad;
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return make_result(a.shape(), a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    if (parent_wants(n, 0)) parent_grad(n, 0) += n.grad.cwiseProduct(n.parents[1]->value);
    if (parent_wants(n, 1)) parent_grad(n, 1) += n.grad.cwiseProduct(n.parents[0]->value);
  });
}

Tensor scale(const Tensor& a, double s) {
  return make_result(a.shape(), a.value() * s, {a}, [s](Node& n) { parent_grad(n, 0) += s * n.grad; });
}

Tensor sum(const Tensor& a) {
  return make_result({}, Eigen::VectorXd::Constant(1, a.value().sum()), {a},
                     [](Node& n) { parent_grad(n, 0).array() += n.grad[0]; });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean of an empty tensor");
  const double inv = 1.0 / static_cast<double>(a.size());
  return make_result({}, Eigen::VectorXd::Constant(1, a.value().sum() * inv), {a},
                     [inv](Node& n) { parent_grad(n, 0).array() += n.grad[0] * inv; });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (numel(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  }
  return make_result(shape, a.value(), {a}, [](Node& n) { parent_grad(n, 0) += n.grad; });
}

Tensor flatten(const Tensor& a) {
  if (a.rank() < 1) throw ShapeError("flatten needs a batch axis");
  const Index b = a.dim(0);
  return reshape(a, {b, b == 0 ? 0 : a.size() / b});
}

Tensor relu(const Tensor& a) {
  return make_result(a.shape(), a.value().cwiseMax(0.0), {a}, [](Node& n) {
    const auto& x = n.parents[0]->value;
    parent_grad(n, 0).array() += (x.array() > 0.0).select(n.grad.array(), 0.0);
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1)) {
    throw ShapeError("linear: input " + shape_string(x.shape()) + " does not match weight " + shape_string(w.shape()));
  }
  const Index batch = x.dim(0), in = x.dim(1), out = w.dim(0);
  const bool has_bias = b.defined();
  if (has_bias && (b.rank() != 1 || b.dim(0) != out))
    throw ShapeError("linear: bias " + shape_string(b.shape()) + " does not match weight " + shape_string(w.shape()));

  Eigen::VectorXd y(batch * out);
  MapRow ym(y.data(), batch, out);
  ym.noalias() = CMapRow(x.value().data(), batch, in) * CMapRow(w.value().data(), out, in).transpose();
  if (has_bias) ym.rowwise() += b.value().transpose();

  std::vector<Tensor> parents{x, w};
  if (has_bias) parents.push_back(b);
  return make_result({batch, out}, std::move(y), parents, [batch, in, out, has_bias](Node& n) {
    const CMapRow gy(n.grad.data(), batch, out);
    if (parent_wants(n, 0)) {
      MapRow(parent_grad(n, 0).data(), batch, in).noalias() += gy * CMapRow(n.parents[1]->value.data(), out, in);
    }
    if (parent_wants(n, 1)) {
      MapRow(parent_grad(n, 1).data(), out, in).noalias() += gy.transpose() * CMapRow(n.parents[0]->value.data(), batch, in);
    }
    if (has_bias && parent_wants(n, 2)) parent_grad(n, 2) += gy.colwise().sum().transpose();
  });
}

Tensor conv(const Tensor& x, const Tensor& w, const Tensor& b, std::vector<Index> stride, std::vector<Index> padding) {
  const ConvGeom g = conv_geometry(x, w, stride, padding);
  const bool has_bias = b.defined();
  if (has_bias && (b.rank() != 1 || b.dim(0) != g.cout))
    throw ShapeError("conv: bias " + shape_string(b.shape()) + " does not match kernel " + shape_string(w.shape()));

  Shape out_shape{g.batch, g.cout};
  for (std::size_t i = 2; i < x.shape().size(); ++i) out_shape.push_back(g.out[3 - (x.shape().size() - i)]);

  const Index osz = g.out_size(), patch = g.patch();
  Eigen::VectorXd y(g.batch * g.cout * osz);
  RowMat cols(patch, osz);
  const CMapRow wm(w.value().data(), g.cout, patch);
  for (Index bi = 0; bi < g.batch; ++bi) {
    im2col(x.value().data() + bi * g.cin * g.in_size(), g, cols.data());
    MapRow yb(y.data() + bi * g.cout * osz, g.cout, osz);
    yb.noalias() = wm * cols;
    if (has_bias) yb.colwise() += b.value();
  }

  std::vector<Tensor> parents{x, w};
  if (has_bias) parents.push_back(b);
  return make_result(std::move(out_shape), std::move(y), parents, [g, has_bias](Node& n) {
    const Index osz = g.out_size(), patch = g.patch();
    const auto& xv = n.parents[0]->value;
    const CMapRow wm(n.parents[1]->value.data(), g.cout, patch);
    const bool want_x = parent_wants(n, 0), want_w = parent_wants(n, 1);
    const bool want_b = has_bias && parent_wants(n, 2);
    RowMat cols(patch, osz);
    RowMat dcols;
    for (Index bi = 0; bi < g.batch; ++bi) {
      const CMapRow gy(n.grad.data() + bi * g.cout * osz, g.cout, osz);
      if (want_w) {
        im2col(xv.data() + bi * g.cin * g.in_size(), g, cols.data());
        MapRow(parent_grad(n, 1).data(), g.cout, patch).noalias() += gy * cols.transpose();
      }
      if (want_x) {
        dcols.noalias() = wm.transpose() * gy;
        col2im(dcols.data(), g, parent_grad(n, 0).data() + bi * g.cin * g.in_size());
      }
      if (want_b) parent_grad(n, 2) += gy.rowwise().sum();
    }
  });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean, Tensor& running_var,
                  bool training, double momentum, double eps) {
  if (x.rank() < 2) throw ShapeError("batch_norm: input " + shape_string(x.shape()) + " needs [B, C, ...]");
  const Index batch = x.dim(0), ch = x.dim(1);
  const Index inner = batch == 0 ? 0 : x.size() / (batch * ch);
  for (const Tensor* t : {&gamma, &beta, static_cast<const Tensor*>(&running_mean), static_cast<const Tensor*>(&running_var)}) {
    if (t->rank() != 1 || t->dim(0) != ch) {
      throw ShapeError("batch_norm: per-channel parameter " + shape_string(t->shape()) + " does not match input " +
                       shape_string(x.shape()));
    }
  }
  const Index count = batch * inner;
  if (training && count < 1) throw ShapeError("batch_norm: empty batch");

  Eigen::VectorXd mu(ch), inv_std(ch);
  const double* xv = x.value().data();
  if (training) {
    for (Index c = 0; c < ch; ++c) {
      double s = 0;
      for (Index bi = 0; bi < batch; ++bi) {
        const double* p = xv + (bi * ch + c) * inner;
        for (Index i = 0; i < inner; ++i) s += p[i];
      }
      const double m = s / static_cast<double>(count);
      double ss = 0;
      for (Index bi = 0; bi < batch; ++bi) {
        const double* p = xv + (bi * ch + c) * inner;
        for (Index i = 0; i < inner; ++i) ss += (p[i] - m) * (p[i] - m);
      }
      const double var = ss / static_cast<double>(count);
      mu[c] = m;
      inv_std[c] = 1.0 / std::sqrt(var + eps);
      const double unbiased = count > 1 ? ss / static_cast<double>(count - 1) : var;
      running_mean.value()[c] = (1 - momentum) * running_mean.value()[c] + momentum * m;
      running_var.value()[c] = (1 - momentum) * running_var.value()[c] + momentum * unbiased;
    }
  } else {
    mu = running_mean.value();
    inv_std = (running_var.value().array() + eps).rsqrt();
  }

  Eigen::VectorXd xhat(x.size()), y(x.size());
  for (Index bi = 0; bi < batch; ++bi)
    for (Index c = 0; c < ch; ++c) {
      const Index off = (bi * ch + c) * inner;
      for (Index i = 0; i < inner; ++i) {
        xhat[off + i] = (xv[off + i] - mu[c]) * inv_std[c];
        y[off + i] = gamma.value()[c] * xhat[off + i] + beta.value()[c];
      }
    }

  return make_result(x.shape(), std::move(y), {x, gamma, beta},
                     [xhat = std::move(xhat), inv_std, batch, ch, inner, count, training](Node& n) {
                       const auto& g = n.parents[1]->value;
                       Eigen::VectorXd dgamma = Eigen::VectorXd::Zero(ch), dbeta = Eigen::VectorXd::Zero(ch);
                       for (Index bi = 0; bi < batch; ++bi)
                         for (Index c = 0; c < ch; ++c) {
                           const Index off = (bi * ch + c) * inner;
                           for (Index i = 0; i < inner; ++i) {
                             dgamma[c] += n.grad[off + i] * xhat[off + i];
                             dbeta[c] += n.grad[off + i];
                           }
                         }
                       if (parent_wants(n, 0)) {
                         auto& dx = parent_grad(n, 0);
                         const double inv_n = 1.0 / static_cast<double>(count);
                         for (Index bi = 0; bi < batch; ++bi)
                           for (Index c = 0; c < ch; ++c) {
                             const Index off = (bi * ch + c) * inner;
                             const double k = g[c] * inv_std[c];
                             for (Index i = 0; i < inner; ++i) {
                               const double gy = n.grad[off + i];
                               dx[off + i] += training ? k * (gy - inv_n * dbeta[c] - inv_n * xhat[off + i] * dgamma[c])
                                                       : k * gy;
                             }
                           }
                       }
                       if (parent_wants(n, 1)) parent_grad(n, 1) += dgamma;
                       if (parent_wants(n, 2)) parent_grad(n, 2) += dbeta;
                     });
}

Tensor avg_pool_last(const Tensor& x, Index window, Index stride, bool ceil_mode) {
  if (x.rank() < 1) throw ShapeError("avg_pool_last needs at least one axis");
  if (window < 1 || stride < 1) throw ParameterError("avg_pool_last: window and stride must be >= 1");
  const Index t = x.dim(-1);
  if (window > t) {
    throw ShapeError("avg_pool_last: window " + std::to_string(window) + " exceeds last axis of " +
                     shape_string(x.shape()));
  }
  const Index rows = x.size() / t;
  const Index p = (ceil_mode ? (t - window + stride - 1) / stride : (t - window) / stride) + 1;
  Shape out_shape = x.shape();
  out_shape.back() = p;
  std::vector<Index> start(static_cast<std::size_t>(p)), len(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    start[static_cast<std::size_t>(j)] = j * stride;
    len[static_cast<std::size_t>(j)] = std::min(window, t - j * stride);
  }
  Eigen::VectorXd y(rows * p);
  const CMapRow xm(x.value().data(), rows, t);
  MapRow ym(y.data(), rows, p);
  for (Index j = 0; j < p; ++j) {
    const auto u = static_cast<std::size_t>(j);
    ym.col(j) = xm.middleCols(start[u], len[u]).rowwise().sum() / static_cast<double>(len[u]);
  }
  return make_result(std::move(out_shape), std::move(y), {x}, [rows, t, p, start, len](Node& n) {
    MapRow dx(parent_grad(n, 0).data(), rows, t);
    const CMapRow gy(n.grad.data(), rows, p);
    for (Index j = 0; j < p; ++j) {
      const auto u = static_cast<std::size_t>(j);
      dx.middleCols(start[u], len[u]).colwise() += gy.col(j) / static_cast<double>(len[u]);
    }
  });
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
  if (a.rank() < 1 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin())) {
    throw ShapeError("concat_last: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) +
                     " differ outside the last axis");
  }
  const Index ta = a.dim(-1), tb = b.dim(-1);
  const Index rows = ta + tb == 0 ? 0 : (a.size() + b.size()) / (ta + tb);
  Shape out_shape = a.shape();
  out_shape.back() = ta + tb;
  Eigen::VectorXd y(a.size() + b.size());
  MapRow ym(y.data(), rows, ta + tb);
  ym.leftCols(ta) = CMapRow(a.value().data(), rows, ta);
  ym.rightCols(tb) = CMapRow(b.value().data(), rows, tb);
  return make_result(std::move(out_shape), std::move(y), {a, b}, [rows, ta, tb](Node& n) {
    const CMapRow gy(n.grad.data(), rows, ta + tb);
    if (parent_wants(n, 0)) MapRow(parent_grad(n, 0).data(), rows, ta) += gy.leftCols(ta);
    if (parent_wants(n, 1)) MapRow(parent_grad(n, 1).data(), rows, tb) += gy.rightCols(tb);
  });
}

Eigen::MatrixXd softmax_rows(const Eigen::Ref<const Eigen::MatrixXd>& logits) {
  Eigen::MatrixXd p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

CrossEntropy softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) throw ShapeError("cross entropy needs [B, N] logits, got " + shape_string(logits.shape()));
  const Index batch = logits.dim(0), classes = logits.dim(1);
  if (static_cast<Index>(labels.size()) != batch) {
    throw ShapeError("cross entropy: " + std::to_string(labels.size()) + " labels for a batch of " +
                     std::to_string(batch));
  }
  if (batch == 0) throw ShapeError("cross entropy on an empty batch");
  for (int l : labels)
    if (l < 0 || l >= classes) throw ParameterError("label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");

  const Eigen::MatrixXd z = CMapRow(logits.value().data(), batch, classes);
  const Eigen::VectorXd zmax = z.rowwise().maxCoeff();
  const Eigen::VectorXd lse = ((z.colwise() - zmax).array().exp().rowwise().sum().log()).matrix() + zmax;
  double loss = 0;
  for (Index i = 0; i < batch; ++i) loss += lse[i] - z(i, labels[static_cast<std::size_t>(i)]);
  loss /= static_cast<double>(batch);

  CrossEntropy out;
  out.probabilities = softmax_rows(z);
  Eigen::MatrixXd dz = out.probabilities;
  for (Index i = 0; i < batch; ++i) dz(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  dz /= static_cast<double>(batch);
  RowMat dz_row = dz;
  out.loss = make_result({}, Eigen::VectorXd::Constant(1, loss), {logits},
                         [dz_row = std::move(dz_row)](Node& n) {
                           parent_grad(n, 0) += n.grad[0] * Eigen::Map<const Eigen::VectorXd>(dz_row.data(), dz_row.size());
                         });
  return out;
}

}  // namespace dirfocus::nn
