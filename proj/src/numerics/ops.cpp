#include "embanon/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "embanon/errors.hpp"
#include "embanon/numerics/kernels.hpp"

namespace embanon::numerics {

namespace {

using detail::TensorImpl;

TensorImpl& parent(const TensorImpl& out, std::size_t i) {
  return *out.parents[i];
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

std::size_t last_extent(const Tensor& x) { return x.shape().back(); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " +
                         shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  gemm(m, n, k, a.values(), b.values(), out, false);
  return Tensor::make_result(
      {m, n}, std::move(out), {a, b}, [m, n, k](const TensorImpl& o) {
        TensorImpl& pa = parent(o, 0);
        TensorImpl& pb = parent(o, 1);
        if (pa.requires_grad) {
          std::vector<double> bt(n * k);
          transpose(k, n, pb.values, bt);
          gemm(m, k, n, o.grad, bt, pa.ensure_grad(), true);
        }
        if (pb.requires_grad) {
          std::vector<double> at(k * m);
          transpose(m, k, pa.values, at);
          gemm(k, n, m, at, o.grad, pb.ensure_grad(), true);
        }
      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b},
                             [](const TensorImpl& o) {
                               for (std::size_t p = 0; p < 2; ++p) {
                                 TensorImpl& in = parent(o, p);
                                 if (!in.requires_grad) continue;
                                 auto& g = in.ensure_grad();
                                 for (std::size_t i = 0; i < g.size(); ++i)
                                   g[i] += o.grad[i];
                               }
                             });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, b}, [](const TensorImpl& o) {
        for (std::size_t p = 0; p < 2; ++p) {
          TensorImpl& in = parent(o, p);
          if (!in.requires_grad) continue;
          const double sign = p == 0 ? 1.0 : -1.0;
          auto& g = in.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * o.grad[i];
        }
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, b}, [](const TensorImpl& o) {
        TensorImpl& pa = parent(o, 0);
        TensorImpl& pb = parent(o, 1);
        if (pa.requires_grad) {
          auto& g = pa.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += o.grad[i] * pb.values[i];
        }
        if (pb.requires_grad) {
          auto& g = pb.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += o.grad[i] * pa.values[i];
        }
      });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v *= factor;
  return Tensor::make_result(x.shape(), std::move(out), {x},
                             [factor](const TensorImpl& o) {
                               auto& g = parent(o, 0).ensure_grad();
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 g[i] += factor * o.grad[i];
                             });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.ndim() != 1 || bias.dim(0) != last_extent(x)) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) +
                         " does not match last axis of " +
                         shape_string(x.shape()));
  }
  const std::size_t n = bias.dim(0);
  const std::size_t rows = x.numel() / n;
  std::vector<double> out(x.values().begin(), x.values().end());
  auto bv = bias.values();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bv[j];
  return Tensor::make_result(
      x.shape(), std::move(out), {x, bias}, [rows, n](const TensorImpl& o) {
        TensorImpl& px = parent(o, 0);
        TensorImpl& pb = parent(o, 1);
        if (px.requires_grad) {
          auto& g = px.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
        }
        if (pb.requires_grad) {
          auto& g = pb.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[r * n + j];
        }
      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) +
                         " as " + shape_string(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return Tensor::make_result(std::move(shape), std::move(out), {x},
                             [](const TensorImpl& o) {
                               auto& g = parent(o, 0).ensure_grad();
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 g[i] += o.grad[i];
                             });
}

Tensor concat_last(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_last: no parts");
  const Shape& first = parts[0].shape();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() ||
        !std::equal(s.begin(), s.end() - 1, first.begin())) {
      throw DimensionError("concat_last: leading extents differ, " +
                           shape_string(first) + " vs " + shape_string(s));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  const std::size_t rows = parts[0].numel() / widths[0];
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto v = parts[p].values();
    const std::size_t w = widths[p];
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.begin() + r * w, w, out.begin() + r * total + offset);
    offset += w;
  }
  Shape shape = first;
  shape.back() = total;
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::make_result(
      std::move(shape), std::move(out), std::move(inputs),
      [rows, total, widths](const TensorImpl& o) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < widths.size(); ++p) {
          TensorImpl& in = parent(o, p);
          const std::size_t w = widths[p];
          if (in.requires_grad) {
            auto& g = in.ensure_grad();
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t j = 0; j < w; ++j)
                g[r * w + j] += o.grad[r * total + offset + j];
          }
          offset += w;
        }
      });
}

Tensor concat_last(std::initializer_list<Tensor> parts) {
  return concat_last(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  const std::size_t n = last_extent(x);
  if (gamma.shape() != Shape{n} || beta.shape() != Shape{n}) {
    throw DimensionError("layer_norm: gain/bias must be [" +
                         std::to_string(n) + "], got " +
                         shape_string(gamma.shape()) + " and " +
                         shape_string(beta.shape()));
  }
  const std::size_t rows = x.numel() / n;
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * inv;
      (*xhat)[r * n + j] = h;
      out[r * n + j] = gv[j] * h + bv[j];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [rows, n, xhat, inv_std](const TensorImpl& o) {
        TensorImpl& px = parent(o, 0);
        TensorImpl& pg = parent(o, 1);
        TensorImpl& pb = parent(o, 2);
        if (pg.requires_grad) {
          auto& g = pg.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j)
              g[j] += o.grad[r * n + j] * (*xhat)[r * n + j];
        }
        if (pb.requires_grad) {
          auto& g = pb.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[r * n + j];
        }
        if (px.requires_grad) {
          auto& g = px.ensure_grad();
          const double nn = static_cast<double>(n);
          std::vector<double> dh(n);
          for (std::size_t r = 0; r < rows; ++r) {
            double sum_dh = 0.0, sum_dh_h = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              dh[j] = o.grad[r * n + j] * pg.values[j];
              sum_dh += dh[j];
              sum_dh_h += dh[j] * (*xhat)[r * n + j];
            }
            const double inv = (*inv_std)[r];
            for (std::size_t j = 0; j < n; ++j) {
              g[r * n + j] += inv / nn *
                              (nn * dh[j] - sum_dh -
                               (*xhat)[r * n + j] * sum_dh_h);
            }
          }
        }
      });
}

Tensor softmax_last(const Tensor& x) {
  const std::size_t n = last_extent(x);
  const std::size_t rows = x.numel() / n;
  auto xv = x.values();
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * n;
    double* y = out.data() + r * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(row[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= z;
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x}, [rows, n](const TensorImpl& o) {
        auto& g = parent(o, 0).ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* y = o.values.data() + r * n;
          const double* dy = o.grad.data() + r * n;
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
          for (std::size_t j = 0; j < n; ++j)
            g[r * n + j] += y[j] * (dy[j] - dot);
        }
      });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return Tensor::make_result(x.shape(), std::move(out), {x},
                             [](const TensorImpl& o) {
                               TensorImpl& in = parent(o, 0);
                               auto& g = in.ensure_grad();
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 if (in.values[i] > 0.0) g[i] += o.grad[i];
                             });
}

Tensor embedding_lookup(const Tensor& table,
                        std::span<const std::size_t> ids) {
  if (table.ndim() != 2) {
    throw DimensionError("embedding_lookup: table must be 2-D, got " +
                         shape_string(table.shape()));
  }
  if (ids.empty()) throw ContractError("embedding_lookup: no ids");
  const std::size_t vocab = table.dim(0), width = table.dim(1);
  for (std::size_t id : ids) {
    if (id >= vocab) {
      throw IndexError("embedding_lookup: id " + std::to_string(id) +
                       " out of range for table with " +
                       std::to_string(vocab) + " rows");
    }
  }
  std::vector<double> out(ids.size() * width);
  auto tv = table.values();
  for (std::size_t r = 0; r < ids.size(); ++r)
    std::copy_n(tv.begin() + ids[r] * width, width,
                out.begin() + r * width);
  std::vector<std::size_t> saved(ids.begin(), ids.end());
  return Tensor::make_result(
      {ids.size(), width}, std::move(out), {table},
      [width, saved = std::move(saved)](const TensorImpl& o) {
        auto& g = parent(o, 0).ensure_grad();
        for (std::size_t r = 0; r < saved.size(); ++r)
          for (std::size_t j = 0; j < width; ++j)
            g[saved[r] * width + j] += o.grad[r * width + j];
      });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse_loss");
  auto pv = pred.values();
  auto tv = target.values();
  const double n = static_cast<double>(pred.numel());
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double diff = pv[i] - tv[i];
    acc += diff * diff;
  }
  return Tensor::make_result(
      {1}, {acc / n}, {pred, target}, [n](const TensorImpl& o) {
        TensorImpl& pp = parent(o, 0);
        TensorImpl& pt = parent(o, 1);
        const double g0 = o.grad[0] * 2.0 / n;
        if (pp.requires_grad) {
          auto& g = pp.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += g0 * (pp.values[i] - pt.values[i]);
        }
        if (pt.requires_grad) {
          auto& g = pt.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] -= g0 * (pp.values[i] - pt.values[i]);
        }
      });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return Tensor::make_result({1}, {acc}, {x}, [](const TensorImpl& o) {
    auto& g = parent(o, 0).ensure_grad();
    for (double& gi : g) gi += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor cross_entropy(const Tensor& logits,
                     std::span<const std::size_t> labels) {
  if (logits.ndim() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("cross_entropy: logits " +
                         shape_string(logits.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  for (std::size_t y : labels) {
    if (y >= c) {
      throw IndexError("cross_entropy: label " + std::to_string(y) +
                       " out of range for " + std::to_string(c) + " classes");
    }
  }
  auto lv = logits.values();
  auto probs = std::make_shared<std::vector<double>>(b * c);
  double loss = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    const double* row = lv.data() + r * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j)
      (*probs)[r * c + j] = std::exp(row[j] - log_z);
    loss -= row[labels[r]] - log_z;
  }
  std::vector<std::size_t> saved(labels.begin(), labels.end());
  return Tensor::make_result(
      {1}, {loss / static_cast<double>(b)}, {logits},
      [b, c, probs, saved = std::move(saved)](const TensorImpl& o) {
        auto& g = parent(o, 0).ensure_grad();
        const double g0 = o.grad[0] / static_cast<double>(b);
        for (std::size_t r = 0; r < b; ++r) {
          for (std::size_t j = 0; j < c; ++j) {
            const double target = j == saved[r] ? 1.0 : 0.0;
            g[r * c + j] += g0 * ((*probs)[r * c + j] - target);
          }
        }
      });
}

Tensor dropout(const Tensor& x, double p, bool train, Rng& rng) {
  if (p < 0.0 || p >= 1.0) {
    throw ContractError("dropout: rate must be in [0, 1)");
  }
  if (!train || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.numel());
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = rng.uniform() < p ? 0.0 : keep_scale;
    out[i] *= (*mask)[i];
  }
  return Tensor::make_result(x.shape(), std::move(out), {x},
                             [mask](const TensorImpl& o) {
                               auto& g = parent(o, 0).ensure_grad();
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 g[i] += o.grad[i] * (*mask)[i];
                             });
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t batch, std::size_t seq,
                            std::size_t heads) {
  require_same_shape(q, k, "multi_head_attention");
  require_same_shape(q, v, "multi_head_attention");
  if (q.ndim() != 2 || q.dim(0) != batch * seq || heads == 0 ||
      q.dim(1) % heads != 0) {
    throw DimensionError("multi_head_attention: " + shape_string(q.shape()) +
                         " incompatible with batch=" + std::to_string(batch) +
                         " seq=" + std::to_string(seq) +
                         " heads=" + std::to_string(heads));
  }
  const std::size_t dm = q.dim(1);
  const std::size_t hd = dm / heads;
  const double scl = 1.0 / std::sqrt(static_cast<double>(hd));
  auto qv = q.values();
  auto kv = k.values();
  auto vv = v.values();
  // probs[((b * heads + h) * seq + i) * seq + j]
  auto probs = std::make_shared<std::vector<double>>(batch * heads * seq * seq);
  std::vector<double> out(q.numel(), 0.0);
  std::vector<double> row(seq);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      double* p = probs->data() + (b * heads + h) * seq * seq;
      for (std::size_t i = 0; i < seq; ++i) {
        const double* qi = qv.data() + (b * seq + i) * dm + h * hd;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < seq; ++j) {
          const double* kj = kv.data() + (b * seq + j) * dm + h * hd;
          double s = 0.0;
          for (std::size_t t = 0; t < hd; ++t) s += qi[t] * kj[t];
          row[j] = s * scl;
          mx = std::max(mx, row[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < seq; ++j) {
          row[j] = std::exp(row[j] - mx);
          z += row[j];
        }
        double* oi = out.data() + (b * seq + i) * dm + h * hd;
        for (std::size_t j = 0; j < seq; ++j) {
          const double pij = row[j] / z;
          p[i * seq + j] = pij;
          const double* vj = vv.data() + (b * seq + j) * dm + h * hd;
          for (std::size_t t = 0; t < hd; ++t) oi[t] += pij * vj[t];
        }
      }
    }
  }
  return Tensor::make_result(
      q.shape(), std::move(out), {q, k, v},
      [batch, seq, heads, dm, hd, scl, probs](const TensorImpl& o) {
        TensorImpl& pq = parent(o, 0);
        TensorImpl& pk = parent(o, 1);
        TensorImpl& pv = parent(o, 2);
        std::vector<double> dp(seq), ds(seq);
        std::vector<double> zero;
        auto& gq = pq.requires_grad ? pq.ensure_grad() : zero;
        auto& gk = pk.requires_grad ? pk.ensure_grad() : zero;
        auto& gv = pv.requires_grad ? pv.ensure_grad() : zero;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            const double* p = probs->data() + (b * heads + h) * seq * seq;
            for (std::size_t i = 0; i < seq; ++i) {
              const double* doi = o.grad.data() + (b * seq + i) * dm + h * hd;
              // dP_ij = dO_i . V_j ; dV_j += P_ij dO_i
              double dot = 0.0;
              for (std::size_t j = 0; j < seq; ++j) {
                const std::size_t vj = (b * seq + j) * dm + h * hd;
                double s = 0.0;
                for (std::size_t t = 0; t < hd; ++t)
                  s += doi[t] * pv.values[vj + t];
                dp[j] = s;
                dot += s * p[i * seq + j];
                if (pv.requires_grad) {
                  for (std::size_t t = 0; t < hd; ++t)
                    gv[vj + t] += p[i * seq + j] * doi[t];
                }
              }
              for (std::size_t j = 0; j < seq; ++j)
                ds[j] = p[i * seq + j] * (dp[j] - dot) * scl;
              const std::size_t qi = (b * seq + i) * dm + h * hd;
              for (std::size_t j = 0; j < seq; ++j) {
                const std::size_t kj = (b * seq + j) * dm + h * hd;
                if (pq.requires_grad) {
                  for (std::size_t t = 0; t < hd; ++t)
                    gq[qi + t] += ds[j] * pk.values[kj + t];
                }
                if (pk.requires_grad) {
                  for (std::size_t t = 0; t < hd; ++t)
                    gk[kj + t] += ds[j] * pq.values[qi + t];
                }
              }
            }
          }
        }
      });
}

Tensor weighted_layer_sum(const Tensor& x, const Tensor& weights) {
  if (x.ndim() != 3 || weights.ndim() != 1 || weights.dim(0) != x.dim(1)) {
    throw DimensionError("weighted_layer_sum: " + shape_string(x.shape()) +
                         " with weights " + shape_string(weights.shape()));
  }
  const std::size_t b = x.dim(0), layers = x.dim(1), d = x.dim(2);
  auto xv = x.values();
  auto wv = weights.values();
  std::vector<double> out(b * d, 0.0);
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t l = 0; l < layers; ++l)
      for (std::size_t j = 0; j < d; ++j)
        out[r * d + j] += wv[l] * xv[(r * layers + l) * d + j];
  return Tensor::make_result(
      {b, d}, std::move(out), {x, weights},
      [b, layers, d](const TensorImpl& o) {
        TensorImpl& px = parent(o, 0);
        TensorImpl& pw = parent(o, 1);
        if (px.requires_grad) {
          auto& g = px.ensure_grad();
          for (std::size_t r = 0; r < b; ++r)
            for (std::size_t l = 0; l < layers; ++l)
              for (std::size_t j = 0; j < d; ++j)
                g[(r * layers + l) * d + j] += pw.values[l] * o.grad[r * d + j];
        }
        if (pw.requires_grad) {
          auto& g = pw.ensure_grad();
          for (std::size_t r = 0; r < b; ++r)
            for (std::size_t l = 0; l < layers; ++l)
              for (std::size_t j = 0; j < d; ++j)
                g[l] += px.values[(r * layers + l) * d + j] * o.grad[r * d + j];
        }
      });
}

}  // namespace embanon::numerics
