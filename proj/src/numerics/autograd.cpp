#include "sbd/numerics/autograd.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sbd/errors.hpp"
#include "sbd/numerics/kernels.hpp"
#include "sbd/numerics/ops.hpp"

namespace sbd::ag {

namespace {

template <std::floating_point T>
void require_matrix(const Tensor<T>& x, const char* op) {
  if (x.rank() != 2) throw NumericError(std::string(op) + ": expected a matrix");
}

}  // namespace

template <std::floating_point T>
Var matmul(Tape<T>& t, Var a, Var b) {
  const Tensor<T>& av = t.value(a);
  const Tensor<T>& bv = t.value(b);
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) throw NumericError("matmul: inner dimensions differ");
  Tensor<T> out(Shape{m, n});
  kernels::gemm_nn(av.raw(), bv.raw(), out.raw(), m, k, n, false);
  return t.record(std::move(out), {a, b}, [a, b, m, k, n](Tape<T>& tp, const Tensor<T>& g) {
    if (Tensor<T>* ga = tp.grad_of(a)) kernels::gemm_nt(g.raw(), tp.value(b).raw(), ga->raw(), m, n, k, true);
    if (Tensor<T>* gb = tp.grad_of(b)) kernels::gemm_tn(tp.value(a).raw(), g.raw(), gb->raw(), m, k, n, true);
  });
}

template <std::floating_point T>
Var add(Tape<T>& t, Var a, Var b) {
  const Tensor<T>& av = t.value(a);
  const Tensor<T>& bv = t.value(b);
  if (av.shape() != bv.shape()) throw NumericError("add: shapes differ");
  Tensor<T> out = av;
  out += bv;
  return t.record(std::move(out), {a, b}, [a, b](Tape<T>& tp, const Tensor<T>& g) {
    if (Tensor<T>* ga = tp.grad_of(a)) *ga += g;
    if (Tensor<T>* gb = tp.grad_of(b)) *gb += g;
  });
}

template <std::floating_point T>
Var scale(Tape<T>& t, Var a, T s) {
  Tensor<T> out = t.value(a);
  for (T& x : out.data()) x *= s;
  return t.record(std::move(out), {a}, [a, s](Tape<T>& tp, const Tensor<T>& g) {
    if (Tensor<T>* ga = tp.grad_of(a)) kernels::axpy(s, g.raw(), ga->raw(), g.size());
  });
}

template <std::floating_point T>
Var sum(Tape<T>& t, Var a) {
  T acc{0};
  for (T x : t.value(a).data()) acc += x;
  return t.record(Tensor<T>(Shape{1}, {acc}), {a}, [a](Tape<T>& tp, const Tensor<T>& g) {
    if (Tensor<T>* ga = tp.grad_of(a)) {
      for (T& x : ga->data()) x += g[0];
    }
  });
}

template <std::floating_point T>
Var embedding(Tape<T>& t, Var table, std::span<const std::int32_t> ids) {
  const Tensor<T>& tv = t.value(table);
  require_matrix(tv, "embedding");
  const std::size_t d = tv.cols();
  Tensor<T> out(Shape{ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= tv.rows()) {
      throw NumericError("embedding: token id " + std::to_string(ids[r]) + " out of range");
    }
    const auto src = tv.row(static_cast<std::size_t>(ids[r]));
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  return t.record(std::move(out), {table}, [table, idv = std::move(idv), d](Tape<T>& tp, const Tensor<T>& g) {
    Tensor<T>* gt = tp.grad_of(table);
    if (!gt) return;
    for (std::size_t r = 0; r < idv.size(); ++r) {
      kernels::axpy(T{1}, g.raw() + r * d, gt->raw() + static_cast<std::size_t>(idv[r]) * d, d);
    }
  });
}

template <std::floating_point T>
Var rms_norm(Tape<T>& t, Var x, Var gain, T eps) {
  const Tensor<T>& xv = t.value(x);
  const Tensor<T>& gv = t.value(gain);
  require_matrix(xv, "rms_norm");
  const std::size_t n = xv.rows(), d = xv.cols();
  if (gv.size() != d) throw NumericError("rms_norm: gain length differs from row width");
  Tensor<T> out(Shape{n, d});
  std::vector<T> inv(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = xv.row(r);
    T ms{0};
    for (T v : row) ms += v * v;
    inv[r] = T{1} / std::sqrt(ms / static_cast<T>(d) + eps);
    auto o = out.row(r);
    for (std::size_t c = 0; c < d; ++c) o[c] = row[c] * inv[r] * gv[c];
  }
  return t.record(std::move(out), {x, gain}, [x, gain, n, d, inv = std::move(inv)](Tape<T>& tp, const Tensor<T>& g) {
    const Tensor<T>& xv2 = tp.value(x);
    const Tensor<T>& gv2 = tp.value(gain);
    Tensor<T>* gx = tp.grad_of(x);
    Tensor<T>* gg = tp.grad_of(gain);
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = xv2.row(r);
      const auto gr = g.row(r);
      if (gg) {
        for (std::size_t c = 0; c < d; ++c) (*gg)[c] += gr[c] * row[c] * inv[r];
      }
      if (gx) {
        // dx = inv * (dxh - xh * mean(dxh * xh)), xh = x * inv, dxh = g * gain
        T dot{0};
        for (std::size_t c = 0; c < d; ++c) dot += gr[c] * gv2[c] * row[c] * inv[r];
        dot /= static_cast<T>(d);
        auto gxr = gx->row(r);
        for (std::size_t c = 0; c < d; ++c) gxr[c] += inv[r] * (gr[c] * gv2[c] - row[c] * inv[r] * dot);
      }
    }
  });
}

template <std::floating_point T>
Var silu(Tape<T>& t, Var x) {
  Tensor<T> out = t.value(x);
  for (T& v : out.data()) v = v / (T{1} + std::exp(-v));
  return t.record(std::move(out), {x}, [x](Tape<T>& tp, const Tensor<T>& g) {
    Tensor<T>* gx = tp.grad_of(x);
    if (!gx) return;
    const Tensor<T>& xv = tp.value(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T s = T{1} / (T{1} + std::exp(-xv[i]));
      (*gx)[i] += g[i] * s * (T{1} + xv[i] * (T{1} - s));
    }
  });
}

namespace {

// Rotates every head slice of each row by +angle (sign = 1) or -angle (sign = -1).
template <std::floating_point T>
void apply_rope(T* data, std::size_t n, std::size_t d, std::span<const std::int32_t> positions, std::size_t n_heads,
                double base, double sign) {
  const std::size_t hd = d / n_heads;
  for (std::size_t r = 0; r < n; ++r) {
    const double pos = static_cast<double>(positions[r]);
    for (std::size_t i = 0; i < hd / 2; ++i) {
      const double theta = pos * std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(hd));
      const T c = static_cast<T>(std::cos(theta));
      const T s = static_cast<T>(sign * std::sin(theta));
      for (std::size_t h = 0; h < n_heads; ++h) {
        T* p = data + r * d + h * hd + 2 * i;
        const T a = p[0], b = p[1];
        p[0] = a * c - b * s;
        p[1] = a * s + b * c;
      }
    }
  }
}

}  // namespace

template <std::floating_point T>
Var rope(Tape<T>& t, Var x, std::span<const std::int32_t> positions, std::size_t n_heads, double base, bool enabled) {
  const Tensor<T>& xv = t.value(x);
  require_matrix(xv, "rope");
  const std::size_t n = xv.rows(), d = xv.cols();
  if (positions.size() != n) throw NumericError("rope: one position per row required");
  if (n_heads == 0 || d % n_heads != 0 || (d / n_heads) % 2 != 0) {
    throw NumericError("rope: head width must be even");
  }
  Tensor<T> out = xv;
  if (enabled) apply_rope(out.raw(), n, d, positions, n_heads, base, 1.0);
  std::vector<std::int32_t> pos(positions.begin(), positions.end());
  return t.record(std::move(out), {x}, [x, n, d, pos = std::move(pos), n_heads, base, enabled](Tape<T>& tp, const Tensor<T>& g) {
    Tensor<T>* gx = tp.grad_of(x);
    if (!gx) return;
    Tensor<T> back = g;
    // A rotation's adjoint is the inverse rotation.
    if (enabled) apply_rope(back.raw(), n, d, std::span<const std::int32_t>(pos), n_heads, base, -1.0);
    *gx += back;
  });
}

template <std::floating_point T>
Var concat_rows(Tape<T>& t, Var a, Var b) {
  const Tensor<T>& av = t.value(a);
  const Tensor<T>& bv = t.value(b);
  require_matrix(av, "concat_rows");
  require_matrix(bv, "concat_rows");
  if (av.cols() != bv.cols()) throw NumericError("concat_rows: column counts differ");
  const std::size_t na = av.size();
  std::vector<T> data(av.data().begin(), av.data().end());
  data.insert(data.end(), bv.data().begin(), bv.data().end());
  Tensor<T> out(Shape{av.rows() + bv.rows(), av.cols()}, std::move(data));
  return t.record(std::move(out), {a, b}, [a, b, na](Tape<T>& tp, const Tensor<T>& g) {
    if (Tensor<T>* ga = tp.grad_of(a)) kernels::axpy(T{1}, g.raw(), ga->raw(), na);
    if (Tensor<T>* gb = tp.grad_of(b)) kernels::axpy(T{1}, g.raw() + na, gb->raw(), g.size() - na);
  });
}

template <std::floating_point T>
Var attention(Tape<T>& t, Var q, Var k, Var v, MaskView mask, std::size_t n_heads) {
  const Tensor<T>& qv = t.value(q);
  const Tensor<T>& kv = t.value(k);
  const Tensor<T>& vv = t.value(v);
  require_matrix(qv, "attention");
  require_matrix(kv, "attention");
  require_matrix(vv, "attention");
  const std::size_t nq = qv.rows(), nk = kv.rows(), d = qv.cols();
  if (kv.cols() != d || vv.cols() != d || vv.rows() != nk) throw NumericError("attention: q/k/v shapes disagree");
  if (mask.n_q != nq || mask.n_k != nk || (nq * nk > 0 && mask.allowed == nullptr)) {
    throw MaskError("attention: mask is " + std::to_string(mask.n_q) + "x" + std::to_string(mask.n_k) +
                    " but the layout is " + std::to_string(nq) + "x" + std::to_string(nk));
  }
  if (n_heads == 0 || d % n_heads != 0) throw NumericError("attention: width not divisible by heads");
  const std::size_t hd = d / n_heads;
  const T sc = T{1} / std::sqrt(static_cast<T>(hd));
  const bool keep = t.grad_enabled() && (t.requires_grad(q) || t.requires_grad(k) || t.requires_grad(v));

  Tensor<T> out(Shape{nq, d});
  std::vector<T> probs(keep ? n_heads * nq * nk : 0, T{0});
  std::vector<T> row(nk);
  for (std::size_t h = 0; h < n_heads; ++h) {
    for (std::size_t i = 0; i < nq; ++i) {
      const std::uint8_t* allowed = mask.allowed + i * nk;
      const T* qi = qv.raw() + i * d + h * hd;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < nk; ++j) {
        if (!allowed[j]) continue;
        row[j] = sc * kernels::dot(qi, kv.raw() + j * d + h * hd, hd);
        mx = std::max(mx, row[j]);
      }
      if (mx == -std::numeric_limits<T>::infinity()) continue;
      T z{0};
      for (std::size_t j = 0; j < nk; ++j) {
        if (!allowed[j]) continue;
        row[j] = std::exp(row[j] - mx);
        z += row[j];
      }
      T* oi = out.raw() + i * d + h * hd;
      for (std::size_t j = 0; j < nk; ++j) {
        if (!allowed[j]) continue;
        const T p = row[j] / z;
        kernels::axpy(p, vv.raw() + j * d + h * hd, oi, hd);
        if (keep) probs[(h * nq + i) * nk + j] = p;
      }
    }
  }
  if (!keep) return t.record(std::move(out), {q, k, v}, nullptr);

  return t.record(std::move(out), {q, k, v},
                  [q, k, v, nq, nk, d, hd, n_heads, sc, probs = std::move(probs)](Tape<T>& tp, const Tensor<T>& g) {
    const Tensor<T>& qv2 = tp.value(q);
    const Tensor<T>& kv2 = tp.value(k);
    const Tensor<T>& vv2 = tp.value(v);
    Tensor<T>* gq = tp.grad_of(q);
    Tensor<T>* gk = tp.grad_of(k);
    Tensor<T>* gv = tp.grad_of(v);
    std::vector<T> ds(nk);
    for (std::size_t h = 0; h < n_heads; ++h) {
      for (std::size_t i = 0; i < nq; ++i) {
        const T* p = probs.data() + (h * nq + i) * nk;
        const T* go = g.raw() + i * d + h * hd;
        T weighted{0};
        for (std::size_t j = 0; j < nk; ++j) {
          ds[j] = p[j] == T{0} ? T{0} : kernels::dot(go, vv2.raw() + j * d + h * hd, hd);
          weighted += p[j] * ds[j];
        }
        for (std::size_t j = 0; j < nk; ++j) {
          if (p[j] == T{0}) continue;
          if (gv) kernels::axpy(p[j], go, gv->raw() + j * d + h * hd, hd);
          const T s = sc * p[j] * (ds[j] - weighted);
          if (gq) kernels::axpy(s, kv2.raw() + j * d + h * hd, gq->raw() + i * d + h * hd, hd);
          if (gk) kernels::axpy(s, qv2.raw() + i * d + h * hd, gk->raw() + j * d + h * hd, hd);
        }
      }
    }
  });
}

template <std::floating_point T>
Var cross_entropy(Tape<T>& t, Var logits, std::span<const std::int32_t> targets, std::span<const std::uint8_t> mask,
                  T scale_by) {
  const Tensor<T>& lv = t.value(logits);
  require_matrix(lv, "cross_entropy");
  const std::size_t n = lv.rows(), vocab = lv.cols();
  if (targets.size() != n || mask.size() != n) throw NumericError("cross_entropy: targets/mask length differs from rows");
  T acc{0};
  for (std::size_t r = 0; r < n; ++r) {
    if (!mask[r]) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= vocab) {
      throw NumericError("cross_entropy: target " + std::to_string(targets[r]) + " outside the vocabulary");
    }
    acc += logsumexp<T>(lv.row(r)) - lv(r, static_cast<std::size_t>(targets[r]));
  }
  std::vector<std::int32_t> tv(targets.begin(), targets.end());
  std::vector<std::uint8_t> mv(mask.begin(), mask.end());
  return t.record(Tensor<T>(Shape{1}, {scale_by * acc}), {logits},
                  [logits, tv = std::move(tv), mv = std::move(mv), scale_by](Tape<T>& tp, const Tensor<T>& g) {
    Tensor<T>* gl = tp.grad_of(logits);
    if (!gl) return;
    const Tensor<T>& lv2 = tp.value(logits);
    const T s = g[0] * scale_by;
    std::vector<T> p;
    for (std::size_t r = 0; r < mv.size(); ++r) {
      if (!mv[r]) continue;
      const auto row = lv2.row(r);
      p.assign(row.begin(), row.end());
      softmax_inplace<T>(std::span<T>(p));
      auto gr = gl->row(r);
      for (std::size_t c = 0; c < p.size(); ++c) gr[c] += s * p[c];
      gr[static_cast<std::size_t>(tv[r])] -= s;
    }
  });
}

#define SBD_INSTANTIATE(T)                                                                                     \
  template Var matmul<T>(Tape<T>&, Var, Var);                                                                 \
  template Var add<T>(Tape<T>&, Var, Var);                                                                    \
  template Var scale<T>(Tape<T>&, Var, T);                                                                    \
  template Var sum<T>(Tape<T>&, Var);                                                                         \
  template Var embedding<T>(Tape<T>&, Var, std::span<const std::int32_t>);                                    \
  template Var rms_norm<T>(Tape<T>&, Var, Var, T);                                                            \
  template Var silu<T>(Tape<T>&, Var);                                                                        \
  template Var rope<T>(Tape<T>&, Var, std::span<const std::int32_t>, std::size_t, double, bool);              \
  template Var concat_rows<T>(Tape<T>&, Var, Var);                                                            \
  template Var attention<T>(Tape<T>&, Var, Var, Var, MaskView, std::size_t);                                  \
  template Var cross_entropy<T>(Tape<T>&, Var, std::span<const std::int32_t>, std::span<const std::uint8_t>, T);

SBD_INSTANTIATE(float)
SBD_INSTANTIATE(double)

#undef SBD_INSTANTIATE

}  // namespace sbd::ag
