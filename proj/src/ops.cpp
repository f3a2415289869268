#include "dimino/ops.hpp"

#include <cmath>
#include <numbers>

#include "dimino/fft.hpp"
#include "dimino/parallel.hpp"

namespace dimino::ad {
namespace {

template <class Real>
using Complex = std::complex<Real>;

template <class Real>
Tape<Real>& tape_of(Var<Real> a) {
  if (a.tape == nullptr) fail(ErrorCode::kInvalidArgument, "variable is not attached to a tape");
  return *a.tape;
}

template <class Real>
Tape<Real>& tape_of(Var<Real> a, Var<Real> b) {
  if (a.tape == nullptr || a.tape != b.tape) {
    fail(ErrorCode::kInvalidArgument, "operands live on different tapes");
  }
  return *a.tape;
}

template <class Real>
void require_real(const Tensor<Real>& t, const char* what) {
  if (t.is_complex()) fail(ErrorCode::kShapeMismatch, std::string(what) + " expects a real tensor");
}

template <class Real>
void require_complex(const Tensor<Real>& t, const char* what) {
  if (!t.is_complex()) fail(ErrorCode::kShapeMismatch, std::string(what) + " expects a complex tensor");
}

template <class Real>
void require_same(const Tensor<Real>& a, const Tensor<Real>& b, const char* what) {
  if (!a.same_layout(b)) {
    fail(ErrorCode::kShapeMismatch, std::string(what) + ": " + shape_string(a.shape()) + " vs " +
                                        shape_string(b.shape()));
  }
}

// [C, spatial...] -> (C, spatial shape)
template <class Real>
Shape spatial_of(const Tensor<Real>& t, const char* what) {
  if (t.rank() < 2) fail(ErrorCode::kShapeMismatch, std::string(what) + " expects [C, spatial...]");
  return Shape(t.shape().begin() + 1, t.shape().end());
}

Shape half_shape(const Shape& spatial) {
  Shape h = spatial;
  h.back() = spatial.back() / 2 + 1;
  return h;
}

// Embeds a half spectrum into the full complex grid (zeros elsewhere),
// weighting each half-axis column by w[k].
template <class Real>
void embed_half(const Shape& spatial, const Complex<Real>* half, const std::vector<Real>& weight,
                Complex<Real>* full) {
  const std::size_t n_last = spatial.back();
  const std::size_t h_last = n_last / 2 + 1;
  const std::size_t rows = numel(spatial) / n_last;
  std::fill(full, full + numel(spatial), Complex<Real>(0, 0));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < h_last; ++k) full[r * n_last + k] = weight[k] * half[r * h_last + k];
  }
}

template <class Real>
std::vector<Real> half_weights(std::size_t n_last, bool doubled) {
  const std::size_t h_last = n_last / 2 + 1;
  std::vector<Real> w(h_last, doubled ? Real(2) : Real(1));
  w[0] = 1;
  if (n_last % 2 == 0) w[h_last - 1] = 1;
  return w;
}

// (half-spectrum index, weight mode index) pairs of the retained block.
struct RetainedModes {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t weight_modes = 0;
};

RetainedModes retained_modes(const Shape& spatial, const std::vector<std::size_t>& modes) {
  if (modes.size() != spatial.size()) {
    fail(ErrorCode::kShapeMismatch, "spectral_linear needs one mode count per spatial axis");
  }
  // Leading axes keep non-negative and negative frequencies, so 2m must fit;
  // the half axis can keep every entry up to Nyquist.
  for (std::size_t a = 0; a < spatial.size(); ++a) {
    const std::size_t limit = a + 1 == spatial.size() ? spatial[a] / 2 + 1 : spatial[a] / 2;
    if (modes[a] == 0 || modes[a] > limit) {
      fail(ErrorCode::kModeOverflow, "axis " + std::to_string(a) + " of length " + std::to_string(spatial[a]) +
                                         " cannot keep " + std::to_string(modes[a]) + " modes");
    }
  }
  RetainedModes out;
  if (spatial.size() == 1) {
    out.weight_modes = modes[0];
    for (std::size_t k = 0; k < modes[0]; ++k) out.pairs.emplace_back(k, k);
  } else if (spatial.size() == 2) {
    const std::size_t n0 = spatial[0];
    const std::size_t h1 = spatial[1] / 2 + 1;
    const std::size_t m0 = modes[0];
    const std::size_t m1 = modes[1];
    out.weight_modes = 2 * m0 * m1;
    for (std::size_t r = 0; r < 2 * m0; ++r) {
      const std::size_t row = r < m0 ? r : n0 - 2 * m0 + r;
      for (std::size_t k = 0; k < m1; ++k) out.pairs.emplace_back(row * h1 + k, r * m1 + k);
    }
  } else {
    fail(ErrorCode::kShapeMismatch, "spectral_linear supports one or two spatial axes");
  }
  return out;
}

template <class Real>
Real gelu_value(Real x) {
  return Real(0.5) * x * (Real(1) + std::erf(x / std::numbers::sqrt2_v<Real>));
}

template <class Real>
Real gelu_slope(Real x) {
  const Real cdf = Real(0.5) * (Real(1) + std::erf(x / std::numbers::sqrt2_v<Real>));
  const Real pdf = std::exp(Real(-0.5) * x * x) * std::numbers::inv_sqrtpi_v<Real> / std::numbers::sqrt2_v<Real>;
  return cdf + x * pdf;
}

}  // namespace

template <class Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
  auto& tape = tape_of(a, b);
  require_same(a.value(), b.value(), "add");
  Tensor<Real> y = a.value();
  y.accumulate(b.value());
  return tape.record(Primitive::kAdd, {a.id, b.id}, std::move(y),
                     [](const Tensor<Real>& g, std::span<Tensor<Real>* const> d) {
                       if (d[0]) d[0]->accumulate(g);
                       if (d[1]) d[1]->accumulate(g);
                     });
}

template <class Real>
Var<Real> sub(Var<Real> a, Var<Real> b) {
  auto& tape = tape_of(a, b);
  require_same(a.value(), b.value(), "sub");
  Tensor<Real> y = a.value();
  auto yd = y.data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < yd.size(); ++i) yd[i] -= bd[i];
  return tape.record(Primitive::kSub, {a.id, b.id}, std::move(y),
                     [](const Tensor<Real>& g, std::span<Tensor<Real>* const> d) {
                       if (d[0]) d[0]->accumulate(g);
                       if (d[1]) {
                         auto dd = d[1]->data();
                         auto gd = g.data();
                         for (std::size_t i = 0; i < dd.size(); ++i) dd[i] -= gd[i];
                       }
                     });
}

template <class Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
  auto& tape = tape_of(a, b);
  require_same(a.value(), b.value(), "mul");
  require_real(a.value(), "mul");
  Tensor<Real> y = a.value();
  auto yd = y.data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < yd.size(); ++i) yd[i] *= bd[i];
  return tape.record(Primitive::kMul, {a.id, b.id}, std::move(y),
                     [a, b](const Tensor<Real>& g, std::span<Tensor<Real>* const> d) {
                       auto gd = g.data();
                       if (d[0]) {
                         auto o = b.value().data();
                         auto dd = d[0]->data();
                         for (std::size_t i = 0; i < dd.size(); ++i) dd[i] += gd[i] * o[i];
                       }
                       if (d[1]) {
                         auto o = a.value().data();
                         auto dd = d[1]->data();
                         for (std::size_t i = 0; i < dd.size(); ++i) dd[i] += gd[i] * o[i];
                       }
                     });
}

template <class Real>
Var<Real> scale(Var<Real> x, Real factor) {
  auto& tape = tape_of(x);
  Tensor<Real> y = x.value();
  for (auto& v : y.data()) v *= factor;
  return tape.record(Primitive::kScale, {x.id}, std::move(y),
                     [factor](const Tensor<Real>& g, std::span<Tensor<Real>* const> d) {
                       if (!d[0]) return;
                       auto dd = d[0]->data();
                       auto gd = g.data();
                       for (std::size_t i = 0; i < dd.size(); ++i) dd[i] += factor * gd[i];
                     });
}

template <class Real>
Var<Real> linear(Var<Real> x, Var<Real> w) {
  auto& tape = tape_of(x, w);
  const auto& xv = x.value();
  const auto& wv = w.value();
  require_real(xv, "linear");
  require_real(wv, "linear");
  if (xv.rank() < 1 || wv.rank() != 2 || wv.dim(1) != xv.dim(0)) {
    fail(ErrorCode::kShapeMismatch, "linear: weight " + shape_string(wv.shape()) + " vs input " +
                                        shape_string(xv.shape()));
  }
  const std::size_t cout = wv.dim(0);
  const std::size_t cin = wv.dim(1);
  const std::size_t n = xv.numel() / cin;
  Shape ys = xv.shape();
  ys[0] = cout;
  Tensor<Real> y(ys);
  kernels::channel_mix<Real>(wv.data(), xv.data(), y.data(), cout, cin, n);
  return tape.record(Primitive::kLinear, {x.id, w.id}, std::move(y),
                     [x, w, cout, cin, n](const Tensor<Real>& g, std::span<Tensor<Real>* const> d) {
                       if (d[0]) kernels::channel_mix_transpose<Real>(w.value().data(), g.data(), d[0]->data(), cout, cin, n);
                       if (d[1]) kernels::channel_mix_weight_grad<Real>(g.data(), x.value().data(), d[1]->data(), cout, cin, n);
                     });
}

template <class Real>
Var<Real> bias_add(Var<Real> x, Var<Real> b) {
  auto& tape = tape_of(x, b);
  const auto& xv = x.value();
  require_real(xv, "bias_add");
  require_real(b.value(), "bias_add");
  if (xv.rank() < 1 || b.value().numel() != xv.dim(0)) {
    fail(ErrorCode::kShapeMismatch, "bias_add: bias " + shape_string(b.value().shape()) + " vs input " +
                                        shape_string(xv.shape()));
  }
  const std::size_t c = xv.dim(0);
  const std::size_t n = xv.numel() / c;
  Tensor<Real> y = xv;
  auto yd = y.data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t s = 0; s < n; ++s) yd[i * n + s] += bd[i];
  }
  return tape.record(Primitive::kBiasAdd, {x.id, b.id}, std::move(y),
                     [c, n](const Tensor<Real>& g, std::span<Tensor<Real>* const> d) {
                       if (d[0]) d[0]->accumulate(g);
                       if (d[1]) {
                         auto gd = g.data();
                         auto dd = d[1]->data();
                         for (std::size_t i = 0; i < c; ++i) {
                           Real acc = 0;
                           for (std::size_t s = 0; s < n; ++s) acc += gd[i * n + s];
                           dd[i] += acc;
                         }
                       }
                     });
}

template <class Real>
Var<Real> gelu(Var<Real> x) {
  auto& tape = tape_of(x);
  require_real(x.value(), "gelu");
  Tensor<Real> y = x.value();
  for (auto& v : y.data()) v = gelu_value(v);
  return tape.record(Primitive::kGelu, {x.id}, std::move(y),
                     [x](const Tensor<Real>& g, std::span<Tensor<Real>* const> d) {
                       if (!d[0]) return;
                       auto xd = x.value().data();
                       auto gd = g.data();
                       auto dd = d[0]->data();
                       for (std::size_t i = 0; i < dd.size(); ++i) dd[i] += gd[i] * gelu_slope(xd[i]);
                     });
}

template <class Real>
Var<Real> layer_norm(Var<Real> x, Real epsilon) {
  auto& tape = tape_of(x);
  const auto& xv = x.value();
  require_real(xv, "layer_norm");
  if (xv.rank() < 2) fail(ErrorCode::kShapeMismatch, "layer_norm expects [C, spatial...]");
  if (!(epsilon > 0)) fail(ErrorCode::kInvalidArgument, "layer_norm epsilon must be positive");
  const std::size_t c = xv.dim(0);
  const std::size_t n = xv.numel() / c;
  Tensor<Real> y(xv.shape());
  std::vector<Real> rstd(c);
  auto xd = xv.data();
  auto yd = y.data();
  for (std::size_t i = 0; i < c; ++i) {
    const Real* row = xd.data() + i * n;
    Real mu = 0;
    for (std::size_t s = 0; s < n; ++s) mu += row[s];
    mu /= Real(n);
    Real var = 0;
    for (std::size_t s = 0; s < n; ++s) var += (row[s] - mu) * (row[s] - mu);
    var /= Real(n);
    rstd[i] = Real(1) / std::sqrt(var + epsilon);
    for (std::size_t s = 0; s < n; ++s) yd[i * n + s] = (row[s] - mu) * rstd[i];
  }
  auto& tp = tape;
  const int out_id = static_cast<int>(tp.size());
  return tape.record(Primitive::kLayerNorm, {x.id}, std::move(y),
                     [&tp, out_id, rstd = std::move(rstd), c, n](const Tensor<Real>& g,
                                                                 std::span<Tensor<Real>* const> d) {
                       if (!d[0]) return;
                       auto yd = tp.value(Var<Real>{&tp, out_id}).data();
                       auto gd = g.data();
                       auto dd = d[0]->data();
                       for (std::size_t i = 0; i < c; ++i) {
                         Real mg = 0;
                         Real mgy = 0;
                         for (std::size_t s = 0; s < n; ++s) {
                           mg += gd[i * n + s];
                           mgy += gd[i * n + s] * yd[i * n + s];
                         }
                         mg /= Real(n);
                         mgy /= Real(n);
                         for (std::size_t s = 0; s < n; ++s) {
                           dd[i * n + s] += rstd[i] * (gd[i * n + s] - mg - yd[i * n + s] * mgy);
                         }
                       }
                     });
}

template <class Real>
Var<Real> rfft(Var<Real> x) {
  auto& tape = tape_of(x);
  const auto& xv = x.value();
  require_real(xv, "rfft");
  const Shape spatial = spatial_of(xv, "rfft");
  const Shape half = half_shape(spatial);
  const std::size_t c = xv.dim(0);
  const std::size_t n = numel(spatial);
  const std::size_t h = numel(half);
  Shape ys{c};
  ys.insert(ys.end(), half.begin(), half.end());
  Tensor<Real> y(ys, ElementKind::kComplex);
  auto yc = y.cdata();
  for (std::size_t i = 0; i < c; ++i) fft::forward_real<Real>(spatial, xv.data().data() + i * n, yc.data() + i * h);
  return tape.record(Primitive::kRfft, {x.id}, std::move(y),
                     [spatial, c, n, h](const Tensor<Real>& g, std::span<Tensor<Real>* const> d) {
                       if (!d[0]) return;
                       // Adjoint of the unnormalized forward transform: the
                       // full-grid conjugate-direction DFT of the zero-padded
                       // half-spectrum gradient, real part.
                       const auto ones = half_weights<Real>(spatial.back(), false);
                       std::vector<Complex<Real>> full(n);
                       std::vector<Complex<Real>> back(n);
                       auto gc = g.cdata();
                       auto dd = d[0]->data();
                       for (std::size_t i = 0; i < c; ++i) {
                         embed_half(spatial, gc.data() + i * h, ones, full.data());
                         fft::transform_complex<Real>(spatial, full.data(), back.data(), fft::Direction::kBackward);
                         for (std::size_t s = 0; s < n; ++s) dd[i * n + s] += back[s].real();
                       }
                     });
}

template <class Real>
Var<Real> irfft(Var<Real> x, const Shape& spatial_shape) {
  auto& tape = tape_of(x);
  const auto& xv = x.value();
  require_complex(xv, "irfft");
  if (spatial_shape.empty()) fail(ErrorCode::kShapeMismatch, "irfft needs a spatial shape");
  const Shape half = half_shape(spatial_shape);
  Shape expect{xv.rank() ? xv.dim(0) : 0};
  expect.insert(expect.end(), half.begin(), half.end());
  if (xv.shape() != expect) {
    fail(ErrorCode::kShapeMismatch, "irfft: input " + shape_string(xv.shape()) + " does not match spatial shape " +
                                        shape_string(spatial_shape));
  }
  const std::size_t c = xv.dim(0);
  const std::size_t n = numel(spatial_shape);
  const std::size_t h = numel(half);
  Shape ys{c};
  ys.insert(ys.end(), spatial_shape.begin(), spatial_shape.end());
  Tensor<Real> y(ys);
  const auto w = half_weights<Real>(spatial_shape.back(), true);
  std::vector<Complex<Real>> full(n);
  std::vector<Complex<Real>> back(n);
  auto xc = xv.cdata();
  auto yd = y.data();
  const Real inv_n = Real(1) / Real(n);
  for (std::size_t i = 0; i < c; ++i) {
    embed_half(spatial_shape, xc.data() + i * h, w, full.data());
    fft::transform_complex<Real>(spatial_shape, full.data(), back.data(), fft::Direction::kBackward);
    for (std::size_t s = 0; s < n; ++s) yd[i * n + s] = back[s].real() * inv_n;
  }
  return tape.record(Primitive::kIrfft, {x.id}, std::move(y),
                     [spatial_shape, w, c, n, h](const Tensor<Real>& g, std::span<Tensor<Real>* const> d) {
                       if (!d[0]) return;
                       const std::size_t h_last = spatial_shape.back() / 2 + 1;
                       const Real inv_n = Real(1) / Real(n);
                       std::vector<Complex<Real>> spec(h);
                       auto dc = d[0]->cdata();
                       for (std::size_t i = 0; i < c; ++i) {
                         fft::forward_real<Real>(spatial_shape, g.data().data() + i * n, spec.data());
                         for (std::size_t k = 0; k < h; ++k) dc[i * h + k] += (w[k % h_last] * inv_n) * spec[k];
                       }
                     });
}

template <class Real>
Var<Real> spectral_linear(Var<Real> x, Var<Real> w, const Shape& spatial_shape,
                          const std::vector<std::size_t>& modes) {
  auto& tape = tape_of(x, w);
  const auto& xv = x.value();
  const auto& wv = w.value();
  require_complex(xv, "spectral_linear");
  require_complex(wv, "spectral_linear");
  if (spatial_shape.empty()) fail(ErrorCode::kShapeMismatch, "spectral_linear needs a spatial shape");
  const Shape half = half_shape(spatial_shape);
  auto retained = retained_modes(spatial_shape, modes);
  Shape expect_x{xv.rank() ? xv.dim(0) : 0};
  expect_x.insert(expect_x.end(), half.begin(), half.end());
  if (xv.shape() != expect_x) {
    fail(ErrorCode::kShapeMismatch, "spectral_linear: input " + shape_string(xv.shape()) +
                                        " does not match spatial shape " + shape_string(spatial_shape));
  }
  const std::size_t cin = xv.dim(0);
  Shape expect_w{cin, wv.rank() > 1 ? wv.dim(1) : 0};
  if (spatial_shape.size() == 1) {
    expect_w.push_back(modes[0]);
  } else {
    expect_w.push_back(2 * modes[0]);
    expect_w.push_back(modes[1]);
  }
  if (wv.shape() != expect_w) {
    fail(ErrorCode::kShapeMismatch, "spectral_linear: weight " + shape_string(wv.shape()) + ", expected " +
                                        shape_string(expect_w));
  }
  const std::size_t cout = wv.dim(1);
  const std::size_t h = numel(half);
  const std::size_t m = retained.weight_modes;
  Shape ys{cout};
  ys.insert(ys.end(), half.begin(), half.end());
  Tensor<Real> y(ys, ElementKind::kComplex);
  auto xc = xv.cdata();
  auto wc = wv.cdata();
  auto yc = y.cdata();
  for (const auto& [hk, mk] : retained.pairs) {
    for (std::size_t o = 0; o < cout; ++o) {
      Complex<Real> acc(0, 0);
      for (std::size_t i = 0; i < cin; ++i) acc += xc[i * h + hk] * wc[(i * cout + o) * m + mk];
      yc[o * h + hk] = acc;
    }
  }
  return tape.record(
      Primitive::kSpectralLinear, {x.id, w.id}, std::move(y),
      [x, w, pairs = std::move(retained.pairs), cin, cout, h, m](const Tensor<Real>& g,
                                                                 std::span<Tensor<Real>* const> d) {
        auto gc = g.cdata();
        if (d[0]) {
          auto wc = w.value().cdata();
          auto dx = d[0]->cdata();
          for (const auto& [hk, mk] : pairs) {
            for (std::size_t i = 0; i < cin; ++i) {
              Complex<Real> acc(0, 0);
              for (std::size_t o = 0; o < cout; ++o) acc += gc[o * h + hk] * std::conj(wc[(i * cout + o) * m + mk]);
              dx[i * h + hk] += acc;
            }
          }
        }
        if (d[1]) {
          auto xc = x.value().cdata();
          auto dw = d[1]->cdata();
          for (const auto& [hk, mk] : pairs) {
            for (std::size_t i = 0; i < cin; ++i) {
              const Complex<Real> xs = std::conj(xc[i * h + hk]);
              for (std::size_t o = 0; o < cout; ++o) dw[(i * cout + o) * m + mk] += gc[o * h + hk] * xs;
            }
          }
        }
      });
}

template <class Real>
Var<Real> gate_mul(Var<Real> x, Var<Real> g, const std::vector<int>& layout) {
  auto& tape = tape_of(x, g);
  const auto& xv = x.value();
  require_real(xv, "gate_mul");
  require_real(g.value(), "gate_mul");
  if (xv.rank() < 1 || layout.size() != xv.dim(0)) {
    fail(ErrorCode::kShapeMismatch, "gate_mul: layout has " + std::to_string(layout.size()) +
                                        " entries for input " + shape_string(xv.shape()));
  }
  const std::size_t gates = g.value().numel();
  for (int l : layout) {
    if (l >= static_cast<int>(gates)) fail(ErrorCode::kShapeMismatch, "gate_mul: layout index out of range");
  }
  const std::size_t c = xv.dim(0);
  const std::size_t n = xv.numel() / c;
  Tensor<Real> y = xv;
  auto yd = y.data();
  auto gd = g.value().data();
  for (std::size_t i = 0; i < c; ++i) {
    if (layout[i] < 0) continue;
    const Real s = gd[static_cast<std::size_t>(layout[i])];
    for (std::size_t k = 0; k < n; ++k) yd[i * n + k] *= s;
  }
  return tape.record(Primitive::kGateMul, {x.id, g.id}, std::move(y),
                     [x, g, layout, c, n](const Tensor<Real>& go, std::span<Tensor<Real>* const> d) {
                       auto god = go.data();
                       auto gd = g.value().data();
                       auto xd = x.value().data();
                       for (std::size_t i = 0; i < c; ++i) {
                         const bool gated = layout[i] >= 0;
                         const Real s = gated ? gd[static_cast<std::size_t>(layout[i])] : Real(1);
                         if (d[0]) {
                           auto dx = d[0]->data();
                           for (std::size_t k = 0; k < n; ++k) dx[i * n + k] += s * god[i * n + k];
                         }
                         if (d[1] && gated) {
                           Real acc = 0;
                           for (std::size_t k = 0; k < n; ++k) acc += god[i * n + k] * xd[i * n + k];
                           d[1]->data()[static_cast<std::size_t>(layout[i])] += acc;
                         }
                       }
                     });
}

template <class Real>
Var<Real> sum(Var<Real> x) {
  auto& tape = tape_of(x);
  require_real(x.value(), "sum");
  Real acc = 0;
  for (Real v : x.value().data()) acc += v;
  return tape.record(Primitive::kSum, {x.id}, Tensor<Real>::scalar(acc),
                     [](const Tensor<Real>& g, std::span<Tensor<Real>* const> d) {
                       if (!d[0]) return;
                       const Real s = g[0];
                       for (auto& v : d[0]->data()) v += s;
                     });
}

template <class Real>
Var<Real> mean(Var<Real> x) {
  auto& tape = tape_of(x);
  require_real(x.value(), "mean");
  const std::size_t n = x.value().numel();
  if (n == 0) fail(ErrorCode::kShapeMismatch, "mean of an empty tensor");
  Real acc = 0;
  for (Real v : x.value().data()) acc += v;
  return tape.record(Primitive::kMean, {x.id}, Tensor<Real>::scalar(acc / Real(n)),
                     [n](const Tensor<Real>& g, std::span<Tensor<Real>* const> d) {
                       if (!d[0]) return;
                       const Real s = g[0] / Real(n);
                       for (auto& v : d[0]->data()) v += s;
                     });
}

template <class Real>
Var<Real> pow(Var<Real> x, Real exponent) {
  auto& tape = tape_of(x);
  require_real(x.value(), "pow");
  Tensor<Real> y = x.value();
  for (auto& v : y.data()) v = std::pow(v, exponent);
  return tape.record(Primitive::kPow, {x.id}, std::move(y),
                     [x, exponent](const Tensor<Real>& g, std::span<Tensor<Real>* const> d) {
                       if (!d[0]) return;
                       auto xd = x.value().data();
                       auto gd = g.data();
                       auto dd = d[0]->data();
                       for (std::size_t i = 0; i < dd.size(); ++i) {
                         dd[i] += gd[i] * exponent * std::pow(xd[i], exponent - Real(1));
                       }
                     });
}

template <class Real>
Var<Real> sqrt(Var<Real> x) {
  auto& tape = tape_of(x);
  require_real(x.value(), "sqrt");
  Tensor<Real> y = x.value();
  for (auto& v : y.data()) v = std::sqrt(v);
  auto& tp = tape;
  const int out_id = static_cast<int>(tp.size());
  return tape.record(Primitive::kSqrt, {x.id}, std::move(y),
                     [&tp, out_id](const Tensor<Real>& g, std::span<Tensor<Real>* const> d) {
                       if (!d[0]) return;
                       auto yd = tp.value(Var<Real>{&tp, out_id}).data();
                       auto gd = g.data();
                       auto dd = d[0]->data();
                       for (std::size_t i = 0; i < dd.size(); ++i) dd[i] += gd[i] / (Real(2) * yd[i]);
                     });
}

template <class Real>
Var<Real> forward_eval(Primitive op, std::span<const Var<Real>> in, const PrimitiveAttrs<Real>& attrs) {
  auto arity = [&](std::size_t k) {
    if (in.size() != k) {
      fail(ErrorCode::kShapeMismatch, std::string(primitive_name(op)) + " takes " + std::to_string(k) +
                                          " inputs, got " + std::to_string(in.size()));
    }
  };
  switch (op) {
    case Primitive::kAdd: arity(2); return add(in[0], in[1]);
    case Primitive::kSub: arity(2); return sub(in[0], in[1]);
    case Primitive::kMul: arity(2); return mul(in[0], in[1]);
    case Primitive::kScale: arity(1); return scale(in[0], attrs.scalar);
    case Primitive::kLinear: arity(2); return linear(in[0], in[1]);
    case Primitive::kBiasAdd: arity(2); return bias_add(in[0], in[1]);
    case Primitive::kGelu: arity(1); return gelu(in[0]);
    case Primitive::kLayerNorm: arity(1); return layer_norm(in[0], attrs.epsilon);
    case Primitive::kRfft: arity(1); return rfft(in[0]);
    case Primitive::kIrfft: arity(1); return irfft(in[0], attrs.spatial_shape);
    case Primitive::kSpectralLinear: arity(2); return spectral_linear(in[0], in[1], attrs.spatial_shape, attrs.modes);
    case Primitive::kGateMul: arity(2); return gate_mul(in[0], in[1], attrs.layout);
    case Primitive::kSum: arity(1); return sum(in[0]);
    case Primitive::kMean: arity(1); return mean(in[0]);
    case Primitive::kPow: arity(1); return pow(in[0], attrs.scalar);
    case Primitive::kSqrt: arity(1); return sqrt(in[0]);
    case Primitive::kLeaf: break;
  }
  fail(ErrorCode::kUnsupportedPrimitive,
       "primitive '" + std::string(primitive_name(op)) + "' (" + std::to_string(static_cast<int>(op)) +
           ") has no forward rule");
}

#define DIMINO_INSTANTIATE_OPS(R)                                                                          \
  template Var<R> add(Var<R>, Var<R>);                                                                     \
  template Var<R> sub(Var<R>, Var<R>);                                                                     \
  template Var<R> mul(Var<R>, Var<R>);                                                                     \
  template Var<R> scale(Var<R>, R);                                                                        \
  template Var<R> linear(Var<R>, Var<R>);                                                                  \
  template Var<R> bias_add(Var<R>, Var<R>);                                                                \
  template Var<R> gelu(Var<R>);                                                                            \
  template Var<R> layer_norm(Var<R>, R);                                                                   \
  template Var<R> rfft(Var<R>);                                                                            \
  template Var<R> irfft(Var<R>, const Shape&);                                                             \
  template Var<R> spectral_linear(Var<R>, Var<R>, const Shape&, const std::vector<std::size_t>&);          \
  template Var<R> gate_mul(Var<R>, Var<R>, const std::vector<int>&);                                       \
  template Var<R> sum(Var<R>);                                                                             \
  template Var<R> mean(Var<R>);                                                                            \
  template Var<R> pow(Var<R>, R);                                                                          \
  template Var<R> sqrt(Var<R>);                                                                            \
  template Var<R> forward_eval(Primitive, std::span<const Var<R>>, const PrimitiveAttrs<R>&);

DIMINO_INSTANTIATE_OPS(double)
DIMINO_INSTANTIATE_OPS(float)

}  // namespace dimino::ad
