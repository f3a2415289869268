#include "dimino/metrics.hpp"

#include <cmath>
#include <numbers>

#include "dimino/fft.hpp"

namespace dimino {

namespace {

constexpr std::pair<MetricKind, std::string_view> kMetricNames[] = {
    {MetricKind::kRelL2, "rel-l2"}, {MetricKind::kRelL1, "rel-l1"}, {MetricKind::kRelH1, "rel-h1"}};

// Signed integer frequency of index i on an axis of n points; the Nyquist
// index maps to 0 for differentiation.
double wavenumber(std::size_t i, std::size_t n) {
  if (2 * i == n) return 0.0;
  return i < n / 2 + (n % 2) ? static_cast<double>(i) : static_cast<double>(i) - static_cast<double>(n);
}

void check_sizes(std::span<const double> pred, std::span<const double> target, const Grid& grid) {
  if (pred.size() != target.size()) {
    fail(ErrorCode::kShapeMismatch, "prediction has " + std::to_string(pred.size()) + " values, target " +
                                        std::to_string(target.size()));
  }
  const std::size_t n = grid.size();
  if (n == 0 || pred.size() % n != 0) {
    fail(ErrorCode::kShapeMismatch, "field size " + std::to_string(pred.size()) + " is not a multiple of the grid");
  }
}

}  // namespace

std::string_view metric_name(MetricKind k) {
  for (auto [kind, name] : kMetricNames) {
    if (kind == k) return name;
  }
  return "unknown";
}

MetricKind parse_metric(std::string_view s) {
  for (auto [kind, name] : kMetricNames) {
    if (name == s) return kind;
  }
  fail(ErrorCode::kInvalidArgument, "unknown metric '" + std::string(s) + "' (expected rel-l2, rel-l1, rel-h1)");
}

double gradient_energy(std::span<const double> fields, const Grid& grid) {
  const std::vector<std::size_t> shape(grid.points.begin(), grid.points.end());
  const std::size_t n = grid.size();
  const std::size_t h = fft::half_spectrum_size(shape);
  const std::size_t n_last = shape.back();
  const std::size_t h_last = n_last / 2 + 1;
  std::vector<std::complex<double>> spec(h);
  double total = 0;
  for (std::size_t c = 0; c * n < fields.size(); ++c) {
    fft::forward_real<double>(shape, fields.data() + c * n, spec.data());
    for (std::size_t idx = 0; idx < h; ++idx) {
      const std::size_t k_last = idx % h_last;
      double k2 = 0;
      const double kl = 2 * std::numbers::pi * wavenumber(k_last, n_last) / grid.extent.back();
      k2 += kl * kl;
      if (shape.size() == 2) {
        const double k0 = 2 * std::numbers::pi * wavenumber(idx / h_last, shape[0]) / grid.extent[0];
        k2 += k0 * k0;
      }
      const double weight = (k_last == 0 || 2 * k_last == n_last) ? 1.0 : 2.0;
      total += weight * k2 * std::norm(spec[idx]);
    }
  }
  return total / static_cast<double>(n);
}

double rel_metric(MetricKind kind, std::span<const double> pred, std::span<const double> target, const Grid& grid) {
  check_sizes(pred, target, grid);
  std::vector<double> err(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) err[i] = pred[i] - target[i];
  double num = 0;
  double den = 0;
  switch (kind) {
    case MetricKind::kRelL1:
      for (std::size_t i = 0; i < err.size(); ++i) {
        num += std::abs(err[i]);
        den += std::abs(target[i]);
      }
      return den > 0 ? num / den : num;
    case MetricKind::kRelL2:
      for (std::size_t i = 0; i < err.size(); ++i) {
        num += err[i] * err[i];
        den += target[i] * target[i];
      }
      break;
    case MetricKind::kRelH1:
      for (std::size_t i = 0; i < err.size(); ++i) {
        num += err[i] * err[i];
        den += target[i] * target[i];
      }
      num += gradient_energy(err, grid);
      den += gradient_energy(target, grid);
      break;
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

double rel_metric(MetricKind kind, const std::vector<Field>& pred, const std::vector<Field>& target, const Grid& grid) {
  if (pred.size() != target.size()) {
    fail(ErrorCode::kShapeMismatch, "prediction has " + std::to_string(pred.size()) + " fields, target " +
                                        std::to_string(target.size()));
  }
  std::vector<double> p;
  std::vector<double> t;
  for (std::size_t c = 0; c < pred.size(); ++c) {
    if (pred[c].values.size() != target[c].values.size()) {
      fail(ErrorCode::kShapeMismatch, "field '" + pred[c].name + "' size differs from its target");
    }
    p.insert(p.end(), pred[c].values.begin(), pred[c].values.end());
    t.insert(t.end(), target[c].values.begin(), target[c].values.end());
  }
  return rel_metric(kind, p, t, grid);
}

template <class Real>
ad::Var<Real> rel_loss(MetricKind kind, ad::Var<Real> pred, const ad::Tensor<double>& target, const Grid& grid) {
  auto& tape = *pred.tape;
  if (pred.shape() != target.shape()) {
    fail(ErrorCode::kShapeMismatch, "loss: prediction " + ad::shape_string(pred.shape()) + " vs target " +
                                        ad::shape_string(target.shape()));
  }
  if (kind == MetricKind::kRelL1) fail(ErrorCode::kInvalidArgument, "rel-l1 is an evaluation metric only");
  auto err = ad::sub(pred, tape.constant(target.cast<Real>()));
  auto num = ad::sum(ad::pow(err, Real(2)));
  double den = 0;
  for (double v : target.data()) den += v * v;
  if (kind == MetricKind::kRelH1) {
    den += gradient_energy(target.data(), grid);
    // d/dx_a as a diagonal spectral multiplier i 2 pi k_a / L_a over the
    // whole spectrum, zero on the Nyquist index of axis a.
    const std::size_t c = target.dim(0);
    const ad::Shape spatial(grid.points.begin(), grid.points.end());
    std::vector<std::size_t> modes;
    for (auto n : spatial) modes.push_back(n / 2);
    modes.back() += 1;
    auto spectrum = ad::rfft(err);
    for (std::size_t axis = 0; axis < spatial.size(); ++axis) {
      ad::Shape wshape{c, c};
      if (spatial.size() == 1) {
        wshape.push_back(modes[0]);
      } else {
        wshape.push_back(2 * modes[0]);
        wshape.push_back(modes[1]);
      }
      ad::Tensor<Real> w(wshape, ad::ElementKind::kComplex);
      auto wc = w.cdata();
      const std::size_t per_pair = ad::numel(wshape) / (c * c);
      for (std::size_t m = 0; m < per_pair; ++m) {
        double k = 0;
        if (spatial.size() == 1) {
          k = wavenumber(m, spatial[0]);
        } else if (axis == 0) {
          const std::size_t r = m / modes[1];
          const std::size_t row = r < modes[0] ? r : spatial[0] - 2 * modes[0] + r;
          k = wavenumber(row, spatial[0]);
        } else {
          k = wavenumber(m % modes[1], spatial[1]);
        }
        const double factor = 2 * std::numbers::pi * k / grid.extent[axis];
        for (std::size_t i = 0; i < c; ++i) wc[(i * c + i) * per_pair + m] = {Real(0), static_cast<Real>(factor)};
      }
      auto deriv = ad::irfft(ad::spectral_linear(spectrum, tape.constant(std::move(w)), spatial, modes), spatial);
      num = ad::add(num, ad::sum(ad::pow(deriv, Real(2))));
    }
  }
  const double norm = den > 0 ? 1.0 / std::sqrt(den) : 1.0;
  return ad::scale(ad::sqrt(num), static_cast<Real>(norm));
}

template ad::Var<double> rel_loss<double>(MetricKind, ad::Var<double>, const ad::Tensor<double>&, const Grid&);
template ad::Var<float> rel_loss<float>(MetricKind, ad::Var<float>, const ad::Tensor<double>&, const Grid&);

}  // namespace dimino
