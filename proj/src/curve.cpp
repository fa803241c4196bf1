#include "joda/curve.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "joda/error.hpp"

namespace joda {
namespace {

int sign(double v) { return (v > 0.0) - (v < 0.0); }

void check_knots(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorCode::kInvalidKnots, "knot positions and values differ in length");
  }
  if (xs.size() < 2) {
    throw Error(ErrorCode::kInsufficientKnots, "a curve needs at least two knots");
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
      throw Error(ErrorCode::kInvalidKnots, "non-finite knot at index " + std::to_string(i));
    }
    if (i > 0 && !(xs[i] > xs[i - 1])) {
      throw Error(ErrorCode::kInvalidKnots,
                  "knot positions must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
}

struct EndpointRule {
  double d;
  // d(d)/d(m0), d(d)/d(m1) with the clamp branch frozen
  double dm0;
  double dm1;
};

// One-sided three-point estimate with shape-preserving clamps. h0/m0 belong to
// the interval touching the endpoint, h1/m1 to the next one in.
EndpointRule endpoint_slope(double h0, double h1, double m0, double m1) {
  const double d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
  if (sign(d) != sign(m0)) return {0.0, 0.0, 0.0};
  if (sign(m0) != sign(m1) && std::abs(d) > 3.0 * std::abs(m0)) return {3.0 * m0, 3.0, 0.0};
  return {d, (2.0 * h0 + h1) / (h0 + h1), -h0 / (h0 + h1)};
}

}  // namespace

std::vector<double> pchip_slopes(std::span<const double> xs, std::span<const double> ys) {
  check_knots(xs, ys);
  const std::size_t n = xs.size();
  std::vector<double> h(n - 1), m(n - 1), d(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    h[k] = xs[k + 1] - xs[k];
    m[k] = (ys[k + 1] - ys[k]) / h[k];
  }
  if (n == 2) {
    d[0] = d[1] = m[0];
    return d;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (m[k - 1] == 0.0 || m[k] == 0.0 || sign(m[k - 1]) != sign(m[k])) continue;
    const double w1 = 2.0 * h[k] + h[k - 1];
    const double w2 = h[k] + 2.0 * h[k - 1];
    d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
  }
  d[0] = endpoint_slope(h[0], h[1], m[0], m[1]).d;
  d[n - 1] = endpoint_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]).d;
  return d;
}

std::vector<SlopeSensitivity> pchip_slope_jacobian(std::span<const double> xs,
                                                   std::span<const double> ys) {
  check_knots(xs, ys);
  const std::size_t n = xs.size();
  std::vector<double> h(n - 1), m(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    h[k] = xs[k + 1] - xs[k];
    m[k] = (ys[k + 1] - ys[k]) / h[k];
  }
  std::vector<SlopeSensitivity> jac(n);
  if (n == 2) {
    for (auto& row : jac) {
      row.first = 0;
      row.count = 2;
      row.weights[0] = -1.0 / h[0];
      row.weights[1] = 1.0 / h[0];
    }
    return jac;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    auto& row = jac[k];
    row.first = k - 1;
    row.count = 3;
    if (m[k - 1] == 0.0 || m[k] == 0.0 || sign(m[k - 1]) != sign(m[k])) continue;
    const double w1 = 2.0 * h[k] + h[k - 1];
    const double w2 = h[k] + 2.0 * h[k - 1];
    const double d = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
    const double dm0 = d * d * w1 / ((w1 + w2) * m[k - 1] * m[k - 1]);
    const double dm1 = d * d * w2 / ((w1 + w2) * m[k] * m[k]);
    // m0 = (y[k] - y[k-1]) / h[k-1], m1 = (y[k+1] - y[k]) / h[k]
    row.weights[0] = -dm0 / h[k - 1];
    row.weights[1] = dm0 / h[k - 1] - dm1 / h[k];
    row.weights[2] = dm1 / h[k];
  }
  {
    const auto e = endpoint_slope(h[0], h[1], m[0], m[1]);
    auto& row = jac[0];
    row.first = 0;
    row.count = 3;
    row.weights[0] = -e.dm0 / h[0];
    row.weights[1] = e.dm0 / h[0] - e.dm1 / h[1];
    row.weights[2] = e.dm1 / h[1];
  }
  {
    // Mirrored: m0 = m[n-2] uses y[n-2], y[n-1]; m1 = m[n-3] uses y[n-3], y[n-2].
    const auto e = endpoint_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
    auto& row = jac[n - 1];
    row.first = n - 3;
    row.count = 3;
    row.weights[0] = -e.dm1 / h[n - 3];
    row.weights[1] = e.dm1 / h[n - 3] - e.dm0 / h[n - 2];
    row.weights[2] = e.dm0 / h[n - 2];
  }
  return jac;
}

PchipCurve::PchipCurve(std::vector<double> xs, std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)) {
  check_knots(xs_, ys_);
  if (xs_.front() < 0.0 || xs_.back() > 1.0) {
    throw Error(ErrorCode::kInvalidKnots, "knot positions must lie in [0,1]");
  }
  ds_ = pchip_slopes(xs_, ys_);
  slope_jac_ = pchip_slope_jacobian(xs_, ys_);
}

PchipCurve PchipCurve::constant(double value) { return PchipCurve({0.0, 1.0}, {value, value}); }

std::size_t PchipCurve::segment(double x) const {
  if (!(x >= xs_.front() && x <= xs_.back())) {
    throw Error(ErrorCode::kOutOfSpan, "evaluation point " + std::to_string(x) +
                                           " outside knot span [" + std::to_string(xs_.front()) +
                                           ", " + std::to_string(xs_.back()) + "]");
  }
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  const auto k = static_cast<std::size_t>(it - xs_.begin());
  return std::min(k == 0 ? 0 : k - 1, xs_.size() - 2);
}

double PchipCurve::eval(double x) const {
  const std::size_t k = segment(x);
  const double h = xs_[k + 1] - xs_[k];
  const double t = (x - xs_[k]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + t;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  return h00 * ys_[k] + h10 * h * ds_[k] + h01 * ys_[k + 1] + h11 * h * ds_[k + 1];
}

double PchipCurve::eval_dx(double x) const {
  const std::size_t k = segment(x);
  const double h = xs_[k + 1] - xs_[k];
  const double t = (x - xs_[k]) / h;
  const double t2 = t * t;
  const double dh00 = (6.0 * t2 - 6.0 * t) / h;
  const double dh10 = 3.0 * t2 - 4.0 * t + 1.0;
  const double dh01 = (-6.0 * t2 + 6.0 * t) / h;
  const double dh11 = 3.0 * t2 - 2.0 * t;
  return dh00 * ys_[k] + dh10 * ds_[k] + dh01 * ys_[k + 1] + dh11 * ds_[k + 1];
}

std::vector<double> PchipCurve::grad_y(double x) const {
  std::vector<double> g(size(), 0.0);
  accumulate_grad_y(x, 1.0, g);
  return g;
}

void PchipCurve::accumulate_grad_y(double x, double scale, std::span<double> out) const {
  const std::size_t k = segment(x);
  const double h = xs_[k + 1] - xs_[k];
  const double t = (x - xs_[k]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = (t3 - 2.0 * t2 + t) * h;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = (t3 - t2) * h;
  out[k] += scale * h00;
  out[k + 1] += scale * h01;
  if (h10 == 0.0 && h11 == 0.0) return;
  // Only the two knot derivatives bracketing the segment matter.
  for (const auto& [weight, row] :
       {std::pair{h10, &slope_jac_[k]}, std::pair{h11, &slope_jac_[k + 1]}}) {
    for (std::size_t j = 0; j < row->count; ++j) {
      out[row->first + j] += scale * weight * row->weights[j];
    }
  }
}

PchipCurve PchipCurve::with_ys(std::vector<double> ys) const {
  return PchipCurve(xs_, std::move(ys));
}

PchipCurve PchipCurve::scaled(double factor) const {
  std::vector<double> ys = ys_;
  for (auto& y : ys) y *= factor;
  return PchipCurve(xs_, std::move(ys));
}

double PchipCurve::peak_abs() const {
  double peak = 0.0;
  for (double y : ys_) peak = std::max(peak, std::abs(y));
  return peak;
}

}  // namespace joda
