#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace joda {

/// Fritsch–Carlson knot derivatives for shape-preserving cubic Hermite
/// interpolation. Interior knots take the weighted harmonic mean of the
/// adjacent secants (0 on a sign change or flat secant); endpoints use the
/// one-sided three-point estimate, zeroed on sign disagreement and clamped to
/// 3x the adjacent secant when the secants change sign.
std::vector<double> pchip_slopes(std::span<const double> xs, std::span<const double> ys);

/// Sparse row of d(ds[k])/d(ys[j]). Each knot derivative depends on at most
/// three neighbouring values.
struct SlopeSensitivity {
  std::size_t first = 0;  // index of the first ys entry in `weights`
  std::size_t count = 0;
  double weights[3] = {0.0, 0.0, 0.0};
};

/// Jacobian of pchip_slopes with the secant sign pattern held fixed.
std::vector<SlopeSensitivity> pchip_slope_jacobian(std::span<const double> xs,
                                                   std::span<const double> ys);

/// Shape-constrained piecewise cubic Hermite curve. Immutable after
/// construction; the knot derivatives are computed once and cached.
class PchipCurve {
 public:
  PchipCurve(std::vector<double> xs, std::vector<double> ys);

  /// Two-knot constant curve on [0,1].
  static PchipCurve constant(double value);

  std::span<const double> xs() const { return xs_; }
  std::span<const double> ys() const { return ys_; }
  std::span<const double> ds() const { return ds_; }
  std::size_t size() const { return xs_.size(); }
  double x_front() const { return xs_.front(); }
  double x_back() const { return xs_.back(); }

  /// Throws ErrorCode::kOutOfSpan outside [xs.front(), xs.back()].
  double eval(double x) const;
  double eval_dx(double x) const;

  /// d eval(x) / d ys, holding the secant sign pattern fixed.
  std::vector<double> grad_y(double x) const;
  /// Adds `scale * d eval(x) / d ys[j]` into out[j]. out.size() == size().
  void accumulate_grad_y(double x, double scale, std::span<double> out) const;

  PchipCurve with_ys(std::vector<double> ys) const;
  PchipCurve scaled(double factor) const;

  /// Largest |ys|. Equal to the peak |value| because the interpolant never
  /// overshoots its knots.
  double peak_abs() const;

  friend bool operator==(const PchipCurve& a, const PchipCurve& b) {
    return a.xs_ == b.xs_ && a.ys_ == b.ys_;
  }

 private:
  std::size_t segment(double x) const;

  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<double> ds_;
  std::vector<SlopeSensitivity> slope_jac_;
};

inline double pchip_eval(const PchipCurve& c, double x) { return c.eval(x); }
inline double pchip_eval_dx(const PchipCurve& c, double x) { return c.eval_dx(x); }
inline std::vector<double> pchip_grad_y(const PchipCurve& c, double x) { return c.grad_y(x); }

}  // namespace joda
