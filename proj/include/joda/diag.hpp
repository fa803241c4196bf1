#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "joda/field.hpp"

namespace joda {

/// Channel values sampled on a uniform grid over [0,1].
struct ProfileGrid {
  std::vector<double> s;
  std::vector<double> f_cons;
  std::vector<double> f_fric_max;
  std::vector<double> c_damp;
  std::vector<double> gravity_balance;  // -gravity(s)
  std::vector<double> band_lo;          // gravity_balance - f_fric_max
  std::vector<double> band_hi;          // gravity_balance + f_fric_max
  // Axis metadata for rendering.
  double q_min = 0.0;
  double q_max = 1.0;
  JointType joint_type = JointType::kRevolute;

  std::size_t size() const { return s.size(); }
};

ProfileGrid profile_grid(const ComposedField& field, std::size_t n_points = 1001);

/// Header `s,f_cons,f_fric_max,c_damp,gravity_balance,band_lo,band_hi`.
std::string profile_csv(const ProfileGrid& grid);

struct SInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double s) const { return s >= lo && s <= hi; }
};

/// Maximal intervals where |F_cons + gravity| <= F_fric_max, with crossings
/// located by linear interpolation between grid points. Zero-width sets are
/// dropped.
std::vector<SInterval> stick_regions(const ProfileGrid& grid);

enum class Stability { kStable, kUnstable };
std::string_view to_string(Stability s);

struct Equilibrium {
  double s = 0.0;
  Stability stability = Stability::kStable;
  double slope = 0.0;  // d/ds (F_cons + gravity) at s
};

/// Strict sign changes of F_cons + gravity on the grid, bisected to 1e-9.
std::vector<Equilibrium> equilibria(const ProfileGrid& grid, const ComposedField& field);

/// External force needed to move the joint quasi-statically in the opening
/// direction: -F_cons - gravity + F_fric_max, or its mirror when opening
/// decreases q.
std::vector<double> quasi_static_open_force(const ComposedField& field, const ProfileGrid& grid,
                                            bool opening_increases_q = true);

/// Min-max rescale to [0,1]; a constant curve maps to zeros.
std::vector<double> normalize_unit(std::span<const double> ys);
/// Piecewise-linear resampling, held constant outside [xs.front(), xs.back()].
std::vector<double> resample_linear(std::span<const double> xs, std::span<const double> ys,
                                    std::span<const double> new_xs);

struct SvgOptions {
  bool annotate_equilibria = false;
  bool shade_stick_regions = false;
  std::string title;
};

/// Deterministic SVG: conservative curve, dashed gravity balance, shaded
/// friction band, physical-unit axes.
std::string render_svg(const ProfileGrid& grid, const ComposedField& field,
                       const SvgOptions& options = {});

/// Stick regions and equilibria, in s and in joint coordinates.
nlohmann::json analysis_json(const ComposedField& field, const ProfileGrid& grid);

}  // namespace joda
