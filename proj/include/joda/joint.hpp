#pragma once

#include <string>
#include <string_view>

#include "joda/curve.hpp"

namespace joda {

enum class JointType { kRevolute, kPrismatic };

std::string_view to_string(JointType type);
JointType joint_type_from_string(std::string_view name);

/// Physical anchor for a single joint. Units are rad / kg·m² for revolute
/// joints and m / kg for prismatic ones.
struct JointContext {
  std::string asset_name;
  std::string joint_name;
  JointType joint_type = JointType::kRevolute;
  double q_min = 0.0;
  double q_max = 1.0;
  double inertia_eq = 1.0;
  /// Generalized gravity load as a function of s; positive drives q upward.
  PchipCurve gravity_curve = PchipCurve::constant(0.0);
  double t_ref = 1.0;

  double range() const { return q_max - q_min; }
  /// Throws kValidation / kDegenerateRange when an invariant is broken.
  void validate() const;
};

enum class LimitSide { kLowEnd, kHighEnd, kNone };
enum class Elasticity { kNone, kWeak, kMedium, kStrong };

std::string_view to_string(LimitSide side);
std::string_view to_string(Elasticity e);
LimitSide limit_side_from_string(std::string_view name);
Elasticity elasticity_from_string(std::string_view name);

/// none → 1.0 (critically damped), weak → 0.7, medium → 0.4, strong → 0.15.
double damping_ratio_for(Elasticity e);

struct JointLimitHint {
  LimitSide selected_side = LimitSide::kNone;
  Elasticity elasticity = Elasticity::kNone;
  double damping_ratio = 1.0;

  static JointLimitHint from_labels(LimitSide side, Elasticity e) {
    return {side, e, damping_ratio_for(e)};
  }
};

/// (q - q_min) / (q_max - q_min), clamped to [0,1].
double normalize_s(double q, double q_min, double q_max);

/// Position in joint coordinates for normalized s.
inline double denormalize_s(double s, double q_min, double q_max) {
  return q_min + s * (q_max - q_min);
}

}  // namespace joda
