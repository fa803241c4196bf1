#include "joda/joint.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "joda/error.hpp"

namespace joda {

std::string_view to_string(JointType type) {
  return type == JointType::kRevolute ? "revolute" : "prismatic";
}

JointType joint_type_from_string(std::string_view name) {
  if (name == "revolute") return JointType::kRevolute;
  if (name == "prismatic") return JointType::kPrismatic;
  throw Error(ErrorCode::kValidation,
              "joint_type must be one of: revolute, prismatic (got \"" + std::string(name) + "\")");
}

std::string_view to_string(LimitSide side) {
  switch (side) {
    case LimitSide::kLowEnd: return "low_end";
    case LimitSide::kHighEnd: return "high_end";
    case LimitSide::kNone: return "none";
  }
  return "none";
}

std::string_view to_string(Elasticity e) {
  switch (e) {
    case Elasticity::kNone: return "none";
    case Elasticity::kWeak: return "weak";
    case Elasticity::kMedium: return "medium";
    case Elasticity::kStrong: return "strong";
  }
  return "none";
}

LimitSide limit_side_from_string(std::string_view name) {
  if (name == "low_end") return LimitSide::kLowEnd;
  if (name == "high_end") return LimitSide::kHighEnd;
  if (name == "none") return LimitSide::kNone;
  throw Error(ErrorCode::kValidation,
              "selected_side must be one of: low_end, high_end, none (got \"" + std::string(name) +
                  "\")");
}

Elasticity elasticity_from_string(std::string_view name) {
  if (name == "none") return Elasticity::kNone;
  if (name == "weak") return Elasticity::kWeak;
  if (name == "medium") return Elasticity::kMedium;
  if (name == "strong") return Elasticity::kStrong;
  throw Error(ErrorCode::kValidation,
              "elasticity must be one of: none, weak, medium, strong (got \"" + std::string(name) +
                  "\")");
}

double damping_ratio_for(Elasticity e) {
  switch (e) {
    case Elasticity::kNone: return 1.0;
    case Elasticity::kWeak: return 0.7;
    case Elasticity::kMedium: return 0.4;
    case Elasticity::kStrong: return 0.15;
  }
  return 1.0;
}

void JointContext::validate() const {
  if (!std::isfinite(q_min) || !std::isfinite(q_max) || !(q_max > q_min)) {
    throw Error(ErrorCode::kDegenerateRange, "joint range requires q_max > q_min", "q_max");
  }
  if (!std::isfinite(inertia_eq) || !(inertia_eq > 0.0)) {
    throw Error(ErrorCode::kValidation, "inertia_eq must be positive", "inertia_eq");
  }
  if (!std::isfinite(t_ref) || !(t_ref > 0.0)) {
    throw Error(ErrorCode::kValidation, "t_ref must be positive", "t_ref");
  }
  if (gravity_curve.x_front() != 0.0 || gravity_curve.x_back() != 1.0) {
    throw Error(ErrorCode::kValidation, "gravity curve must span s in [0,1]", "gravity_curve");
  }
}

double normalize_s(double q, double q_min, double q_max) {
  if (!(q_max > q_min)) {
    throw Error(ErrorCode::kDegenerateRange, "joint range requires q_max > q_min");
  }
  return std::clamp((q - q_min) / (q_max - q_min), 0.0, 1.0);
}

}  // namespace joda
