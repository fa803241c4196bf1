#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "joda/compiler.hpp"
#include "joda/field.hpp"
#include "joda/templates.hpp"

namespace testsupport {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline joda::JointContext random_context(Rng& rng, bool with_gravity) {
  joda::JointContext ctx;
  ctx.asset_name = "random";
  ctx.joint_name = "joint";
  ctx.joint_type = uniform(rng, 0, 1) < 0.5 ? joda::JointType::kRevolute : joda::JointType::kPrismatic;
  ctx.q_min = uniform(rng, -0.5, 0.5);
  ctx.q_max = ctx.q_min + uniform(rng, 0.3, 2.0);
  ctx.inertia_eq = uniform(rng, 0.05, 2.0);
  ctx.t_ref = uniform(rng, 0.5, 1.5);
  if (with_gravity) {
    const double f_inertial = ctx.inertia_eq * 2.0 * ctx.range() / (ctx.t_ref * ctx.t_ref);
    std::vector<double> xs, ys;
    for (int k = 0; k <= 4; ++k) {
      xs.push_back(k / 4.0);
      ys.push_back(uniform(rng, -0.6, 0.6) * f_inertial);
    }
    ctx.gravity_curve = joda::PchipCurve(xs, ys);
  }
  return ctx;
}

inline joda::EffectComponent place(const std::string& name, double a, double b, double cons,
                                   double fric = 0.0, double damp = 0.0) {
  return joda::template_instantiate(joda::find_template(name), a, b, {cons, fric, damp}).component;
}

/// Random interval of width at least `min_width` inside [lo, hi].
inline std::pair<double, double> random_interval(Rng& rng, double lo, double hi, double min_width) {
  const double w = uniform(rng, min_width, hi - lo);
  const double a = uniform(rng, lo, hi - w);
  return {a, a + w};
}

/// Friction-bearing field with a handful of random template components.
inline joda::ComposedField random_field(Rng& rng, bool with_gravity) {
  joda::ComposedField f;
  f.joint = random_context(rng, with_gravity);
  f.joint_limit = joda::JointLimitHint::from_labels(joda::LimitSide::kNone, joda::Elasticity::kNone);
  const double ref = joda::reference_magnitudes(f.joint).f_ref;
  const auto lib = joda::list_templates();
  const int n = static_cast<int>(uniform(rng, 1, 4.999));
  for (int i = 0; i < n; ++i) {
    const auto& t = lib[static_cast<std::size_t>(uniform(rng, 2, lib.size() - 1e-9))];
    const auto [a, b] = random_interval(rng, 0.0, 1.0, 0.1);
    const double fric = t.supports(joda::Channel::kFrictionMax) && uniform(rng, 0, 1) < 0.3
                            ? uniform(rng, 0.1, 0.8) * ref
                            : 0.0;
    f.components.push_back(place(t.name, a, b, uniform(rng, 0.15, 2.4) * ref, fric));
  }
  f.components.push_back(place("constant_friction_hinge", 0.0, 1.0, 0.0, uniform(rng, 0.1, 0.8) * ref));
  f.validate();
  return f;
}

/// Field whose ends push inward, so a low-energy release never reaches the
/// joint limits.
inline joda::ComposedField confined_field(Rng& rng) {
  joda::ComposedField f;
  f.joint = random_context(rng, uniform(rng, 0, 1) < 0.5);
  f.joint_limit = joda::JointLimitHint::from_labels(joda::LimitSide::kNone, joda::Elasticity::kNone);
  const double ref = joda::reference_magnitudes(f.joint).f_ref;
  f.components.push_back(place("spring_return_to_high_end", 0.0, 0.3, uniform(rng, 3.0, 5.0) * ref));
  f.components.push_back(place("spring_return_to_low_end", 0.7, 1.0, uniform(rng, 3.0, 5.0) * ref));
  const char* middle[] = {"detent_internal", "bistable_mechanism_internal", "magnetic_return_to_low_end",
                          "spring_return_to_low_end", "constant_positive_conservative_hinge"};
  const int n = static_cast<int>(uniform(rng, 1, 3.999));
  for (int i = 0; i < n; ++i) {
    const auto [a, b] = random_interval(rng, 0.25, 0.75, 0.1);
    const char* name = middle[static_cast<std::size_t>(uniform(rng, 0, 4.999))];
    f.components.push_back(place(name, a, b, uniform(rng, 0.15, 1.3) * ref));
  }
  if (uniform(rng, 0, 1) < 0.7) {
    f.components.push_back(place("constant_friction_hinge", 0.0, 1.0, 0.0, uniform(rng, 0.01, 0.2) * ref));
  }
  if (uniform(rng, 0, 1) < 0.7) {
    const double c_ref = joda::reference_magnitudes(f.joint).c_ref;
    f.components.push_back(place("constant_damping_hinge", 0.0, 1.0, 0.0, 0.0, uniform(rng, 0.01, 0.3) * c_ref));
  }
  f.validate();
  return f;
}

}  // namespace testsupport
