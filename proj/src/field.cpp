#include "joda/field.hpp"

#include <algorithm>
#include <cmath>

#include "joda/error.hpp"

namespace joda {

std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::kConservative: return "conservative";
    case Channel::kFrictionMax: return "friction";
    case Channel::kDamping: return "damping";
  }
  return "conservative";
}

Channel channel_from_string(std::string_view name) {
  if (name == "conservative") return Channel::kConservative;
  if (name == "friction") return Channel::kFrictionMax;
  if (name == "damping") return Channel::kDamping;
  throw Error(ErrorCode::kValidation, "unknown channel \"" + std::string(name) +
                                          "\" (expected conservative, friction, damping)");
}

void EffectComponent::validate(const std::string& path) const {
  if (!(a >= 0.0 && a < b && b <= 1.0)) {
    throw Error(ErrorCode::kValidation, "active interval must satisfy 0 <= a < b <= 1", path + ".a");
  }
  for (Channel ch : kAllChannels) {
    const auto& c = curve(ch);
    if (!c) continue;
    const std::string cpath = path + ".channels." + std::string(to_string(ch));
    if (c->x_front() != 0.0 || c->x_back() != 1.0) {
      throw Error(ErrorCode::kValidation, "local curves must span u in [0,1]", cpath + ".xs");
    }
    if (ch != Channel::kConservative) {
      const auto ys = c->ys();
      for (std::size_t k = 0; k < ys.size(); ++k) {
        if (ys[k] < 0.0) {
          throw Error(ErrorCode::kValidation, "friction and damping knots must be non-negative",
                      cpath + ".ys[" + std::to_string(k) + "]");
        }
      }
    }
  }
}

double component_eval(const EffectComponent& c, Channel channel, double s) {
  const auto& curve = c.curve(channel);
  if (!curve || s < c.a || s > c.b) return 0.0;
  const double u = std::clamp((s - c.a) / (c.b - c.a), 0.0, 1.0);
  return curve->eval(u);
}

double component_eval_ds(const EffectComponent& c, Channel channel, double s) {
  const auto& curve = c.curve(channel);
  if (!curve || s < c.a || s > c.b) return 0.0;
  const double width = c.b - c.a;
  const double u = std::clamp((s - c.a) / width, 0.0, 1.0);
  return curve->eval_dx(u) / width;
}

void ComposedField::validate() const {
  joint.validate();
  if (!(joint_limit.damping_ratio > 0.0) || !std::isfinite(joint_limit.damping_ratio)) {
    throw Error(ErrorCode::kValidation, "joint-limit damping_ratio must be positive",
                "joint_limit.damping_ratio");
  }
  for (std::size_t i = 0; i < components.size(); ++i) {
    components[i].validate("components[" + std::to_string(i) + "]");
  }
}

FieldSample field_eval(const ComposedField& f, double s) {
  s = std::clamp(s, 0.0, 1.0);
  FieldSample out;
  for (const auto& c : f.components) {
    if (s < c.a || s > c.b) continue;
    out.conservative += component_eval(c, Channel::kConservative, s);
    out.friction_max = std::max(out.friction_max, component_eval(c, Channel::kFrictionMax, s));
    out.damping += component_eval(c, Channel::kDamping, s);
  }
  out.friction_max = std::max(out.friction_max, 0.0);
  out.damping = std::max(out.damping, 0.0);
  return out;
}

double field_conservative_ds(const ComposedField& f, double s) {
  s = std::clamp(s, 0.0, 1.0);
  double total = 0.0;
  for (const auto& c : f.components) total += component_eval_ds(c, Channel::kConservative, s);
  return total;
}

}  // namespace joda
