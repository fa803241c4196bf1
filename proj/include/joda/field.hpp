#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "joda/curve.hpp"
#include "joda/joint.hpp"

namespace joda {

enum class Channel { kConservative = 0, kFrictionMax = 1, kDamping = 2 };

inline constexpr std::array<Channel, 3> kAllChannels = {
    Channel::kConservative, Channel::kFrictionMax, Channel::kDamping};

/// Proposal / serialization name: "conservative", "friction", "damping".
std::string_view to_string(Channel c);
Channel channel_from_string(std::string_view name);

inline constexpr std::size_t index(Channel c) { return static_cast<std::size_t>(c); }

/// Per-channel storage keyed by Channel.
template <typename T>
using ChannelArray = std::array<T, 3>;

/// One instantiated effect: curves in local u on an active interval [a,b].
struct EffectComponent {
  std::string effect_name;
  double a = 0.0;
  double b = 1.0;
  ChannelArray<std::optional<PchipCurve>> curves;
  nlohmann::json provenance = nlohmann::json::object();

  const std::optional<PchipCurve>& curve(Channel c) const { return curves[index(c)]; }
  std::optional<PchipCurve>& curve(Channel c) { return curves[index(c)]; }

  /// Throws kValidation naming `path` when an invariant is broken.
  void validate(const std::string& path = "component") const;
};

/// Value of one channel of one component at s; 0 outside [a,b].
double component_eval(const EffectComponent& c, Channel channel, double s);
/// d/ds of component_eval inside (a,b); 0 outside.
double component_eval_ds(const EffectComponent& c, Channel channel, double s);

struct FieldSample {
  double conservative = 0.0;
  double friction_max = 0.0;
  double damping = 0.0;

  friend bool operator==(const FieldSample&, const FieldSample&) = default;
};

/// The full joint profile. Conservative and damping channels sum over active
/// components; friction takes the maximum.
struct ComposedField {
  std::vector<EffectComponent> components;
  JointContext joint;
  JointLimitHint joint_limit;
  nlohmann::json meta = nlohmann::json::object();

  void validate() const;
};

/// s is clamped into [0,1].
FieldSample field_eval(const ComposedField& f, double s);
/// Spatial derivative of the conservative channel, d/ds.
double field_conservative_ds(const ComposedField& f, double s);

}  // namespace joda
