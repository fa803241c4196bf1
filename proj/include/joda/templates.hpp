#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "joda/field.hpp"

namespace joda {

/// A named effect behaviour with unit-peak prototype curves in local u.
struct Template {
  std::string name;
  std::string description;
  std::string placement_prior;
  ChannelArray<std::optional<PchipCurve>> prototypes;

  bool supports(Channel c) const { return prototypes[index(c)].has_value(); }
};

/// The fixed 13-entry library, in table order.
std::span<const Template> list_templates();

/// Throws kUnknownTemplate listing the valid names.
const Template& find_template(std::string_view name);
bool is_template_name(std::string_view name);
/// Comma-separated list of every template name.
std::string template_names_joined();

struct Instantiation {
  EffectComponent component;
  std::vector<std::string> warnings;
};

/// Places `t` on [a,b] and multiplies each prototype by its channel scale.
/// A zero scale leaves the channel absent; a non-zero scale on a channel the
/// template does not support is dropped with a warning.
Instantiation template_instantiate(const Template& t, double a, double b,
                                   const ChannelArray<double>& channel_scales);

}  // namespace joda
