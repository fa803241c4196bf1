#include "joda/templates.hpp"

#include <cmath>
#include <utility>

#include "joda/error.hpp"

namespace joda {
namespace {

using Knots = std::vector<std::pair<double, double>>;

PchipCurve make_curve(const Knots& knots) {
  std::vector<double> xs, ys;
  for (const auto& [x, y] : knots) {
    xs.push_back(x);
    ys.push_back(y);
  }
  return PchipCurve(std::move(xs), std::move(ys));
}

// f_high(u) = -f_low(1 - u)
Knots mirror(const Knots& knots) {
  Knots out;
  for (auto it = knots.rbegin(); it != knots.rend(); ++it) out.emplace_back(1.0 - it->first, -it->second);
  return out;
}

Template make(std::string name, std::string description, std::string prior,
              std::optional<Knots> conservative, bool friction, bool damping) {
  Template t{std::move(name), std::move(description), std::move(prior), {}};
  if (conservative) t.prototypes[index(Channel::kConservative)] = make_curve(*conservative);
  if (friction) t.prototypes[index(Channel::kFrictionMax)] = PchipCurve::constant(1.0);
  if (damping) t.prototypes[index(Channel::kDamping)] = PchipCurve::constant(1.0);
  return t;
}

std::vector<Template> build_library() {
  const Knots spring_low = {{0.0, 0.0}, {1.0, -1.0}};
  const Knots magnetic_low = {{0.0, -1.0}, {0.35, -0.3}, {0.7, -0.05}, {1.0, 0.0}};
  const Knots snap_low = {{0.0, -1.0}, {0.35, -0.8}, {0.5, 0.0}, {0.7, 0.6}, {1.0, 0.0}};
  const Knots detent = {{0.0, 0.0}, {0.25, 1.0}, {0.5, 0.0}, {0.75, -1.0}, {1.0, 0.0}};
  const Knots bistable = {{0.0, 0.0}, {0.25, -1.0}, {0.5, 0.0}, {0.75, 1.0}, {1.0, 0.0}};
  const Knots bistable_internal = {{0.0, 0.7},   {0.12, 1.0},  {0.25, 0.0},
                                   {0.375, -1.0}, {0.5, 0.0},   {0.625, 1.0},
                                   {0.75, 0.0},  {0.88, -1.0}, {1.0, -0.7}};

  std::vector<Template> lib;
  lib.push_back(make("constant_friction_hinge", "Constant dry friction over the interval",
                     "anywhere; free-stop hinges and lids", std::nullopt, true, false));
  lib.push_back(make("constant_damping_hinge", "Constant velocity-dependent damping",
                     "anywhere; soft-close or viscous motion", std::nullopt, false, true));
  lib.push_back(make("constant_positive_conservative_hinge", "Constant drive toward increasing q",
                     "broad intervals with a steady opening tendency", Knots{{0.0, 1.0}, {1.0, 1.0}},
                     false, false));
  lib.push_back(make("constant_negative_conservative_hinge", "Constant drive toward decreasing q",
                     "broad intervals with a steady closing tendency",
                     Knots{{0.0, -1.0}, {1.0, -1.0}}, false, false));
  lib.push_back(make("detent_internal", "Local click-stop with interior equilibrium",
                     "narrow interior interval centred on the click position", detent, true, true));
  lib.push_back(make("bistable_mechanism", "Two stable regions separated by a barrier",
                     "full range or a wide interval spanning both stable ends", bistable, true,
                     true));
  lib.push_back(make("bistable_mechanism_internal", "Two interior stable points",
                     "interior interval containing both stable points", bistable_internal, true,
                     true));
  lib.push_back(make("magnetic_return_to_low_end", "Increasing attraction toward low end",
                     "short interval starting at s = 0", magnetic_low, true, true));
  lib.push_back(make("magnetic_return_to_high_end", "Increasing attraction toward high end",
                     "short interval ending at s = 1", mirror(magnetic_low), true, true));
  lib.push_back(make("spring_return_to_low_end", "Spring-like return toward low end",
                     "broad interval starting at s = 0", spring_low, true, true));
  lib.push_back(make("spring_return_to_high_end", "Spring-like return toward high end",
                     "broad interval ending at s = 1", mirror(spring_low), true, true));
  lib.push_back(make("spring_loaded_snap_detent_to_low_end", "Snap-in latch near low end",
                     "short interval starting at s = 0", snap_low, true, true));
  lib.push_back(make("spring_loaded_snap_detent_to_high_end", "Snap-in latch near high end",
                     "short interval ending at s = 1", mirror(snap_low), true, true));
  return lib;
}

const std::vector<Template>& library() {
  static const std::vector<Template> lib = build_library();
  return lib;
}

}  // namespace

std::span<const Template> list_templates() { return library(); }

bool is_template_name(std::string_view name) {
  for (const auto& t : library()) {
    if (t.name == name) return true;
  }
  return false;
}

std::string template_names_joined() {
  std::string out;
  for (const auto& t : library()) {
    if (!out.empty()) out += ", ";
    out += t.name;
  }
  return out;
}

const Template& find_template(std::string_view name) {
  for (const auto& t : library()) {
    if (t.name == name) return t;
  }
  throw Error(ErrorCode::kUnknownTemplate, "unknown effect template \"" + std::string(name) +
                                               "\"; valid names: " + template_names_joined());
}

Instantiation template_instantiate(const Template& t, double a, double b,
                                   const ChannelArray<double>& channel_scales) {
  if (!(a >= 0.0 && a < b && b <= 1.0)) {
    throw Error(ErrorCode::kValidation, "active interval must satisfy 0 <= a < b <= 1");
  }
  Instantiation out;
  out.component.effect_name = t.name;
  out.component.a = a;
  out.component.b = b;
  for (Channel ch : kAllChannels) {
    const double scale = channel_scales[index(ch)];
    if (!std::isfinite(scale) || (ch != Channel::kConservative && scale < 0.0)) {
      throw Error(ErrorCode::kValidation,
                  "invalid scale for channel " + std::string(to_string(ch)));
    }
    if (scale == 0.0) continue;
    if (!t.supports(ch)) {
      out.warnings.push_back(t.name + ": channel " + std::string(to_string(ch)) +
                             " is not supported by this template; dropped");
      continue;
    }
    out.component.curves[index(ch)] = t.prototypes[index(ch)]->scaled(scale);
  }
  return out;
}

}  // namespace joda
