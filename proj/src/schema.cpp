#include "joda/schema.hpp"

#include <cmath>
#include <span>

#include "joda/canonical_json.hpp"
#include "joda/error.hpp"
#include "joda/templates.hpp"

namespace joda {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw Error(ErrorCode::kValidation, path + ": " + message, path);
}

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

const json& expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path.empty() ? "$" : path, "expected an object");
  return j;
}

const json& require(const json& obj, std::string_view key, const std::string& path) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) fail(join(path, key), "required field is missing");
  return *it;
}

const json* optional_field(const json& obj, std::string_view key) {
  const auto it = obj.find(std::string(key));
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected a boolean");
  return j.get<bool>();
}

template <typename Fn>
auto with_path(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (!e.path().empty()) throw;
    throw Error(e.code(), path + ": " + e.what(), path);
  }
}

json extra_fields(const json& obj, std::span<const std::string_view> known,
                  std::string_view also_known = {}) {
  json extra = json::object();
  for (const auto& [key, value] : obj.items()) {
    bool is_known = key == also_known;
    for (auto k : known) is_known = is_known || key == k;
    if (!is_known) extra[key] = value;
  }
  return extra;
}

ProposalHeader header_from_json(const json& j) {
  ProposalHeader h;
  const json& summary = expect_object(require(j, "joint_summary", ""), "joint_summary");
  if (const json* v = optional_field(summary, "joint_name")) {
    h.joint_summary.joint_name = as_string(*v, "joint_summary.joint_name");
  }
  {
    const std::string path = "joint_summary.joint_type";
    const std::string name = as_string(require(summary, "joint_type", "joint_summary"), path);
    h.joint_summary.joint_type = with_path(path, [&] { return joint_type_from_string(name); });
  }
  if (const json* v = optional_field(summary, "motion_description")) {
    h.joint_summary.motion_description = as_string(*v, "joint_summary.motion_description");
  }
  if (const json* v = optional_field(summary, "overall_confidence")) {
    h.joint_summary.overall_confidence = as_number(*v, "joint_summary.overall_confidence");
    if (h.joint_summary.overall_confidence < 0.0 || h.joint_summary.overall_confidence > 1.0) {
      fail("joint_summary.overall_confidence", "must lie in [0,1]");
    }
  }
  if (const json* v = optional_field(j, "whole_motion_descrptn")) {
    h.whole_motion_description = as_string(*v, "whole_motion_descrptn");
  } else if (const json* alias = optional_field(j, "whole_motion_description")) {
    h.whole_motion_description = as_string(*alias, "whole_motion_description");
  }
  if (const json* v = optional_field(j, "gravity_can_be_ignored")) {
    h.gravity_can_be_ignored = as_bool(*v, "gravity_can_be_ignored");
  }
  if (const json* v = optional_field(j, "joint_limit_hint")) {
    expect_object(*v, "joint_limit_hint");
    if (const json* side = optional_field(*v, "selected_side")) {
      const std::string path = "joint_limit_hint.selected_side";
      const std::string name = as_string(*side, path);
      h.selected_side = with_path(path, [&] { return limit_side_from_string(name); });
    }
    if (const json* el = optional_field(*v, "elasticity")) {
      const std::string path = "joint_limit_hint.elasticity";
      const std::string name = as_string(*el, path);
      h.elasticity = with_path(path, [&] { return elasticity_from_string(name); });
    }
  }
  return h;
}

json header_to_json(const ProposalHeader& h) {
  json j = json::object();
  j["joint_summary"] = {{"joint_name", h.joint_summary.joint_name},
                        {"joint_type", std::string(to_string(h.joint_summary.joint_type))},
                        {"motion_description", h.joint_summary.motion_description},
                        {"overall_confidence", h.joint_summary.overall_confidence}};
  j["whole_motion_descrptn"] = h.whole_motion_description;
  j["gravity_can_be_ignored"] = h.gravity_can_be_ignored;
  j["joint_limit_hint"] = {{"selected_side", std::string(to_string(h.selected_side))},
                           {"elasticity", std::string(to_string(h.elasticity))}};
  return j;
}

constexpr std::string_view kHeaderKeys[] = {"joint_summary", "whole_motion_descrptn",
                                             "whole_motion_description", "gravity_can_be_ignored",
                                             "joint_limit_hint"};

constexpr std::string_view kEffectKeys[] = {"effect_name", "start_ratio", "end_ratio", "strength",
                                            "refineFactor", "confidence", "reason"};

EffectProposal effect_from_json(const json& j, const std::string& path) {
  expect_object(j, path);
  EffectProposal p;
  p.effect_name = as_string(require(j, "effect_name", path), join(path, "effect_name"));
  if (!is_template_name(p.effect_name)) {
    throw Error(ErrorCode::kUnknownTemplate,
                "unknown effect template \"" + p.effect_name + "\"; valid names: " + template_names_joined(),
                join(path, "effect_name"));
  }
  p.start_ratio = as_number(require(j, "start_ratio", path), join(path, "start_ratio"));
  p.end_ratio = as_number(require(j, "end_ratio", path), join(path, "end_ratio"));
  if (p.start_ratio < 0.0 || p.start_ratio > 1.0) fail(join(path, "start_ratio"), "must lie in [0,1]");
  if (p.end_ratio < 0.0 || p.end_ratio > 1.0) fail(join(path, "end_ratio"), "must lie in [0,1]");
  if (!(p.start_ratio < p.end_ratio)) {
    fail(join(path, "start_ratio"), "start_ratio must be less than end_ratio");
  }
  const std::string spath = join(path, "strength");
  const json& strength = expect_object(require(j, "strength", path), spath);
  for (const auto& [key, value] : strength.items()) {
    const std::string cpath = join(spath, key);
    const Channel ch = with_path(cpath, [&] { return channel_from_string(key); });
    const std::string label = as_string(value, cpath);
    p.strength[index(ch)] = with_path(cpath, [&] { return strength_label_from_string(label); });
  }
  if (const json* rf = optional_field(j, "refineFactor")) {
    const std::string rpath = join(path, "refineFactor");
    expect_object(*rf, rpath);
    for (const auto& [key, value] : rf->items()) {
      const std::string cpath = join(rpath, key);
      const Channel ch = with_path(cpath, [&] { return channel_from_string(key); });
      if (value.is_null()) continue;
      const double f = as_number(value, cpath);
      if (!(f > 0.0)) fail(cpath, "refineFactor must be positive");
      p.refine_factor[index(ch)] = f;
    }
  }
  if (const json* c = optional_field(j, "confidence")) {
    p.confidence = as_number(*c, join(path, "confidence"));
    if (p.confidence < 0.0 || p.confidence > 1.0) fail(join(path, "confidence"), "must lie in [0,1]");
  }
  if (const json* r = optional_field(j, "reason")) p.reason = as_string(*r, join(path, "reason"));
  p.extra = extra_fields(j, kEffectKeys);
  return p;
}

}  // namespace

std::string_view to_string(StrengthLabel label) {
  switch (label) {
    case StrengthLabel::kNone: return "none";
    case StrengthLabel::kWeak: return "weak";
    case StrengthLabel::kMedium: return "medium";
    case StrengthLabel::kStrong: return "strong";
    case StrengthLabel::kDominant: return "dominant";
  }
  return "none";
}

StrengthLabel strength_label_from_string(std::string_view name) {
  if (name == "none") return StrengthLabel::kNone;
  if (name == "weak") return StrengthLabel::kWeak;
  if (name == "medium") return StrengthLabel::kMedium;
  if (name == "strong") return StrengthLabel::kStrong;
  if (name == "dominant") return StrengthLabel::kDominant;
  throw Error(ErrorCode::kUnknownLabel,
              "unknown strength label \"" + std::string(name) +
                  "\"; legal labels: none, weak, medium, strong, dominant");
}

json parse_json_text(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string(what) + ": malformed JSON at byte " +
                                       std::to_string(e.byte) + ": " + e.what(),
                "@" + std::to_string(e.byte));
  }
}

ProposalDocument proposal_from_json(const json& j) {
  expect_object(j, "");
  ProposalDocument doc;
  doc.header = header_from_json(j);
  const json& effects = require(j, "effect_proposals", "");
  if (!effects.is_array()) fail("effect_proposals", "expected an array");
  if (effects.empty()) fail("effect_proposals", "at least one effect proposal is required");
  for (std::size_t i = 0; i < effects.size(); ++i) {
    doc.effect_proposals.push_back(
        effect_from_json(effects[i], "effect_proposals[" + std::to_string(i) + "]"));
  }
  doc.extra = extra_fields(j, kHeaderKeys, "effect_proposals");
  return doc;
}

ProposalDocument parse_proposal(std::string_view text) {
  return proposal_from_json(parse_json_text(text, "proposal"));
}

json to_json(const ProposalDocument& doc) {
  json j = header_to_json(doc.header);
  json effects = json::array();
  for (const auto& p : doc.effect_proposals) {
    json e = p.extra;
    e["effect_name"] = p.effect_name;
    e["start_ratio"] = p.start_ratio;
    e["end_ratio"] = p.end_ratio;
    e["strength"] = json::object();
    e["refineFactor"] = json::object();
    for (Channel ch : kAllChannels) {
      e["strength"][std::string(to_string(ch))] = std::string(to_string(p.strength[index(ch)]));
      e["refineFactor"][std::string(to_string(ch))] = p.refine_factor[index(ch)];
    }
    e["confidence"] = p.confidence;
    e["reason"] = p.reason;
    effects.push_back(std::move(e));
  }
  j["effect_proposals"] = std::move(effects);
  for (const auto& [key, value] : doc.extra.items()) j[key] = value;
  return j;
}

RawCurveProposal raw_proposal_from_json(const json& j) {
  expect_object(j, "");
  RawCurveProposal raw;
  raw.header = header_from_json(j);
  const json& points = expect_object(require(j, "control_points", ""), "control_points");
  bool any = false;
  for (const auto& [key, value] : points.items()) {
    const std::string cpath = "control_points." + key;
    const Channel ch = with_path(cpath, [&] { return channel_from_string(key); });
    if (!value.is_array()) fail(cpath, "expected an array of [position, value] pairs");
    auto& out = raw.control_points[index(ch)];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const std::string ppath = cpath + "[" + std::to_string(i) + "]";
      const json& pt = value[i];
      if (!pt.is_array() || pt.size() != 2) fail(ppath, "expected a [position, value] pair");
      const double x = as_number(pt[0], ppath + "[0]");
      const double y = as_number(pt[1], ppath + "[1]");
      if (x < 0.0 || x > 1.0) fail(ppath + "[0]", "position must lie in [0,1]");
      if (!out.empty() && !(x > out.back().first)) fail(ppath + "[0]", "positions must be strictly increasing");
      if (ch != Channel::kConservative && y < 0.0) fail(ppath + "[1]", "friction and damping values must be non-negative");
      out.emplace_back(x, y);
    }
    if (out.size() == 1) fail(cpath, "at least two control points are required");
    any = any || !out.empty();
  }
  if (!any) fail("control_points", "at least one channel needs control points");
  raw.extra = extra_fields(j, kHeaderKeys, "control_points");
  return raw;
}

RawCurveProposal parse_raw_proposal(std::string_view text) {
  return raw_proposal_from_json(parse_json_text(text, "raw proposal"));
}

json to_json(const RawCurveProposal& raw) {
  json j = header_to_json(raw.header);
  json points = json::object();
  for (Channel ch : kAllChannels) {
    const auto& pts = raw.control_points[index(ch)];
    if (pts.empty()) continue;
    json arr = json::array();
    for (const auto& [x, y] : pts) arr.push_back({x, y});
    points[std::string(to_string(ch))] = std::move(arr);
  }
  j["control_points"] = std::move(points);
  for (const auto& [key, value] : raw.extra.items()) j[key] = value;
  return j;
}

json to_json(const PchipCurve& c) {
  return {{"xs", std::vector<double>(c.xs().begin(), c.xs().end())},
          {"ys", std::vector<double>(c.ys().begin(), c.ys().end())}};
}

PchipCurve curve_from_json(const json& j, const std::string& path) {
  expect_object(j, path);
  const auto read = [&](std::string_view key) {
    const std::string kpath = join(path, key);
    const json& arr = require(j, key, path);
    if (!arr.is_array()) fail(kpath, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      out.push_back(as_number(arr[i], kpath + "[" + std::to_string(i) + "]"));
    }
    return out;
  };
  auto xs = read("xs");
  auto ys = read("ys");
  return with_path(path, [&] { return PchipCurve(std::move(xs), std::move(ys)); });
}

JointContext context_from_json(const json& j) {
  expect_object(j, "");
  JointContext ctx;
  if (const json* v = optional_field(j, "asset_name")) ctx.asset_name = as_string(*v, "asset_name");
  if (const json* v = optional_field(j, "joint_name")) ctx.joint_name = as_string(*v, "joint_name");
  {
    const std::string name = as_string(require(j, "joint_type", ""), "joint_type");
    ctx.joint_type = with_path("joint_type", [&] { return joint_type_from_string(name); });
  }
  ctx.q_min = as_number(require(j, "q_min", ""), "q_min");
  ctx.q_max = as_number(require(j, "q_max", ""), "q_max");
  ctx.inertia_eq = as_number(require(j, "inertia_eq", ""), "inertia_eq");
  if (const json* v = optional_field(j, "t_ref")) ctx.t_ref = as_number(*v, "t_ref");
  if (const json* v = optional_field(j, "gravity_curve")) ctx.gravity_curve = curve_from_json(*v, "gravity_curve");
  ctx.validate();
  return ctx;
}

JointContext parse_context(std::string_view text) {
  return context_from_json(parse_json_text(text, "context"));
}

json to_json(const JointContext& ctx) {
  return {{"asset_name", ctx.asset_name},
          {"joint_name", ctx.joint_name},
          {"joint_type", std::string(to_string(ctx.joint_type))},
          {"q_min", ctx.q_min},
          {"q_max", ctx.q_max},
          {"inertia_eq", ctx.inertia_eq},
          {"t_ref", ctx.t_ref},
          {"gravity_curve", to_json(ctx.gravity_curve)}};
}

json composed_to_json(const ComposedField& f) {
  json components = json::array();
  for (const auto& c : f.components) {
    json channels = json::object();
    for (Channel ch : kAllChannels) {
      if (const auto& curve = c.curve(ch)) channels[std::string(to_string(ch))] = to_json(*curve);
    }
    components.push_back({{"effect_name", c.effect_name},
                          {"a", c.a},
                          {"b", c.b},
                          {"channels", std::move(channels)},
                          {"provenance", c.provenance}});
  }
  return {{"format_version", std::string(kComposedFormatVersion)},
          {"composition", {{"conservative", "sum"}, {"friction", "max"}, {"damping", "sum"}}},
          {"joint", to_json(f.joint)},
          {"joint_limit",
           {{"selected_side", std::string(to_string(f.joint_limit.selected_side))},
            {"elasticity", std::string(to_string(f.joint_limit.elasticity))},
            {"damping_ratio", f.joint_limit.damping_ratio}}},
          {"components", std::move(components)},
          {"meta", f.meta}};
}

std::string serialize_composed(const ComposedField& f) { return dump_canonical(composed_to_json(f)); }

ComposedField composed_from_json(const json& j) {
  expect_object(j, "");
  const json& version = require(j, "format_version", "");
  if (!version.is_string() || version.get<std::string>() != kComposedFormatVersion) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "unsupported composed.json format_version " + version.dump() + " (expected \"" +
                    std::string(kComposedFormatVersion) + "\")",
                "format_version");
  }
  if (const json* comp = optional_field(j, "composition")) {
    const json expected = {{"conservative", "sum"}, {"friction", "max"}, {"damping", "sum"}};
    if (*comp != expected) fail("composition", "only conservative=sum, friction=max, damping=sum is supported");
  }
  ComposedField f;
  {
    const json& joint = expect_object(require(j, "joint", ""), "joint");
    try {
      f.joint = context_from_json(joint);
    } catch (const Error& e) {
      throw Error(e.code(), std::string("joint.") + e.what(), join("joint", e.path()));
    }
  }
  if (const json* lim = optional_field(j, "joint_limit")) {
    expect_object(*lim, "joint_limit");
    if (const json* v = optional_field(*lim, "selected_side")) {
      const std::string name = as_string(*v, "joint_limit.selected_side");
      f.joint_limit.selected_side =
          with_path("joint_limit.selected_side", [&] { return limit_side_from_string(name); });
    }
    if (const json* v = optional_field(*lim, "elasticity")) {
      const std::string name = as_string(*v, "joint_limit.elasticity");
      f.joint_limit.elasticity =
          with_path("joint_limit.elasticity", [&] { return elasticity_from_string(name); });
    }
    f.joint_limit.damping_ratio = damping_ratio_for(f.joint_limit.elasticity);
    if (const json* v = optional_field(*lim, "damping_ratio")) {
      f.joint_limit.damping_ratio = as_number(*v, "joint_limit.damping_ratio");
    }
  }
  const json& components = require(j, "components", "");
  if (!components.is_array()) fail("components", "expected an array");
  for (std::size_t i = 0; i < components.size(); ++i) {
    const std::string path = "components[" + std::to_string(i) + "]";
    const json& cj = expect_object(components[i], path);
    EffectComponent c;
    c.effect_name = as_string(require(cj, "effect_name", path), join(path, "effect_name"));
    c.a = as_number(require(cj, "a", path), join(path, "a"));
    c.b = as_number(require(cj, "b", path), join(path, "b"));
    const std::string chpath = join(path, "channels");
    const json& channels = expect_object(require(cj, "channels", path), chpath);
    for (const auto& [key, value] : channels.items()) {
      const std::string cpath = join(chpath, key);
      const Channel ch = with_path(cpath, [&] { return channel_from_string(key); });
      c.curves[index(ch)] = curve_from_json(value, cpath);
    }
    if (const json* p = optional_field(cj, "provenance")) c.provenance = *p;
    f.components.push_back(std::move(c));
  }
  if (const json* m = optional_field(j, "meta")) f.meta = *m;
  f.validate();
  return f;
}

ComposedField parse_composed(std::string_view text) {
  return composed_from_json(parse_json_text(text, "composed.json"));
}

}  // namespace joda
