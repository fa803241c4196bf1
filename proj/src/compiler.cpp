#include "joda/compiler.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "joda/error.hpp"
#include "joda/templates.hpp"

namespace joda {
namespace {

using nlohmann::json;

std::string fixed3(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 3);
  return std::string(buf, res.ptr);
}

// F_ref / v_ref nudged by a few ulps, if needed, so the product is exact.
double exact_quotient(double f, double v) {
  const double c = f / v;
  double candidates[5] = {c, 0, 0, 0, 0};
  candidates[1] = std::nextafter(c, INFINITY);
  candidates[2] = std::nextafter(c, -INFINITY);
  candidates[3] = std::nextafter(candidates[1], INFINITY);
  candidates[4] = std::nextafter(candidates[2], -INFINITY);
  for (double cand : candidates) {
    if (cand * v == f) return cand;
  }
  return c;
}

json bands_json() {
  json j = json::object();
  for (auto label : {StrengthLabel::kNone, StrengthLabel::kWeak, StrengthLabel::kMedium,
                     StrengthLabel::kStrong, StrengthLabel::kDominant}) {
    const auto band = strength_band(label);
    j[std::string(to_string(label))] = {band.lo, band.hi};
  }
  return j;
}

json reference_json(const ReferenceMagnitudes& ref) {
  return {{"f_ref", ref.f_ref},
          {"v_ref", ref.v_ref},
          {"c_ref", ref.c_ref},
          {"g_max", ref.g_max},
          {"f_inertial", ref.f_inertial}};
}

double channel_reference(const ReferenceMagnitudes& ref, Channel ch) {
  return ch == Channel::kDamping ? ref.c_ref : ref.f_ref;
}

ComposedField base_field(const JointContext& ctx, const ProposalHeader& header,
                         const ReferenceMagnitudes& ref, std::string_view mode) {
  ComposedField f;
  f.joint = ctx;
  f.joint_limit = JointLimitHint::from_labels(header.selected_side, header.elasticity);
  f.meta = {{"mode", std::string(mode)},
            {"asset_name", ctx.asset_name},
            {"joint_name", ctx.joint_name},
            {"reference", reference_json(ref)},
            {"gravity_can_be_ignored", header.gravity_can_be_ignored},
            {"whole_motion_descrptn", header.whole_motion_description}};
  return f;
}

}  // namespace

ReferenceMagnitudes reference_magnitudes(const JointContext& ctx) {
  ctx.validate();
  ReferenceMagnitudes ref;
  const double range = ctx.range();
  const double a_ref = 2.0 * range / (ctx.t_ref * ctx.t_ref);
  ref.f_inertial = ctx.inertia_eq * a_ref;
  for (int i = 0; i <= 1000; ++i) {
    const double s = i / 1000.0;
    ref.g_max = std::max(ref.g_max, std::abs(ctx.gravity_curve.eval(s)));
  }
  ref.f_ref = std::max(ref.g_max, ref.f_inertial);
  ref.v_ref = range / ctx.t_ref;
  ref.c_ref = exact_quotient(ref.f_ref, ref.v_ref);
  return ref;
}

std::uint64_t stable_hash(std::string_view key) {
  std::uint64_t state = 14695981039346656037ULL;
  for (unsigned char byte : key) {
    state ^= byte;
    state *= 1099511628211ULL;
  }
  return state;
}

StrengthBand strength_band(StrengthLabel label) {
  switch (label) {
    case StrengthLabel::kNone: return {0.0, 0.0};
    case StrengthLabel::kWeak: return {0.15, 0.35};
    case StrengthLabel::kMedium: return {0.45, 0.75};
    case StrengthLabel::kStrong: return {0.9, 1.3};
    case StrengthLabel::kDominant: return {1.6, 2.4};
  }
  return {0.0, 0.0};
}

double strength_multiplier(StrengthLabel label, std::string_view key) {
  if (label == StrengthLabel::kNone) return 0.0;
  const auto band = strength_band(label);
  const double u = static_cast<double>(stable_hash(key)) * 0x1p-64;
  return band.lo + u * (band.hi - band.lo);
}

double strength_multiplier(std::string_view label, std::string_view key) {
  return strength_multiplier(strength_label_from_string(label), key);
}

std::string stable_key(const JointContext& ctx, std::string_view effect_name, std::size_t index,
                       Channel channel, double start_ratio, double end_ratio) {
  std::string key;
  key += ctx.asset_name;
  key += '|';
  key += ctx.joint_name;
  key += '|';
  key += effect_name;
  key += '|';
  key += std::to_string(index);
  key += '|';
  key += to_string(channel);
  key += '|';
  key += fixed3(start_ratio);
  key += '|';
  key += fixed3(end_ratio);
  return key;
}

CompileResult compile(const JointContext& ctx, const ProposalDocument& doc) {
  const ReferenceMagnitudes ref = reference_magnitudes(ctx);
  CompileResult out;
  out.field = base_field(ctx, doc.header, ref, "template");
  out.field.meta["strength_bands"] = bands_json();

  for (std::size_t i = 0; i < doc.effect_proposals.size(); ++i) {
    const EffectProposal& p = doc.effect_proposals[i];
    const Template& tmpl = find_template(p.effect_name);
    ChannelArray<double> scales = {0.0, 0.0, 0.0};
    json channels = json::object();
    bool any = false;
    for (Channel ch : kAllChannels) {
      const StrengthLabel label = p.strength[index(ch)];
      if (label == StrengthLabel::kNone) continue;
      any = true;
      const std::string key = stable_key(ctx, p.effect_name, i, ch, p.start_ratio, p.end_ratio);
      const double multiplier = strength_multiplier(label, key);
      const double reference = channel_reference(ref, ch);
      const double factor = p.refine_factor[index(ch)];
      scales[index(ch)] = reference * multiplier * factor;
      channels[std::string(to_string(ch))] = {{"label", std::string(to_string(label))},
                                              {"key", key},
                                              {"multiplier", multiplier},
                                              {"refine_factor", factor},
                                              {"reference", reference},
                                              {"scale", scales[index(ch)]}};
    }
    if (!any) {
      out.warnings.push_back("effect_proposals[" + std::to_string(i) + "] (" + p.effect_name +
                             "): every channel strength is none; component dropped");
      continue;
    }
    auto inst = template_instantiate(tmpl, p.start_ratio, p.end_ratio, scales);
    for (auto& w : inst.warnings) out.warnings.push_back(std::move(w));
    inst.component.provenance = {{"proposal_index", i},
                                 {"reason", p.reason},
                                 {"confidence", p.confidence},
                                 {"channels", std::move(channels)}};
    out.field.components.push_back(std::move(inst.component));
  }
  out.field.meta["warnings"] = out.warnings;
  out.field.validate();
  return out;
}

CompileResult compile_raw(const JointContext& ctx, const RawCurveProposal& raw) {
  const ReferenceMagnitudes ref = reference_magnitudes(ctx);
  CompileResult out;
  out.field = base_field(ctx, raw.header, ref, "raw");
  for (Channel ch : kAllChannels) {
    auto pts = raw.control_points[index(ch)];
    if (pts.empty()) continue;
    // Points that stop short of either end are held constant out to it.
    if (pts.front().first > 0.0) pts.insert(pts.begin(), {0.0, pts.front().second});
    if (pts.back().first < 1.0) pts.emplace_back(1.0, pts.back().second);
    const double reference = channel_reference(ref, ch);
    std::vector<double> xs, ys;
    for (const auto& [x, y] : pts) {
      xs.push_back(x);
      ys.push_back(y * reference);
    }
    EffectComponent c;
    c.effect_name = "raw_curve";
    c.a = 0.0;
    c.b = 1.0;
    c.curves[index(ch)] = PchipCurve(std::move(xs), std::move(ys));
    c.provenance = {{"channel", std::string(to_string(ch))}, {"reference", reference}};
    out.field.components.push_back(std::move(c));
  }
  out.field.meta["warnings"] = out.warnings;
  out.field.validate();
  return out;
}

}  // namespace joda
