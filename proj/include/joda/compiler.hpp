#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "joda/field.hpp"
#include "joda/joint.hpp"
#include "joda/schema.hpp"

namespace joda {

/// Physical scales derived from the joint context.
struct ReferenceMagnitudes {
  double f_ref = 0.0;       // N or N·m
  double v_ref = 0.0;       // rad/s or m/s
  double c_ref = 0.0;       // N·s/rad or N·s/m; c_ref * v_ref == f_ref
  double g_max = 0.0;       // peak |gravity| on a 1e-3 grid
  double f_inertial = 0.0;  // inertia_eq * 2 * range / t_ref^2
};

ReferenceMagnitudes reference_magnitudes(const JointContext& ctx);

/// 64-bit FNV-1a.
std::uint64_t stable_hash(std::string_view key);

struct StrengthBand {
  double lo = 0.0;
  double hi = 0.0;
};

/// none → [0,0], weak → [0.15,0.35], medium → [0.45,0.75],
/// strong → [0.9,1.3], dominant → [1.6,2.4].
StrengthBand strength_band(StrengthLabel label);

/// lo + (hash(key) / 2^64) * (hi - lo).
double strength_multiplier(StrengthLabel label, std::string_view key);
/// Throws kUnknownLabel for labels outside the vocabulary.
double strength_multiplier(std::string_view label, std::string_view key);

/// "asset|joint|effect|index|channel|start|end" with ratios printed to 3 decimals.
std::string stable_key(const JointContext& ctx, std::string_view effect_name, std::size_t index,
                       Channel channel, double start_ratio, double end_ratio);

struct CompileResult {
  ComposedField field;
  std::vector<std::string> warnings;
};

CompileResult compile(const JointContext& ctx, const ProposalDocument& doc);

/// No-template ablation: control points become one full-range component per
/// channel, with values read as multiples of the channel reference.
CompileResult compile_raw(const JointContext& ctx, const RawCurveProposal& raw);

}  // namespace joda
