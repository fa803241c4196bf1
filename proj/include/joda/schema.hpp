#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "joda/field.hpp"
#include "joda/joint.hpp"

namespace joda {

enum class StrengthLabel { kNone, kWeak, kMedium, kStrong, kDominant };

std::string_view to_string(StrengthLabel label);
/// Throws kUnknownLabel listing the five legal labels.
StrengthLabel strength_label_from_string(std::string_view name);

struct JointSummary {
  std::string joint_name;
  JointType joint_type = JointType::kRevolute;
  std::string motion_description;
  double overall_confidence = 0.0;
};

struct EffectProposal {
  std::string effect_name;
  double start_ratio = 0.0;
  double end_ratio = 1.0;
  ChannelArray<StrengthLabel> strength = {StrengthLabel::kNone, StrengthLabel::kNone,
                                          StrengthLabel::kNone};
  /// Absent entries default to 1.0.
  ChannelArray<double> refine_factor = {1.0, 1.0, 1.0};
  double confidence = 0.0;
  std::string reason;
  nlohmann::json extra = nlohmann::json::object();
};

struct ProposalHeader {
  JointSummary joint_summary;
  std::string whole_motion_description;
  bool gravity_can_be_ignored = false;
  LimitSide selected_side = LimitSide::kNone;
  Elasticity elasticity = Elasticity::kNone;
};

/// Structured effect proposal returned by the vision-language model.
struct ProposalDocument {
  ProposalHeader header;
  std::vector<EffectProposal> effect_proposals;
  nlohmann::json extra = nlohmann::json::object();
};

/// Control points emitted directly by the model (no-template ablation).
struct RawCurveProposal {
  ProposalHeader header;
  /// (position, value) pairs per channel; values are multiples of the
  /// channel reference magnitude.
  ChannelArray<std::vector<std::pair<double, double>>> control_points;
  nlohmann::json extra = nlohmann::json::object();
};

enum class ProposalMode { kTemplate, kRaw };

/// Throws kParse (with byte offset) or kValidation (with JSON path).
ProposalDocument parse_proposal(std::string_view text);
ProposalDocument proposal_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProposalDocument& doc);

RawCurveProposal parse_raw_proposal(std::string_view text);
RawCurveProposal raw_proposal_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RawCurveProposal& raw);

JointContext parse_context(std::string_view text);
JointContext context_from_json(const nlohmann::json& j);
nlohmann::json to_json(const JointContext& ctx);

nlohmann::json to_json(const PchipCurve& c);
PchipCurve curve_from_json(const nlohmann::json& j, const std::string& path);

inline constexpr std::string_view kComposedFormatVersion = "1";

/// Canonical composed.json text.
std::string serialize_composed(const ComposedField& f);
nlohmann::json composed_to_json(const ComposedField& f);
ComposedField parse_composed(std::string_view text);
ComposedField composed_from_json(const nlohmann::json& j);

/// Parses JSON text, converting parse failures into kParse with the offset.
nlohmann::json parse_json_text(std::string_view text, std::string_view what);

}  // namespace joda
