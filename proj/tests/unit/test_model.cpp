#include <doctest.h>

#include <cmath>
#include <string>

#include "joda/canonical_json.hpp"
#include "joda/compiler.hpp"
#include "joda/error.hpp"
#include "joda/field.hpp"
#include "joda/schema.hpp"
#include "joda/templates.hpp"
#include "oracles/pchip_oracle.hpp"
#include "support/fixtures.hpp"
#include "support/random_fields.hpp"

using namespace joda;
using testsupport::fixture;
using testsupport::read_file;

namespace {

template <typename Fn>
Error catch_error(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected joda::Error");
  return Error(ErrorCode::kValidation, "");
}

JointContext door() { return parse_context(read_file(fixture("context_door.json"))); }

}  // namespace

TEST_SUITE("field") {
  TEST_CASE("library has thirteen templates with unique names") {
    const auto lib = list_templates();
    CHECK(lib.size() == 13);
    for (std::size_t i = 0; i < lib.size(); ++i) {
      CHECK(is_template_name(lib[i].name));
      for (std::size_t j = i + 1; j < lib.size(); ++j) CHECK(lib[i].name != lib[j].name);
    }
    CHECK(catch_error([] { find_template("door_spring"); }).code() == ErrorCode::kUnknownTemplate);
  }

  TEST_CASE("high-end templates mirror their low-end twins") {
    for (const char* base : {"magnetic_return_to", "spring_return_to", "spring_loaded_snap_detent_to"}) {
      const auto& lo = *find_template(std::string(base) + "_low_end").prototypes[0];
      const auto& hi = *find_template(std::string(base) + "_high_end").prototypes[0];
      for (double u : {0.0, 0.1, 0.37, 0.5, 0.8, 1.0}) {
        CHECK(hi.eval(u) == doctest::Approx(-lo.eval(1.0 - u)));
      }
    }
  }

  TEST_CASE("instantiation places curves and drops unsupported channels") {
    const auto inst = template_instantiate(find_template("spring_return_to_low_end"), 0.2, 0.6, {2.0, 0.5, 0.0});
    CHECK(inst.component.a == 0.2);
    CHECK(inst.component.b == 0.6);
    CHECK(inst.component.curve(Channel::kConservative).has_value());
    CHECK_FALSE(inst.component.curve(Channel::kDamping).has_value());
    CHECK(component_eval(inst.component, Channel::kConservative, 0.6) == doctest::Approx(-2.0));
    CHECK(component_eval(inst.component, Channel::kConservative, 0.7) == 0.0);
    if (!find_template("spring_return_to_low_end").supports(Channel::kFrictionMax)) CHECK(inst.warnings.size() == 1);
  }

  TEST_CASE("composition sums conservative and damping, takes max friction") {
    using testsupport::place;
    ComposedField f;
    f.joint = door();
    f.components.push_back(place("constant_positive_conservative_hinge", 0.0, 0.6, 1.0));
    f.components.push_back(place("constant_negative_conservative_hinge", 0.4, 1.0, 0.25));
    f.components.push_back(place("constant_friction_hinge", 0.0, 1.0, 0.0, 0.3));
    f.components.push_back(place("constant_friction_hinge", 0.5, 1.0, 0.0, 0.7));
    f.components.push_back(place("constant_damping_hinge", 0.0, 1.0, 0.0, 0.0, 0.2));
    f.components.push_back(place("constant_damping_hinge", 0.0, 0.5, 0.0, 0.0, 0.1));
    f.validate();
    const auto lo = field_eval(f, 0.2);
    CHECK(lo.conservative == doctest::Approx(1.0));
    CHECK(lo.friction_max == doctest::Approx(0.3));
    CHECK(lo.damping == doctest::Approx(0.3));
    const auto mid = field_eval(f, 0.55);
    CHECK(mid.conservative == doctest::Approx(0.75));
    CHECK(mid.friction_max == doctest::Approx(0.7));
    CHECK(mid.damping == doctest::Approx(0.2));
    CHECK(field_eval(f, 1.7) == field_eval(f, 1.0));
  }

  TEST_CASE("negative friction is rejected") {
    ComposedField f;
    f.joint = door();
    f.components.push_back(testsupport::place("constant_friction_hinge", 0.0, 1.0, 0.0, 0.3));
    f.components[0].curve(Channel::kFrictionMax) = PchipCurve::constant(-0.1);
    CHECK(catch_error([&] { f.validate(); }).code() == ErrorCode::kValidation);
  }
}

TEST_SUITE("schema") {
  TEST_CASE("parses a proposal and round-trips it") {
    const auto doc = parse_proposal(read_file(fixture("proposals/p01_door_soft_close.json")));
    CHECK(doc.header.joint_summary.joint_name == "door_hinge");
    CHECK(doc.header.gravity_can_be_ignored);
    CHECK(doc.header.selected_side == LimitSide::kLowEnd);
    REQUIRE(doc.effect_proposals.size() == 3);
    CHECK(doc.effect_proposals[1].effect_name == "magnetic_return_to_low_end");
    CHECK(doc.effect_proposals[1].strength[index(Channel::kConservative)] == StrengthLabel::kMedium);
    CHECK(doc.effect_proposals[0].refine_factor[0] == 1.0);
    const auto again = proposal_from_json(to_json(doc));
    CHECK(dump_canonical(to_json(again)) == dump_canonical(to_json(doc)));
  }

  TEST_CASE("reports the JSON path of an inverted interval") {
    const Error e = catch_error([] { parse_proposal(read_file(fixture("bad_interval_proposal.json"))); });
    CHECK(e.code() == ErrorCode::kValidation);
    CHECK(e.path() == "effect_proposals[1].start_ratio");
  }

  TEST_CASE("rejects unknown labels, templates and malformed text") {
    auto j = parse_json_text(read_file(fixture("proposals/p01_door_soft_close.json")), "proposal");
    auto bad_label = j;
    bad_label["effect_proposals"][0]["strength"]["friction"] = "huge";
    CHECK(catch_error([&] { proposal_from_json(bad_label); }).code() == ErrorCode::kUnknownLabel);
    auto bad_name = j;
    bad_name["effect_proposals"][0]["effect_name"] = "rubber_band";
    CHECK(catch_error([&] { proposal_from_json(bad_name); }).code() == ErrorCode::kUnknownTemplate);
    CHECK(catch_error([] { parse_proposal("{\"joint_summary\": "); }).code() == ErrorCode::kParse);
  }

  TEST_CASE("context validation") {
    auto j = to_json(door());
    j["q_max"] = j["q_min"];
    CHECK(catch_error([&] { context_from_json(j); }).error_class() == ErrorClass::kValidation);
    auto k = to_json(door());
    k["inertia_eq"] = -1.0;
    CHECK(catch_error([&] { context_from_json(k); }).code() == ErrorCode::kValidation);
  }

  TEST_CASE("composed.json round-trips byte for byte") {
    const std::string text = read_file(fixture("golden/door_composed.json"));
    CHECK(serialize_composed(parse_composed(text)) == text);
    auto j = parse_json_text(text, "composed");
    j["format_version"] = "99";
    CHECK(catch_error([&] { composed_from_json(j); }).code() == ErrorCode::kUnsupportedVersion);
  }

  TEST_CASE("canonical numbers round-trip") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) CHECK(std::stod(format_double(v)) == v);
    CHECK(dump_canonical(nlohmann::json{{"b", 1}, {"a", 0.5}}) == "{\n  \"a\": 0.5,\n  \"b\": 1\n}\n");
  }
}

TEST_SUITE("compiler") {
  TEST_CASE("reference magnitudes") {
    const auto ref = reference_magnitudes(door());
    CHECK(ref.f_ref == doctest::Approx(2 * 0.35 * 1.5708));
    CHECK(ref.v_ref == doctest::Approx(1.5708));
    CHECK(ref.c_ref * ref.v_ref == ref.f_ref);
    const auto lid = reference_magnitudes(parse_context(read_file(fixture("context_lid.json"))));
    CHECK(lid.f_ref == lid.g_max);
    CHECK(lid.c_ref * lid.v_ref == lid.f_ref);
  }

  TEST_CASE("strength multipliers are hashed into their band") {
    CHECK(stable_hash("foobar") == 0x85944171f73967e8ULL);
    const std::string key = stable_key(door(), "detent_internal", 2, Channel::kConservative, 0.4, 0.55);
    CHECK(key == "cabinet|door_hinge|detent_internal|2|conservative|0.400|0.550");
    CHECK(stable_hash(key) == oracle::fnv1a64(key.data(), key.size()));
    for (auto label : {StrengthLabel::kWeak, StrengthLabel::kMedium, StrengthLabel::kStrong, StrengthLabel::kDominant}) {
      const auto band = strength_band(label);
      const double m = strength_multiplier(label, key);
      CHECK(m >= band.lo);
      CHECK(m <= band.hi);
      CHECK(m == band.lo + static_cast<double>(stable_hash(key)) / 18446744073709551616.0 * (band.hi - band.lo));
    }
    CHECK(strength_multiplier(StrengthLabel::kNone, key) == 0.0);
    CHECK(catch_error([&] { strength_multiplier("very", key); }).code() == ErrorCode::kUnknownLabel);
  }

  TEST_CASE("compiles the door fixture to the golden output") {
    const auto res = compile(door(), parse_proposal(read_file(fixture("proposals/p01_door_soft_close.json"))));
    CHECK(serialize_composed(res.field) == read_file(fixture("golden/door_composed.json")));
    CHECK(res.field.joint_limit.selected_side == LimitSide::kLowEnd);
    CHECK(res.field.joint_limit.damping_ratio == 0.7);
  }

  TEST_CASE("refine factors scale the channel exactly") {
    auto j = parse_json_text(read_file(fixture("proposals/p01_door_soft_close.json")), "proposal");
    const auto base = compile(door(), proposal_from_json(j)).field;
    j["effect_proposals"][1]["refineFactor"] = {{"conservative", 2.0}};
    const auto scaled = compile(door(), proposal_from_json(j)).field;
    const auto ys0 = base.components[1].curve(Channel::kConservative)->ys();
    const auto ys1 = scaled.components[1].curve(Channel::kConservative)->ys();
    for (std::size_t i = 0; i < ys0.size(); ++i) CHECK(ys1[i] == 2.0 * ys0[i]);
  }

  TEST_CASE("all-none component warns") {
    const auto ctx = door();
    const auto res = compile(ctx, parse_proposal(read_file(fixture("proposals/p09_door_refined.json"))));
    CHECK_FALSE(res.warnings.empty());
  }

  TEST_CASE("raw control points") {
    RawCurveProposal raw;
    raw.control_points[index(Channel::kConservative)] = {{0.0, 0.5}, {0.5, -0.5}, {1.0, 0.0}};
    raw.control_points[index(Channel::kFrictionMax)] = {{0.2, 0.1}, {0.8, 0.1}};
    const auto ctx = door();
    const auto ref = reference_magnitudes(ctx);
    const auto res = compile_raw(ctx, raw);
    const auto s = field_eval(res.field, 0.5);
    CHECK(s.conservative == doctest::Approx(-0.5 * ref.f_ref));
    CHECK(s.friction_max == doctest::Approx(0.1 * ref.f_ref));
    CHECK(field_eval(res.field, 0.0).friction_max == doctest::Approx(0.1 * ref.f_ref));
  }
}
