#include <doctest.h>

#include <algorithm>

#include "joda/diag.hpp"
#include "joda/schema.hpp"
#include "joda/sim.hpp"
#include "support/fixtures.hpp"
#include "support/random_fields.hpp"

using namespace joda;
using testsupport::fixture;
using testsupport::place;
using testsupport::read_file;

namespace {

ComposedField door_with(std::vector<EffectComponent> comps) {
  ComposedField f;
  f.joint = parse_context(read_file(fixture("context_door.json")));
  f.components = std::move(comps);
  f.validate();
  return f;
}

}  // namespace

TEST_SUITE("diag") {
  TEST_CASE("spring with friction sticks up to a quarter of the range") {
    const auto f = door_with({place("spring_return_to_low_end", 0.0, 1.0, 2.0),
                              place("constant_friction_hinge", 0.0, 1.0, 0.0, 0.5)});
    const auto regions = stick_regions(profile_grid(f));
    REQUIRE(regions.size() == 1);
    CHECK(regions[0].lo == 0.0);
    CHECK(regions[0].hi == doctest::Approx(0.25).epsilon(1e-9));
  }

  TEST_CASE("magnetic catch opening force") {
    const auto f = door_with({place("magnetic_return_to_low_end", 0.0, 0.2, 3.0),
                              place("constant_friction_hinge", 0.0, 1.0, 0.0, 0.5)});
    const auto grid = profile_grid(f);
    const auto open = quasi_static_open_force(f, grid);
    CHECK(open.front() == doctest::Approx(3.5));
    CHECK(open.back() == doctest::Approx(0.5));
    const auto closing = quasi_static_open_force(f, grid, false);
    CHECK(closing.front() == doctest::Approx(-2.5));
  }

  TEST_CASE("equilibria and their stability") {
    const auto detent = door_with({place("detent_internal", 0.2, 0.6, 1.0)});
    const auto eq = equilibria(profile_grid(detent), detent);
    REQUIRE(eq.size() == 1);
    CHECK(eq[0].s == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(eq[0].stability == Stability::kStable);
    CHECK(eq[0].slope < 0.0);

    const auto bistable = door_with({place("bistable_mechanism", 0.0, 1.0, 1.0)});
    const auto eq2 = equilibria(profile_grid(bistable), bistable);
    REQUIRE(eq2.size() == 1);
    CHECK(eq2[0].s == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(eq2[0].stability == Stability::kUnstable);
    CHECK(to_string(Stability::kUnstable) == "unstable");
  }

  TEST_CASE("a step in force counts by its crossing direction") {
    // Positive drive then a stronger negative drive: sign flips across a jump.
    const auto f = door_with({place("constant_positive_conservative_hinge", 0.0, 0.5, 1.0),
                              place("constant_negative_conservative_hinge", 0.5, 1.0, 1.0)});
    const auto eq = equilibria(profile_grid(f, 1000), f);
    REQUIRE(eq.size() == 1);
    CHECK(eq[0].stability == Stability::kStable);
  }

  TEST_CASE("grid metadata and CSV") {
    const auto f = door_with({place("spring_return_to_low_end", 0.0, 1.0, 2.0)});
    const auto grid = profile_grid(f, 11);
    CHECK(grid.size() == 11);
    CHECK(grid.q_max == f.joint.q_max);
    const std::string csv = profile_csv(grid);
    CHECK(csv.rfind("s,f_cons,f_fric_max,c_damp,gravity_balance,band_lo,band_hi\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 12);
  }

  TEST_CASE("normalize and resample") {
    const std::vector<double> ys = {2.0, 4.0, 3.0};
    CHECK(normalize_unit(ys) == std::vector<double>{0.0, 1.0, 0.5});
    CHECK(normalize_unit(std::vector<double>{5.0, 5.0}) == std::vector<double>{0.0, 0.0});
    const std::vector<double> xs = {0.0, 1.0, 2.0};
    const auto r = resample_linear(xs, ys, std::vector<double>{-1.0, 0.5, 1.5, 3.0});
    CHECK(r == std::vector<double>{2.0, 3.0, 3.5, 3.0});
  }

  TEST_CASE("golden SVG and analysis") {
    const auto field = parse_composed(read_file(fixture("golden/door_composed.json")));
    SvgOptions opts;
    opts.annotate_equilibria = true;
    opts.shade_stick_regions = true;
    const auto grid = profile_grid(field, 201);
    const std::string svg = render_svg(grid, field, opts);
    CHECK(svg == read_file(fixture("golden/door_profile.svg")));
    CHECK(svg == render_svg(profile_grid(field, 201), field, opts));
    const auto analysis = analysis_json(field, profile_grid(field));
    CHECK(analysis == nlohmann::json::parse(read_file(fixture("golden/door_analysis.json"))));
  }

  TEST_CASE("stick regions agree with the simulator on a random field") {
    testsupport::Rng rng(5);
    const auto f = testsupport::random_field(rng, true);
    const auto regions = stick_regions(profile_grid(f));
    const Simulator sim(f);
    for (const auto& r : regions) {
      if (r.hi - r.lo < 0.01) continue;
      const double s = 0.5 * (r.lo + r.hi);
      SimState st{0.0, denormalize_s(s, f.joint.q_min, f.joint.q_max), 0.0};
      const double q0 = st.q;
      for (int i = 0; i < 200; ++i) st = sim.step(st, 0.0);
      CHECK(st.q == q0);
    }
  }
}
