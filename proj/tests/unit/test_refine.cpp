#include <doctest.h>

#include <cmath>

#include "joda/refine.hpp"
#include "joda/schema.hpp"
#include "support/random_fields.hpp"

using namespace joda;
using testsupport::place;

namespace {

ComposedField truth_field() {
  testsupport::Rng rng(42);
  ComposedField f;
  f.joint = testsupport::random_context(rng, true);
  const auto ref = reference_magnitudes(f.joint);
  f.components.push_back(place("spring_return_to_low_end", 0.0, 1.0, 0.9 * ref.f_ref));
  f.components.push_back(place("detent_internal", 0.35, 0.6, 1.1 * ref.f_ref));
  f.components.push_back(place("constant_friction_hinge", 0.0, 1.0, 0.0, 0.1 * ref.f_ref));
  f.components.push_back(place("constant_damping_hinge", 0.0, 1.0, 0.0, 0.0, 0.3 * ref.c_ref));
  f.validate();
  return f;
}

std::vector<Trajectory> releases(const ComposedField& f, const RefineConfig& cfg) {
  const Simulator sim(f, cfg.sim);
  std::vector<Trajectory> out;
  for (double s0 : {0.9, 0.5}) {
    out.push_back(rollout(sim, {0.0, denormalize_s(s0, f.joint.q_min, f.joint.q_max), 0.0},
                          constant_force(0.05 * sim.reference().f_ref), 150));
  }
  return out;
}

}  // namespace

TEST_SUITE("refine") {
  TEST_CASE("pack and unpack round-trip") {
    const auto f = truth_field();
    const ParamSet p = ParamSet::pack(f);
    CHECK(p.names.size() == p.size());
    CHECK(p.mask.size() == p.size());
    CHECK(p.names.back() == "joint_limit.log_damping_ratio");
    const ComposedField g = p.unpack();
    for (double s : {0.0, 0.2, 0.41, 0.5, 0.77, 1.0}) {
      const auto a = field_eval(f, s), b = field_eval(g, s);
      CHECK(b.conservative == doctest::Approx(a.conservative).epsilon(1e-14));
      CHECK(b.friction_max == doctest::Approx(a.friction_max).epsilon(1e-14));
      CHECK(b.damping == doctest::Approx(a.damping).epsilon(1e-14));
    }
  }

  TEST_CASE("mask groups") {
    ParamSet p = ParamSet::pack(truth_field());
    p.set_mask("conservative");
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(p.mask[i] == (p.names[i].find(".conservative.ys[") != std::string::npos));
    }
    p.set_mask("anchors,limit");
    CHECK(p.mask.back());
    CHECK(p.active_count() == 2 * p.slots().size() + 1);
    p.set_mask("components[1].a");
    CHECK(p.active_count() == 1);
    CHECK_THROWS(p.set_mask("nonsense"));
  }

  TEST_CASE("loss vanishes on self-generated targets, with zero gradient") {
    const auto f = truth_field();
    RefineConfig cfg;
    const auto targets = releases(f, cfg);
    ParamSet p = ParamSet::pack(f);
    p.set_mask("all");
    const auto res = evaluate_loss(p, targets, cfg, true);
    CHECK(res.loss < 1e-12);
    for (double g : res.grad) CHECK(std::abs(g) < 1e-9);
  }

  TEST_CASE("constant offset gives its square as the loss") {
    const auto f = truth_field();
    RefineConfig cfg;
    auto targets = releases(f, cfg);
    const double delta = 0.03;
    for (auto& t : targets) {
      for (std::size_t k = 1; k < t.samples.size(); ++k) t.samples[k].q += delta * f.joint.range();
    }
    CHECK(trajectory_loss(ParamSet::pack(f), targets, cfg) == doctest::Approx(delta * delta).epsilon(1e-9));
  }

  TEST_CASE("gradient matches finite differences") {
    const auto f = truth_field();
    RefineConfig cfg;
    const auto targets = releases(f, cfg);
    ParamSet p = ParamSet::pack(f);
    p.set_mask("all");
    for (std::size_t i = 0; i + 1 < p.size(); ++i) p.values[i] += 0.02 * std::sin(3.0 * static_cast<double>(i));
    const auto g = loss_grad(p, targets, cfg);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      ParamSet hi = p, lo = p;
      hi.values[i] += 1e-6;
      lo.values[i] -= 1e-6;
      const double fd = (trajectory_loss(hi, targets, cfg) - trajectory_loss(lo, targets, cfg)) / 2e-6;
      num += (g[i] - fd) * (g[i] - fd);
      den += fd * fd;
    }
    CHECK(std::sqrt(num / den) < 1e-4);
  }

  TEST_CASE("threads do not change the result") {
    const auto f = truth_field();
    RefineConfig one, many;
    many.threads = 4;
    auto targets = releases(f, one);
    ParamSet p = ParamSet::pack(f);
    p.set_mask("conservative");
    p.values[p.slots()[1].conservative + 1] *= 1.2;
    const auto a = evaluate_loss(p, targets, one, true);
    const auto b = evaluate_loss(p, targets, many, true);
    CHECK(a.loss == b.loss);
    CHECK(a.grad == b.grad);
  }

  TEST_CASE("optimizer respects the mask and keeps damping positive") {
    const auto f = truth_field();
    RefineConfig cfg;
    const auto targets = releases(f, cfg);
    ParamSet p = ParamSet::pack(f);
    p.set_mask("damping,anchors");
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p.mask[i]) p.values[i] += 0.3;
    }
    const auto start = p;
    const OptimizeResult one = optimize(p, targets, 1, cfg);
    CHECK(one.history.size() == 2);
    const OptimizeResult res = optimize(p, targets, 20, cfg);
    CHECK(res.history.size() == 21);
    CHECK(res.history[res.best_iteration] <= res.history.front());
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!start.mask[i]) CHECK(res.last.values[i] == start.values[i]);
    }
    const auto refined = res.last.unpack();
    for (const auto& c : refined.components) {
      CHECK(c.a < c.b);
      if (const auto& d = c.curve(Channel::kDamping)) {
        for (double y : d->ys()) CHECK(y >= 0.0);
      }
    }
  }

  TEST_CASE("pairwise sum is exact on small integers") {
    std::vector<double> v(1000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
    CHECK(pairwise_sum(v.data(), v.size()) == 499500.0);
    CHECK(pairwise_sum(v.data(), 0) == 0.0);
  }
}
