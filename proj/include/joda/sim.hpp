#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "joda/compiler.hpp"
#include "joda/field.hpp"

namespace joda {

struct SimState {
  double t = 0.0;
  double q = 0.0;
  double v = 0.0;
};

struct SimConfig {
  double dt = 0.005;
  /// tanh-smoothed Coulomb friction (differentiable) instead of the
  /// velocity clamp.
  bool smooth_friction = false;
  /// Stiction velocity scale; <= 0 selects v_ref * 1e-3.
  double eps_v = 0.0;
  /// Smoothstep interval indicators of width `interval_band` at each end of a
  /// component instead of sharp cut-offs. Used by differentiable rollouts.
  bool smooth_intervals = false;
  double interval_band = 0.01;
  /// Static F_ref penetrates at most this fraction of the joint range.
  double limit_penetration_budget = 0.005;

  static SimConfig differentiable() {
    SimConfig cfg;
    cfg.smooth_friction = true;
    cfg.smooth_intervals = true;
    return cfg;
  }
};

/// Smoothstep indicator of [a,b] with a band of `band` centred on each end.
double smooth_indicator(double s, double a, double b, double band);
/// d/ds, d/da, d/db of smooth_indicator.
struct IndicatorGrad {
  double value, ds, da, db;
};
IndicatorGrad smooth_indicator_grad(double s, double a, double b, double band);

/// Field evaluation with smooth interval indicators.
FieldSample field_eval_smooth(const ComposedField& f, double s, double band);

/// Solves v + c * tanh(v / eps) = v_star for v (c >= 0, eps > 0).
double solve_smooth_friction(double v_star, double c, double eps);

/// One-sided spring-damper outside [q_min, q_max].
struct JointLimitModel {
  double stiffness = 0.0;
  double low_damping = 0.0;  // N·s per unit velocity
  double high_damping = 0.0;
  double q_min = 0.0;
  double q_max = 1.0;

  static JointLimitModel make(const JointContext& ctx, const JointLimitHint& hint,
                              const ReferenceMagnitudes& ref, double penetration_budget);
  double force(double q, double v) const;
};

double joint_limit_force(double q, double v, const JointContext& ctx, const JointLimitHint& hint);

/// Precomputed single-DOF model; cheap to step. Holds a copy of the field.
class Simulator {
 public:
  explicit Simulator(ComposedField field, SimConfig cfg = {});

  /// Throws kDiverged on a non-finite result.
  SimState step(const SimState& state, double f_ext) const;

  const ComposedField& field() const { return field_; }
  const SimConfig& config() const { return cfg_; }
  const ReferenceMagnitudes& reference() const { return ref_; }
  const JointLimitModel& limits() const { return limits_; }
  double eps_v() const { return eps_v_; }
  FieldSample sample(double s) const;

 private:
  ComposedField field_;
  SimConfig cfg_;
  ReferenceMagnitudes ref_;
  JointLimitModel limits_;
  double eps_v_;
};

SimState step(const SimState& state, const ComposedField& field, const SimConfig& cfg, double f_ext);

struct ForceSample {
  double f_ext = 0.0;
  double f_hand = 0.0;
};

/// Evaluated once per step with the current state. May carry state (a hand
/// controller's moving target, for instance).
using ForceSource = std::function<ForceSample(const SimState&)>;

struct TrajectorySample {
  double t, q, v, f_ext, f_hand;
};

/// samples[k] holds the state at step k and the forces applied over step k.
struct Trajectory {
  double dt = 0.0;
  std::vector<TrajectorySample> samples;

  SimState initial_state() const { return {samples.at(0).t, samples.at(0).q, samples.at(0).v}; }
};

Trajectory rollout(const Simulator& sim, const SimState& start, const ForceSource& source,
                   std::size_t n_steps);
Trajectory rollout(const SimState& start, const ComposedField& field, const SimConfig& cfg,
                   const ForceSource& source, std::size_t n_steps);

ForceSource constant_force(double f);
/// Piecewise-linear in time, held constant beyond the ends.
ForceSource scheduled_force(std::vector<std::pair<double, double>> points);
/// Replays the recorded f_ext + f_hand of a trajectory, step by step.
ForceSource replay_force(const Trajectory& traj);

/// Piecewise-linear interpolation of (t, value) points, held at the ends.
double interpolate_schedule(const std::vector<std::pair<double, double>>& points, double t);

/// Bounded, rate-limited PD "virtual hand".
struct HandController {
  double target = 0.0;
  double rate_limit = 0.0;
  double q_lo = 0.0;
  double q_hi = 1.0;
  double kp = 0.0;
  double kd = 0.0;
  double force_cap = 0.0;

  /// kp = 20 F_ref/range, kd = 2 sqrt(kp I), cap = 3 F_ref, rate = 2 v_ref.
  static HandController defaults(const JointContext& ctx, double initial_target);
};

struct HandOutput {
  double force;
  double target;
};

/// Moves the target toward `command` by at most rate_limit*dt, clamps it to
/// [q_lo, q_hi], and returns clamp(kp (target - q) - kd v, ±force_cap).
HandOutput hand_force(const HandController& h, const SimState& state, double dt, double command);

/// Closure that drives `hand` toward a time-indexed command schedule (in q).
ForceSource hand_driver(HandController hand, std::vector<std::pair<double, double>> command,
                        double dt);

enum class BaselineKind { kConstantDrag, kLinearSpring };
BaselineKind baseline_kind_from_string(std::string_view name);

struct BaselineParams {
  double friction = 0.0;  // physical units
  double damping = 0.0;
  double peak = 0.0;      // linear spring peak force at the far end of its interval
  LimitSide spring_side = LimitSide::kLowEnd;
  double a = 0.0;
  double b = 1.0;
};

ComposedField make_baseline(BaselineKind kind, const JointContext& ctx, const BaselineParams& p);

/// Trajectory CSV: header `t,q,v,f_ext,f_hand`.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
std::string trajectory_csv(const Trajectory& traj);
Trajectory parse_trajectory_csv(std::string_view text);

/// Generic numeric CSV with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::size_t column(std::string_view name) const;  // throws kValidation
};
CsvTable parse_csv(std::string_view text);

/// Scenario file: initial state, step count, config overrides, and the
/// external force description.
struct Scenario {
  SimState initial;
  std::size_t steps = 1;
  SimConfig config;
  std::vector<std::pair<double, double>> force_schedule;  // empty → zero force
  bool has_hand = false;
  HandController hand;
  std::vector<std::pair<double, double>> hand_command;
};

Scenario scenario_from_json(const nlohmann::json& j, const ComposedField& field);
Trajectory run_scenario(const ComposedField& field, const Scenario& scenario);

}  // namespace joda
