#include "joda/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <memory>
#include <ostream>
#include <sstream>

#include "joda/canonical_json.hpp"
#include "joda/error.hpp"
#include "joda/schema.hpp"
#include "joda/templates.hpp"

namespace joda {
namespace {

double smoothstep(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * (3.0 - 2.0 * x);
}

double smoothstep_dx(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return 6.0 * x * (1.0 - x);
}

}  // namespace

double smooth_indicator(double s, double a, double b, double band) {
  return smoothstep((s - a) / band + 0.5) * smoothstep((b - s) / band + 0.5);
}

IndicatorGrad smooth_indicator_grad(double s, double a, double b, double band) {
  const double xl = (s - a) / band + 0.5;
  const double xh = (b - s) / band + 0.5;
  const double wl = smoothstep(xl), wh = smoothstep(xh);
  const double dl = smoothstep_dx(xl) / band, dh = smoothstep_dx(xh) / band;
  return {wl * wh, dl * wh - wl * dh, -dl * wh, wl * dh};
}

FieldSample field_eval_smooth(const ComposedField& f, double s, double band) {
  s = std::clamp(s, 0.0, 1.0);
  FieldSample out;
  for (const auto& c : f.components) {
    const double w = smooth_indicator(s, c.a, c.b, band);
    if (w == 0.0) continue;
    const double u = std::clamp((s - c.a) / (c.b - c.a), 0.0, 1.0);
    if (const auto& cc = c.curve(Channel::kConservative)) out.conservative += w * cc->eval(u);
    if (const auto& cf = c.curve(Channel::kFrictionMax)) {
      out.friction_max = std::max(out.friction_max, w * cf->eval(u));
    }
    if (const auto& cd = c.curve(Channel::kDamping)) out.damping += w * cd->eval(u);
  }
  out.friction_max = std::max(out.friction_max, 0.0);
  out.damping = std::max(out.damping, 0.0);
  return out;
}

double solve_smooth_friction(double v_star, double c, double eps) {
  if (c <= 0.0 || v_star == 0.0) return v_star;
  const double target = std::abs(v_star);
  // g(v) = v + c tanh(v/eps) - target is increasing with its root in (0, target].
  double lo = 0.0, hi = target;
  double v = target > c ? target - c : target * eps / (eps + c);
  for (int iter = 0; iter < 200; ++iter) {
    const double th = std::tanh(v / eps);
    const double g = v + c * th - target;
    if (g == 0.0) break;
    if (g > 0.0) {
      hi = v;
    } else {
      lo = v;
    }
    const double dg = 1.0 + (c / eps) * (1.0 - th * th);
    double next = v - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - v) <= 1e-16 * target || next == v) {
      v = next;
      break;
    }
    v = next;
  }
  return std::copysign(v, v_star);
}

JointLimitModel JointLimitModel::make(const JointContext& ctx, const JointLimitHint& hint,
                                      const ReferenceMagnitudes& ref, double penetration_budget) {
  JointLimitModel m;
  m.q_min = ctx.q_min;
  m.q_max = ctx.q_max;
  m.stiffness = ref.f_ref / (penetration_budget * ctx.range());
  const double critical = 2.0 * std::sqrt(m.stiffness * ctx.inertia_eq);
  const bool low_hinted = hint.selected_side != LimitSide::kHighEnd;
  const bool high_hinted = hint.selected_side != LimitSide::kLowEnd;
  m.low_damping = critical * (low_hinted ? hint.damping_ratio : 1.0);
  m.high_damping = critical * (high_hinted ? hint.damping_ratio : 1.0);
  return m;
}

double JointLimitModel::force(double q, double v) const {
  if (q < q_min) return stiffness * (q_min - q) - low_damping * v;
  if (q > q_max) return -stiffness * (q - q_max) - high_damping * v;
  return 0.0;
}

double joint_limit_force(double q, double v, const JointContext& ctx, const JointLimitHint& hint) {
  const SimConfig defaults;
  return JointLimitModel::make(ctx, hint, reference_magnitudes(ctx),
                               defaults.limit_penetration_budget)
      .force(q, v);
}

Simulator::Simulator(ComposedField field, SimConfig cfg)
    : field_(std::move(field)), cfg_(cfg), ref_(reference_magnitudes(field_.joint)) {
  if (!(cfg_.dt > 0.0) || !std::isfinite(cfg_.dt)) {
    throw Error(ErrorCode::kValidation, "dt must be positive", "config.dt");
  }
  if (!(cfg_.interval_band > 0.0)) {
    throw Error(ErrorCode::kValidation, "interval_band must be positive", "config.interval_band");
  }
  if (!(cfg_.limit_penetration_budget > 0.0)) {
    throw Error(ErrorCode::kValidation, "limit_penetration_budget must be positive",
                "config.limit_penetration_budget");
  }
  eps_v_ = cfg_.eps_v > 0.0 ? cfg_.eps_v : ref_.v_ref * 1e-3;
  limits_ = JointLimitModel::make(field_.joint, field_.joint_limit, ref_,
                                  cfg_.limit_penetration_budget);
}

FieldSample Simulator::sample(double s) const {
  return cfg_.smooth_intervals ? field_eval_smooth(field_, s, cfg_.interval_band)
                               : field_eval(field_, s);
}

SimState Simulator::step(const SimState& state, double f_ext) const {
  const JointContext& joint = field_.joint;
  const double dt = cfg_.dt;
  const double inertia = joint.inertia_eq;
  const double s = std::clamp((state.q - joint.q_min) / joint.range(), 0.0, 1.0);
  const FieldSample fs = sample(s);
  const double gravity = joint.gravity_curve.eval(s);
  const double f_net = fs.conservative + gravity + f_ext + limits_.force(state.q, state.v);

  const double v_star = (state.v + dt * f_net / inertia) / (1.0 + dt * fs.damping / inertia);
  double v_next;
  if (cfg_.smooth_friction) {
    v_next = solve_smooth_friction(v_star, dt * fs.friction_max / inertia, eps_v_);
  } else {
    const double dv_max = dt * fs.friction_max / inertia;
    v_next = v_star - std::copysign(std::min(std::abs(v_star), dv_max), v_star);
  }
  SimState next{state.t + dt, state.q + dt * v_next, v_next};
  const double mid = 0.5 * (joint.q_min + joint.q_max);
  if (!std::isfinite(next.q) || !std::isfinite(next.v) ||
      std::abs(next.q - mid) > 1e3 * joint.range()) {
    throw Error(ErrorCode::kDiverged,
                "integration diverged at t=" + format_double(state.t) + " (q=" +
                    (std::isfinite(next.q) ? format_double(next.q) : std::string("non-finite")) +
                    ")");
  }
  return next;
}

SimState step(const SimState& state, const ComposedField& field, const SimConfig& cfg,
              double f_ext) {
  return Simulator(field, cfg).step(state, f_ext);
}

Trajectory rollout(const Simulator& sim, const SimState& start, const ForceSource& source,
                   std::size_t n_steps) {
  if (n_steps < 1) throw Error(ErrorCode::kValidation, "rollout needs at least one step");
  Trajectory traj;
  traj.dt = sim.config().dt;
  traj.samples.reserve(n_steps + 1);
  SimState state = start;
  for (std::size_t k = 0; k <= n_steps; ++k) {
    const ForceSample f = source ? source(state) : ForceSample{};
    traj.samples.push_back({state.t, state.q, state.v, f.f_ext, f.f_hand});
    if (k == n_steps) break;
    state = sim.step(state, f.f_ext + f.f_hand);
  }
  return traj;
}

Trajectory rollout(const SimState& start, const ComposedField& field, const SimConfig& cfg,
                   const ForceSource& source, std::size_t n_steps) {
  return rollout(Simulator(field, cfg), start, source, n_steps);
}

ForceSource constant_force(double f) {
  return [f](const SimState&) { return ForceSample{f, 0.0}; };
}

double interpolate_schedule(const std::vector<std::pair<double, double>>& points, double t) {
  if (points.empty()) return 0.0;
  if (t <= points.front().first) return points.front().second;
  if (t >= points.back().first) return points.back().second;
  const auto it = std::upper_bound(points.begin(), points.end(), t,
                                   [](double x, const auto& p) { return x < p.first; });
  const auto& [t1, y1] = *it;
  const auto& [t0, y0] = *(it - 1);
  if (t1 == t0) return y1;
  return y0 + (y1 - y0) * (t - t0) / (t1 - t0);
}

ForceSource scheduled_force(std::vector<std::pair<double, double>> points) {
  return [points = std::move(points)](const SimState& s) {
    return ForceSample{interpolate_schedule(points, s.t), 0.0};
  };
}

ForceSource replay_force(const Trajectory& traj) {
  auto forces = std::make_shared<std::vector<double>>();
  for (const auto& smp : traj.samples) forces->push_back(smp.f_ext + smp.f_hand);
  auto cursor = std::make_shared<std::size_t>(0);
  return [forces, cursor](const SimState&) {
    const std::size_t k = std::min(*cursor, forces->size() - 1);
    ++*cursor;
    return ForceSample{(*forces)[k], 0.0};
  };
}

HandController HandController::defaults(const JointContext& ctx, double initial_target) {
  const auto ref = reference_magnitudes(ctx);
  HandController h;
  h.target = initial_target;
  h.q_lo = ctx.q_min;
  h.q_hi = ctx.q_max;
  h.kp = 20.0 * ref.f_ref / ctx.range();
  h.kd = 2.0 * std::sqrt(h.kp * ctx.inertia_eq);
  h.force_cap = 3.0 * ref.f_ref;
  h.rate_limit = 2.0 * ref.v_ref;
  return h;
}

HandOutput hand_force(const HandController& h, const SimState& state, double dt, double command) {
  const double max_move = h.rate_limit * dt;
  double target = h.target + std::clamp(command - h.target, -max_move, max_move);
  target = std::clamp(target, h.q_lo, h.q_hi);
  const double force =
      std::clamp(h.kp * (target - state.q) - h.kd * state.v, -h.force_cap, h.force_cap);
  return {force, target};
}

ForceSource hand_driver(HandController hand, std::vector<std::pair<double, double>> command,
                        double dt) {
  auto h = std::make_shared<HandController>(hand);
  return [h, command = std::move(command), dt](const SimState& s) {
    const auto out = hand_force(*h, s, dt, interpolate_schedule(command, s.t));
    h->target = out.target;
    return ForceSample{0.0, out.force};
  };
}

BaselineKind baseline_kind_from_string(std::string_view name) {
  if (name == "constant" || name == "constant_drag") return BaselineKind::kConstantDrag;
  if (name == "spring" || name == "linear_spring") return BaselineKind::kLinearSpring;
  throw Error(ErrorCode::kUnknownKind, "unknown baseline kind \"" + std::string(name) +
                                           "\" (expected constant_drag or linear_spring)");
}

ComposedField make_baseline(BaselineKind kind, const JointContext& ctx, const BaselineParams& p) {
  ctx.validate();
  if (p.friction < 0.0 || p.damping < 0.0) {
    throw Error(ErrorCode::kValidation, "baseline friction and damping must be non-negative");
  }
  ComposedField f;
  f.joint = ctx;
  f.joint_limit = JointLimitHint::from_labels(LimitSide::kNone, Elasticity::kNone);
  f.meta = {{"mode", "baseline"},
            {"baseline", kind == BaselineKind::kConstantDrag ? "constant_drag" : "linear_spring"},
            {"asset_name", ctx.asset_name},
            {"joint_name", ctx.joint_name}};
  if (kind == BaselineKind::kLinearSpring) {
    if (p.spring_side == LimitSide::kNone) {
      throw Error(ErrorCode::kValidation, "linear spring baseline needs low_end or high_end");
    }
    const Template& t = find_template(p.spring_side == LimitSide::kLowEnd
                                          ? "spring_return_to_low_end"
                                          : "spring_return_to_high_end");
    if (p.peak != 0.0) {
      auto inst = template_instantiate(t, p.a, p.b, {p.peak, 0.0, 0.0});
      inst.component.provenance = {{"baseline", "linear_spring"}, {"peak", p.peak}};
      f.components.push_back(std::move(inst.component));
    }
  }
  if (p.friction > 0.0) {
    auto inst = template_instantiate(find_template("constant_friction_hinge"), 0.0, 1.0,
                                     {0.0, p.friction, 0.0});
    inst.component.provenance = {{"baseline", "constant_drag"}};
    f.components.push_back(std::move(inst.component));
  }
  if (p.damping > 0.0) {
    auto inst = template_instantiate(find_template("constant_damping_hinge"), 0.0, 1.0,
                                     {0.0, 0.0, p.damping});
    inst.component.provenance = {{"baseline", "constant_drag"}};
    f.components.push_back(std::move(inst.component));
  }
  f.validate();
  return f;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,q,v,f_ext,f_hand\n";
  for (const auto& s : traj.samples) {
    out << format_double(s.t) << ',' << format_double(s.q) << ',' << format_double(s.v) << ','
        << format_double(s.f_ext) << ',' << format_double(s.f_hand) << '\n';
  }
}

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream out;
  write_trajectory_csv(out, traj);
  return out.str();
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(ErrorCode::kValidation, "CSV is missing column \"" + std::string(name) + "\"");
}

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  const auto trim = [](std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  };
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (table.header.empty()) {
      for (auto c : cells) table.header.emplace_back(c);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw Error(ErrorCode::kValidation,
                  "CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                      " fields, expected " + std::to_string(table.header.size()));
    }
    std::vector<double> row;
    for (auto c : cells) {
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size()) {
        throw Error(ErrorCode::kValidation, "CSV line " + std::to_string(line_no) +
                                                ": not a number: \"" + std::string(c) + "\"");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw Error(ErrorCode::kValidation, "CSV is empty");
  return table;
}

Trajectory parse_trajectory_csv(std::string_view text) {
  const CsvTable table = parse_csv(text);
  const std::size_t ct = table.column("t"), cq = table.column("q");
  const auto optional_col = [&](std::string_view name) -> std::ptrdiff_t {
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      if (table.header[i] == name) return static_cast<std::ptrdiff_t>(i);
    }
    return -1;
  };
  const auto cv = optional_col("v"), cf = optional_col("f_ext"), ch = optional_col("f_hand");
  Trajectory traj;
  for (const auto& row : table.rows) {
    traj.samples.push_back({row[ct], row[cq], cv >= 0 ? row[cv] : 0.0, cf >= 0 ? row[cf] : 0.0,
                            ch >= 0 ? row[ch] : 0.0});
  }
  if (traj.samples.size() < 2) {
    throw Error(ErrorCode::kValidation, "trajectory needs at least two samples");
  }
  traj.dt = traj.samples[1].t - traj.samples[0].t;
  for (std::size_t k = 1; k < traj.samples.size(); ++k) {
    const double dt = traj.samples[k].t - traj.samples[k - 1].t;
    if (!(dt > 0.0) || std::abs(dt - traj.dt) > 1e-9 * std::max(1.0, traj.samples[k].t)) {
      throw Error(ErrorCode::kValidation,
                  "trajectory times must increase with a constant step (row " +
                      std::to_string(k + 1) + ")");
    }
  }
  return traj;
}

namespace {

std::vector<std::pair<double, double>> read_points(const nlohmann::json& j,
                                                   const std::string& path) {
  if (!j.is_array()) throw Error(ErrorCode::kValidation, path + ": expected [[t, value], ...]", path);
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& p = j[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw Error(ErrorCode::kValidation, path + ": expected [t, value] pairs",
                  path + "[" + std::to_string(i) + "]");
    }
    pts.emplace_back(p[0].get<double>(), p[1].get<double>());
    if (i > 0 && pts[i].first < pts[i - 1].first) {
      throw Error(ErrorCode::kValidation, path + ": times must be non-decreasing",
                  path + "[" + std::to_string(i) + "]");
    }
  }
  return pts;
}

double number_or(const nlohmann::json& j, std::string_view key, double fallback,
                 const std::string& path) {
  const auto it = j.find(std::string(key));
  if (it == j.end()) return fallback;
  if (!it->is_number()) {
    throw Error(ErrorCode::kValidation, path + "." + std::string(key) + ": expected a number",
                path + "." + std::string(key));
  }
  return it->get<double>();
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& j, const ComposedField& field) {
  if (!j.is_object()) throw Error(ErrorCode::kValidation, "scenario must be an object", "$");
  const JointContext& ctx = field.joint;
  Scenario sc;
  if (const auto it = j.find("config"); it != j.end()) {
    const auto& c = *it;
    sc.config.dt = number_or(c, "dt", sc.config.dt, "config");
    sc.config.eps_v = number_or(c, "eps_v", sc.config.eps_v, "config");
    sc.config.interval_band = number_or(c, "interval_band", sc.config.interval_band, "config");
    sc.config.limit_penetration_budget =
        number_or(c, "limit_penetration_budget", sc.config.limit_penetration_budget, "config");
    if (const auto sf = c.find("smooth_friction"); sf != c.end()) sc.config.smooth_friction = sf->get<bool>();
    if (const auto si = c.find("smooth_intervals"); si != c.end()) sc.config.smooth_intervals = si->get<bool>();
  }
  const auto init = j.find("initial");
  if (init == j.end() || !init->is_object()) {
    throw Error(ErrorCode::kValidation, "scenario needs an \"initial\" object", "initial");
  }
  if (init->contains("s")) {
    sc.initial.q = denormalize_s(number_or(*init, "s", 0.0, "initial"), ctx.q_min, ctx.q_max);
  } else {
    sc.initial.q = number_or(*init, "q", ctx.q_min, "initial");
  }
  sc.initial.v = number_or(*init, "v", 0.0, "initial");
  sc.initial.t = number_or(*init, "t", 0.0, "initial");
  const double steps = number_or(j, "steps", 0.0, "");
  if (!(steps >= 1.0) || steps != std::floor(steps)) {
    throw Error(ErrorCode::kValidation, "steps must be a positive integer", "steps");
  }
  sc.steps = static_cast<std::size_t>(steps);
  if (const auto f = j.find("force"); f != j.end() && !f->is_null()) {
    if (f->contains("constant")) {
      sc.force_schedule = {{0.0, number_or(*f, "constant", 0.0, "force")}};
    } else if (f->contains("schedule")) {
      sc.force_schedule = read_points(f->at("schedule"), "force.schedule");
    } else {
      throw Error(ErrorCode::kValidation, "force needs \"constant\" or \"schedule\"", "force");
    }
  }
  if (const auto h = j.find("hand"); h != j.end() && !h->is_null()) {
    sc.has_hand = true;
    sc.hand = HandController::defaults(ctx, sc.initial.q);
    if (h->contains("command")) {
      sc.hand_command = read_points(h->at("command"), "hand.command");
    } else if (h->contains("command_s")) {
      sc.hand_command = read_points(h->at("command_s"), "hand.command_s");
      for (auto& [t, s] : sc.hand_command) s = denormalize_s(s, ctx.q_min, ctx.q_max);
    } else {
      throw Error(ErrorCode::kValidation, "hand needs \"command\" or \"command_s\"", "hand");
    }
    sc.hand.kp = number_or(*h, "kp", sc.hand.kp, "hand");
    sc.hand.kd = number_or(*h, "kd", sc.hand.kd, "hand");
    sc.hand.force_cap = number_or(*h, "f_max", sc.hand.force_cap, "hand");
    sc.hand.rate_limit = number_or(*h, "rate", sc.hand.rate_limit, "hand");
    if (!(sc.hand.kp > 0.0 && sc.hand.kd > 0.0 && sc.hand.force_cap > 0.0 &&
          sc.hand.rate_limit > 0.0)) {
      throw Error(ErrorCode::kValidation, "hand gains, cap, and rate must be positive", "hand");
    }
  }
  return sc;
}

Trajectory run_scenario(const ComposedField& field, const Scenario& sc) {
  const Simulator sim(field, sc.config);
  ForceSource schedule = scheduled_force(sc.force_schedule);
  if (!sc.has_hand) return rollout(sim, sc.initial, schedule, sc.steps);
  ForceSource hand = hand_driver(sc.hand, sc.hand_command, sc.config.dt);
  return rollout(sim, sc.initial,
                 [schedule, hand](const SimState& s) {
                   return ForceSample{schedule(s).f_ext, hand(s).f_hand};
                 },
                 sc.steps);
}

}  // namespace joda
