#include "joda/refine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "joda/compiler.hpp"
#include "joda/error.hpp"

namespace joda {
namespace {

bool in_group(std::string_view group, std::string_view name) {
  const auto has = [&](std::string_view part) { return name.find(part) != std::string_view::npos; };
  if (group == "all") return true;
  if (group == "conservative") return has(".conservative.ys[");
  if (group == "damping") return has(".damping.log_ys[");
  if (group == "scales") return has(".log_scale");
  if (group == "friction") return has(".friction.log_scale");
  if (group == "anchors") return name.ends_with(".a") || name.ends_with(".b");
  if (group == "limit") return name.starts_with("joint_limit.");
  return name == group;
}

// Local geometry of one component at s: indicator weight, local coordinate,
// and their partials.
struct Local {
  IndicatorGrad w;
  double u = 0.0;
  double du_ds = 0.0, du_da = 0.0, du_db = 0.0;
};

Local local_at(const EffectComponent& c, double s, double band) {
  Local l;
  l.w = smooth_indicator_grad(s, c.a, c.b, band);
  const double len = c.b - c.a;
  const double raw = (s - c.a) / len;
  l.u = std::clamp(raw, 0.0, 1.0);
  if (raw > 0.0 && raw < 1.0) {
    l.du_ds = 1.0 / len;
    l.du_da = (raw - 1.0) / len;
    l.du_db = -raw / len;
  }
  return l;
}

struct StepRecord {
  double q, v;     // state at the start of the step
  double force;    // applied external force
  double v_next;
};

// Per-target scratch for the backward pass.
class Adjoint {
 public:
  Adjoint(const ParamSet& p, const Simulator& sim, std::vector<double>& grad)
      : p_(p), sim_(sim), f_(sim.field()), grad_(grad) {
    std::size_t max_knots = 0;
    for (const auto& c : f_.components) {
      for (const auto& curve : c.curves) {
        if (curve) max_knots = std::max(max_knots, curve->size());
      }
    }
    knot_scratch_.assign(max_knots, 0.0);
  }

  // Propagates (q_bar', v_bar') of the next state back through one step.
  void step_back(const StepRecord& r, double& q_bar, double& v_bar) {
    const JointContext& joint = f_.joint;
    const SimConfig& cfg = sim_.config();
    const double h = cfg.dt;
    const double inertia = joint.inertia_eq;
    const double band = cfg.interval_band;
    const double range = joint.range();
    const double raw_s = (r.q - joint.q_min) / range;
    const double s = std::clamp(raw_s, 0.0, 1.0);
    const double ds_dq = (raw_s > 0.0 && raw_s < 1.0) ? 1.0 / range : 0.0;

    // Forward quantities needed for local partials.
    const FieldSample fs = sim_.sample(s);
    const JointLimitModel& lim = sim_.limits();
    const double f_net = fs.conservative + joint.gravity_curve.eval(s) + r.force +
                         lim.force(r.q, r.v);
    const double beta = 1.0 / (1.0 + h * fs.damping / inertia);
    const double v_star = (r.v + h * f_net / inertia) * beta;
    const double eps = sim_.eps_v();
    const double c = h * fs.friction_max / inertia;
    const double th = std::tanh(r.v_next / eps);
    const double gamma = 1.0 / (1.0 + (c / eps) * (1.0 - th * th));

    // q' = q + h v'
    const double vn_bar = v_bar + h * q_bar;
    // v' = solve(v*, c)
    const double vstar_bar = gamma * vn_bar;
    const double c_bar = -th * gamma * vn_bar;
    const double ff_bar = (h / inertia) * c_bar;
    // v* = (v + h F / I) / (1 + h Cd / I)
    const double fnet_bar = (h / inertia) * beta * vstar_bar;
    const double cd_bar = -v_star * (h / inertia) * beta * vstar_bar;
    double new_v_bar = beta * vstar_bar;
    double new_q_bar = q_bar;

    // Joint limits.
    if (r.q < lim.q_min || r.q > lim.q_max) {
      const bool low = r.q < lim.q_min;
      const double damping = low ? lim.low_damping : lim.high_damping;
      new_q_bar += -lim.stiffness * fnet_bar;
      new_v_bar += -damping * fnet_bar;
      const LimitSide side = f_.joint_limit.selected_side;
      const bool hinted = low ? side != LimitSide::kHighEnd : side != LimitSide::kLowEnd;
      if (hinted && p_.limit_slot() != ParamSet::npos) {
        grad_[p_.limit_slot()] += -damping * r.v * fnet_bar;
      }
    }

    double s_bar = fnet_bar * joint.gravity_curve.eval_dx(s);
    s_bar += field_back(s, band, fnet_bar, fs.friction_max > 0.0 ? ff_bar : 0.0,
                        fs.damping > 0.0 ? cd_bar : 0.0);
    new_q_bar += s_bar * ds_dq;
    q_bar = new_q_bar;
    v_bar = new_v_bar;
  }

 private:
  // Accumulates parameter adjoints of the three channel values at s and
  // returns the adjoint of s.
  double field_back(double s, double band, double fc_bar, double ff_bar, double cd_bar) {
    double s_bar = 0.0;
    // Friction: only the component attaining the maximum receives gradient.
    std::size_t arg_max = ParamSet::npos;
    if (ff_bar != 0.0) {
      double best = 0.0;
      for (std::size_t j = 0; j < f_.components.size(); ++j) {
        const auto& c = f_.components[j];
        const auto& curve = c.curve(Channel::kFrictionMax);
        if (!curve) continue;
        const double w = smooth_indicator(s, c.a, c.b, band);
        if (w == 0.0) continue;
        const double val = w * curve->eval(std::clamp((s - c.a) / (c.b - c.a), 0.0, 1.0));
        if (val > best) {
          best = val;
          arg_max = j;
        }
      }
    }
    for (std::size_t j = 0; j < f_.components.size(); ++j) {
      const auto& comp = f_.components[j];
      const auto& slots = p_.slots()[j];
      const Local l = local_at(comp, s, band);
      if (l.w.value == 0.0 && l.w.ds == 0.0) continue;
      for (Channel ch : kAllChannels) {
        const auto& curve = comp.curve(ch);
        if (!curve) continue;
        double seed = 0.0;
        if (ch == Channel::kConservative) seed = fc_bar;
        if (ch == Channel::kDamping) seed = cd_bar;
        if (ch == Channel::kFrictionMax && j == arg_max) seed = ff_bar;
        if (seed == 0.0) continue;
        const double val = curve->eval(l.u);
        const double slope = curve->eval_dx(l.u);
        s_bar += seed * (l.w.ds * val + l.w.value * slope * l.du_ds);
        if (slots.a != ParamSet::npos) {
          grad_[slots.a] += seed * (l.w.da * val + l.w.value * slope * l.du_da);
          grad_[slots.b] += seed * (l.w.db * val + l.w.value * slope * l.du_db);
        }
        if (slots.log_scale[index(ch)] != ParamSet::npos) {
          grad_[slots.log_scale[index(ch)]] += seed * l.w.value * val;
        }
        if (ch == Channel::kConservative && slots.conservative != ParamSet::npos) {
          // y_k = f_ref * p_k * scale
          const double scale = std::exp(p_.values[slots.log_scale[index(ch)]]);
          std::span<double> scratch(knot_scratch_.data(), curve->size());
          std::fill(scratch.begin(), scratch.end(), 0.0);
          curve->accumulate_grad_y(l.u, seed * l.w.value * p_.f_ref() * scale, scratch);
          for (std::size_t k = 0; k < scratch.size(); ++k) grad_[slots.conservative + k] += scratch[k];
        }
        if (ch == Channel::kDamping && !slots.damping.empty()) {
          // y_k = c_ref * exp(p_k) * scale, so dy_k/dp_k = y_k.
          std::span<double> scratch(knot_scratch_.data(), curve->size());
          std::fill(scratch.begin(), scratch.end(), 0.0);
          curve->accumulate_grad_y(l.u, seed * l.w.value, scratch);
          const auto ys = curve->ys();
          for (std::size_t k = 0; k < scratch.size(); ++k) {
            if (slots.damping[k] != ParamSet::npos) grad_[slots.damping[k]] += scratch[k] * ys[k];
          }
        }
      }
    }
    return s_bar;
  }

  const ParamSet& p_;
  const Simulator& sim_;
  const ComposedField& f_;
  std::vector<double>& grad_;
  std::vector<double> knot_scratch_;
};

struct TargetResult {
  double sq_sum = 0.0;
  std::size_t count = 0;
  std::vector<double> grad;  // gradient of sq_sum
  bool diverged = false;
};

TargetResult eval_target(const ParamSet& params, const Simulator& sim, const Trajectory& target,
                         bool with_grad, double total_count) {
  TargetResult out;
  const std::size_t n = target.samples.size() - 1;
  out.count = n;
  std::vector<StepRecord> records(n);
  std::vector<double> q_sim(n + 1);
  SimState state = target.initial_state();
  q_sim[0] = state.q;
  try {
    for (std::size_t k = 0; k < n; ++k) {
      const double force = target.samples[k].f_ext + target.samples[k].f_hand;
      const SimState next = sim.step(state, force);
      records[k] = {state.q, state.v, force, next.v};
      state = next;
      q_sim[k + 1] = state.q;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDiverged) throw;
    out.diverged = true;
    return out;
  }
  const double range = sim.field().joint.range();
  std::vector<double> residual(n);
  for (std::size_t k = 1; k <= n; ++k) {
    const double r = (q_sim[k] - target.samples[k].q) / range;
    residual[k - 1] = r * r;
  }
  out.sq_sum = pairwise_sum(residual.data(), n);
  if (!with_grad) return out;

  out.grad.assign(params.size(), 0.0);
  Adjoint adj(params, sim, out.grad);
  double q_bar = 0.0, v_bar = 0.0;
  for (std::size_t k = n; k >= 1; --k) {
    q_bar += 2.0 * (q_sim[k] - target.samples[k].q) / (range * range) / total_count;
    adj.step_back(records[k - 1], q_bar, v_bar);
  }
  // grad is of sq_sum / total_count; rescale to sq_sum for uniform reduction.
  for (double& g : out.grad) g *= total_count;
  return out;
}

void validate_targets(const std::vector<Trajectory>& targets) {
  if (targets.empty()) throw Error(ErrorCode::kValidation, "at least one target is required");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].samples.size() < 2) {
      throw Error(ErrorCode::kValidation,
                  "target " + std::to_string(i) + " needs at least two samples");
    }
  }
}

}  // namespace

double pairwise_sum(const double* values, std::size_t n) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

ParamSet ParamSet::pack(const ComposedField& field) {
  field.validate();
  ParamSet p;
  p.base_ = field;
  const ReferenceMagnitudes ref = reference_magnitudes(field.joint);
  p.f_ref_ = ref.f_ref;
  p.c_ref_ = ref.c_ref;
  const auto add = [&p](std::string name, double value) {
    p.values.push_back(value);
    p.names.push_back(std::move(name));
    return p.values.size() - 1;
  };
  for (std::size_t j = 0; j < field.components.size(); ++j) {
    const auto& c = field.components[j];
    const std::string prefix = "components[" + std::to_string(j) + "].";
    Slots slots;
    if (const auto& cc = c.curve(Channel::kConservative)) {
      slots.conservative = p.values.size();
      for (std::size_t k = 0; k < cc->size(); ++k) {
        add(prefix + "conservative.ys[" + std::to_string(k) + "]", cc->ys()[k] / p.f_ref_);
      }
    }
    if (const auto& cd = c.curve(Channel::kDamping)) {
      for (std::size_t k = 0; k < cd->size(); ++k) {
        const double y = cd->ys()[k];
        slots.damping.push_back(
            y > 0.0 ? add(prefix + "damping.log_ys[" + std::to_string(k) + "]", std::log(y / p.c_ref_))
                    : npos);
      }
    }
    for (Channel ch : kAllChannels) {
      if (c.curve(ch)) {
        slots.log_scale[index(ch)] = add(prefix + std::string(to_string(ch)) + ".log_scale", 0.0);
      }
    }
    slots.a = add(prefix + "a", c.a);
    slots.b = add(prefix + "b", c.b);
    p.slots_.push_back(std::move(slots));
  }
  p.limit_slot_ = add("joint_limit.log_damping_ratio", std::log(field.joint_limit.damping_ratio));
  p.mask.assign(p.values.size(), true);
  return p;
}

ComposedField ParamSet::unpack() const {
  ComposedField f = base_;
  for (std::size_t j = 0; j < f.components.size(); ++j) {
    auto& c = f.components[j];
    const Slots& slots = slots_[j];
    for (Channel ch : kAllChannels) {
      auto& curve = c.curve(ch);
      if (!curve) continue;
      const double scale = std::exp(values[slots.log_scale[index(ch)]]);
      std::vector<double> ys(curve->ys().begin(), curve->ys().end());
      if (ch == Channel::kConservative) {
        for (std::size_t k = 0; k < ys.size(); ++k) ys[k] = values[slots.conservative + k] * f_ref_;
      } else if (ch == Channel::kDamping) {
        for (std::size_t k = 0; k < ys.size(); ++k) {
          if (slots.damping[k] != npos) ys[k] = c_ref_ * std::exp(values[slots.damping[k]]);
        }
      }
      if (scale != 1.0) {
        for (double& y : ys) y *= scale;
      }
      curve = curve->with_ys(std::move(ys));
    }
    c.a = values[slots.a];
    c.b = values[slots.b];
  }
  f.joint_limit.damping_ratio = std::exp(values[limit_slot_]);
  return f;
}

std::size_t ParamSet::active_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

void ParamSet::set_mask(std::string_view spec) {
  std::fill(mask.begin(), mask.end(), false);
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t comma = std::min(spec.find(',', start), spec.size());
    std::string_view group = spec.substr(start, comma - start);
    while (!group.empty() && group.front() == ' ') group.remove_prefix(1);
    while (!group.empty() && group.back() == ' ') group.remove_suffix(1);
    start = comma + 1;
    if (group.empty()) continue;
    bool matched = false;
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (in_group(group, names[i])) {
        mask[i] = true;
        matched = true;
      }
    }
    if (!matched) {
      throw Error(ErrorCode::kValidation,
                  "parameter selector \"" + std::string(group) +
                      "\" matches nothing (groups: conservative, damping, scales, friction, "
                      "anchors, limit, all)",
                  "params");
    }
  }
}

LossResult evaluate_loss(const ParamSet& params, const std::vector<Trajectory>& targets,
                         const RefineConfig& cfg, bool with_grad) {
  validate_targets(targets);
  const Simulator sim(params.unpack(), cfg.sim);
  double total_count = 0.0;
  for (const auto& t : targets) total_count += static_cast<double>(t.samples.size() - 1);

  std::vector<TargetResult> results(targets.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers =
      std::min<unsigned>(cfg.threads == 0 ? hw : cfg.threads, static_cast<unsigned>(targets.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      results[i] = eval_target(params, sim, targets[i], with_grad, total_count);
    }
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < targets.size(); i += workers) {
            results[i] = eval_target(params, sim, targets[i], with_grad, total_count);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  LossResult out;
  for (const auto& r : results) out.diverged = out.diverged || r.diverged;
  if (out.diverged) {
    out.loss = cfg.diverged_loss;
    if (with_grad) out.grad.assign(params.size(), 0.0);
    return out;
  }
  std::vector<double> partial(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) partial[i] = results[i].sq_sum;
  out.loss = pairwise_sum(partial.data(), partial.size()) / total_count;
  if (with_grad) {
    out.grad.assign(params.size(), 0.0);
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (!params.mask[p]) continue;
      for (std::size_t i = 0; i < results.size(); ++i) partial[i] = results[i].grad[p];
      out.grad[p] = pairwise_sum(partial.data(), partial.size()) / total_count;
    }
  }
  return out;
}

double trajectory_loss(const ParamSet& params, const std::vector<Trajectory>& targets,
                       const RefineConfig& cfg) {
  return evaluate_loss(params, targets, cfg, false).loss;
}

std::vector<double> loss_grad(const ParamSet& params, const std::vector<Trajectory>& targets,
                              const RefineConfig& cfg) {
  return evaluate_loss(params, targets, cfg, true).grad;
}

void adam_update(ParamSet& params, AdamState& state, const std::vector<double>& grad,
                 const AdamConfig& cfg) {
  const std::size_t n = params.size();
  if (state.m.size() != n) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    if (!params.mask[i]) continue;
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params.values[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
  // Keep every interval inside [0,1] with b - a >= margin. Masked-off anchors
  // never move.
  const double margin = cfg.anchor_margin;
  for (const auto& slots : params.slots()) {
    double& a = params.values[slots.a];
    double& b = params.values[slots.b];
    const bool a_on = params.mask[slots.a], b_on = params.mask[slots.b];
    if (a_on) a = std::clamp(a, 0.0, 1.0 - margin);
    if (b_on) b = std::clamp(b, margin, 1.0);
    if (b - a < margin) {
      if (a_on && b_on) {
        const double mid = std::clamp(0.5 * (a + b), 0.5 * margin, 1.0 - 0.5 * margin);
        a = mid - 0.5 * margin;
        b = mid + 0.5 * margin;
      } else if (a_on) {
        a = b - margin;
      } else if (b_on) {
        b = a + margin;
      }
    }
  }
}

OptimizeResult optimize(const ParamSet& initial, const std::vector<Trajectory>& targets,
                        std::size_t n_iters, const RefineConfig& cfg, const AdamConfig& adam) {
  if (n_iters < 1) throw Error(ErrorCode::kValidation, "n_iters must be at least 1", "iters");
  const auto t0 = std::chrono::steady_clock::now();
  OptimizeResult out{initial, initial, {}, 0, false, 0.0};
  AdamState state;
  ParamSet current = initial;
  LossResult lr = evaluate_loss(current, targets, cfg, true);
  out.history.push_back(lr.loss);
  out.diverged = lr.diverged;
  double best = lr.loss;
  for (std::size_t it = 1; it <= n_iters; ++it) {
    adam_update(current, state, lr.grad, adam);
    lr = evaluate_loss(current, targets, cfg, it < n_iters);
    out.history.push_back(lr.loss);
    out.diverged = out.diverged || lr.diverged;
    if (lr.loss < best) {
      best = lr.loss;
      out.best = current;
      out.best_iteration = it;
    }
  }
  out.last = current;
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

nlohmann::json optimize_report(const ParamSet& initial, const OptimizeResult& result,
                               const AdamConfig& adam) {
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t i = 0; i < initial.size(); ++i) {
    if (!initial.mask[i]) continue;
    params.push_back({{"name", initial.names[i]},
                      {"initial", initial.values[i]},
                      {"final", result.best.values[i]},
                      {"delta", result.best.values[i] - initial.values[i]}});
  }
  return {{"loss_history", result.history},
          {"initial_loss", result.history.front()},
          {"best_loss", result.history[result.best_iteration]},
          {"best_iteration", result.best_iteration},
          {"iterations", result.history.size() - 1},
          {"diverged", result.diverged},
          {"adam", {{"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}}},
          {"parameters", params},
          {"wall_time_s", result.wall_seconds}};
}

}  // namespace joda
