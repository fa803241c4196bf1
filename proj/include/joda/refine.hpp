#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "joda/field.hpp"
#include "joda/sim.hpp"

namespace joda {

/// Flat, optimizable view of a ComposedField.
///
/// Layout per component, in order: conservative knots (value / F_ref),
/// damping knots (log(value / C_ref), strictly positive knots only), one
/// log-scale per present channel, then anchors a and b. A trailing entry holds
/// log(joint-limit damping ratio). Friction knots are reachable only through
/// their channel log-scale.
class ParamSet {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  struct Slots {
    std::size_t conservative = npos;              // first of curve.size() entries
    std::vector<std::size_t> damping;             // per knot; npos for fixed zero knots
    ChannelArray<std::size_t> log_scale = {npos, npos, npos};
    std::size_t a = npos;
    std::size_t b = npos;
  };

  static ParamSet pack(const ComposedField& field);
  ComposedField unpack() const;

  const ComposedField& base() const { return base_; }
  const std::vector<Slots>& slots() const { return slots_; }
  std::size_t limit_slot() const { return limit_slot_; }
  double f_ref() const { return f_ref_; }
  double c_ref() const { return c_ref_; }

  std::vector<double> values;
  std::vector<bool> mask;
  std::vector<std::string> names;

  std::size_t size() const { return values.size(); }
  std::size_t active_count() const;

  /// Comma-separated groups or exact names: conservative, damping, scales,
  /// friction, anchors, limit, all. Replaces the current mask.
  void set_mask(std::string_view spec);

 private:
  ComposedField base_;
  std::vector<Slots> slots_;
  std::size_t limit_slot_ = npos;
  double f_ref_ = 1.0;
  double c_ref_ = 1.0;
};

struct RefineConfig {
  SimConfig sim = SimConfig::differentiable();
  /// Worker threads for per-target rollouts; 0 picks the hardware count.
  unsigned threads = 1;
  double diverged_loss = 1e6;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // full length; zero on masked-off entries
  bool diverged = false;
};

/// Mean over targets and steps k >= 1 of ((q_sim - q_target) / range)^2.
/// Each target is replayed open-loop from its first sample with its recorded
/// f_ext + f_hand.
LossResult evaluate_loss(const ParamSet& params, const std::vector<Trajectory>& targets,
                         const RefineConfig& cfg, bool with_grad);

double trajectory_loss(const ParamSet& params, const std::vector<Trajectory>& targets,
                       const RefineConfig& cfg = {});
std::vector<double> loss_grad(const ParamSet& params, const std::vector<Trajectory>& targets,
                              const RefineConfig& cfg = {});

/// Order-independent (pairwise) reduction.
double pairwise_sum(const double* values, std::size_t n);

struct AdamConfig {
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double anchor_margin = 0.01;
};

struct AdamState {
  std::size_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

/// One Adam update of the active entries followed by anchor projection.
void adam_update(ParamSet& params, AdamState& state, const std::vector<double>& grad,
                 const AdamConfig& cfg);

struct OptimizeResult {
  ParamSet best;
  ParamSet last;
  /// history[0] is the initial loss; history[i] the loss after update i.
  std::vector<double> history;
  std::size_t best_iteration = 0;
  bool diverged = false;
  double wall_seconds = 0.0;
};

OptimizeResult optimize(const ParamSet& initial, const std::vector<Trajectory>& targets,
                        std::size_t n_iters, const RefineConfig& cfg = {},
                        const AdamConfig& adam = {});

nlohmann::json optimize_report(const ParamSet& initial, const OptimizeResult& result,
                               const AdamConfig& adam);

}  // namespace joda
