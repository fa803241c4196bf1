#include "joda/diag.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "joda/canonical_json.hpp"
#include "joda/error.hpp"

namespace joda {
namespace {

// Fixed two-decimal coordinates keep the SVG byte-stable.
std::string fix2(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
  std::string out(buf, res.ptr);
  if (out == "-0.00") out = "0.00";
  return out;
}

std::string tick_label(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 4);
  std::string out(buf, res.ptr);
  if (out == "-0") out = "0";
  return out;
}

double net_rest_force(const ComposedField& field, double s) {
  return field_eval(field, s).conservative + field.joint.gravity_curve.eval(s);
}

}  // namespace

std::string_view to_string(Stability s) { return s == Stability::kStable ? "stable" : "unstable"; }

ProfileGrid profile_grid(const ComposedField& field, std::size_t n_points) {
  if (n_points < 2) throw Error(ErrorCode::kValidation, "profile grid needs at least 2 points");
  ProfileGrid g;
  g.q_min = field.joint.q_min;
  g.q_max = field.joint.q_max;
  g.joint_type = field.joint.joint_type;
  const std::size_t last = n_points - 1;
  for (std::size_t i = 0; i < n_points; ++i) {
    const double s = i == last ? 1.0 : static_cast<double>(i) / static_cast<double>(last);
    const FieldSample fs = field_eval(field, s);
    const double balance = -field.joint.gravity_curve.eval(s);
    g.s.push_back(s);
    g.f_cons.push_back(fs.conservative);
    g.f_fric_max.push_back(fs.friction_max);
    g.c_damp.push_back(fs.damping);
    g.gravity_balance.push_back(balance);
    g.band_lo.push_back(balance - fs.friction_max);
    g.band_hi.push_back(balance + fs.friction_max);
  }
  return g;
}

std::string profile_csv(const ProfileGrid& g) {
  std::string out = "s,f_cons,f_fric_max,c_damp,gravity_balance,band_lo,band_hi\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (double v : {g.s[i], g.f_cons[i], g.f_fric_max[i], g.c_damp[i], g.gravity_balance[i],
                     g.band_lo[i], g.band_hi[i]}) {
      out += format_double(v);
      out += ',';
    }
    out.back() = '\n';
  }
  return out;
}

std::vector<SInterval> stick_regions(const ProfileGrid& g) {
  // margin >= 0 exactly where friction can hold the joint at rest.
  std::vector<double> margin(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    margin[i] = g.f_fric_max[i] - std::abs(g.f_cons[i] - g.gravity_balance[i]);
  }
  const auto crossing = [&](std::size_t i) {
    const double m0 = margin[i], m1 = margin[i + 1];
    return g.s[i] + (g.s[i + 1] - g.s[i]) * m0 / (m0 - m1);
  };
  std::vector<SInterval> out;
  bool open = false;
  double start = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool inside = margin[i] >= 0.0;
    if (inside && !open) {
      open = true;
      start = i == 0 ? g.s[0] : crossing(i - 1);
    } else if (!inside && open) {
      open = false;
      out.push_back({start, crossing(i - 1)});
    }
  }
  if (open) out.push_back({start, g.s.back()});
  std::erase_if(out, [](const SInterval& r) { return !(r.hi > r.lo); });
  return out;
}

std::vector<Equilibrium> equilibria(const ProfileGrid& g, const ComposedField& field) {
  std::vector<double> r(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) r[i] = g.f_cons[i] - g.gravity_balance[i];
  std::vector<Equilibrium> out;
  const auto classify = [&](double s, bool falling) {
    const double slope =
        field_conservative_ds(field, s) + field.joint.gravity_curve.eval_dx(s);
    Stability st = slope < 0.0 ? Stability::kStable : Stability::kUnstable;
    // A jump between components can straddle zero; fall back to the crossing
    // direction when the local slope disagrees with it.
    if (slope == 0.0 || (slope < 0.0) != falling) {
      st = falling ? Stability::kStable : Stability::kUnstable;
    }
    out.push_back({s, st, slope});
  };
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    if (r[i] == 0.0) {
      // Isolated grid zero between strictly opposite neighbours; flat runs are skipped.
      if (i > 0 && r[i - 1] * r[i + 1] < 0.0) classify(g.s[i], r[i - 1] > 0.0);
      continue;
    }
    if (r[i] * r[i + 1] >= 0.0) continue;
    double lo = g.s[i], hi = g.s[i + 1];
    const bool lo_positive = r[i] > 0.0;
    while (hi - lo > 1e-9) {
      const double mid = 0.5 * (lo + hi);
      const double rm = net_rest_force(field, mid);
      if (rm == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((rm > 0.0) == lo_positive) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    classify(0.5 * (lo + hi), lo_positive);
  }
  return out;
}

std::vector<double> quasi_static_open_force(const ComposedField& field, const ProfileGrid& g,
                                            bool opening_increases_q) {
  (void)field;
  std::vector<double> out(g.size());
  const double dir = opening_increases_q ? 1.0 : -1.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    // gravity = -gravity_balance
    out[i] = dir * (-g.f_cons[i] + g.gravity_balance[i]) + g.f_fric_max[i];
  }
  return out;
}

std::vector<double> normalize_unit(std::span<const double> ys) {
  std::vector<double> out(ys.size(), 0.0);
  if (ys.empty()) return out;
  const auto [lo, hi] = std::minmax_element(ys.begin(), ys.end());
  const double span = *hi - *lo;
  if (span == 0.0) return out;
  for (std::size_t i = 0; i < ys.size(); ++i) out[i] = (ys[i] - *lo) / span;
  return out;
}

std::vector<double> resample_linear(std::span<const double> xs, std::span<const double> ys,
                                    std::span<const double> new_xs) {
  if (xs.size() != ys.size() || xs.empty()) {
    throw Error(ErrorCode::kValidation, "resample needs matching, non-empty arrays");
  }
  std::vector<double> out;
  out.reserve(new_xs.size());
  for (double x : new_xs) {
    if (x <= xs.front()) {
      out.push_back(ys.front());
      continue;
    }
    if (x >= xs.back()) {
      out.push_back(ys.back());
      continue;
    }
    const std::size_t k = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
    const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    out.push_back(ys[k - 1] + t * (ys[k] - ys[k - 1]));
  }
  return out;
}

std::string render_svg(const ProfileGrid& g, const ComposedField& field, const SvgOptions& opt) {
  constexpr double kWidth = 640, kHeight = 400;
  constexpr double kLeft = 72, kRight = 24, kTop = 32, kBottom = 52;
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;

  double y_lo = 0.0, y_hi = 0.0;
  for (const auto* arr : {&g.f_cons, &g.band_lo, &g.band_hi, &g.gravity_balance}) {
    for (double v : *arr) {
      y_lo = std::min(y_lo, v);
      y_hi = std::max(y_hi, v);
    }
  }
  if (y_hi - y_lo <= 0.0) {
    y_lo = -1.0;
    y_hi = 1.0;
  }
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;
  const auto px = [&](double s) { return kLeft + s * plot_w; };
  const auto py = [&](double v) { return kTop + (y_hi - v) / (y_hi - y_lo) * plot_h; };
  const auto point = [&](double s, double v) { return fix2(px(s)) + "," + fix2(py(v)); };

  const bool revolute = g.joint_type == JointType::kRevolute;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opt.title.empty()) {
    svg << "<text x=\"" << fix2(kWidth / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">"
        << opt.title << "</text>\n";
  }

  if (opt.shade_stick_regions) {
    for (const auto& r : stick_regions(g)) {
      svg << "<rect class=\"stick\" x=\"" << fix2(px(r.lo)) << "\" y=\"" << fix2(kTop) << "\" width=\""
          << fix2(px(r.hi) - px(r.lo)) << "\" height=\"" << fix2(plot_h)
          << "\" fill=\"#bdbdbd\" fill-opacity=\"0.35\"/>\n";
    }
  }

  // Friction band.
  svg << "<polygon class=\"friction-band\" fill=\"#9ecae1\" fill-opacity=\"0.45\" stroke=\"none\" points=\"";
  for (std::size_t i = 0; i < g.size(); ++i) svg << (i ? " " : "") << point(g.s[i], g.band_hi[i]);
  for (std::size_t i = g.size(); i-- > 0;) svg << ' ' << point(g.s[i], g.band_lo[i]);
  svg << "\"/>\n";

  // Axes, zero line, ticks.
  svg << "<g stroke=\"#333\" stroke-width=\"1\">\n";
  svg << "<line x1=\"" << fix2(kLeft) << "\" y1=\"" << fix2(kTop + plot_h) << "\" x2=\"" << fix2(kLeft + plot_w)
      << "\" y2=\"" << fix2(kTop + plot_h) << "\"/>\n";
  svg << "<line x1=\"" << fix2(kLeft) << "\" y1=\"" << fix2(kTop) << "\" x2=\"" << fix2(kLeft) << "\" y2=\""
      << fix2(kTop + plot_h) << "\"/>\n";
  svg << "</g>\n";
  if (y_lo < 0.0 && y_hi > 0.0) {
    svg << "<line class=\"zero\" x1=\"" << fix2(kLeft) << "\" y1=\"" << fix2(py(0.0)) << "\" x2=\""
        << fix2(kLeft + plot_w) << "\" y2=\"" << fix2(py(0.0)) << "\" stroke=\"#999\" stroke-width=\"0.5\"/>\n";
  }
  svg << "<g fill=\"#333\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double s = k / 4.0;
    const double q = g.q_min + s * (g.q_max - g.q_min);
    svg << "<text x=\"" << fix2(px(s)) << "\" y=\"" << fix2(kTop + plot_h + 16)
        << "\" text-anchor=\"middle\">" << tick_label(q) << "</text>\n";
    const double v = y_lo + (y_hi - y_lo) * k / 4.0;
    svg << "<text x=\"" << fix2(kLeft - 6) << "\" y=\"" << fix2(py(v) + 4) << "\" text-anchor=\"end\">"
        << tick_label(v) << "</text>\n";
  }
  svg << "<text x=\"" << fix2(kLeft + plot_w / 2) << "\" y=\"" << fix2(kHeight - 12)
      << "\" text-anchor=\"middle\">" << (revolute ? "q [rad]" : "q [m]") << "</text>\n";
  svg << "<text transform=\"translate(16," << fix2(kTop + plot_h / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << (revolute ? "torque [N m]" : "force [N]")
      << "</text>\n";
  svg << "</g>\n";

  svg << "<polyline class=\"gravity-balance\" fill=\"none\" stroke=\"#1f4fd1\" stroke-width=\"1.5\" "
         "stroke-dasharray=\"6 4\" points=\"";
  for (std::size_t i = 0; i < g.size(); ++i) svg << (i ? " " : "") << point(g.s[i], g.gravity_balance[i]);
  svg << "\"/>\n";
  svg << "<polyline class=\"conservative\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < g.size(); ++i) svg << (i ? " " : "") << point(g.s[i], g.f_cons[i]);
  svg << "\"/>\n";

  if (opt.annotate_equilibria) {
    for (const auto& e : equilibria(g, field)) {
      const double v = field_eval(field, e.s).conservative;
      const bool stable = e.stability == Stability::kStable;
      svg << "<circle class=\"equilibrium-" << to_string(e.stability) << "\" cx=\"" << fix2(px(e.s))
          << "\" cy=\"" << fix2(py(v)) << "\" r=\"4\" fill=\"" << (stable ? "#2ca02c" : "white")
          << "\" stroke=\"#2ca02c\" stroke-width=\"1.5\"/>\n";
    }
  }

  // Legend.
  const double lx = kLeft + plot_w - 170, ly = kTop + 8;
  svg << "<g font-size=\"10\">\n";
  svg << "<line x1=\"" << fix2(lx) << "\" y1=\"" << fix2(ly) << "\" x2=\"" << fix2(lx + 20) << "\" y2=\"" << fix2(ly)
      << "\" stroke=\"#d62728\" stroke-width=\"2\"/><text x=\"" << fix2(lx + 26) << "\" y=\"" << fix2(ly + 3)
      << "\">conservative</text>\n";
  svg << "<line x1=\"" << fix2(lx) << "\" y1=\"" << fix2(ly + 14) << "\" x2=\"" << fix2(lx + 20) << "\" y2=\""
      << fix2(ly + 14) << "\" stroke=\"#1f4fd1\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/><text x=\""
      << fix2(lx + 26) << "\" y=\"" << fix2(ly + 17) << "\">gravity balance</text>\n";
  svg << "<rect x=\"" << fix2(lx) << "\" y=\"" << fix2(ly + 23) << "\" width=\"20\" height=\"10\" fill=\"#9ecae1\" "
         "fill-opacity=\"0.45\"/><text x=\""
      << fix2(lx + 26) << "\" y=\"" << fix2(ly + 31) << "\">friction band</text>\n";
  svg << "</g>\n</svg>\n";
  return svg.str();
}

nlohmann::json analysis_json(const ComposedField& field, const ProfileGrid& g) {
  const double q0 = field.joint.q_min, q1 = field.joint.q_max;
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& r : stick_regions(g)) {
    regions.push_back({{"s_lo", r.lo},
                       {"s_hi", r.hi},
                       {"q_lo", denormalize_s(r.lo, q0, q1)},
                       {"q_hi", denormalize_s(r.hi, q0, q1)}});
  }
  nlohmann::json eq = nlohmann::json::array();
  for (const auto& e : equilibria(g, field)) {
    eq.push_back({{"s", e.s},
                  {"q", denormalize_s(e.s, q0, q1)},
                  {"stability", std::string(to_string(e.stability))},
                  {"slope", e.slope}});
  }
  const auto open = quasi_static_open_force(field, g);
  return {{"asset_name", field.joint.asset_name},
          {"joint_name", field.joint.joint_name},
          {"grid_points", g.size()},
          {"stick_regions", regions},
          {"equilibria", eq},
          {"open_force",
           {{"at_s0", open.front()},
            {"at_s1", open.back()},
            {"min", *std::min_element(open.begin(), open.end())},
            {"max", *std::max_element(open.begin(), open.end())}}}};
}

}  // namespace joda
