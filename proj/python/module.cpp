// Python bindings. Structured values cross the boundary as JSON text; the
// Python package decodes them.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "joda/canonical_json.hpp"
#include "joda/compiler.hpp"
#include "joda/curve.hpp"
#include "joda/diag.hpp"
#include "joda/error.hpp"
#include "joda/refine.hpp"
#include "joda/schema.hpp"
#include "joda/sim.hpp"
#include "joda/templates.hpp"

namespace py = pybind11;
using namespace joda;

namespace {

std::string compile_text(const std::string& context, const std::string& proposal, bool raw) {
  const JointContext ctx = parse_context(context);
  return serialize_composed(raw ? compile_raw(ctx, parse_raw_proposal(proposal)).field
                                : compile(ctx, parse_proposal(proposal)).field);
}

py::dict sample_dict(const FieldSample& s) {
  py::dict d;
  d["conservative"] = s.conservative;
  d["friction_max"] = s.friction_max;
  d["damping"] = s.damping;
  return d;
}

std::string simulate_text(const std::string& composed, const std::string& scenario) {
  const ComposedField field = parse_composed(composed);
  return trajectory_csv(run_scenario(field, scenario_from_json(parse_json_text(scenario, "scenario"), field)));
}

std::string analyze_text(const std::string& composed, std::size_t points) {
  const ComposedField field = parse_composed(composed);
  return dump_canonical(analysis_json(field, profile_grid(field, points)));
}

std::string plot_text(const std::string& composed, std::size_t points, bool annotate, bool shade) {
  const ComposedField field = parse_composed(composed);
  SvgOptions opts;
  opts.annotate_equilibria = annotate;
  opts.shade_stick_regions = shade;
  return render_svg(profile_grid(field, points), field, opts);
}

py::tuple optimize_text(const std::string& composed, const std::vector<std::string>& targets_csv,
                        std::size_t iters, double lr, const std::string& params, unsigned threads) {
  ParamSet p = ParamSet::pack(parse_composed(composed));
  p.set_mask(params);
  std::vector<Trajectory> targets;
  for (const auto& t : targets_csv) targets.push_back(parse_trajectory_csv(t));
  RefineConfig cfg;
  cfg.threads = threads;
  AdamConfig adam;
  adam.lr = lr;
  OptimizeResult res;
  {
    py::gil_scoped_release release;
    res = optimize(p, targets, iters, cfg, adam);
  }
  return py::make_tuple(dump_canonical(optimize_report(p, res, adam)), serialize_composed(res.best.unpack()));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint dynamics profiles: compile, simulate, diagnose, refine";

  static py::exception<Error> error_type(m, "JodaError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = std::string(to_string(e.code())) + ": " + e.what();
      py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(msg);
      exc.attr("code") = std::string(to_string(e.code()));
      exc.attr("path") = e.path();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("pchip_eval", [](std::vector<double> xs, std::vector<double> ys, std::vector<double> at) {
    const PchipCurve c(std::move(xs), std::move(ys));
    std::vector<double> out;
    out.reserve(at.size());
    for (double x : at) out.push_back(c.eval(x));
    return out;
  }, py::arg("xs"), py::arg("ys"), py::arg("at"));

  m.def("template_names", [] {
    std::vector<std::string> names;
    for (const auto& t : list_templates()) names.push_back(t.name);
    return names;
  });

  m.def("validate_proposal", [](const std::string& text, bool raw) {
    if (raw) {
      parse_raw_proposal(text);
    } else {
      parse_proposal(text);
    }
  }, py::arg("text"), py::arg("raw") = false);

  m.def("compile", &compile_text, py::arg("context"), py::arg("proposal"), py::arg("raw") = false);

  m.def("field_eval", [](const std::string& composed, double s) {
    return sample_dict(field_eval(parse_composed(composed), s));
  }, py::arg("composed"), py::arg("s"));

  m.def("stable_hash", [](const std::string& key) { return stable_hash(key); });

  m.def("simulate", &simulate_text, py::arg("composed"), py::arg("scenario"));
  m.def("analyze", &analyze_text, py::arg("composed"), py::arg("points") = 1001);
  m.def("plot_svg", &plot_text, py::arg("composed"), py::arg("points") = 1001,
        py::arg("annotate_equilibria") = false, py::arg("shade_stick_regions") = false);
  m.def("optimize", &optimize_text, py::arg("composed"), py::arg("targets"), py::arg("iters") = 50,
        py::arg("lr") = 0.05, py::arg("params") = "conservative", py::arg("threads") = 1);
}
