#include "joda/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>

#include "joda/canonical_json.hpp"
#include "joda/compiler.hpp"
#include "joda/diag.hpp"
#include "joda/error.hpp"
#include "joda/refine.hpp"
#include "joda/schema.hpp"
#include "joda/sim.hpp"
#include "joda/vlm.hpp"

namespace joda {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path, path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text(const std::string& path, std::string_view text) {
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
  }
  std::ofstream out(path, std::ios::binary);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path, path);
}

int exit_code_for(ErrorClass c) {
  switch (c) {
    case ErrorClass::kValidation: return 1;
    case ErrorClass::kIo: return 2;
    case ErrorClass::kNetwork: return 3;
    case ErrorClass::kNumerical: return 4;
  }
  return 1;
}

std::string_view class_name(ErrorClass c) {
  switch (c) {
    case ErrorClass::kValidation: return "validation";
    case ErrorClass::kIo: return "io";
    case ErrorClass::kNetwork: return "network";
    case ErrorClass::kNumerical: return "numerical";
  }
  return "validation";
}

void report(std::ostream& err, std::string_view cls, std::string_view code, std::string_view message,
            std::string_view path = {}) {
  json j = {{"error", cls}, {"code", code}, {"message", message}};
  if (!path.empty()) j["path"] = path;
  err << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
}

void warn(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << json{{"warning", w}}.dump() << '\n';
}

ComposedField load_composed(const std::string& path) { return parse_composed(read_text(path)); }

struct Options {
  // shared
  std::string output;
  std::string context;
  std::string proposal;
  std::string composed;
  bool raw = false;
  // plot / analyze
  std::string csv;
  bool annotate = false;
  bool shade = false;
  std::size_t points = 1001;
  // simulate / interact
  std::string scenario;
  std::string targets_csv;
  double dt = 0.005;
  // baseline
  std::string kind;
  double friction = 0.0, damping = 0.0, peak = 0.0, a = 0.0, b = 1.0;
  std::string side = "low_end";
  // optimize
  std::vector<std::string> targets;
  std::size_t iters = 50;
  double lr = 0.05;
  std::string params = "conservative";
  std::string composed_out;
  unsigned threads = 1;
  double eps_v = 0.0;
  // propose
  std::string images;
  bool no_images = false;
  std::string backend = "openai";
  std::string replay;
  std::string replay_format = "openai";
  int rounds = 4;
  int retries = 2;
  std::string model;
  std::string endpoint;
};

int cmd_validate(const Options& o, std::ostream& out) {
  const std::string text = read_text(o.proposal);
  if (o.raw) {
    const auto raw = parse_raw_proposal(text);
    std::size_t n = 0;
    for (const auto& pts : raw.control_points) n += pts.empty() ? 0 : 1;
    out << "ok: raw proposal with " << n << " channel(s)\n";
  } else {
    const auto doc = parse_proposal(text);
    out << "ok: " << doc.effect_proposals.size() << " effect proposal(s)\n";
  }
  return 0;
}

int cmd_compile(const Options& o, std::ostream& err) {
  const JointContext ctx = parse_context(read_text(o.context));
  const std::string text = read_text(o.proposal);
  const CompileResult res = o.raw ? compile_raw(ctx, parse_raw_proposal(text)) : compile(ctx, parse_proposal(text));
  warn(err, res.warnings);
  write_text(o.output, serialize_composed(res.field));
  return 0;
}

int cmd_plot(const Options& o) {
  const ComposedField field = load_composed(o.composed);
  const ProfileGrid grid = profile_grid(field, o.points);
  SvgOptions svg;
  svg.annotate_equilibria = o.annotate;
  svg.shade_stick_regions = o.shade;
  write_text(o.output, render_svg(grid, field, svg));
  if (!o.csv.empty()) write_text(o.csv, profile_csv(grid));
  return 0;
}

int cmd_analyze(const Options& o) {
  const ComposedField field = load_composed(o.composed);
  const ProfileGrid grid = profile_grid(field, o.points);
  write_text(o.output, dump_canonical(analysis_json(field, grid)));
  return 0;
}

int cmd_simulate(const Options& o) {
  const ComposedField field = load_composed(o.composed);
  const Scenario sc = scenario_from_json(parse_json_text(read_text(o.scenario), "scenario"), field);
  write_text(o.output, trajectory_csv(run_scenario(field, sc)));
  return 0;
}

int cmd_interact(const Options& o) {
  const ComposedField field = load_composed(o.composed);
  const JointContext& ctx = field.joint;
  const CsvTable table = parse_csv(read_text(o.targets_csv));
  const std::size_t ct = table.column("t");
  bool normalized = false;
  std::size_t cq = 0;
  try {
    cq = table.column("q");
  } catch (const Error&) {
    cq = table.column("s");
    normalized = true;
  }
  std::vector<std::pair<double, double>> command;
  for (const auto& row : table.rows) {
    command.emplace_back(row[ct], normalized ? denormalize_s(row[cq], ctx.q_min, ctx.q_max) : row[cq]);
  }
  if (command.size() < 2) throw Error(ErrorCode::kValidation, "targets need at least two rows", o.targets_csv);
  Scenario sc;
  sc.config.dt = o.dt;
  sc.initial = {command.front().first, command.front().second, 0.0};
  const double duration = command.back().first - command.front().first;
  if (!(duration > 0.0)) throw Error(ErrorCode::kValidation, "target times must increase", o.targets_csv);
  sc.steps = static_cast<std::size_t>(std::ceil(duration / o.dt - 1e-9));
  sc.has_hand = true;
  sc.hand = HandController::defaults(ctx, sc.initial.q);
  sc.hand_command = std::move(command);
  write_text(o.output, trajectory_csv(run_scenario(field, sc)));
  return 0;
}

int cmd_baseline(const Options& o) {
  const JointContext ctx = parse_context(read_text(o.context));
  BaselineParams p;
  p.friction = o.friction;
  p.damping = o.damping;
  p.peak = o.peak;
  p.a = o.a;
  p.b = o.b;
  p.spring_side = limit_side_from_string(o.side);
  write_text(o.output, serialize_composed(make_baseline(baseline_kind_from_string(o.kind), ctx, p)));
  return 0;
}

int cmd_optimize(const Options& o, std::ostream& out) {
  const ComposedField field = load_composed(o.composed);
  std::vector<Trajectory> targets;
  for (const auto& path : o.targets) targets.push_back(parse_trajectory_csv(read_text(path)));
  ParamSet params = ParamSet::pack(field);
  params.set_mask(o.params);
  RefineConfig cfg;
  cfg.threads = o.threads;
  cfg.sim.dt = targets.front().dt;
  cfg.sim.eps_v = o.eps_v;
  AdamConfig adam;
  adam.lr = o.lr;
  const OptimizeResult res = optimize(params, targets, o.iters, cfg, adam);
  json report = optimize_report(params, res, adam);
  write_text(o.output, dump_canonical(report));
  if (!o.composed_out.empty()) {
    ComposedField refined = res.best.unpack();
    refined.meta["refined"] = {{"iterations", o.iters}, {"best_loss", res.history[res.best_iteration]}};
    write_text(o.composed_out, serialize_composed(refined));
  }
  out << "loss " << format_double(res.history.front()) << " -> "
      << format_double(res.history[res.best_iteration]) << '\n';
  return res.diverged ? 4 : 0;
}

int cmd_propose(const Options& o, std::ostream& out, std::ostream& err) {
  const JointContext ctx = parse_context(read_text(o.context));
  std::vector<ImageAttachment> images;
  if (!o.images.empty()) images = load_image_dir(o.images);
  const ProposalMode mode = o.raw ? ProposalMode::kRaw : ProposalMode::kTemplate;
  const PromptBundle bundle = build_prompt(ctx, std::move(images), mode, o.no_images);

  ChatOptions chat;
  chat.model = o.model;
  chat.endpoint = o.endpoint;
  std::unique_ptr<ChatBackend> backend;
  std::unique_ptr<Transport> transport;
  if (o.backend == "replay") {
    if (o.replay.empty()) throw Error(ErrorCode::kValidation, "--replay is required with the replay backend", "replay");
    backend = make_backend(o.replay_format);
    transport = std::make_unique<ReplayTransport>(ReplayTransport::from_file(o.replay));
  } else {
    backend = make_backend(o.backend);
    chat.api_key = api_key_from_env();
    transport = std::make_unique<HttpsTransport>();
  }
  IterationPolicy policy;
  policy.max_rounds = o.rounds;
  policy.retry_budget = o.retries;
  policy.mode = mode;
  const IterateResult res = iterate(ctx, bundle, *backend, chat, *transport, policy, fs::path(o.output));
  for (const auto& r : res.rounds) warn(err, r.warnings);
  const std::string joint_dir = ctx.joint_name.empty() ? "joint" : ctx.joint_name;
  const fs::path final_path = fs::path(o.output) / joint_dir / "composed.json";
  write_text(final_path.string(), serialize_composed(*res.field));
  out << res.rounds.size() << " round(s), " << (res.completed ? "completed" : "round limit reached")
      << "; wrote " << final_path.string() << '\n';
  return 0;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint dynamics profiles: compile, simulate, diagnose, refine, propose", "joda"};
  app.require_subcommand(1);
  Options o;

  auto* validate = app.add_subcommand("validate", "Check a proposal JSON file");
  validate->add_option("proposal", o.proposal, "proposal.json")->required();
  validate->add_flag("--raw", o.raw, "Validate a raw control-point proposal");

  auto* comp = app.add_subcommand("compile", "Compile a proposal into composed.json");
  comp->add_option("--context", o.context, "Joint context JSON")->required();
  comp->add_option("--proposal", o.proposal, "Proposal JSON")->required();
  comp->add_option("-o,--output", o.output, "Output composed.json")->required();
  comp->add_flag("--raw", o.raw, "Proposal holds raw control points (no templates)");

  auto* plot = app.add_subcommand("plot", "Render the diagnostic profile as SVG");
  plot->add_option("composed", o.composed, "composed.json")->required();
  plot->add_option("-o,--output", o.output, "Output SVG")->required();
  plot->add_option("--csv", o.csv, "Also write the profile CSV here");
  plot->add_flag("--annotate-equilibria", o.annotate, "Mark equilibria");
  plot->add_flag("--shade-stick", o.shade, "Shade stick regions");
  plot->add_option("--points", o.points, "Grid points")->check(CLI::Range(2, 1000000));

  auto* analyze = app.add_subcommand("analyze", "Stick regions and equilibria as JSON");
  analyze->add_option("composed", o.composed, "composed.json")->required();
  analyze->add_option("-o,--output", o.output, "Output JSON")->required();
  analyze->add_option("--points", o.points, "Grid points")->check(CLI::Range(2, 1000000));

  auto* simulate = app.add_subcommand("simulate", "Run a scenario and write the trajectory CSV");
  simulate->add_option("composed", o.composed, "composed.json")->required();
  simulate->add_option("--scenario", o.scenario, "Scenario JSON")->required();
  simulate->add_option("-o,--output", o.output, "Output CSV")->required();

  auto* interact = app.add_subcommand("interact", "Drive the joint with the virtual hand");
  interact->add_option("composed", o.composed, "composed.json")->required();
  interact->add_option("--targets", o.targets_csv, "CSV with columns t and q (or s)")->required();
  interact->add_option("-o,--output", o.output, "Output CSV")->required();
  interact->add_option("--dt", o.dt, "Time step [s]");

  auto* baseline = app.add_subcommand("baseline", "Write a constant-drag or linear-spring baseline field");
  baseline->add_option("--kind", o.kind, "constant or spring")->required();
  baseline->add_option("--context", o.context, "Joint context JSON")->required();
  baseline->add_option("-o,--output", o.output, "Output composed.json")->required();
  baseline->add_option("--friction", o.friction, "Constant friction (physical units)");
  baseline->add_option("--damping", o.damping, "Constant damping (physical units)");
  baseline->add_option("--peak", o.peak, "Spring force at the far end of its interval");
  baseline->add_option("--side", o.side, "Spring returns toward low_end or high_end");
  baseline->add_option("--a", o.a, "Spring interval start (s)");
  baseline->add_option("--b", o.b, "Spring interval end (s)");

  auto* opt = app.add_subcommand("optimize", "Refine a field against target trajectories");
  opt->add_option("composed", o.composed, "composed.json")->required();
  opt->add_option("--targets", o.targets, "Trajectory CSV files")->required()->expected(1, -1);
  opt->add_option("-o,--output", o.output, "Report JSON")->required();
  opt->add_option("--iters", o.iters, "Adam iterations")->check(CLI::PositiveNumber);
  opt->add_option("--lr", o.lr, "Adam step size");
  opt->add_option("--params", o.params,
                  "Comma-separated: conservative, damping, scales, friction, anchors, limit, all");
  opt->add_option("--composed-out", o.composed_out, "Write the refined composed.json here");
  opt->add_option("--threads", o.threads, "Rollout threads (0 = all cores)");
  opt->add_option("--eps-v", o.eps_v, "Friction smoothing velocity (0 = default)");

  auto* prop = app.add_subcommand("propose", "Ask a vision-language model for a field, with feedback rounds");
  prop->add_option("--context", o.context, "Joint context JSON")->required();
  auto* img = prop->add_option("--images", o.images, "Directory of rendered joint states");
  prop->add_flag("--no-images", o.no_images, "Send no images")->excludes(img);
  prop->add_option("--backend", o.backend, "openai, gemini, or replay");
  prop->add_option("--replay", o.replay, "Recorded responses for the replay backend");
  prop->add_option("--replay-format", o.replay_format, "Wire format of recorded responses");
  prop->add_option("--rounds", o.rounds, "Maximum compile rounds")->check(CLI::PositiveNumber);
  prop->add_option("--retries", o.retries, "Repair attempts per round")->check(CLI::NonNegativeNumber);
  prop->add_option("--model", o.model, "Model name");
  prop->add_option("--endpoint", o.endpoint, "Override the API URL");
  prop->add_flag("--raw", o.raw, "Ask for raw control points instead of templates");
  prop->add_option("-o,--output", o.output, "Transcript directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report(err, "validation", "usage", e.what());
    return 1;
  }

  if (validate->parsed()) return cmd_validate(o, out);
  if (comp->parsed()) return cmd_compile(o, err);
  if (plot->parsed()) return cmd_plot(o);
  if (analyze->parsed()) return cmd_analyze(o);
  if (simulate->parsed()) return cmd_simulate(o);
  if (interact->parsed()) return cmd_interact(o);
  if (baseline->parsed()) return cmd_baseline(o);
  if (opt->parsed()) return cmd_optimize(o, out);
  if (prop->parsed()) return cmd_propose(o, out, err);
  return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const Error& e) {
    report(err, class_name(e.error_class()), to_string(e.code()), e.what(), e.path());
    return exit_code_for(e.error_class());
  } catch (const nlohmann::json::exception& e) {
    report(err, "validation", "validation", e.what());
    return 1;
  } catch (const std::exception& e) {
    report(err, "io", "internal", e.what());
    return 2;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace joda
