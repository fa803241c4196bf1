#include "joda/vlm.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

#include "joda/canonical_json.hpp"
#include "joda/compiler.hpp"
#include "joda/diag.hpp"
#include "joda/error.hpp"
#include "joda/templates.hpp"

namespace joda {
namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string(), path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIo, "error reading " + path.string(), path.string());
  return data;
}

void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string(), path.string());
}

std::string media_type_for(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return {};
}

std::string template_table() {
  std::string out = "| template | behaviour | typical placement | channels |\n|---|---|---|---|\n";
  for (const auto& t : list_templates()) {
    std::string channels;
    for (Channel ch : kAllChannels) {
      if (!t.supports(ch)) continue;
      if (!channels.empty()) channels += ", ";
      channels += to_string(ch);
    }
    out += "| " + t.name + " | " + t.description + " | " + t.placement_prior + " | " + channels + " |\n";
  }
  return out;
}

constexpr std::string_view kSystemText =
    "You analyse the mechanics of articulated objects from images. Your answer is parsed by a "
    "compiler, so it must be a single JSON object that follows the requested layout exactly. "
    "Favour physically plausible, internally consistent answers over elaborate ones.";

constexpr std::string_view kTemplateLayout = R"({
  "joint_summary": {"joint_name": string, "joint_type": "revolute" | "prismatic",
                    "motion_description": string, "overall_confidence": number in [0,1]},
  "whole_motion_descrptn": string,
  "gravity_can_be_ignored": boolean,
  "joint_limit_hint": {"selected_side": "low_end" | "high_end" | "none",
                       "elasticity": "none" | "weak" | "medium" | "strong"},
  "effect_proposals": [
    {"effect_name": one of the template names,
     "start_ratio": number in [0,1], "end_ratio": number in [0,1] (start_ratio < end_ratio),
     "strength": {"conservative": label, "friction": label, "damping": label},
     "refineFactor": {"conservative": number > 0, "friction": number > 0, "damping": number > 0},
     "confidence": number in [0,1], "reason": string}
  ]
}
Strength labels: none, weak, medium, strong, dominant.)";

constexpr std::string_view kRawLayout = R"({
  "joint_summary": {"joint_name": string, "joint_type": "revolute" | "prismatic",
                    "motion_description": string, "overall_confidence": number in [0,1]},
  "whole_motion_descrptn": string,
  "gravity_can_be_ignored": boolean,
  "joint_limit_hint": {"selected_side": "low_end" | "high_end" | "none",
                       "elasticity": "none" | "weak" | "medium" | "strong"},
  "control_points": {"conservative": [[s, value], ...],
                     "friction": [[s, value], ...],
                     "damping": [[s, value], ...]}
})";

json analysis_brief(const json& analysis) {
  json out = json::object();
  for (const char* key : {"stick_regions", "equilibria", "open_force"}) {
    if (analysis.contains(key)) out[key] = analysis.at(key);
  }
  return out;
}

}  // namespace

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  if (bytes.empty()) return out;
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

ImageAttachment load_image(const std::filesystem::path& path) {
  const std::string type = media_type_for(path);
  if (type.empty()) {
    throw Error(ErrorCode::kIo, "unsupported image type: " + path.string(), path.string());
  }
  return {path.filename().string(), type, base64_encode(read_file(path))};
}

std::vector<ImageAttachment> load_image_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorCode::kIo, "image directory not found: " + dir.string(), dir.string());
  }
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && !media_type_for(entry.path()).empty()) paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<ImageAttachment> out;
  for (const auto& p : paths) out.push_back(load_image(p));
  return out;
}

PromptBundle build_prompt(const JointContext& ctx, std::vector<ImageAttachment> images,
                          ProposalMode mode, bool no_images) {
  ctx.validate();
  if (images.empty() && !no_images) {
    throw Error(ErrorCode::kValidation, "at least one image is required (or pass the no-image flag)",
                "images");
  }
  PromptBundle b;
  b.system = std::string(kSystemText);
  b.mode = mode;
  b.no_images = images.empty();
  b.images = std::move(images);

  const auto ref = reference_magnitudes(ctx);
  std::string u;
  u += "Prompt version: " + std::string(kPromptVersion) + "\n\n";
  u += "Describe how this joint feels when a person moves it through its whole range, as a set "
       "of joint-level effects. Positions are normalized: s = 0 at q_min and s = 1 at q_max. "
       "Positive conservative force pushes toward increasing s.\n\n";
  u += "Joint context:\n" + dump_canonical(to_json(ctx));
  u += "\nReference magnitudes: force " + format_double(ref.f_ref) + ", damping " +
       format_double(ref.c_ref) + ".\n\n";
  if (b.no_images) {
    u += "No images are attached; rely on the joint context.\n\n";
  } else {
    u += "Attached images, ordered along the motion: ";
    for (std::size_t i = 0; i < b.images.size(); ++i) u += (i ? ", " : "") + b.images[i].name;
    u += ".\n\n";
  }
  if (mode == ProposalMode::kTemplate) {
    u += "Effect templates (use these names only):\n" + template_table() + "\n";
    u += "Each proposal places one template on [start_ratio, end_ratio] and gives a qualitative "
         "strength per channel. Cover the whole range, and use the fewest effects that explain "
         "the behaviour. refineFactor defaults to 1 and is for adjusting a strength in later "
         "rounds.\n\n";
    u += "Reply with one JSON object in this layout:\n" + std::string(kTemplateLayout) + "\n";
  } else {
    u += "Do not use templates. Give control points for each channel directly, as (s, value) "
         "pairs with s increasing in [0,1]. Values are multiples of the reference magnitudes "
         "above; friction and damping values must be non-negative. Omit a channel to leave it "
         "at zero.\n\n";
    u += "Reply with one JSON object in this layout:\n" + std::string(kRawLayout) + "\n";
  }
  b.user = std::move(u);
  return b;
}

std::string feedback_message(const Feedback& fb, ProposalMode mode) {
  std::string u;
  u += "Your previous proposal was compiled and simulated. Previous proposal:\n";
  u += fb.prior_proposal;
  if (u.back() != '\n') u += '\n';
  u += "\nResulting profile (CSV; gravity_balance is the conservative force that cancels "
       "gravity, band_lo/band_hi bound the friction band):\n";
  u += fb.profile_csv;
  u += "\nAnalysis:\n" + dump_canonical(analysis_brief(fb.analysis));
  u += "\nIf this behaviour matches the joint, reply with the single word complete. Otherwise "
       "reply with a full revised JSON object in the same layout";
  u += mode == ProposalMode::kTemplate ? ", adjusting effects, intervals, strengths, or refineFactor.\n"
                                       : ", adjusting the control points.\n";
  return u;
}

std::vector<ChatMessage> initial_conversation(const PromptBundle& bundle) {
  return {{"system", bundle.system, {}}, {"user", bundle.user, bundle.images}};
}

ReplayTransport ReplayTransport::from_file(const std::filesystem::path& path) {
  const json doc = parse_json_text(read_file(path), path.string());
  if (!doc.is_object() || !doc.contains("responses") || !doc.at("responses").is_array()) {
    throw Error(ErrorCode::kValidation, "replay file needs a \"responses\" array", "responses");
  }
  std::vector<std::string> bodies;
  for (const auto& r : doc.at("responses")) bodies.push_back(r.is_string() ? r.get<std::string>() : r.dump());
  return ReplayTransport(std::move(bodies));
}

HttpResponse ReplayTransport::post(const HttpRequest& request) {
  requests_.push_back(request.body);
  if (next_ >= responses_.size()) {
    throw Error(ErrorCode::kNetwork, "replay transport has no recorded response left");
  }
  return {200, responses_[next_++]};
}

namespace {

class OpenAiBackend : public ChatBackend {
 public:
  std::string_view name() const override { return "openai"; }

  HttpRequest build_request(const std::vector<ChatMessage>& messages,
                            const ChatOptions& opt) const override {
    json msgs = json::array();
    for (const auto& m : messages) {
      if (m.images.empty()) {
        msgs.push_back({{"role", m.role}, {"content", m.text}});
        continue;
      }
      json parts = json::array({{{"type", "text"}, {"text", m.text}}});
      for (const auto& img : m.images) {
        parts.push_back({{"type", "image_url"},
                         {"image_url", {{"url", "data:" + img.media_type + ";base64," + img.base64}}}});
      }
      msgs.push_back({{"role", m.role}, {"content", parts}});
    }
    const json body = {{"model", opt.model.empty() ? "gpt-4o" : opt.model},
                       {"temperature", 0},
                       {"messages", msgs}};
    HttpRequest req;
    req.url = opt.endpoint.empty() ? "https://api.openai.com/v1/chat/completions" : opt.endpoint;
    req.headers = {{"Authorization", "Bearer " + opt.api_key}};
    req.body = dump_canonical(body);
    return req;
  }

  std::string extract_text(std::string_view body) const override {
    const json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::kNetwork, "response body is not JSON");
    try {
      const auto& content = j.at("choices").at(0).at("message").at("content");
      if (content.is_string()) return content.get<std::string>();
      std::string text;
      for (const auto& part : content) {
        if (part.value("type", "") == "text") text += part.at("text").get<std::string>();
      }
      return text;
    } catch (const json::exception&) {
      throw Error(ErrorCode::kNetwork, "response carries no choices[0].message.content: " +
                                           std::string(body.substr(0, 300)));
    }
  }
};

class GeminiBackend : public ChatBackend {
 public:
  std::string_view name() const override { return "gemini"; }

  HttpRequest build_request(const std::vector<ChatMessage>& messages,
                            const ChatOptions& opt) const override {
    json body = json::object();
    json contents = json::array();
    for (const auto& m : messages) {
      if (m.role == "system") {
        body["systemInstruction"] = {{"parts", json::array({{{"text", m.text}}})}};
        continue;
      }
      json parts = json::array({{{"text", m.text}}});
      for (const auto& img : m.images) {
        parts.push_back({{"inline_data", {{"mime_type", img.media_type}, {"data", img.base64}}}});
      }
      contents.push_back({{"role", m.role == "assistant" ? "model" : "user"}, {"parts", parts}});
    }
    body["contents"] = contents;
    body["generationConfig"] = {{"temperature", 0}};
    const std::string model = opt.model.empty() ? "gemini-1.5-pro" : opt.model;
    HttpRequest req;
    req.url = opt.endpoint.empty()
                  ? "https://generativelanguage.googleapis.com/v1beta/models/" + model + ":generateContent"
                  : opt.endpoint;
    req.headers = {{"x-goog-api-key", opt.api_key}};
    req.body = dump_canonical(body);
    return req;
  }

  std::string extract_text(std::string_view body) const override {
    const json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::kNetwork, "response body is not JSON");
    try {
      std::string text;
      for (const auto& part : j.at("candidates").at(0).at("content").at("parts")) {
        if (part.contains("text")) text += part.at("text").get<std::string>();
      }
      return text;
    } catch (const json::exception&) {
      throw Error(ErrorCode::kNetwork, "response carries no candidates[0].content.parts: " +
                                           std::string(body.substr(0, 300)));
    }
  }
};

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

std::unique_ptr<ChatBackend> make_backend(std::string_view name) {
  if (name == "openai") return std::make_unique<OpenAiBackend>();
  if (name == "gemini") return std::make_unique<GeminiBackend>();
  throw Error(ErrorCode::kValidation,
              "unknown backend \"" + std::string(name) + "\" (expected openai or gemini)", "backend");
}

std::string api_key_from_env() {
  const char* key = std::getenv("JODA_API_KEY");
  if (key == nullptr || *key == '\0') {
    throw Error(ErrorCode::kNetwork, "JODA_API_KEY is not set");
  }
  return key;
}

std::string strip_code_fences(std::string_view text) {
  const std::size_t fence = text.find("```");
  if (fence != std::string_view::npos) {
    std::size_t start = text.find('\n', fence);
    if (start != std::string_view::npos) {
      ++start;
      const std::size_t close = text.find("```", start);
      return trim(text.substr(start, close == std::string_view::npos ? text.npos : close - start));
    }
  }
  const std::string t = trim(text);
  const std::size_t open = t.find('{');
  const std::size_t close = t.rfind('}');
  if (open != std::string::npos && close != std::string::npos && close > open &&
      (open > 0 || close + 1 < t.size())) {
    return t.substr(open, close - open + 1);
  }
  return t;
}

bool is_complete_token(std::string_view text) {
  std::string t = trim(text);
  if (t.find("```") != std::string::npos) t = strip_code_fences(t);
  std::string core;
  for (char c : t) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      core += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!(c == '"' || c == '\'' || c == '.' || c == '!' || c == '`' ||
                 std::isspace(static_cast<unsigned char>(c)))) {
      return false;
    }
  }
  return core == "complete";
}

ProposeOutcome propose(std::vector<ChatMessage>& conversation, const ChatBackend& backend,
                       const ChatOptions& options, Transport& transport, ProposalMode mode,
                       int retry_budget, bool allow_complete) {
  ProposeOutcome out;
  std::vector<ChatMessage> convo = conversation;
  std::string last_text;
  std::string last_error;
  for (int attempt = 0; attempt <= retry_budget; ++attempt) {
    const HttpRequest req = backend.build_request(convo, options);
    if (req.body.size() > options.max_request_bytes) {
      throw Error(ErrorCode::kValidation,
                  "request of " + std::to_string(req.body.size()) + " bytes exceeds the cap of " +
                      std::to_string(options.max_request_bytes));
    }
    const HttpResponse resp = transport.post(req);
    out.exchanges.push_back({req.body, resp.status, resp.body});
    if (resp.status != 200) {
      throw Error(ErrorCode::kNetwork, "chat endpoint returned HTTP " + std::to_string(resp.status) +
                                           ": " + resp.body.substr(0, 300));
    }
    last_text = backend.extract_text(resp.body);
    out.retries = attempt;
    if (is_complete_token(last_text)) {
      if (allow_complete) {
        out.complete = true;
        conversation = std::move(convo);
        conversation.push_back({"assistant", last_text, {}});
        return out;
      }
      last_error = "\"complete\" is only valid after a compiled result has been shown";
    } else {
      const std::string body = strip_code_fences(last_text);
      try {
        if (mode == ProposalMode::kTemplate) {
          out.proposal = parse_proposal(body);
        } else {
          out.raw = parse_raw_proposal(body);
        }
        out.text = body;
        conversation = std::move(convo);
        conversation.push_back({"assistant", last_text, {}});
        return out;
      } catch (const Error& e) {
        last_error = e.path().empty() ? e.what() : e.path() + ": " + e.what();
      }
    }
    convo.push_back({"assistant", last_text, {}});
    convo.push_back({"user",
                     "That reply could not be used (" + last_error +
                         "). Reply again with only the corrected JSON object.",
                     {}});
  }
  throw Error(ErrorCode::kUnparseableProposal,
              "no usable proposal after " + std::to_string(retry_budget) + " repair attempts (" +
                  last_error + "); last reply: " + last_text);
}

ProposalDocument propose(const PromptBundle& bundle, const ChatBackend& backend,
                         const ChatOptions& options, Transport& transport, int retry_budget) {
  auto convo = initial_conversation(bundle);
  auto outcome = propose(convo, backend, options, transport, ProposalMode::kTemplate, retry_budget, false);
  return std::move(*outcome.proposal);
}

void write_round(const std::filesystem::path& dir, const RoundRecord& r) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message(), dir.string());
  for (std::size_t i = 0; i < r.exchanges.size(); ++i) {
    const std::string prefix = i == 0 ? "" : "repair" + std::to_string(i) + ".";
    write_file(dir / (prefix + "request.json"), r.exchanges[i].request_body);
    write_file(dir / (prefix + "response.json"), r.exchanges[i].response_body);
  }
  if (r.complete) return;
  write_file(dir / "proposal.json", r.proposal);
  write_file(dir / "composed.json", r.composed);
  write_file(dir / "profile.svg", r.svg);
  write_file(dir / "profile.csv", r.profile_csv);
}

IterateResult iterate(const JointContext& ctx, const PromptBundle& bundle,
                      const ChatBackend& backend, const ChatOptions& options, Transport& transport,
                      const IterationPolicy& policy,
                      const std::optional<std::filesystem::path>& transcript_dir) {
  if (policy.max_rounds < 1) throw Error(ErrorCode::kValidation, "max_rounds must be at least 1", "rounds");
  IterateResult result;
  std::vector<ChatMessage> convo = initial_conversation(bundle);
  const std::string joint_dir = ctx.joint_name.empty() ? "joint" : ctx.joint_name;
  int compiles = 0;
  for (int round = 1;; ++round) {
    ProposeOutcome outcome =
        propose(convo, backend, options, transport, policy.mode, policy.retry_budget, round > 1);
    RoundRecord rec;
    rec.round = round;
    rec.retries = outcome.retries;
    rec.exchanges = std::move(outcome.exchanges);
    rec.complete = outcome.complete;
    if (!outcome.complete) {
      CompileResult compiled = policy.mode == ProposalMode::kTemplate ? compile(ctx, *outcome.proposal)
                                                                      : compile_raw(ctx, *outcome.raw);
      ++compiles;
      rec.proposal = dump_canonical(policy.mode == ProposalMode::kTemplate ? to_json(*outcome.proposal)
                                                                           : to_json(*outcome.raw));
      rec.composed = serialize_composed(compiled.field);
      rec.warnings = compiled.warnings;
      const ProfileGrid grid = profile_grid(compiled.field);
      rec.profile_csv = profile_csv(profile_grid(compiled.field, 101));
      rec.svg = render_svg(grid, compiled.field, {true, true, ctx.asset_name + " / " + ctx.joint_name});
      const json analysis = analysis_json(compiled.field, grid);
      result.field = std::move(compiled.field);
      if (compiles < policy.max_rounds) {
        convo.push_back({"user", feedback_message({outcome.text, rec.profile_csv, analysis}, policy.mode), {}});
      }
    }
    if (transcript_dir) write_round(*transcript_dir / joint_dir / ("round" + std::to_string(round)), rec);
    result.rounds.push_back(std::move(rec));
    if (outcome.complete) {
      result.completed = true;
      break;
    }
    if (compiles >= policy.max_rounds) break;
  }
  return result;
}

}  // namespace joda
