#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "joda/field.hpp"
#include "joda/joint.hpp"
#include "joda/schema.hpp"

namespace joda {

inline constexpr std::string_view kPromptVersion = "joda-prompt-1";

struct ImageAttachment {
  std::string name;
  std::string media_type;
  std::string base64;
};

/// Standard base64 (RFC 4648) of raw bytes.
std::string base64_encode(std::string_view bytes);

/// Reads one image; throws kIo naming the path when unreadable.
ImageAttachment load_image(const std::filesystem::path& path);
/// Every png/jpg/jpeg/webp/gif file in `dir`, sorted by file name.
std::vector<ImageAttachment> load_image_dir(const std::filesystem::path& dir);

struct Feedback {
  std::string prior_proposal;  // the model's previous JSON, verbatim
  std::string profile_csv;
  nlohmann::json analysis;
};

struct PromptBundle {
  std::string system;
  std::string user;
  std::vector<ImageAttachment> images;
  bool no_images = false;
  ProposalMode mode = ProposalMode::kTemplate;
};

/// Deterministic assembly of the initial request. Throws kValidation when
/// `images` is empty and `no_images` is false.
PromptBundle build_prompt(const JointContext& ctx, std::vector<ImageAttachment> images,
                          ProposalMode mode, bool no_images = false);
/// Follow-up user message for a diagnostic round.
std::string feedback_message(const Feedback& fb, ProposalMode mode);

struct ChatMessage {
  std::string role;  // system, user, assistant
  std::string text;
  std::vector<ImageAttachment> images;
};

std::vector<ChatMessage> initial_conversation(const PromptBundle& bundle);

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Byte transport for chat requests. Implementations must be safe to share
/// across threads when used by independent loops.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws kNetwork on connection failure.
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// HTTPS POST through cpp-httplib with OpenSSL.
class HttpsTransport : public Transport {
 public:
  explicit HttpsTransport(double timeout_s = 120.0) : timeout_s_(timeout_s) {}
  HttpResponse post(const HttpRequest& request) override;

 private:
  double timeout_s_;
};

/// Test double answering with pre-recorded response bodies in order.
class ReplayTransport : public Transport {
 public:
  explicit ReplayTransport(std::vector<std::string> responses) : responses_(std::move(responses)) {}
  /// `{"responses": [<body>, ...]}` where each body is a JSON value or a string.
  static ReplayTransport from_file(const std::filesystem::path& path);

  HttpResponse post(const HttpRequest& request) override;
  const std::vector<std::string>& requests() const { return requests_; }
  std::size_t remaining() const { return responses_.size() - next_; }

 private:
  std::vector<std::string> responses_;
  std::vector<std::string> requests_;
  std::size_t next_ = 0;
};

struct ChatOptions {
  std::string model;
  std::string endpoint;  // empty → backend default
  std::string api_key;
  std::size_t max_request_bytes = 20u << 20;
};

/// Wire format of a chat-completion API.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string_view name() const = 0;
  virtual HttpRequest build_request(const std::vector<ChatMessage>& messages,
                                    const ChatOptions& options) const = 0;
  /// Throws kNetwork when the body does not carry a reply.
  virtual std::string extract_text(std::string_view response_body) const = 0;
};

/// "openai" or "gemini"; throws kValidation otherwise.
std::unique_ptr<ChatBackend> make_backend(std::string_view name);

/// API key from JODA_API_KEY; throws kNetwork when unset.
std::string api_key_from_env();

/// Strips a Markdown code fence, or trims to the outermost JSON object.
std::string strip_code_fences(std::string_view text);
/// True when the reply is the bare token "complete" (quotes, fences, and
/// trailing punctuation tolerated).
bool is_complete_token(std::string_view text);

struct IterationPolicy {
  int max_rounds = 4;     // number of compiles at most
  int retry_budget = 2;   // repair attempts per round
  ProposalMode mode = ProposalMode::kTemplate;
};

struct Exchange {
  std::string request_body;
  int status = 0;
  std::string response_body;
};

struct ProposeOutcome {
  bool complete = false;
  std::string text;      // extracted JSON text of the accepted proposal
  int retries = 0;
  std::vector<Exchange> exchanges;
  std::optional<ProposalDocument> proposal;
  std::optional<RawCurveProposal> raw;
};

/// Sends the conversation, parses the reply, and on a malformed reply appends
/// the validation error and asks again, up to `retry_budget` times. The
/// accepted reply is appended to `conversation`.
ProposeOutcome propose(std::vector<ChatMessage>& conversation, const ChatBackend& backend,
                       const ChatOptions& options, Transport& transport, ProposalMode mode,
                       int retry_budget, bool allow_complete);

/// Single-shot helper over a fresh conversation.
ProposalDocument propose(const PromptBundle& bundle, const ChatBackend& backend,
                         const ChatOptions& options, Transport& transport, int retry_budget = 2);

struct RoundRecord {
  int round = 0;
  bool complete = false;
  int retries = 0;
  std::vector<Exchange> exchanges;
  std::string proposal;   // canonical JSON of the accepted proposal
  std::string composed;   // canonical composed.json
  std::string svg;
  std::string profile_csv;
  std::vector<std::string> warnings;
};

struct IterateResult {
  std::optional<ComposedField> field;  // last compiled field
  std::vector<RoundRecord> rounds;
  bool completed = false;
};

/// propose → compile → diagnose → feedback, until "complete" or max_rounds
/// compiles. With `transcript_dir`, round k is written to
/// <dir>/<joint>/round<k>/ as it finishes; a failing round leaves the
/// rounds before it on disk.
IterateResult iterate(const JointContext& ctx, const PromptBundle& bundle,
                      const ChatBackend& backend, const ChatOptions& options, Transport& transport,
                      const IterationPolicy& policy,
                      const std::optional<std::filesystem::path>& transcript_dir = std::nullopt);

void write_round(const std::filesystem::path& dir, const RoundRecord& round);

}  // namespace joda
