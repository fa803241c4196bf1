#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "joda/error.hpp"
#include "joda/vlm.hpp"

namespace joda {

HttpResponse HttpsTransport::post(const HttpRequest& request) {
  const std::size_t scheme_end = request.url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kNetwork, "malformed endpoint URL: " + request.url);
  }
  const std::size_t path_start = request.url.find('/', scheme_end + 3);
  const std::string origin = request.url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : request.url.substr(path_start);

  httplib::Client client(origin);
  const auto secs = static_cast<time_t>(timeout_s_);
  client.set_connection_timeout(30, 0);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);
  client.enable_server_certificate_verification(true);
  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);
  auto res = client.Post(path, headers, request.body, "application/json");
  if (!res) {
    throw Error(ErrorCode::kNetwork,
                "request to " + origin + " failed: " + httplib::to_string(res.error()));
  }
  return {res->status, res->body};
}

}  // namespace joda
