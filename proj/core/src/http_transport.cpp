#include <regex>

#include <httplib.h>

#include "phigrade/backend.hpp"

namespace phigrade {
namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

std::optional<ParsedUrl> split_url(const std::string& url) {
  static const std::regex kParts(R"(^(https?://[^/\s]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, kParts)) return std::nullopt;
  return ParsedUrl{m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

class HttpTransport : public ChatTransport {
 public:
  AttemptResult send(const ChatRequest& request) override {
    const auto url = split_url(request.config.endpoint_url);
    if (!url) {
      AttemptResult r;
      r.status = AttemptStatus::kRejected;
      r.error = "endpoint is not an http(s) URL";
      return r;
    }
    httplib::Client client(url->origin);
    const auto seconds = request.config.timeout.count() / 1000;
    const auto micros = (request.config.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);

    httplib::Headers headers{{"Accept", "application/json"}};
    if (!request.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + request.api_key);
    }
    const std::string body =
        build_request_body(request.config, request.messages, request.schema).dump();
    auto res = client.Post(url->path, headers, body, "application/json");
    if (!res) {
      AttemptResult r;
      r.status = AttemptStatus::kTransient;
      r.error = "transport error: " + httplib::to_string(res.error());
      return r;
    }
    return interpret_http_response(res->status, res->body, request.schema != nullptr);
  }
};

}  // namespace

std::shared_ptr<ChatTransport> make_http_transport() { return std::make_shared<HttpTransport>(); }

}  // namespace phigrade
