#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "hulirag/judge.hpp"
#include "hulirag/jsonl.hpp"

namespace hulirag {

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// POST-only transport. Connection failures and timeouts throw
/// Error(kTransport); HTTP error statuses are returned, not thrown.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const std::map<std::string, std::string>& headers) = 0;
};

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // defaults to /v1/chat/completions
};

Endpoint parse_endpoint(const std::string& url);

class HttpTransport final : public Transport {
 public:
  HttpTransport(std::string base_url, std::chrono::seconds timeout);

  HttpResponse post(const std::string& path, const std::string& body,
                    const std::map<std::string, std::string>& headers) override;

 private:
  std::string base_url_;
  std::chrono::seconds timeout_;
};

struct ServiceConfig {
  std::string endpoint;
  std::string model = "gpt-4";
  std::string api_key_env = "HULIRAG_API_KEY";
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{250};
  std::chrono::seconds timeout{60};
  int max_in_flight = 4;
};

/// Chat-completion client: one JSON request per call, transient failures
/// (transport errors, 429, 5xx) retried up to max_retries times with
/// doubling backoff. Concurrent callers share max_in_flight slots.
class ChatClient {
 public:
  ChatClient(ServiceConfig config, std::shared_ptr<Transport> transport);
  /// Builds an HttpTransport from config.endpoint.
  explicit ChatClient(ServiceConfig config);

  /// Returns choices[0].message.content of the reply.
  std::string complete(const jsonl::Json& messages);

  int attempts_last_call() const { return last_attempts_; }
  const ServiceConfig& config() const { return config_; }

 private:
  ServiceConfig config_;
  Endpoint endpoint_;
  std::shared_ptr<Transport> transport_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
  std::atomic<int> last_attempts_{0};
};

class JudgeClient {
 public:
  explicit JudgeClient(std::shared_ptr<ChatClient> chat) : chat_(std::move(chat)) {}

  /// Sends the rendered prompt and parses "Rating: [[X]]" from the reply.
  /// An unparseable reply throws kParse.
  int judge(const JudgeRequest& request);

 private:
  std::shared_ptr<ChatClient> chat_;
};

struct JudgeOutcome {
  std::string query_id;
  std::optional<int> rating;
  std::string error;
};

/// Judges every answer with up to `workers` concurrent requests. Failures are
/// recorded per item.
std::vector<JudgeOutcome> judge_all(JudgeClient& client, const std::vector<PredictedAnswer>& answers,
                                    int workers);

struct GeneratorAnswer {
  std::string answer;
  bool degraded = false;  // masked context was missing; full image only
};

class GeneratorClient {
 public:
  explicit GeneratorClient(std::shared_ptr<ChatClient> chat) : chat_(std::move(chat)) {}

  /// One request carrying the question with the full image and, when given,
  /// the masked image. Local file references are inlined as data URLs;
  /// http(s) and data URLs pass through. A missing file throws kNotFound.
  GeneratorAnswer generate(const std::string& question, const std::string& full_image_ref,
                           const std::optional<std::string>& masked_image_ref);

  /// The message list generate() sends.
  static jsonl::Json build_messages(const std::string& question, const std::string& full_image_ref,
                                    const std::optional<std::string>& masked_image_ref);

 private:
  std::shared_ptr<ChatClient> chat_;
};

/// http(s) and data URLs unchanged; a local file becomes a base64 data URL.
std::string resolve_image_reference(const std::string& ref);

}  // namespace hulirag
