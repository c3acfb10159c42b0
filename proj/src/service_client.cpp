#include "hulirag/service_client.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "hulirag/error.hpp"

namespace hulirag {

using jsonl::Json;

Endpoint parse_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw Error(ErrorCode::kConfig, "endpoint '" + url + "' needs a scheme");
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) {
    return {url, "/v1/chat/completions"};
  }
  return {url.substr(0, slash), url.substr(slash)};
}

HttpTransport::HttpTransport(std::string base_url, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

HttpResponse HttpTransport::post(const std::string& path, const std::string& body,
                                 const std::map<std::string, std::string>& headers) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers h;
  for (const auto& [k, v] : headers) {
    h.emplace(k, v);
  }
  auto res = client.Post(path, h, body, "application/json");
  if (!res) {
    throw Error(ErrorCode::kTransport, "POST " + base_url_ + path + " failed: " + httplib::to_string(res.error()));
  }
  return {res->status, res->body};
}

ChatClient::ChatClient(ServiceConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)),
      endpoint_(parse_endpoint(config_.endpoint)),
      transport_(std::move(transport)),
      slots_(std::make_unique<std::counting_semaphore<>>(std::max(1, config_.max_in_flight))) {}

ChatClient::ChatClient(ServiceConfig config)
    : ChatClient(config, std::make_shared<HttpTransport>(parse_endpoint(config.endpoint).base, config.timeout)) {}

std::string ChatClient::complete(const Json& messages) {
  Json body{{"model", config_.model}, {"messages", messages}, {"temperature", 0}};
  std::map<std::string, std::string> headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    headers["Authorization"] = std::string("Bearer ") + key;
  }
  const std::string payload = body.dump();

  slots_->acquire();
  struct Release {
    std::counting_semaphore<>* s;
    ~Release() { s->release(); }
  } release{slots_.get()};

  std::string last_error;
  auto backoff = config_.initial_backoff;
  const int attempts = config_.max_retries + 1;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    last_attempts_ = attempt;
    if (attempt > 1 && backoff.count() > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    HttpResponse res;
    try {
      res = transport_->post(endpoint_.path, payload, headers);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTransport) {
        throw;
      }
      last_error = e.what();
      continue;
    }
    if (res.status == 429 || res.status >= 500) {
      last_error = "HTTP " + std::to_string(res.status);
      continue;
    }
    if (res.status < 200 || res.status >= 300) {
      throw Error(ErrorCode::kTransport, "service returned HTTP " + std::to_string(res.status));
    }
    try {
      const Json reply = Json::parse(res.body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kParse, std::string("malformed chat-completion reply: ") + e.what());
    }
  }
  throw Error(ErrorCode::kTransport,
              "request failed after " + std::to_string(attempts) + " attempts: " + last_error);
}

int JudgeClient::judge(const JudgeRequest& request) {
  const Json messages = Json::array({Json{{"role", "user"}, {"content", request.rendered_prompt}}});
  return parse_rating(chat_->complete(messages));
}

std::vector<JudgeOutcome> judge_all(JudgeClient& client, const std::vector<PredictedAnswer>& answers, int workers) {
  std::vector<JudgeOutcome> out(answers.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < answers.size(); i = next++) {
      out[i].query_id = answers[i].query_id;
      try {
        out[i].rating = client.judge(make_judge_request(answers[i].question, answers[i].answer));
      } catch (const Error& e) {
        out[i].error = e.what();
      }
    }
  };
  std::vector<std::thread> threads;
  for (int t = 1; t < std::max(1, workers); ++t) {
    threads.emplace_back(work);
  }
  work();
  for (auto& t : threads) {
    t.join();
  }
  return out;
}

namespace {

std::string mime_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "application/octet-stream";
}

}  // namespace

std::string resolve_image_reference(const std::string& ref) {
  if (ref.rfind("http://", 0) == 0 || ref.rfind("https://", 0) == 0 || ref.rfind("data:", 0) == 0) {
    return ref;
  }
  std::ifstream in(ref, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kNotFound, "image reference '" + ref + "' cannot be read");
  }
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return "data:" + mime_for(ref) + ";base64," + httplib::detail::base64_encode(bytes.str());
}

Json GeneratorClient::build_messages(const std::string& question, const std::string& full_image_ref,
                                     const std::optional<std::string>& masked_image_ref) {
  Json content = Json::array();
  content.push_back(Json{{"type", "text"}, {"text", question}});
  content.push_back(Json{{"type", "image_url"}, {"image_url", Json{{"url", resolve_image_reference(full_image_ref)}}}});
  if (masked_image_ref) {
    content.push_back(
        Json{{"type", "image_url"}, {"image_url", Json{{"url", resolve_image_reference(*masked_image_ref)}}}});
  }
  return Json::array({Json{{"role", "user"}, {"content", std::move(content)}}});
}

GeneratorAnswer GeneratorClient::generate(const std::string& question, const std::string& full_image_ref,
                                          const std::optional<std::string>& masked_image_ref) {
  const bool degraded = !masked_image_ref || masked_image_ref->empty();
  const auto messages =
      build_messages(question, full_image_ref, degraded ? std::nullopt : masked_image_ref);
  return {chat_->complete(messages), degraded};
}

}  // namespace hulirag
