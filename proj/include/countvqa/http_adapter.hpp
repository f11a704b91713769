#pragma once

// Chat-completions client for remote vision-language endpoints. Each
// question becomes one user message holding an image part and a text part.
// Requires cpp-httplib; define CPPHTTPLIB_OPENSSL_SUPPORT for https URLs.

#include <openssl/evp.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <utility>

#include "countvqa/errors.hpp"
#include "countvqa/jsonl.hpp"
#include "countvqa/model_adapter.hpp"
#include "httplib.h"

namespace countvqa {

enum class ImageTransport { base64_inline, url };

struct ModelEndpointConfig {
  std::string base_url;            // e.g. https://api.example.com/v1
  std::string api_key_env;         // empty: send no Authorization header
  std::string model_name;
  double temperature = 0.0;        // greedy decoding only
  int max_tokens = 32;
  double timeout_s = 60.0;
  int max_retries = 3;
  double rate_limit = 1.0;         // requests per second
  double backoff_initial_s = 1.0;
  ImageTransport image_transport = ImageTransport::base64_inline;
  std::string image_root;          // base64_inline: directory holding image_ref files
  std::string image_url_prefix;    // url: prepended to relative image_refs

  void validate() const {
    if (base_url.empty()) throw ConfigError("endpoint base_url is empty");
    if (model_name.empty()) throw ConfigError("endpoint model_name is empty");
    if (temperature != 0.0) throw ConfigError("temperature must be 0 (greedy decoding)");
    if (!(rate_limit > 0)) throw ConfigError("rate_limit must be > 0");
    if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (!(timeout_s > 0)) throw ConfigError("timeout must be > 0");
  }

  static ModelEndpointConfig from_json(const json& j) {
    ModelEndpointConfig c;
    try {
      c.base_url = j.at("base_url").get<std::string>();
      c.api_key_env = j.value("api_key_env", std::string());
      c.model_name = j.at("model_name").get<std::string>();
      c.temperature = j.value("temperature", 0.0);
      c.max_tokens = j.value("max_tokens", c.max_tokens);
      c.timeout_s = j.value("timeout", c.timeout_s);
      c.max_retries = j.value("max_retries", c.max_retries);
      c.rate_limit = j.value("rate_limit", c.rate_limit);
      c.backoff_initial_s = j.value("backoff_initial", c.backoff_initial_s);
      const auto transport = j.value("image_transport", std::string("base64_inline"));
      if (transport == "base64_inline") {
        c.image_transport = ImageTransport::base64_inline;
      } else if (transport == "url") {
        c.image_transport = ImageTransport::url;
      } else {
        throw ConfigError("image_transport must be base64_inline or url");
      }
      c.image_root = j.value("image_root", std::string());
      c.image_url_prefix = j.value("image_url_prefix", std::string());
    } catch (const json::exception& e) {
      throw ConfigError(std::string("endpoint config: ") + e.what());
    }
    c.validate();
    return c;
  }
};

inline std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::string image_mime_type(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (ext == ".png") return "image/png";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "image/jpeg";
}

/// Splits "https://host:port/v1" into {"https://host:port", "/v1"}.
inline std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("base_url needs a scheme: " + url);
  const auto path = url.find('/', scheme + 3);
  if (path == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path), prefix};
}

class HttpAdapter final : public Adapter {
 public:
  explicit HttpAdapter(ModelEndpointConfig cfg, std::shared_ptr<Clock> clock = std::make_shared<SteadyClock>())
      : cfg_(std::move(cfg)), clock_(std::move(clock)), bucket_(cfg_.rate_limit, 1.0, *clock_) {
    cfg_.validate();
    if (!cfg_.api_key_env.empty()) {
      const char* key = std::getenv(cfg_.api_key_env.c_str());
      if (key == nullptr || *key == '\0') {
        throw ConfigError("environment variable " + cfg_.api_key_env + " (API key) is not set");
      }
      api_key_ = key;
    }
    std::tie(host_, path_prefix_) = split_base_url(cfg_.base_url);
  }

  std::string name() const override { return "http:" + cfg_.model_name; }

  std::string image_url(const QuestionRecord& q) const {
    const std::string& ref = q.image_ref;
    if (cfg_.image_transport == ImageTransport::url) {
      if (ref.rfind("http://", 0) == 0 || ref.rfind("https://", 0) == 0 || ref.rfind("data:", 0) == 0) return ref;
      return cfg_.image_url_prefix + ref;
    }
    const std::filesystem::path file = cfg_.image_root.empty() ? std::filesystem::path(ref)
                                                               : std::filesystem::path(cfg_.image_root) / ref;
    return "data:" + image_mime_type(file) + ";base64," + base64_encode(read_file(file));
  }

  json request_body(const QuestionRecord& q) const {
    return json{{"model", cfg_.model_name},
                {"temperature", 0},
                {"max_tokens", cfg_.max_tokens},
                {"messages",
                 json::array({json{{"role", "user"},
                                   {"content", json::array({json{{"type", "image_url"},
                                                                 {"image_url", {{"url", image_url(q)}}}},
                                                            json{{"type", "text"}, {"text", q.prompt}}})}}})}};
  }

  std::string request_hash(const QuestionRecord& q) const override {
    return sha256_hex(json::array({cfg_.model_name, cfg_.max_tokens, q.image_ref, q.prompt}).dump()).substr(0, 16);
  }

  AdapterReply ask(const QuestionRecord& q) override {
    const std::string body = request_body(q).dump();
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    std::string last_error;
    for (int attempt = 1; attempt <= cfg_.max_retries + 1; ++attempt) {
      if (attempt > 1) clock_->sleep_for(cfg_.backoff_initial_s * std::pow(2.0, attempt - 2));
      bucket_.acquire();

      httplib::Client cli(host_);
      const auto secs = static_cast<time_t>(cfg_.timeout_s);
      const auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
      cli.set_connection_timeout(secs, usecs);
      cli.set_read_timeout(secs, usecs);
      cli.set_write_timeout(secs, usecs);

      auto res = cli.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
      if (!res) {
        last_error = "question " + q.question_id + ": " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "question " + q.question_id + ": HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        throw RemoteError(res->status, "question " + q.question_id + ": " + error_message(res->body));
      }
      return {extract_text(res->status, res->body, q), attempt};
    }
    throw TransportError("retries exhausted after " + std::to_string(cfg_.max_retries + 1) +
                         " attempt(s); last failure: " + last_error);
  }

 private:
  static std::string error_message(const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (!j.is_discarded() && j.contains("error")) {
      const auto& e = j["error"];
      if (e.is_object() && e.contains("message") && e["message"].is_string()) return e["message"].get<std::string>();
      if (e.is_string()) return e.get<std::string>();
    }
    return body;
  }

  static std::string extract_text(int status, const std::string& body, const QuestionRecord& q) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
      throw RemoteError(status, "question " + q.question_id + ": response has no choices");
    }
    const auto& content = j["choices"][0]["message"]["content"];
    if (content.is_string()) return content.get<std::string>();
    if (content.is_array()) {
      std::string text;
      for (const auto& part : content) {
        if (part.value("type", "") == "text") text += part.value("text", "");
      }
      return text;
    }
    throw RemoteError(status, "question " + q.question_id + ": response has no message content");
  }

  ModelEndpointConfig cfg_;
  std::shared_ptr<Clock> clock_;
  TokenBucket bucket_;
  std::string api_key_;
  std::string host_;
  std::string path_prefix_;
};

}  // namespace countvqa
