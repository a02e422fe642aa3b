#pragma once

#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "qalign/core.hpp"

namespace qalign {

class TransportError : public Error {
 public:
  using Error::Error;
};

/// POSTs a JSON body to an endpoint path and returns the decoded JSON response.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual nlohmann::json post(const std::string& endpoint, const nlohmann::json& body) = 0;
};

/// Appends {"request": {"endpoint", "body"}, "response": ...} lines to a JSONL file.
class FixtureRecorder {
 public:
  explicit FixtureRecorder(const std::filesystem::path& path);
  void record(const std::string& endpoint, const nlohmann::json& body, const nlohmann::json& response);

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

struct HttpSettings {
  std::string base_url;
  std::string api_key_env;  // name of the environment variable holding the key; empty for none
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  std::chrono::milliseconds retry_backoff{200};
};

/// cpp-httplib client with bounded retries on connection errors, 429 and 5xx.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(HttpSettings settings, FixtureRecorder* recorder = nullptr);
  nlohmann::json post(const std::string& endpoint, const nlohmann::json& body) override;

 private:
  HttpSettings settings_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::optional<std::string> api_key_;
  FixtureRecorder* recorder_;
};

/// Replays a fixture file. Requests are matched on (endpoint, serialized body); identical
/// requests receive their recorded responses in file order.
class FixtureTransport final : public Transport {
 public:
  explicit FixtureTransport(const std::filesystem::path& path);
  nlohmann::json post(const std::string& endpoint, const nlohmann::json& body) override;

  std::size_t remaining() const;

 private:
  static std::string key(const std::string& endpoint, const nlohmann::json& body);

  mutable std::mutex mutex_;
  std::map<std::string, std::deque<nlohmann::json>> responses_;
};

}  // namespace qalign
