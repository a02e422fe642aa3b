#include "qalign/transport.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

namespace qalign {

FixtureRecorder::FixtureRecorder(const std::filesystem::path& path) : out_(path, std::ios::app) {
  if (!out_) throw Error("cannot open fixture file " + path.string());
}

void FixtureRecorder::record(const std::string& endpoint, const nlohmann::json& body, const nlohmann::json& response) {
  nlohmann::ordered_json line;
  // The body is a (key-sorted) json; re-parse so both halves share the ordered type.
  line["request"]["endpoint"] = endpoint;
  line["request"]["body"] = nlohmann::ordered_json::parse(body.dump());
  line["response"] = nlohmann::ordered_json::parse(response.dump());
  std::lock_guard lock(mutex_);
  out_ << line.dump() << '\n';
  out_.flush();
}

HttpTransport::HttpTransport(HttpSettings settings, FixtureRecorder* recorder)
    : settings_(std::move(settings)), recorder_(recorder) {
  const std::string& url = settings_.base_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("base URL must include a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  if (path_start != std::string::npos) path_prefix_ = url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (!settings_.api_key_env.empty()) {
    if (const char* key = std::getenv(settings_.api_key_env.c_str()); key != nullptr && *key != '\0') {
      api_key_ = key;
    }
  }
}

nlohmann::json HttpTransport::post(const std::string& endpoint, const nlohmann::json& body) {
  httplib::Client client(scheme_host_port_);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(settings_.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(settings_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);
  const std::string path = path_prefix_ + endpoint;
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= settings_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(settings_.retry_backoff * (1 << (attempt - 1)));
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw TransportError("POST " + path + " returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    nlohmann::json decoded = nlohmann::json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (decoded.is_discarded()) throw TransportError("POST " + path + " returned malformed JSON");
    if (recorder_ != nullptr) recorder_->record(endpoint, body, decoded);
    return decoded;
  }
  throw TransportError("POST " + path + " failed after " + std::to_string(settings_.max_retries + 1) +
                       " attempts (" + last_error + ")");
}

FixtureTransport::FixtureTransport(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open fixture file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("request") || !j.contains("response")) {
      throw Error("malformed fixture line " + std::to_string(lineno) + " in " + path.string());
    }
    const auto& req = j.at("request");
    responses_[key(req.at("endpoint").get<std::string>(), req.at("body"))].push_back(j.at("response"));
  }
}

std::string FixtureTransport::key(const std::string& endpoint, const nlohmann::json& body) {
  return endpoint + '\n' + body.dump();
}

nlohmann::json FixtureTransport::post(const std::string& endpoint, const nlohmann::json& body) {
  std::lock_guard lock(mutex_);
  auto it = responses_.find(key(endpoint, body));
  if (it == responses_.end() || it->second.empty()) {
    throw TransportError("no recorded response for " + endpoint + " " + body.dump());
  }
  nlohmann::json out = std::move(it->second.front());
  it->second.pop_front();
  return out;
}

std::size_t FixtureTransport::remaining() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& [_, q] : responses_) n += q.size();
  return n;
}

}  // namespace qalign
