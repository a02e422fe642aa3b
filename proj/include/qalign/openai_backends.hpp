#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "qalign/backends.hpp"
#include "qalign/transport.hpp"

namespace qalign {

struct CompletionSettings {
  std::string model;
  double temperature = 1.0;
  std::int64_t param_count = 0;
  UnitKind unit = UnitKind::word;
  std::optional<std::filesystem::path> template_dir;
};

/// Generation over an OpenAI-compatible POST /v1/completions endpoint.
///
/// A suffix proposal is requested with prompt = rendered(x) + "\n" + rendered(prefix); when the
/// prompt carries a chat template the prefix therefore sits in the response slot, which only
/// approximates the model's own continuation. The continuation is split into units and
/// truncated to `max_new`. An empty continuation is retried once.
class CompletionsGenerator final : public GenerationBackend {
 public:
  CompletionsGenerator(Transport& transport, CompletionSettings settings);

  Completion complete(const Prompt& x, std::span<const std::string> prefix, std::int64_t max_new,
                      Rng& rng) override;
  UnitKind unit_kind() const override { return settings_.unit; }
  std::int64_t param_count() const override { return settings_.param_count; }
  double temperature() const override { return settings_.temperature; }

  nlohmann::json request_body(const Prompt& x, std::span<const std::string> prefix, std::int64_t max_new) const;

 private:
  Transport& transport_;
  CompletionSettings settings_;
};

/// Reward over POST /score with {"prompt", "response"} -> {"reward"}.
class ScoreEndpointReward final : public RewardBackend {
 public:
  ScoreEndpointReward(Transport& transport, std::int64_t param_count,
                      std::optional<std::filesystem::path> template_dir = std::nullopt)
      : transport_(transport), param_count_(param_count), template_dir_(std::move(template_dir)) {}

  double score(const Prompt& x, const Sequence& y) override;
  std::int64_t param_count() const override { return param_count_; }

 private:
  Transport& transport_;
  std::int64_t param_count_;
  std::optional<std::filesystem::path> template_dir_;
};

}  // namespace qalign
