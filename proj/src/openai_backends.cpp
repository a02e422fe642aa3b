#include "qalign/openai_backends.hpp"

#include <cmath>

#include "qalign/templates.hpp"

namespace qalign {

CompletionsGenerator::CompletionsGenerator(Transport& transport, CompletionSettings settings)
    : transport_(transport), settings_(std::move(settings)) {
  if (settings_.model.empty()) throw Error("completions backend needs a model name");
  if (!(settings_.temperature > 0.0)) throw Error("temperature must be positive");
}

nlohmann::json CompletionsGenerator::request_body(const Prompt& x, std::span<const std::string> prefix,
                                                  std::int64_t max_new) const {
  std::string prompt = render_prompt(x, settings_.template_dir);
  if (!prefix.empty()) prompt += "\n" + render(prefix, settings_.unit);
  return nlohmann::json{{"model", settings_.model},
                        {"prompt", prompt},
                        {"max_tokens", max_new},
                        {"temperature", settings_.temperature},
                        {"n", 1}};
}

Completion CompletionsGenerator::complete(const Prompt& x, std::span<const std::string> prefix,
                                          std::int64_t max_new, Rng&) {
  if (max_new < 1) throw Error("max_new must be at least 1");
  const nlohmann::json body = request_body(x, prefix, max_new);
  for (int attempt = 0; attempt < 2; ++attempt) {
    nlohmann::json response = transport_.post("/v1/completions", body);
    if (!response.contains("choices") || response.at("choices").empty()) {
      throw TransportError("completions response has no choices");
    }
    std::string text = response.at("choices").at(0).value("text", std::string());
    std::vector<std::string> fresh = split_units(text, settings_.unit);
    if (fresh.empty()) continue;
    if (fresh.size() > static_cast<std::size_t>(max_new)) fresh.resize(static_cast<std::size_t>(max_new));
    std::vector<std::string> tokens(prefix.begin(), prefix.end());
    const auto generated = static_cast<std::int64_t>(fresh.size());
    tokens.insert(tokens.end(), std::make_move_iterator(fresh.begin()), std::make_move_iterator(fresh.end()));
    return Completion{Sequence(std::move(tokens), settings_.unit), generated};
  }
  throw Error("backend returned an empty continuation twice for prompt '" + x.id + "'");
}

double ScoreEndpointReward::score(const Prompt& x, const Sequence& y) {
  nlohmann::json body{{"prompt", render_prompt(x, template_dir_)}, {"response", y.text()}};
  nlohmann::json response = transport_.post("/score", body);
  if (!response.contains("reward") || !response.at("reward").is_number()) {
    throw TransportError("score response lacks a numeric reward");
  }
  double r = response.at("reward").get<double>();
  if (!std::isfinite(r)) throw Error("score endpoint returned a non-finite reward");
  return r;
}

}  // namespace qalign
