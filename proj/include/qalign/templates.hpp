#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qalign/core.hpp"

namespace qalign {

/// Built-in prompt templates: "gsm8k", "math500", "multiple_choice". Placeholders have the
/// form <{name}>; <{question}> is the prompt text, anything else comes from prompt metadata.
std::optional<std::string> builtin_template(const std::string& template_id);
std::vector<std::string> builtin_template_ids();

/// Reads `<dir>/<template_id>.txt`, falling back to the built-in template of that id.
std::string load_template(const std::string& template_id, const std::optional<std::filesystem::path>& dir);

std::string fill_template(const std::string& tmpl, const Prompt& x);

/// The text sent to the model for prompt x: x.text, or its filled template when x.template_id is set.
std::string render_prompt(const Prompt& x, const std::optional<std::filesystem::path>& template_dir = std::nullopt);

}  // namespace qalign
