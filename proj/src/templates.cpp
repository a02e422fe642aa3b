#include "qalign/templates.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace qalign {

namespace {

const std::map<std::string, std::string>& builtins() {
  static const std::map<std::string, std::string> table = {
      {"gsm8k", "Solve the following grade school math problem step-by-step: <{question}>"},
      {"math500",
       "Solve the following math problem step-by-step: <{question}>\n"
       "Present the answer in LaTex format: \\boxed{Your answer}"},
      {"multiple_choice",
       "Choose the correct answer to the following multiple-choice question about <{subject}>.\n"
       "Question: <{question}>\n"
       "A). <{choice_A}>\n"
       "B). <{choice_B}>\n"
       "C). <{choice_C}>\n"
       "D). <{choice_D}>\n"
       "Provide your reasoning about the answer and finish your answer with the letter corresponding to the "
       "correct option (e.g., A, B, C, or D)."},
  };
  return table;
}

}  // namespace

std::optional<std::string> builtin_template(const std::string& template_id) {
  auto it = builtins().find(template_id);
  if (it == builtins().end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> builtin_template_ids() {
  std::vector<std::string> ids;
  for (const auto& [id, _] : builtins()) ids.push_back(id);
  return ids;
}

std::string load_template(const std::string& template_id, const std::optional<std::filesystem::path>& dir) {
  if (dir) {
    std::ifstream in(*dir / (template_id + ".txt"));
    if (in) {
      std::stringstream ss;
      ss << in.rdbuf();
      std::string s = ss.str();
      while (!s.empty() && s.back() == '\n') s.pop_back();
      return s;
    }
  }
  if (auto t = builtin_template(template_id)) return *t;
  throw Error("unknown template '" + template_id + "'");
}

std::string fill_template(const std::string& tmpl, const Prompt& x) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    auto open = tmpl.find("<{", i);
    if (open == std::string::npos) {
      out.append(tmpl, i, std::string::npos);
      break;
    }
    auto close = tmpl.find("}>", open + 2);
    if (close == std::string::npos) throw Error("unterminated template placeholder");
    out.append(tmpl, i, open - i);
    std::string name = tmpl.substr(open + 2, close - open - 2);
    if (name == "question") {
      out += x.text;
    } else {
      auto it = x.metadata.find(name);
      if (it == x.metadata.end()) throw Error("prompt '" + x.id + "' lacks template field '" + name + "'");
      out += it->second;
    }
    i = close + 2;
  }
  return out;
}

std::string render_prompt(const Prompt& x, const std::optional<std::filesystem::path>& template_dir) {
  if (!x.template_id) return x.text;
  return fill_template(load_template(*x.template_id, template_dir), x);
}

}  // namespace qalign
