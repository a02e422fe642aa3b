#include "qalign/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "qalign/core.hpp"

namespace qalign {

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  nlohmann::json run() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    while (true) {
      skip_ws_and_comments(true);
      if (eof()) break;
      if (peek() == '[') {
        if (s_.substr(pos_, 2) == "[[") fail("arrays of tables are not supported");
        ++pos_;
        skip_inline_ws();
        std::vector<std::string> path = parse_key();
        skip_inline_ws();
        expect(']');
        table = &root;
        for (const auto& part : path) {
          auto& next = (*table)[part];
          if (next.is_null()) next = nlohmann::json::object();
          if (!next.is_object()) fail("'" + part + "' is not a table");
          table = &next;
        }
      } else {
        parse_key_value(*table);
      }
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error("TOML line " + std::to_string(line_) + ": " + msg);
  }
  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  void skip_inline_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
  }
  void skip_ws_and_comments(bool newlines) {
    while (!eof()) {
      skip_inline_ws();
      skip_comment();
      if (newlines && (peek() == '\n' || peek() == '\r')) {
        if (peek() == '\n') ++line_;
        ++pos_;
        continue;
      }
      break;
    }
  }
  void end_of_line() {
    skip_inline_ws();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (eof()) return;
    if (peek() != '\n') fail("unexpected trailing characters");
  }

  std::string parse_simple_key() {
    if (peek() == '"') return parse_basic_string();
    if (peek() == '\'') return parse_literal_string();
    std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
    if (start == pos_) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }
  std::vector<std::string> parse_key() {
    std::vector<std::string> parts{parse_simple_key()};
    skip_inline_ws();
    while (peek() == '.') {
      ++pos_;
      skip_inline_ws();
      parts.push_back(parse_simple_key());
      skip_inline_ws();
    }
    return parts;
  }

  void parse_key_value(nlohmann::json& table) {
    std::vector<std::string> path = parse_key();
    skip_inline_ws();
    expect('=');
    skip_inline_ws();
    nlohmann::json* target = &table;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      auto& next = (*target)[path[i]];
      if (next.is_null()) next = nlohmann::json::object();
      if (!next.is_object()) fail("'" + path[i] + "' is not a table");
      target = &next;
    }
    if (target->contains(path.back())) fail("duplicate key '" + path.back() + "'");
    (*target)[path.back()] = parse_value();
  }

  nlohmann::json parse_value() {
    char c = peek();
    if (c == '"') {
      if (s_.substr(pos_, 3) == "\"\"\"") fail("multi-line strings are not supported");
      return parse_basic_string();
    }
    if (c == '\'') {
      if (s_.substr(pos_, 3) == "'''") fail("multi-line strings are not supported");
      return parse_literal_string();
    }
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    return parse_number();
  }

  std::string parse_basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = s_[pos_++];
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated escape");
      char e = s_[pos_++];
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case 'u': append_utf8(parse_hex(4), out); break;
        case 'U': append_utf8(parse_hex(8), out); break;
        default: fail(std::string("invalid escape \\") + e);
      }
    }
    return out;
  }
  std::uint32_t parse_hex(int digits) {
    if (pos_ + static_cast<std::size_t>(digits) > s_.size()) fail("truncated unicode escape");
    std::uint32_t v = 0;
    auto r = std::from_chars(s_.data() + pos_, s_.data() + pos_ + digits, v, 16);
    if (r.ptr != s_.data() + pos_ + digits) fail("invalid unicode escape");
    pos_ += static_cast<std::size_t>(digits);
    return v;
  }
  static void append_utf8(std::uint32_t cp, std::string& out) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }
  std::string parse_literal_string() {
    expect('\'');
    std::size_t start = pos_;
    while (!eof() && peek() != '\'' && peek() != '\n') ++pos_;
    if (peek() != '\'') fail("unterminated literal string");
    std::string out(s_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  nlohmann::json parse_array() {
    expect('[');
    nlohmann::json arr = nlohmann::json::array();
    while (true) {
      skip_ws_and_comments(true);
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      arr.push_back(parse_value());
      skip_ws_and_comments(true);
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() != ']') fail("expected ',' or ']' in array");
    }
  }

  nlohmann::json parse_inline_table() {
    expect('{');
    nlohmann::json table = nlohmann::json::object();
    skip_inline_ws();
    if (peek() == '}') {
      ++pos_;
      return table;
    }
    while (true) {
      skip_inline_ws();
      parse_key_value(table);
      skip_inline_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect('}');
      return table;
    }
  }

  nlohmann::json parse_number() {
    std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                      peek() == '.' || peek() == '_' || peek() == ':')) {
      ++pos_;
    }
    std::string tok(s_.substr(start, pos_ - start));
    if (tok.empty()) fail("expected a value");
    if (tok.find(':') != std::string::npos || (tok.size() >= 10 && tok[4] == '-' && tok[7] == '-')) {
      fail("dates and times are not supported");
    }
    std::string clean;
    for (char c : tok) {
      if (c != '_') clean += c;
    }
    std::string unsigned_part = (clean[0] == '+' || clean[0] == '-') ? clean.substr(1) : clean;
    if (unsigned_part == "inf") return clean[0] == '-' ? -std::numeric_limits<double>::infinity()
                                                       : std::numeric_limits<double>::infinity();
    if (unsigned_part == "nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = clean.find_first_of(".eE") != std::string::npos;
    const char* b = clean.data() + (clean[0] == '+' ? 1 : 0);
    const char* e = clean.data() + clean.size();
    if (is_float) {
      double v = 0.0;
      auto r = std::from_chars(b, e, v);
      if (r.ec != std::errc() || r.ptr != e) fail("invalid number '" + tok + "'");
      return v;
    }
    std::int64_t v = 0;
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e) fail("invalid value '" + tok + "'");
    return v;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace

nlohmann::json parse_toml(std::string_view text) { return Parser(text).run(); }

nlohmann::json load_toml(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_toml(ss.str());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace qalign
