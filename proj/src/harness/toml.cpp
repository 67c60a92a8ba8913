#include "embanon/harness/toml.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "embanon/errors.hpp"

namespace embanon::harness {

using nlohmann::json;

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        table = parse_header(root);
      } else {
        parse_key_value(*table);
      }
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("TOML line " + std::to_string(line_) + ": " + what);
  }

  bool eof() const { return pos_ >= s_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < s_.size() ? s_[pos_ + ahead] : '\0';
  }
  char get() {
    const char c = s_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_spaces() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
  }
  // Whitespace, newlines and comments (used between lines and inside arrays).
  void skip_blank_lines() {
    while (!eof()) {
      skip_spaces();
      skip_comment();
      if (peek() == '\r' && peek(1) == '\n') ++pos_;
      if (peek() == '\n') {
        get();
      } else {
        break;
      }
    }
  }
  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (eof()) return;
    if (peek() != '\n') fail("unexpected text after value");
    get();
  }

  std::string parse_simple_key() {
    skip_spaces();
    if (peek() == '"' || peek() == '\'') return parse_string();
    std::string key;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                      peek() == '-')) {
      key += get();
    }
    if (key.empty()) fail("expected a key");
    return key;
  }

  std::vector<std::string> parse_key() {
    std::vector<std::string> parts{parse_simple_key()};
    skip_spaces();
    while (peek() == '.') {
      ++pos_;
      parts.push_back(parse_simple_key());
      skip_spaces();
    }
    return parts;
  }

  // Walks/creates nested tables for all but the last key part.
  json& descend(json& table, const std::vector<std::string>& parts, std::size_t count) {
    json* t = &table;
    for (std::size_t i = 0; i < count; ++i) {
      json& next = (*t)[parts[i]];
      if (next.is_null()) next = json::object();
      if (next.is_array() && !next.empty() && next.back().is_object()) {
        t = &next.back();
      } else if (next.is_object()) {
        t = &next;
      } else {
        fail("key '" + parts[i] + "' is not a table");
      }
    }
    return *t;
  }

  json* parse_header(json& root) {
    ++pos_;
    const bool array = peek() == '[';
    if (array) ++pos_;
    const auto parts = parse_key();
    if (peek() != ']') fail("expected ']'");
    ++pos_;
    if (array) {
      if (peek() != ']') fail("expected ']]'");
      ++pos_;
    }
    json& parent = descend(root, parts, parts.size() - 1);
    json& slot = parent[parts.back()];
    if (array) {
      if (slot.is_null()) slot = json::array();
      if (!slot.is_array()) fail("'" + parts.back() + "' is not an array of tables");
      slot.push_back(json::object());
      return &slot.back();
    }
    if (slot.is_null()) slot = json::object();
    if (!slot.is_object()) fail("'" + parts.back() + "' is already a value");
    return &slot;
  }

  void parse_key_value(json& table) {
    const auto parts = parse_key();
    if (peek() != '=') fail("expected '=' after key");
    ++pos_;
    skip_spaces();
    json& parent = descend(table, parts, parts.size() - 1);
    if (parent.contains(parts.back())) fail("duplicate key '" + parts.back() + "'");
    parent[parts.back()] = parse_value();
  }

  json parse_value() {
    skip_spaces();
    const char c = peek();
    if (c == '"' || c == '\'') return parse_string();
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

  std::string parse_string() {
    const char quote = get();
    if (peek() == quote && peek(1) == quote) fail("multi-line strings are not supported");
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == quote) break;
      if (c == '\\' && quote == '"') {
        const char e = get();
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    return out;
  }

  json parse_array() {
    ++pos_;
    json arr = json::array();
    while (true) {
      skip_blank_lines();
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      arr.push_back(parse_value());
      skip_blank_lines();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json parse_inline_table() {
    ++pos_;
    json t = json::object();
    skip_spaces();
    if (peek() == '}') {
      ++pos_;
      return t;
    }
    while (true) {
      parse_key_value(t);
      skip_spaces();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() == '}') {
        ++pos_;
        return t;
      } else {
        fail("expected ',' or '}' in inline table");
      }
    }
  }

  json parse_number() {
    std::string tok;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' ||
                      peek() == '-' || peek() == '.' || peek() == '_')) {
      const char c = get();
      if (c != '_') tok += c;
    }
    if (tok.empty()) fail("expected a value");
    const std::string body = (tok[0] == '+' || tok[0] == '-') ? tok.substr(1) : tok;
    const bool negative = tok[0] == '-';
    if (body == "inf") return negative ? -std::numeric_limits<double>::infinity()
                                       : std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (body.size() > 1 && body[0] == '0' && std::isalpha(static_cast<unsigned char>(body[1]))) {
      fail("hex, octal and binary integers are not supported");
    }
    const bool is_float = tok.find_first_of(".eE") != std::string::npos;
    try {
      std::size_t used = 0;
      if (is_float) {
        const double v = std::stod(tok, &used);
        if (used == tok.size()) return v;
      } else {
        const long long v = std::stoll(tok, &used);
        if (used == tok.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("invalid value '" + tok + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

}  // namespace

json parse_toml(std::string_view text) { return Parser(text).parse(); }

}  // namespace embanon::harness
