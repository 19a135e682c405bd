#include "toml_lite.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string_view>

namespace hemo::toml {

namespace {

[[noreturn]] void bad(std::size_t line, const std::string& what) {
  fail(Errc::Config, "config line " + std::to_string(line) + ": " + what);
}

bool is_bare_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// consumes a basic string starting at s[pos] == '"'; returns decoded text
std::string scan_string(std::string_view s, std::size_t& pos, std::size_t line) {
  std::string out;
  ++pos;
  while (pos < s.size()) {
    const char c = s[pos];
    if (c == '"') {
      ++pos;
      return out;
    }
    if (c == '\\') {
      if (pos + 1 >= s.size()) bad(line, "dangling escape in string");
      const char e = s[++pos];
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default: bad(line, std::string("unsupported escape \\") + e);
      }
      ++pos;
    } else {
      out += c;
      ++pos;
    }
  }
  bad(line, "unterminated string");
}

bool looks_like_integer(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  if (i >= s.size()) return false;
  bool digit = false;
  for (; i < s.size(); ++i) {
    if (std::isdigit(static_cast<unsigned char>(s[i]))) {
      digit = true;
    } else if (s[i] != '_') {
      return false;
    }
  }
  return digit;
}

Value parse_scalar(std::string_view raw, std::size_t line) {
  Value v;
  if (raw == "true" || raw == "false") {
    v.kind = Kind::Boolean;
    v.boolean = raw == "true";
    return v;
  }
  std::string cleaned;
  cleaned.reserve(raw.size());
  for (char c : raw)
    if (c != '_') cleaned += c;
  if (looks_like_integer(raw)) {
    v.kind = Kind::Integer;
    errno = 0;
    char* end = nullptr;
    v.integer = std::strtoll(cleaned.c_str(), &end, 10);
    if (errno == ERANGE || end == cleaned.c_str() || *end != '\0')
      bad(line, "integer out of range: " + std::string(raw));
    v.number = static_cast<double>(v.integer);
    return v;
  }
  char* end = nullptr;
  const double d = std::strtod(cleaned.c_str(), &end);
  if (end == cleaned.c_str() || *end != '\0')
    bad(line, "cannot parse value: " + std::string(raw));
  v.kind = Kind::Float;
  v.number = d;
  return v;
}

// parses one value starting at s[pos]; advances pos past it
Value parse_value(std::string_view s, std::size_t& pos, std::size_t line) {
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  if (pos >= s.size()) bad(line, "missing value");
  if (s[pos] == '"') {
    Value v;
    v.kind = Kind::String;
    v.str = scan_string(s, pos, line);
    return v;
  }
  if (s[pos] == '[') {
    Value v;
    v.kind = Kind::Array;
    ++pos;
    for (;;) {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
      if (pos >= s.size()) bad(line, "unterminated array");
      if (s[pos] == ']') {
        ++pos;
        return v;
      }
      v.array.push_back(parse_value(s, pos, line));
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
      if (pos < s.size() && s[pos] == ',') {
        ++pos;
      } else if (pos < s.size() && s[pos] == ']') {
        ++pos;
        return v;
      } else {
        bad(line, "expected ',' or ']' in array");
      }
    }
  }
  // bare scalar: runs to comma, bracket, comment, or end of line
  std::size_t start = pos;
  while (pos < s.size() && s[pos] != ',' && s[pos] != ']' && s[pos] != '#') ++pos;
  const std::string_view raw = trim(s.substr(start, pos - start));
  if (raw.empty()) bad(line, "missing value");
  if (raw.front() == '[') bad(line, "nested arrays are not supported");
  return parse_scalar(raw, line);
}

}  // namespace

const Table* Document::find(const std::string& name) const {
  const auto it = tables.find(name);
  return it == tables.end() ? nullptr : &it->second;
}

Document parse(const std::string& text) {
  Document doc;
  std::string current;
  doc.tables[current];
  std::istringstream in(text);
  std::string rawLine;
  std::size_t lineNo = 0;
  while (std::getline(in, rawLine)) {
    ++lineNo;
    std::string_view line = trim(rawLine);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      const std::size_t close = line.find(']');
      if (close == std::string_view::npos) bad(lineNo, "missing ']' in table header");
      const std::string_view name = trim(line.substr(1, close - 1));
      if (name.empty()) bad(lineNo, "empty table name");
      for (char c : name)
        if (!is_bare_char(c)) bad(lineNo, "bad table name: " + std::string(name));
      const std::string_view rest = trim(line.substr(close + 1));
      if (!rest.empty() && rest.front() != '#') bad(lineNo, "junk after table header");
      current = std::string(name);
      if (doc.tables.count(current)) bad(lineNo, "duplicate table [" + current + "]");
      doc.tables[current];
      continue;
    }
    std::size_t pos = 0;
    while (pos < line.size() && is_bare_char(line[pos])) ++pos;
    if (pos == 0) bad(lineNo, "expected key");
    const std::string key(line.substr(0, pos));
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos >= line.size() || line[pos] != '=') bad(lineNo, "expected '=' after key");
    ++pos;
    const Value v = parse_value(line, pos, lineNo);
    const std::string_view rest = trim(line.substr(pos));
    if (!rest.empty() && rest.front() != '#') bad(lineNo, "junk after value");
    if (doc.tables[current].count(key))
      bad(lineNo, "duplicate key '" + key + "' in table [" + current + "]");
    doc.tables[current][key] = v;
  }
  return doc;
}

Document parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Config, "cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

namespace {

const Value& require(const Table& t, const std::string& key, Kind kind,
                     const char* kindName) {
  const auto it = t.find(key);
  if (it == t.end()) fail(Errc::Config, "missing config key: " + key);
  if (it->second.kind != kind)
    fail(Errc::Config, "config key '" + key + "' must be a " + kindName);
  return it->second;
}

}  // namespace

bool has(const Table& t, const std::string& key) { return t.count(key) > 0; }

std::string get_string(const Table& t, const std::string& key) {
  return require(t, key, Kind::String, "string").str;
}
std::string get_string(const Table& t, const std::string& key, const std::string& dflt) {
  return has(t, key) ? get_string(t, key) : dflt;
}

std::int64_t get_int(const Table& t, const std::string& key) {
  return require(t, key, Kind::Integer, "integer").integer;
}
std::int64_t get_int(const Table& t, const std::string& key, std::int64_t dflt) {
  return has(t, key) ? get_int(t, key) : dflt;
}

double get_float(const Table& t, const std::string& key) {
  const auto it = t.find(key);
  if (it == t.end()) fail(Errc::Config, "missing config key: " + key);
  if (it->second.kind != Kind::Float && it->second.kind != Kind::Integer)
    fail(Errc::Config, "config key '" + key + "' must be a number");
  return it->second.number;
}
double get_float(const Table& t, const std::string& key, double dflt) {
  return has(t, key) ? get_float(t, key) : dflt;
}

bool get_bool(const Table& t, const std::string& key) {
  return require(t, key, Kind::Boolean, "boolean").boolean;
}
bool get_bool(const Table& t, const std::string& key, bool dflt) {
  return has(t, key) ? get_bool(t, key) : dflt;
}

std::vector<double> get_float_array(const Table& t, const std::string& key) {
  const Value& v = require(t, key, Kind::Array, "array");
  std::vector<double> out;
  out.reserve(v.array.size());
  for (const Value& e : v.array) {
    if (e.kind != Kind::Float && e.kind != Kind::Integer)
      fail(Errc::Config, "config key '" + key + "' must hold numbers");
    out.push_back(e.number);
  }
  return out;
}

std::vector<std::int64_t> get_int_array(const Table& t, const std::string& key) {
  const Value& v = require(t, key, Kind::Array, "array");
  std::vector<std::int64_t> out;
  out.reserve(v.array.size());
  for (const Value& e : v.array) {
    if (e.kind != Kind::Integer)
      fail(Errc::Config, "config key '" + key + "' must hold integers");
    out.push_back(e.integer);
  }
  return out;
}

}  // namespace hemo::toml
