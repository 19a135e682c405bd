#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "error.hpp"

namespace hemo::toml {

// Covers the subset used by run configs: single-level [tables], bare keys,
// basic strings, integers, floats, booleans, single-line scalar arrays, and
// # comments. Duplicate keys and tables are rejected.

enum class Kind { String, Integer, Float, Boolean, Array };

struct Value {
  Kind kind = Kind::String;
  std::string str;
  std::int64_t integer = 0;
  double number = 0;
  bool boolean = false;
  std::vector<Value> array;
};

using Table = std::map<std::string, Value>;

struct Document {
  std::map<std::string, Table> tables;  // key "" is the root table

  const Table* find(const std::string& name) const;
};

Document parse(const std::string& text);
Document parse_file(const std::string& path);

bool has(const Table& t, const std::string& key);

std::string get_string(const Table& t, const std::string& key);
std::string get_string(const Table& t, const std::string& key, const std::string& dflt);
std::int64_t get_int(const Table& t, const std::string& key);
std::int64_t get_int(const Table& t, const std::string& key, std::int64_t dflt);
double get_float(const Table& t, const std::string& key);  // accepts integer values
double get_float(const Table& t, const std::string& key, double dflt);
bool get_bool(const Table& t, const std::string& key);
bool get_bool(const Table& t, const std::string& key, bool dflt);
std::vector<double> get_float_array(const Table& t, const std::string& key);
std::vector<std::int64_t> get_int_array(const Table& t, const std::string& key);

}  // namespace hemo::toml
