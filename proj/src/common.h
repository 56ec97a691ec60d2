/* Copyright 2026 The pshard Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pshard {

// Error categories surfaced through the C API as status codes.
enum class ErrorCode {
  kInvalidArgument,
  kParse,
  kIo,
  kVersionMismatch,
  kInfeasibleBudget,
  kInfeasibleSchedule,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

// Exact non-negative rational, used for bytes-per-element widths such as
// 9/16 (4-bit weights with per-block scales).
struct Rational {
  uint64_t num = 0;
  uint64_t den = 1;

  static Rational parse(std::string_view text);

  double to_double() const { return static_cast<double>(num) / den; }
  std::string to_string() const;

  // ceil(count * num / den), computed without overflow for any count that
  // fits in 64 bits together with the result.
  uint64_t bytes_for(uint64_t count) const;

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend std::strong_ordering operator<=>(const Rational& a,
                                          const Rational& b) {
    const unsigned __int128 lhs = static_cast<unsigned __int128>(a.num) * b.den;
    const unsigned __int128 rhs = static_cast<unsigned __int128>(b.num) * a.den;
    if (lhs != rhs) return lhs < rhs ? std::strong_ordering::less
                                     : std::strong_ordering::greater;
    return a.den <=> b.den;
  }
};

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);
double parse_double(std::string_view text);
uint64_t parse_u64(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split(std::string_view text, char sep);

// Key/value document: a version header line followed by `key = value` lines.
// '#' starts a comment. Every key must be consumed; leftovers are rejected so
// that typos in spec files do not silently fall back to defaults.
class KeyValueDoc {
 public:
  // `expected_header` is the required first non-comment line, e.g.
  // "pshard-model v1".
  static KeyValueDoc parse(std::string_view text,
                           std::string_view expected_header);

  bool has(const std::string& key) const;
  std::string take_string(const std::string& key);
  double take_double(const std::string& key);
  uint64_t take_u64(const std::string& key);
  bool take_bool(const std::string& key);
  Rational take_rational(const std::string& key);
  std::vector<double> take_double_list(const std::string& key);

  double take_double_or(const std::string& key, double fallback);
  uint64_t take_u64_or(const std::string& key, uint64_t fallback);
  bool take_bool_or(const std::string& key, bool fallback);

  // Throws if any key was not consumed.
  void expect_consumed() const;

 private:
  std::string take_raw(const std::string& key);

  std::string header_;
  std::map<std::string, std::string> values_;
};

}  // namespace pshard
