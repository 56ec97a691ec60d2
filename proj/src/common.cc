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

#include "common.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace pshard {

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

namespace {

Rational reduced(uint64_t num, uint64_t den) {
  if (den == 0) fail(ErrorCode::kParse, "rational with zero denominator");
  const uint64_t g = std::gcd(num, den);
  return g == 0 ? Rational{0, 1} : Rational{num / g, den / g};
}

}  // namespace

Rational Rational::parse(std::string_view text) {
  text = trim(text);
  if (text.empty()) fail(ErrorCode::kParse, "empty rational");
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    return reduced(parse_u64(text.substr(0, slash)),
                   parse_u64(text.substr(slash + 1)));
  }
  auto dot = text.find('.');
  if (dot == std::string_view::npos) return reduced(parse_u64(text), 1);
  std::string_view whole = text.substr(0, dot);
  std::string_view frac = text.substr(dot + 1);
  if (frac.size() > 18) fail(ErrorCode::kParse,
                             "too many decimal places in '" +
                                 std::string(text) + "'");
  uint64_t den = 1;
  for (size_t i = 0; i < frac.size(); ++i) den *= 10;
  const uint64_t w = whole.empty() ? 0 : parse_u64(whole);
  const uint64_t f = frac.empty() ? 0 : parse_u64(frac);
  return reduced(w * den + f, den);
}

std::string Rational::to_string() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

uint64_t Rational::bytes_for(uint64_t count) const {
  const unsigned __int128 scaled = static_cast<unsigned __int128>(count) * num;
  return static_cast<uint64_t>((scaled + den - 1) / den);
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) fail(ErrorCode::kInvalidArgument, "format_double");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  text = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(),
                                   value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::kParse, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

uint64_t parse_u64(std::string_view text) {
  text = trim(text);
  uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(),
                                   value);
  if (ec == std::errc() && ptr == text.data() + text.size()) return value;
  // Accept integral values written in scientific notation, e.g. 32e9.
  const double d = parse_double(text);
  if (d < 0 || d != std::floor(d) || d > 1.8e19) {
    fail(ErrorCode::kParse,
         "not a non-negative integer: '" + std::string(text) + "'");
  }
  return static_cast<uint64_t>(d);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path + "'");
}

std::string_view trim(std::string_view text) {
  const char* ws = " \t\r\n";
  const auto first = text.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(ws);
  return text.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t pos = text.find(sep, start);
    out.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

KeyValueDoc KeyValueDoc::parse(std::string_view text,
                               std::string_view expected_header) {
  KeyValueDoc doc;
  bool seen_header = false;
  int line_no = 0;
  for (std::string_view raw : split(text, '\n')) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) {
      raw = raw.substr(0, hash);
    }
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (!seen_header) {
      if (line != expected_header) {
        fail(ErrorCode::kVersionMismatch,
             "expected header '" + std::string(expected_header) +
                 "', found '" + std::string(line) + "'");
      }
      doc.header_ = std::string(line);
      seen_header = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kParse,
           "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) {
      fail(ErrorCode::kParse, "line " + std::to_string(line_no) + ": empty key");
    }
    if (!doc.values_.emplace(key, value).second) {
      fail(ErrorCode::kParse, "duplicate key '" + key + "'");
    }
  }
  if (!seen_header) {
    fail(ErrorCode::kVersionMismatch,
         "missing header '" + std::string(expected_header) + "'");
  }
  return doc;
}

bool KeyValueDoc::has(const std::string& key) const {
  return values_.count(key) != 0;
}

std::string KeyValueDoc::take_raw(const std::string& key) {
  auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorCode::kParse, "missing key '" + key + "'");
  std::string value = std::move(it->second);
  values_.erase(it);
  return value;
}

std::string KeyValueDoc::take_string(const std::string& key) {
  return take_raw(key);
}

double KeyValueDoc::take_double(const std::string& key) {
  const std::string raw = take_raw(key);
  try {
    return parse_double(raw);
  } catch (const Error& e) {
    fail(ErrorCode::kParse, "key '" + key + "': " + e.what());
  }
}

uint64_t KeyValueDoc::take_u64(const std::string& key) {
  const std::string raw = take_raw(key);
  try {
    return parse_u64(raw);
  } catch (const Error& e) {
    fail(ErrorCode::kParse, "key '" + key + "': " + e.what());
  }
}

bool KeyValueDoc::take_bool(const std::string& key) {
  const std::string raw = take_raw(key);
  if (raw == "true" || raw == "1") return true;
  if (raw == "false" || raw == "0") return false;
  fail(ErrorCode::kParse, "key '" + key + "': expected true/false");
}

Rational KeyValueDoc::take_rational(const std::string& key) {
  const std::string raw = take_raw(key);
  try {
    return Rational::parse(raw);
  } catch (const Error& e) {
    fail(ErrorCode::kParse, "key '" + key + "': " + e.what());
  }
}

std::vector<double> KeyValueDoc::take_double_list(const std::string& key) {
  const std::string raw = take_raw(key);
  std::vector<double> out;
  for (std::string_view item : split(raw, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_double(item));
  }
  return out;
}

double KeyValueDoc::take_double_or(const std::string& key, double fallback) {
  return has(key) ? take_double(key) : fallback;
}

uint64_t KeyValueDoc::take_u64_or(const std::string& key, uint64_t fallback) {
  return has(key) ? take_u64(key) : fallback;
}

bool KeyValueDoc::take_bool_or(const std::string& key, bool fallback) {
  return has(key) ? take_bool(key) : fallback;
}

void KeyValueDoc::expect_consumed() const {
  if (values_.empty()) return;
  std::string keys;
  for (const auto& [k, v] : values_) keys += (keys.empty() ? "" : ", ") + k;
  fail(ErrorCode::kParse, "unknown key(s): " + keys);
}

}  // namespace pshard
