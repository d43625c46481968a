// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ficd/common.hpp"

namespace ficd {

// Shortest text that parses back to the identical double.
std::string format_double(double value);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);
std::uint64_t parse_u64(std::string_view text);
bool parse_bool(std::string_view text);

// Vectors are comma separated; matrix rows are separated by ';'.
std::string format_vector(const Vector& v);
std::string format_matrix(const Matrix& m);
Vector parse_vector(std::string_view text);
Matrix parse_matrix(std::string_view text);
std::vector<int> parse_int_list(std::string_view text);

std::string_view trim(std::string_view text);

/// Flat "key = value" document. Lines starting with '#' are comments; keys
/// are dotted paths such as sampler.strategy. Later assignments win.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, std::string_view origin = "<text>");
  static KeyValues load(const std::string& path);

  void set(const std::string& key, std::string value);
  /// Copies every entry of other over this one.
  void merge(const KeyValues& other);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> find(const std::string& key) const;
  /// Throws ConfigError naming the key when absent.
  const std::string& at(const std::string& key) const;

  // Typed getters: conversion failures become ConfigError naming the key.
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  Vector get_vector(const std::string& key) const;
  Matrix get_matrix(const std::string& key) const;

  /// Keys with the given prefix, in sorted order.
  std::vector<std::string> keys_with_prefix(std::string_view prefix) const;
  const std::map<std::string, std::string>& entries() const { return values_; }

  void write(std::ostream& out) const;
  std::string to_string() const;

 private:
  template <typename Fn>
  auto convert(const std::string& key, Fn&& fn) const;

  std::map<std::string, std::string> values_;
};

}  // namespace ficd
