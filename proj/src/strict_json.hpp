#pragma once

#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include "css/errors.hpp"
#include "json.hpp"

namespace css::detail {

// Reads an object key by key and rejects whatever was not read.
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing key '" + key + "'");
    return convert<T>(key);
  }

  template <typename T>
  void opt(const std::string& key, T& out) {
    if (j_.contains(key)) out = convert<T>(key);
  }

  const nlohmann::json& sub(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }
  }

 private:
  template <typename T>
  T convert(const std::string& key) {
    seen_.insert(key);
    const auto& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
        if (!v.is_array()) throw ConfigError("");
        for (const auto& e : v) {
          if (!e.is_number_unsigned()) throw ConfigError("");
        }
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      return v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(where_ + ": bad value for '" + key + "': " + v.dump());
    }
  }

  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace css::detail
