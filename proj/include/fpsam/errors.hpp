#pragma once

#include <stdexcept>
#include <string>

namespace fpsam {

// Malformed or unreadable input data (files, configs, indexes). The CLI maps
// this to exit code 2.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// A detector failed while mining a scene; no partial database is published.
class MiningError : public std::runtime_error {
 public:
  explicit MiningError(const std::string& what) : std::runtime_error(what) {}
};

// Drawing from a class with no stored samples.
class EmptyClassError : public std::runtime_error {
 public:
  explicit EmptyClassError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fpsam
