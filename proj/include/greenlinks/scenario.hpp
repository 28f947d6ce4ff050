#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "greenlinks/simcore.hpp"

namespace greenlinks {

/// A scenario file problem, anchored to the line that caused it.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& source, int line, const std::string& message)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + message),
        line_(line),
        message_(message) {}

  [[nodiscard]] int line() const noexcept { return line_; }
  [[nodiscard]] const std::string& message() const noexcept { return message_; }

 private:
  int line_;
  std::string message_;
};

/// Parses and validates a scenario document (schema in docs/scenario.md).
/// Unknown keys are errors. Throws ScenarioError.
[[nodiscard]] simcore::Scenario parse_scenario(std::string_view text,
                                               const std::string& source = "<scenario>");
/// Reads `path` and parses it; a missing file is a ScenarioError at line 0.
[[nodiscard]] simcore::Scenario load_scenario(const std::filesystem::path& path);

}  // namespace greenlinks
