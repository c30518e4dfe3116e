#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace r0panel {

/// Bad input data or configuration. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Estimation failure (rank deficiency, zero degrees of freedom, ...). Exit code 1.
class EstimationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class RankDeficiencyError : public EstimationError {
public:
  RankDeficiencyError(std::string msg, std::vector<std::string> columns)
      : EstimationError(std::move(msg)), columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const noexcept { return columns_; }

private:
  std::vector<std::string> columns_;
};

/// One non-fatal record (dropped region, floored revision, rejected row...).
struct Warning {
  std::string kind;
  std::string region;
  std::string date;
  std::optional<long> line;
  std::string message;
};

using Warnings = std::vector<Warning>;

} // namespace r0panel
