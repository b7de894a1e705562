#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace windmoe {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A date or instant falls outside the configured clock-change coverage.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition or type invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Unrecoverable file-level format problem (bad header, unreadable file).
class FormatError : public Error {
 public:
  FormatError(std::string source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), source_(std::move(source)), line_(line) {}

  [[nodiscard]] const std::string& source() const noexcept { return source_; }
  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

/// Least-squares system has fewer than two distinct abscissae.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

/// Balancing stack cannot cover the requested imbalance.
class ShortfallError : public Error {
 public:
  ShortfallError(const std::string& what, double gap_mwh) : Error(what), gap_mwh_(gap_mwh) {}

  [[nodiscard]] double gap_mwh() const noexcept { return gap_mwh_; }

 private:
  double gap_mwh_;
};

}  // namespace windmoe
