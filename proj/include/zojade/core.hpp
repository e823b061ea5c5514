#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <stdexcept>
#include <string>

namespace zojade {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Invalid user input: bad config, malformed topology, dimension mismatch.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line)
      : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// A black-box objective returned a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulated run could not continue (non-finite iterate, failed solve).
class RunAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_point(const Vector& x) {
  std::string s = "(";
  for (Index k = 0; k < x.size(); ++k) {
    if (k) s += ", ";
    s += format_double(x[k]);
  }
  return s + ")";
}

}  // namespace zojade
