#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace plants {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes do not satisfy an op's contract.
struct ShapeError : Error {
  std::string op;
  std::vector<int64_t> lhs, rhs;

  ShapeError(std::string op_, std::vector<int64_t> lhs_, std::vector<int64_t> rhs_)
      : Error(format(op_, lhs_, rhs_)), op(std::move(op_)), lhs(std::move(lhs_)), rhs(std::move(rhs_)) {}

  static std::string format(const std::string& op, const std::vector<int64_t>& a,
                            const std::vector<int64_t>& b) {
    std::ostringstream os;
    os << op << ": incompatible shapes " << shape_str(a) << " and " << shape_str(b);
    return os.str();
  }

  static std::string shape_str(const std::vector<int64_t>& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
  }
};

// Numeric-domain violations (log of non-positives, division by zero,
// non-finite values where finiteness is required).
struct DomainError : Error {
  using Error::Error;
};

// Malformed files or datasets. `line` is 1-based when it applies, 0 otherwise.
struct DataError : Error {
  int64_t line = 0;
  explicit DataError(const std::string& msg, int64_t line_ = 0) : Error(msg), line(line_) {}
};

// Generic precondition/usage violation.
struct ValueError : Error {
  using Error::Error;
};

// Period detection found nothing usable; carries the documented fallback.
struct PeriodFallbackError : Error {
  int suggested_window;
  PeriodFallbackError(const std::string& msg, int suggested)
      : Error(msg), suggested_window(suggested) {}
};

}  // namespace plants
