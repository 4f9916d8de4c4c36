#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace bsnoma {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

/// Raised when a vector/matrix dimension is zero or does not match its partner.
class InvalidDimension : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A channel or matrix carries no energy where some is required
/// (all-zero beamspace column, zero matrix handed to the SVD routine).
class DegenerateChannel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidGrouping : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Zero-forcing could not be formed. The harness drops the trial and keeps
/// the condition estimate for the record.
class PrecodingFailure : public std::runtime_error {
 public:
  PrecodingFailure(const std::string& what, double condition)
      : std::runtime_error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

}  // namespace bsnoma
