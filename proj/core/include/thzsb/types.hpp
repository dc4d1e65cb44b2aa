#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace thzsb {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

// Violated operation precondition: bad shapes, non-Hermitian input where a
// Hermitian matrix is required, out-of-range arguments.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Rejected scenario or run configuration. Messages list every violated field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure inside an otherwise well-formed call. `detail` carries the
// failing leading-minor index, residual, or condition number when meaningful.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, double detail = 0.0)
      : std::runtime_error(what), detail_(detail) {}
  double detail() const { return detail_; }

 private:
  double detail_;
};

}  // namespace thzsb
