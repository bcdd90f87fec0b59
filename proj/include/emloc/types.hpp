#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace emloc {

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

constexpr double kSpeedOfLight = 299792458.0;          // m/s
constexpr double kFreeSpaceImpedance = 376.73031346177066; // ohm, eta = c0 * 4*pi*1e-7

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

// Intermediate matrix failed the condition check (rcond < 1/threshold).
class singular_matrix_error : public std::runtime_error {
 public:
  explicit singular_matrix_error(const std::string& matrix_name)
      : std::runtime_error("singular or ill-conditioned matrix: " + matrix_name),
        matrix_name_(matrix_name) {}
  const std::string& matrix_name() const { return matrix_name_; }

 private:
  std::string matrix_name_;
};

// Geometry the impedance model cannot evaluate (overlapping collinear dipoles).
class unsupported_geometry_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sampling regime outside the implemented formulation (needs N > T).
class unsupported_regime_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fisher information not invertible for the requested configuration.
class unidentifiable_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Optimizer objective not finite at the initial point.
class invalid_init_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace emloc
