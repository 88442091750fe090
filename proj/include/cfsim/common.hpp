#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cfsim {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Error taxonomy. The C API maps these one-to-one onto status codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct CapacityError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct PipelineError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }
inline double dbm_to_watts(double dbm) { return 1e-3 * db_to_linear(dbm); }
inline double watts_to_dbm(double w) { return linear_to_db(w / 1e-3); }
inline double mw_to_watts(double mw) { return 1e-3 * mw; }

// Dense (user, AP) grid of per-link values.
template <typename T>
struct PerLink {
  int m_aps = 0;
  int k_users = 0;
  std::vector<T> v;

  PerLink() = default;
  PerLink(int m, int k) : m_aps(m), k_users(k), v(m * k) {}

  const T& of(int k, int m) const { return v[m * k_users + k]; }
  T& of(int k, int m) { return v[m * k_users + k]; }
};

// Warnings (PSD projection fallback, ill-conditioned solves, outage users, ...)
// go through a replaceable sink so tests and embedders can capture them.
using LogSink = void (*)(const char* msg, void* user);
void set_log_sink(LogSink sink, void* user);
void log_warn(const std::string& msg);

}  // namespace cfsim
