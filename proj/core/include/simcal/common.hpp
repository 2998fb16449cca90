#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace simcal {

using cplx = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration document does not match the schema. `path()` names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Values are individually well-formed but mutually inconsistent (e.g. K > fft_size).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Estimation could not produce a result (flat objective, solver failure, missing inputs).
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Wraps a phase to (-pi, pi].
inline double wrap_phase(double phase) {
  double wrapped = std::remainder(phase, kTwoPi);
  if (wrapped <= -kPi) wrapped += kTwoPi;
  return wrapped;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

/// exp(j * phase)
inline cplx expj(double phase) { return std::polar(1.0, phase); }

}  // namespace simcal
