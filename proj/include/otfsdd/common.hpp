// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace otfsdd {

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

// Mirrors the process exit codes of the command-line tool.
enum class ErrorKind : int {
    usage = 1,
    config = 2,
    io = 3,
    numeric = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& what) { return {ErrorKind::config, what}; }
inline Error io_error(const std::string& what) { return {ErrorKind::io, what}; }
inline Error numeric_error(const std::string& what) { return {ErrorKind::numeric, what}; }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// Squared Frobenius norm that also works on Eigen expressions.
template <typename Derived>
double energy(const Eigen::MatrixBase<Derived>& m) {
    return m.squaredNorm();
}

}  // namespace otfsdd
