#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace aia {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolArray = Eigen::Array<bool, Eigen::Dynamic, 1>;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Rng = std::mt19937_64;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or dimension mismatch between operands.
struct ShapeError : Error {
  using Error::Error;
};

// Bad user-supplied configuration (CLI exit code 1).
struct ConfigError : Error {
  using Error::Error;
};

// File I/O or on-disk format problems (CLI exit code 2).
struct IoError : Error {
  using Error::Error;
};

inline std::string shape_str(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "," + std::to_string(m.cols()) + "]";
}

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
  return "[" + std::to_string(rows) + "," + std::to_string(cols) + "]";
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

inline double gaussian(Rng& rng, double sigma) {
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

inline Matrix random_uniform_matrix(Rng& rng, Eigen::Index rows,
                                    Eigen::Index cols, double bound) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uniform_real(rng, -bound, bound);
  return m;
}

}  // namespace aia
