#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace fedat {

/// Row-major dense matrix. Batches are (samples x features), weights are
/// (fan_in x fan_out) so the flat parameter layout is row-major per layer.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Flat vector of every model parameter, layers in forward order.
using ParamVector = Eigen::VectorXd;

/// Raised for invalid arguments, shape mismatches and numerical failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Eigen::Ref<const Vector>& v) { return v.allFinite(); }

}  // namespace fedat
