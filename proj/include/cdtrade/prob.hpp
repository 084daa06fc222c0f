#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cdtrade {

// Masses below this are treated as exact zero before taking logs.
inline constexpr double kUnderflowFloor = 1e-300;

class ProbVec {
 public:
  ProbVec() = default;
  // Throws ValidationError unless entries are >= 0 and sum to 1 within tol.
  explicit ProbVec(std::vector<double> p, double tol = 1e-9);

  static ProbVec uniform(std::size_t n);

  std::size_t size() const { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  const std::vector<double>& values() const { return p_; }
  auto begin() const { return p_.begin(); }
  auto end() const { return p_.end(); }

 private:
  std::vector<double> p_;
};

struct Normalized {
  ProbVec vec;
  bool degenerate = false;  // uniform fallback was used
};

Normalized normalize(std::span<const double> v);

// Normalizes a raw row in place. Returns true when the uniform fallback was used.
// A row whose sum is already 1 up to rounding is left untouched, which makes
// repeated normalization exactly idempotent.
bool normalize_in_place(std::span<double> row);

// Dense row-major matrix, used for distortion tables.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

// Stochastic kernel: rows indexed by a flattened (row-major) condition tuple.
class CondDist {
 public:
  CondDist() = default;
  CondDist(std::vector<std::string> cond_labels, std::vector<std::size_t> cond_shape,
           std::string out_label, std::size_t out_size, std::vector<double> data);

  static CondDist uniform(std::vector<std::string> cond_labels,
                          std::vector<std::size_t> cond_shape, std::string out_label,
                          std::size_t out_size);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  double operator()(std::size_t r, std::size_t k) const { return data_[r * cols_ + k]; }
  double& operator()(std::size_t r, std::size_t k) { return data_[r * cols_ + k]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }
  const std::vector<std::size_t>& cond_shape() const { return cond_shape_; }
  const std::vector<std::string>& cond_labels() const { return cond_labels_; }
  const std::string& out_label() const { return out_label_; }

  // Largest deviation from row-stochasticity (negative mass or |sum-1|).
  double stochastic_error() const;
  // Throws ValidationError naming `what` if stochastic_error() > tol.
  void validate(double tol, const std::string& what) const;

  bool operator==(const CondDist&) const = default;

 private:
  std::vector<std::string> cond_labels_;
  std::vector<std::size_t> cond_shape_;
  std::string out_label_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Factor over a subset of the joint's axes, values row-major in `axes` order.
struct Factor {
  std::vector<std::string> axes;
  std::vector<double> values;
};

class JointTensor {
 public:
  JointTensor() = default;
  JointTensor(std::vector<std::string> labels, std::vector<std::size_t> shape,
              std::vector<double> values);

  // Pointwise product of factors over the full axis set.
  static JointTensor from_factors(std::vector<std::string> labels,
                                  std::vector<std::size_t> shape,
                                  const std::vector<Factor>& factors);

  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::size_t>& shape() const { return shape_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double total() const;

  std::size_t axis(const std::string& label) const;
  std::size_t extent(const std::string& label) const { return shape_[axis(label)]; }

  // Sum out every axis not in `keep`; result axes follow the order of `keep`.
  JointTensor marginal(const std::vector<std::string>& keep) const;

  // p(child | parents). Rows whose parent event has zero mass come back uniform.
  CondDist conditional(const std::vector<std::string>& child,
                       const std::vector<std::string>& parents) const;

 private:
  std::vector<std::string> labels_;
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

double entropy(const JointTensor& joint, const std::vector<std::string>& axes);
double mutual_information(const JointTensor& joint, const std::vector<std::string>& a,
                          const std::vector<std::string>& b);
// I(A;B|C) = I(A;B,C) - I(A;C)
double conditional_mutual_information(const JointTensor& joint,
                                      const std::vector<std::string>& a,
                                      const std::vector<std::string>& b,
                                      const std::vector<std::string>& c);
// joint must have exactly two axes (s, s_hat) matching d's shape.
double expected_distortion(const JointTensor& joint_s_shat, const Matrix& d);

// Dense tensor guard. Default 1e7 elements, override with CDTRADE_MAX_TENSOR.
std::size_t max_tensor_elements();
void check_tensor_size(double elements, const std::string& what);

// x*log(x) with the 0*log0 = 0 convention.

inline double xlogx(double x) { return x > kUnderflowFloor ? x * std::log(x) : 0.0; }

}  // namespace cdtrade
