#include "cdtrade/prob.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "cdtrade/errors.hpp"

namespace cdtrade {

std::string flags_to_string(std::uint32_t flags) {
  static const std::pair<std::uint32_t, const char*> names[] = {
      {kDegenerateRow, "DegenerateRow"},
      {kMaxIters, "MaxIters"},
      {kNumericalUnderflow, "NumericalUnderflow"},
      {kStrategyTruncated, "StrategyTruncated"},
  };
  std::string out;
  for (auto [bit, name] : names) {
    if (flags & bit) {
      if (!out.empty()) out += '|';
      out += name;
    }
  }
  return out;
}

ProbVec::ProbVec(std::vector<double> p, double tol) : p_(std::move(p)) {
  if (p_.empty()) throw ValidationError("ProbVec: empty");
  double s = 0.0;
  for (double x : p_) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("ProbVec: negative or non-finite entry");
    s += x;
  }
  if (std::abs(s - 1.0) > tol) throw ValidationError("ProbVec: entries sum to " + std::to_string(s));
}

ProbVec ProbVec::uniform(std::size_t n) {
  if (n == 0) throw ValidationError("ProbVec: empty");
  return ProbVec(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

bool normalize_in_place(std::span<double> row) {
  const std::size_t n = row.size();
  double s = 0.0;
  for (double x : row) s += x;
  if (!(s > kUnderflowFloor) || !std::isfinite(s)) {
    std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(n));
    return true;
  }
  // already unit-sum up to accumulated rounding; leave the bits alone
  if (std::abs(s - 1.0) <= 4e-16 * static_cast<double>(n)) return false;
  for (double& x : row) x /= s;
  return false;
}

Normalized normalize(std::span<const double> v) {
  if (v.empty()) throw ValidationError("normalize: empty vector");
  for (double x : v)
    if (!(x >= 0.0)) throw ValidationError("normalize: negative or NaN entry");
  std::vector<double> out(v.begin(), v.end());
  bool degenerate = normalize_in_place(out);
  return {ProbVec(std::move(out)), degenerate};
}

CondDist::CondDist(std::vector<std::string> cond_labels, std::vector<std::size_t> cond_shape,
                   std::string out_label, std::size_t out_size, std::vector<double> data)
    : cond_labels_(std::move(cond_labels)),
      cond_shape_(std::move(cond_shape)),
      out_label_(std::move(out_label)),
      cols_(out_size),
      data_(std::move(data)) {
  if (cond_labels_.size() != cond_shape_.size())
    throw ValidationError("CondDist: label/shape count mismatch");
  rows_ = 1;
  for (auto n : cond_shape_) rows_ *= n;
  if (rows_ * cols_ != data_.size())
    throw ValidationError("CondDist '" + out_label_ + "': shape product " +
                          std::to_string(rows_ * cols_) + " != data size " +
                          std::to_string(data_.size()));
}

CondDist CondDist::uniform(std::vector<std::string> cond_labels,
                           std::vector<std::size_t> cond_shape, std::string out_label,
                           std::size_t out_size) {
  std::size_t rows = 1;
  for (auto n : cond_shape) rows *= n;
  if (out_size == 0) throw ValidationError("CondDist: empty output alphabet");
  return CondDist(std::move(cond_labels), std::move(cond_shape), std::move(out_label), out_size,
                  std::vector<double>(rows * out_size, 1.0 / static_cast<double>(out_size)));
}

double CondDist::stochastic_error() const {
  double worst = 0.0;
  for (std::size_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (double x : row(r)) {
      if (!std::isfinite(x)) return INFINITY;
      if (x < 0) worst = std::max(worst, -x);
      s += x;
    }
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

void CondDist::validate(double tol, const std::string& what) const {
  if (cols_ == 0) throw ValidationError(what + ": empty output alphabet");
  double e = stochastic_error();
  if (!(e <= tol))
    throw ValidationError(what + ": not row-stochastic (error " + std::to_string(e) + ")");
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> strides_of(const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> st(shape.size());
  std::size_t acc = 1;
  for (std::size_t i = shape.size(); i-- > 0;) {
    st[i] = acc;
    acc *= shape[i];
  }
  return st;
}

// Walk every multi-index of `shape`, maintaining one linear offset per
// stride set. fn(flat_index, offsets).
template <class Fn>
void odometer(const std::vector<std::size_t>& shape,
              const std::vector<std::vector<std::size_t>>& stride_sets, Fn&& fn) {
  const std::size_t nd = shape.size();
  std::size_t total = 1;
  for (auto n : shape) total *= n;
  std::vector<std::size_t> idx(nd, 0);
  std::vector<std::size_t> off(stride_sets.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    fn(flat, off);
    for (std::size_t d = nd; d-- > 0;) {
      if (++idx[d] < shape[d]) {
        for (std::size_t k = 0; k < off.size(); ++k) off[k] += stride_sets[k][d];
        break;
      }
      for (std::size_t k = 0; k < off.size(); ++k) off[k] -= stride_sets[k][d] * (shape[d] - 1);
      idx[d] = 0;
    }
  }
}

}  // namespace

JointTensor::JointTensor(std::vector<std::string> labels, std::vector<std::size_t> shape,
                         std::vector<double> values)
    : labels_(std::move(labels)), shape_(std::move(shape)), values_(std::move(values)) {
  if (labels_.size() != shape_.size()) throw ValidationError("JointTensor: label/shape mismatch");
  std::size_t n = 1;
  for (auto s : shape_) n *= s;
  if (n != values_.size()) throw ValidationError("JointTensor: value count mismatch");
  for (std::size_t i = 0; i < labels_.size(); ++i)
    for (std::size_t j = i + 1; j < labels_.size(); ++j)
      if (labels_[i] == labels_[j]) throw ValidationError("JointTensor: duplicate axis " + labels_[i]);
}

JointTensor JointTensor::from_factors(std::vector<std::string> labels,
                                      std::vector<std::size_t> shape,
                                      const std::vector<Factor>& factors) {
  double n = 1;
  for (auto s : shape) n *= static_cast<double>(s);
  check_tensor_size(n, "joint from factors");
  JointTensor probe(labels, shape, std::vector<double>(static_cast<std::size_t>(n), 0.0));

  std::vector<std::vector<std::size_t>> stride_sets;
  for (const auto& f : factors) {
    std::vector<std::size_t> fshape;
    for (const auto& a : f.axes) fshape.push_back(shape[probe.axis(a)]);
    auto fst = strides_of(fshape);
    std::size_t fsize = 1;
    for (auto s : fshape) fsize *= s;
    if (fsize != f.values.size()) throw ValidationError("Factor: value count mismatch");
    std::vector<std::size_t> st(shape.size(), 0);
    for (std::size_t k = 0; k < f.axes.size(); ++k) st[probe.axis(f.axes[k])] = fst[k];
    stride_sets.push_back(std::move(st));
  }
  auto& vals = probe.values_;
  odometer(shape, stride_sets, [&](std::size_t flat, const std::vector<std::size_t>& off) {
    double p = 1.0;
    for (std::size_t k = 0; k < factors.size(); ++k) p *= factors[k].values[off[k]];
    vals[flat] = p;
  });
  return probe;
}

double JointTensor::total() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0);
}

std::size_t JointTensor::axis(const std::string& label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return i;
  throw ValidationError("JointTensor: no axis '" + label + "'");
}

JointTensor JointTensor::marginal(const std::vector<std::string>& keep) const {
  std::vector<std::size_t> kshape;
  for (const auto& k : keep) kshape.push_back(shape_[axis(k)]);
  auto kst = strides_of(kshape);
  std::vector<std::size_t> st(shape_.size(), 0);
  for (std::size_t k = 0; k < keep.size(); ++k) st[axis(keep[k])] = kst[k];
  std::size_t n = 1;
  for (auto s : kshape) n *= s;
  std::vector<double> out(n, 0.0);
  odometer(shape_, {st}, [&](std::size_t flat, const std::vector<std::size_t>& off) {
    out[off[0]] += values_[flat];
  });
  return JointTensor(keep, kshape, std::move(out));
}

CondDist JointTensor::conditional(const std::vector<std::string>& child,
                                  const std::vector<std::string>& parents) const {
  std::vector<std::string> both = parents;
  both.insert(both.end(), child.begin(), child.end());
  JointTensor m = marginal(both);
  std::vector<std::size_t> pshape(m.shape_.begin(), m.shape_.begin() + parents.size());
  std::size_t cols = 1;
  for (std::size_t i = parents.size(); i < both.size(); ++i) cols *= m.shape_[i];
  std::string out_label;
  for (const auto& c : child) out_label += (out_label.empty() ? "" : ",") + c;
  CondDist cd(parents, pshape, out_label, cols, std::move(m.values_));
  for (std::size_t r = 0; r < cd.rows(); ++r) normalize_in_place(cd.row(r));
  return cd;
}

// ---------------------------------------------------------------------------

double entropy(const JointTensor& joint, const std::vector<std::string>& axes) {
  JointTensor m = joint.marginal(axes);
  double h = 0.0;
  for (double p : m.values()) h -= xlogx(p);
  return h;
}

double mutual_information(const JointTensor& joint, const std::vector<std::string>& a,
                          const std::vector<std::string>& b) {
  std::vector<std::string> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  JointTensor m = joint.marginal(ab);
  std::size_t na = 1;
  for (std::size_t i = 0; i < a.size(); ++i) na *= m.shape()[i];
  const std::size_t nb = m.size() / na;
  const auto& v = m.values();
  std::vector<double> pa(na, 0.0), pb(nb, 0.0);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      pa[i] += v[i * nb + j];
      pb[j] += v[i * nb + j];
    }
  double mi = 0.0;
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      double p = v[i * nb + j];
      // logs separately: pa * pb can underflow even when p does not
      if (p > kUnderflowFloor) mi += p * (std::log(p) - std::log(pa[i]) - std::log(pb[j]));
    }
  return mi;
}

double conditional_mutual_information(const JointTensor& joint,
                                      const std::vector<std::string>& a,
                                      const std::vector<std::string>& b,
                                      const std::vector<std::string>& c) {
  if (c.empty()) return mutual_information(joint, a, b);
  std::vector<std::string> bc = b;
  bc.insert(bc.end(), c.begin(), c.end());
  return mutual_information(joint, a, bc) - mutual_information(joint, a, c);
}

double expected_distortion(const JointTensor& joint_s_shat, const Matrix& d) {
  const auto& sh = joint_s_shat.shape();
  if (sh.size() != 2 || sh[0] != d.rows || sh[1] != d.cols)
    throw ValidationError("expected_distortion: joint shape does not match distortion matrix");
  double e = 0.0;
  for (std::size_t i = 0; i < d.data.size(); ++i) e += joint_s_shat.values()[i] * d.data[i];
  return e;
}

std::size_t max_tensor_elements() {
  if (const char* env = std::getenv("CDTRADE_MAX_TENSOR")) {
    char* end = nullptr;
    double v = std::strtod(env, &end);
    if (end != env && v >= 1) return static_cast<std::size_t>(v);
  }
  return 10'000'000;
}

void check_tensor_size(double elements, const std::string& what) {
  if (elements > static_cast<double>(max_tensor_elements()))
    throw TooLarge(what + ": dense tensor of " + std::to_string(static_cast<long long>(elements)) +
                   " elements exceeds limit " + std::to_string(max_tensor_elements()) +
                   " (set CDTRADE_MAX_TENSOR to raise it)");
}

}  // namespace cdtrade
