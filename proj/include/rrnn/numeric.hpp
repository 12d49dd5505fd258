#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rrnn {

using Vec = std::vector<double>;

/// Shortest decimal string that parses back to the same double.
inline std::string double_to_string(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Branch-stable logistic function. Output is clamped into the open
/// interval (0,1) so callers can rely on it even where exp() under- or
/// overflows.
inline double sigmoid(double x) {
  double s;
  if (x >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  const double lo = std::numeric_limits<double>::denorm_min();
  const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return s < lo ? lo : (s > hi ? hi : s);
}

/// log(1 + exp(-label*score)) without overflow. label must be +1 or -1.
inline double logistic_loss(double score, int label) {
  if (label != 1 && label != -1) throw std::invalid_argument("logistic_loss: label must be +1 or -1");
  const double margin = static_cast<double>(label) * score;
  if (margin >= 0.0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> v) {
  return std::sqrt(dot(v, v));
}

/// Central-difference gradient, (f(p+h*e_i) - f(p-h*e_i)) / 2h per
/// coordinate. This is the oracle the gradient tests compare against; it
/// must stay independent of any analytic backward pass.
inline Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be positive");
  Vec grad(params.size());
  Vec p = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    p[i] = params[i] + h;
    const double fp = f(p);
    p[i] = params[i] - h;
    const double fm = f(p);
    p[i] = params[i];
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace rrnn
