#include "psearch/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "psearch/error.hpp"

namespace psearch {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::kDimensionMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  // Four fixed lanes: order of accumulation is the same on every call.
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void axpy(double s, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) {
    throw Error(Errc::kDimensionMismatch,
                std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  }
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

Embedding Embedding::normalized(std::span<const double> v) {
  if (v.empty()) throw Error(Errc::kEmptyInput, "cannot normalize empty vector");
  if (!all_finite(v)) throw Error(Errc::kNonFiniteFunction, "non-finite component");
  const double n = norm2(v);
  if (!(n >= kZeroNorm)) throw Error(Errc::kZeroVector, "norm below 1e-12");
  Vec out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return Embedding(std::move(out));
}

Embedding Embedding::from_unit(Vec v, double tol) {
  if (v.empty()) throw Error(Errc::kEmptyInput, "empty embedding");
  if (!all_finite(v)) throw Error(Errc::kNonFiniteFunction, "non-finite component");
  const double n = norm2(v);
  if (std::abs(n - 1.0) > tol) {
    throw Error(Errc::kInvalidParams, "vector is not unit norm: |v| = " + std::to_string(n));
  }
  return Embedding(std::move(v));
}

Embedding l2_normalize(std::span<const double> v) { return Embedding::normalized(v); }

double cosine_sim(const Embedding& a, const Embedding& b) {
  return std::clamp(dot(a.values(), b.values()), -1.0, 1.0);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a), nb = norm2(b);
  if (na < kZeroNorm || nb < kZeroNorm) throw Error(Errc::kZeroVector, "cosine of zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

Vec softmax(std::span<const double> scores) {
  if (scores.empty()) throw Error(Errc::kEmptyInput, "softmax of empty vector");
  const double mx = *std::max_element(scores.begin(), scores.end());
  Vec out(scores.size());
  double sum = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

double log_sum_exp(std::span<const double> scores) {
  if (scores.empty()) throw Error(Errc::kEmptyInput, "log-sum-exp of empty vector");
  const double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0;
  for (double s : scores) sum += std::exp(s - mx);
  return mx + std::log(sum);
}

double check_gradient(const ScalarFn& f, std::span<const double> x,
                      std::span<const double> analytic, double h) {
  if (x.size() != analytic.size()) {
    throw Error(Errc::kDimensionMismatch, "gradient length differs from x");
  }
  if (!(h >= 1e-7 && h <= 1e-4)) {
    throw Error(Errc::kInvalidParams, "finite-difference step outside [1e-7, 1e-4]");
  }
  Vec probe(x.begin(), x.end());
  double worst = 0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double fp = f(probe);
    probe[i] = saved - h;
    const double fm = f(probe);
    probe[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw Error(Errc::kNonFiniteFunction, "f is not finite near x[" + std::to_string(i) + "]");
    }
    const double fd = (fp - fm) / (2 * h);
    worst = std::max(worst, std::abs(fd - analytic[i]) / std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

}  // namespace psearch
