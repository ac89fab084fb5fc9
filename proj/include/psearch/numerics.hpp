#ifndef PSEARCH_NUMERICS_HPP_
#define PSEARCH_NUMERICS_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace psearch {

using Vec = std::vector<double>;

// Norm below which a vector is treated as zero.
inline constexpr double kZeroNorm = 1e-12;

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
// y += s * x
void axpy(double s, std::span<const double> x, std::span<double> y);
bool all_finite(std::span<const double> v);

// A feature vector of unit Euclidean norm. Only constructible through
// normalization or an explicit, checked claim of unit norm.
class Embedding {
 public:
  Embedding() = default;

  static Embedding normalized(std::span<const double> v);
  // Accepts v as-is after checking |v| = 1 within tol.
  static Embedding from_unit(Vec v, double tol = 1e-6);

  std::span<const double> values() const { return values_; }
  const Vec& vec() const { return values_; }
  std::size_t dim() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  explicit Embedding(Vec v) : values_(std::move(v)) {}
  Vec values_;
};

Embedding l2_normalize(std::span<const double> v);

// Inner product of two unit vectors, clamped to [-1, 1].
double cosine_sim(const Embedding& a, const Embedding& b);

// Plain cosine of two arbitrary nonzero vectors.
double cosine(std::span<const double> a, std::span<const double> b);

// Max-subtracted softmax.
Vec softmax(std::span<const double> scores);

// log(sum(exp(scores))) with max subtraction.
double log_sum_exp(std::span<const double> scores);

using ScalarFn = std::function<double(std::span<const double>)>;

// Central-difference check. Returns
//   max_i |fd_i - analytic_i| / max(1, |analytic_i|).
double check_gradient(const ScalarFn& f, std::span<const double> x,
                      std::span<const double> analytic, double h = 1e-6);

}  // namespace psearch

#endif  // PSEARCH_NUMERICS_HPP_
