#ifndef PSEARCH_CHECKS_HPP_
#define PSEARCH_CHECKS_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "psearch/numerics.hpp"
#include "psearch/pairing.hpp"

// Self-verification suites behind `psearch check`. The reference routines here
// (direct loss formulas, brute-force AP/CMC) share no code with the fast
// paths they check.
namespace psearch::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Supplies the analytic anchor gradient of one subgroup's term.
using AnchorGradientFn = std::function<Vec(const Subgroup&)>;
Vec library_anchor_gradient(const Subgroup& s);

std::vector<CheckResult> gradient_suite(std::uint64_t seed,
                                        const AnchorGradientFn& grad = library_anchor_gradient,
                                        int configurations = 100);
std::vector<CheckResult> oracle_suite(int max_gallery = 6);
std::vector<CheckResult> invariant_suite(std::uint64_t seed, int trials = 1000);

// Reference implementations.
double reference_olp_term(std::span<const double> anchor, std::span<const double> positive,
                          const std::vector<Vec>& negatives);
double brute_force_ap(const std::vector<std::size_t>& ranked, const std::vector<char>& relevant);
bool brute_force_topk(const std::vector<std::size_t>& ranked, const std::vector<char>& relevant,
                      std::size_t k);

bool all_passed(const std::vector<CheckResult>& results);
void print_report(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace psearch::checks

#endif  // PSEARCH_CHECKS_HPP_
