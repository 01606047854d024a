#pragma once
// Exact coefficient ring: rationals extended by the formal radicals
//   i (i^2 = -1), r2 (= sqrt(2), r2^2 = 2), ri (= sqrt(i), ri^2 = i),
//   rp (= sqrt(pi), free; Laurent exponents allowed),
// plus registered scenario indeterminates with an optional monomial rewrite
// x^order -> 1 (used e.g. for a root of unity of order q).
//
// Values are canonical: a Scalar is a sorted term map monomial -> rational,
// and two Scalars are equal iff the maps are identical.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <gmpxx.h>

namespace nca {

// Registry of scenario indeterminates. Registration returns a stable id.
// order == 0 means free (no rewrite); order q >= 1 rewrites x^q -> 1.
int register_indeterminate(const std::string& name, int order = 0);
const std::string& indeterminate_name(int id);
int indeterminate_order(int id);

class Scalar {
 public:
  struct Mono {
    int ei = 0;   // exponent of i, canonical in {0,1}
    int er2 = 0;  // exponent of r2, canonical in {0,1}
    int eri = 0;  // exponent of ri, canonical in {0,1}
    int erp = 0;  // exponent of rp, any integer
    std::vector<std::pair<int, int>> ind;  // sorted (id, exponent != 0)
    auto operator<=>(const Mono&) const = default;
  };

  Scalar() = default;
  Scalar(long n) { if (n != 0) terms_[Mono{}] = mpq_class(n); }
  explicit Scalar(const mpq_class& q) { if (q != 0) terms_[Mono{}] = q; }

  static Scalar rational(long num, long den);
  static Scalar i();
  static Scalar r2();
  static Scalar ri();
  static Scalar rp();
  static Scalar sqrt_2pi_i();  // r2 * rp * ri
  static Scalar sqrt_2i();     // r2 * ri
  static Scalar indeterminate(int id, int exponent = 1);

  bool is_zero() const { return terms_.empty(); }
  bool operator==(const Scalar& o) const { return terms_ == o.terms_; }

  Scalar operator-() const;
  Scalar& operator+=(const Scalar& o);
  Scalar& operator-=(const Scalar& o);
  friend Scalar operator+(Scalar a, const Scalar& b) { return a += b; }
  friend Scalar operator-(Scalar a, const Scalar& b) { return a -= b; }
  friend Scalar operator*(const Scalar& a, const Scalar& b);
  Scalar& operator*=(const Scalar& o) { return *this = *this * o; }

  // Multiplicative inverse when one exists in the ring extended by rp^{-1}.
  // Handles any single-term value, and multi-term values whose terms share the
  // same (rp, indeterminate) monomial (8x8 rational solve over Q[i,r2,ri]).
  std::optional<Scalar> inverse() const;
  friend Scalar operator/(const Scalar& a, const Scalar& b);

  // If the value is a plain rational, return it.
  std::optional<mpq_class> as_rational() const;

  const std::map<Mono, mpq_class>& terms() const { return terms_; }
  std::string str() const;

 private:
  void insert_term(Mono m, const mpq_class& c);
  std::map<Mono, mpq_class> terms_;  // nonzero coefficients only
};

// Gamma(k/2), exact: factorial for even k, sqrt(pi)-multiple for odd k.
Scalar gamma_half(int k);

// Exact factorial as Scalar.
Scalar factorial(int n);

}  // namespace nca
