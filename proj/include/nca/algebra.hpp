#pragma once
// Finite-dimensional associative algebras given by structure constants, with
// traces, ideals, unitalization, tensor products, and a generic basis-keyed
// algebra interface shared with the truncated tensor algebra (xcomplex).

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nca/linalg.hpp"
#include "nca/scalar.hpp"

namespace nca {

// ---------------------------------------------------------------------------
// Generic algebra interface.
//
// A basis key is a small vector<int>; multiplication of two basis keys returns
// a sparse linear combination of keys. The empty key never appears: adjoined
// units are handled by the forms engine (position 0 of a tensor may be the
// explicit "unit" marker). key_degree is the grading used for truncation
// (0 for plain finite algebras, the form degree for tensor algebras).
// ---------------------------------------------------------------------------
using GKey = std::vector<int>;
using GElem = SparseVec<GKey>;

class GenAlgebra {
 public:
  virtual ~GenAlgebra() = default;
  virtual GElem mul(const GKey& a, const GKey& b) const = 0;
  virtual int key_degree(const GKey&) const { return 0; }
  // Finite enumeration of basis keys, when available (used by quotient caches).
  virtual std::vector<GKey> basis_keys() const {
    throw std::logic_error("basis enumeration not available for this algebra");
  }
};

GElem gmul(const GenAlgebra& alg, const GElem& a, const GElem& b);

// ---------------------------------------------------------------------------
// Finite algebras by structure constants.
// ---------------------------------------------------------------------------
using Elem = SparseVec<int>;  // coordinates in the basis

struct TraceSpec {
  int p = 1;                   // summability degree: trace is used on p-fold products
  std::vector<Scalar> values;  // value on each basis element
  Scalar operator()(const Elem& x) const;
};

struct IdealSpec {
  std::vector<int> basis;  // spanning subset of basis indices
  bool contains_key(int k) const;
};

class FiniteAlgebra {
 public:
  std::vector<std::string> names;
  // mult[i][j] = coordinates of (basis_i * basis_j)
  std::vector<std::vector<Elem>> mult;
  std::optional<Elem> unit;
  std::vector<TraceSpec> traces;
  std::vector<IdealSpec> ideals;

  int dim() const { return (int)mult.size(); }
  Elem mul(const Elem& x, const Elem& y) const;
  Elem mul_keys(int i, int j) const { return mult[i][j]; }

  // Throws std::logic_error naming the failing basis triple/element if the
  // multiplication is not associative or the declared unit is not an identity.
  void validate() const;

  // Echelon basis of the n-th power of ideal `id` (n >= 1), cached.
  const SubspaceBasis<int>& ideal_power(int id, int n) const;
  bool in_ideal_power(const Elem& x, int id, int n) const;

 private:
  mutable std::vector<std::vector<std::unique_ptr<SubspaceBasis<int>>>> power_cache_;
};

// M_n over Scalar; basis e_ij at index i*n+j; unit; TraceSpec p=1 matrix trace.
FiniteAlgebra make_matrix_algebra(int n);

// A+ = C (adjoined unit) + A. The new unit is the LAST basis index (dim A);
// original indices are unchanged and span ideal 0 of the result.
FiniteAlgebra unitalize(const FiniteAlgebra& a);

// Basis = pairs (i,j) -> i*dimB + j, componentwise product. If both factors
// carry a first TraceSpec, the product trace (values multiply) is installed
// with summability degree max(pA, pB).
FiniteAlgebra tensor_product(const FiniteAlgebra& a, const FiniteAlgebra& b);

// Direct sum A (+) B with componentwise product.
FiniteAlgebra direct_sum(const FiniteAlgebra& a, const FiniteAlgebra& b);

// Adapter exposing a FiniteAlgebra through the generic interface (keys {i}).
class FiniteAsGen : public GenAlgebra {
 public:
  explicit FiniteAsGen(const FiniteAlgebra& a) : a_(&a) {}
  GElem mul(const GKey& x, const GKey& y) const override;
  std::vector<GKey> basis_keys() const override {
    std::vector<GKey> out;
    for (int i = 0; i < a_->dim(); ++i) out.push_back(GKey{i});
    return out;
  }
  const FiniteAlgebra& base() const { return *a_; }

 private:
  const FiniteAlgebra* a_;
};

// ---------------------------------------------------------------------------
// Z2-graded super construction over a generic algebra M.
//
// Even parity: Ms = M2(M), basis keys [r, c, mkey...], F = offdiagonal ones,
//   grading = matrix parity (diagonal even). Elements of Ms+ are diagonal.
// Odd parity: Ms = C1 (x) M2(M), keys [eps, r, c, mkey...] with eps in {0,1},
//   F = eps * diag(1,-1), grading = eps (the matrix part is trivially graded).
//
// The supertrace tr_s maps into M: even case diag(a,b) -> a - b; odd case
// eps-component diagonal -> -sqrt(2i) * (a + b), eps-free component -> 0.
// ---------------------------------------------------------------------------
enum class Parity { Even, Odd };

class SuperAlg : public GenAlgebra {
 public:
  SuperAlg(const GenAlgebra& m, Parity parity) : m_(&m), parity_(parity) {}

  Parity parity() const { return parity_; }
  const GenAlgebra& inner() const { return *m_; }

  GElem mul(const GKey& a, const GKey& b) const override;
  int key_degree(const GKey& k) const override;
  std::vector<GKey> basis_keys() const override;

  // Z2-grading of a basis key (0 even, 1 odd).
  int key_parity(const GKey& k) const;

  // Key juggling: super key = prefix + inner key.
  int prefix_len() const { return parity_ == Parity::Even ? 2 : 3; }
  GKey make_key(int eps, int r, int c, const GKey& inner) const;
  GKey inner_key(const GKey& k) const;

  // Left multiplication by the multiplier F (F^2 = 1) and graded commutator.
  GElem F_left(const GElem& x) const;
  GElem F_right(const GElem& x) const;
  GElem F_comm(const GElem& x) const;  // F x - (-1)^{|x|} x F, per basis key

  // Supertrace into the inner algebra M.
  SparseVec<GKey> supertrace(const GElem& x) const;  // keys of M
  // Scalar supertrace coefficient of a single super key (the matrix/eps part
  // only): returns (coefficient, inner key) pairs folded into a sparse M-elem.

  // Ms+ embedding helpers: diag(x, y) for the even case; eps-free diagonal
  // embedding a + F b style handled by callers.
  GKey plus_key_diag(int which, const GKey& inner) const;  // which in {0,1}

 private:
  const GenAlgebra* m_;
  Parity parity_;
};

}  // namespace nca
