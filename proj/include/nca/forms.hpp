#pragma once
// Noncommutative differential forms over a generic algebra A:
//   Omega^n A = A+ (x) A^{(x)n},  basis tensor x0 dx1 ... dxn.
// A FormKey stores the tensor positions; position 0 may be the empty GKey,
// which denotes the adjoined unit of A+. Positions >= 1 are basis keys of A,
// so the representation is automatically in canonical normal form.
//
// Operators d, b, kappa, B, the graded product, the Fedosov product on even
// forms, and reduction modulo the Hodge filtration are provided. A degree cap
// (N_forms) truncates operations that overflow and records a sticky flag.

#include <mutex>

#include "nca/algebra.hpp"

namespace nca {

using FormKey = std::vector<GKey>;  // [x0, x1, ..., xn]
using Form = SparseVec<FormKey>;

inline int form_degree(const FormKey& k) { return (int)k.size() - 1; }

class FormSpace {
 public:
  explicit FormSpace(const GenAlgebra& alg, int cap = -1)
      : alg_(&alg), cap_(cap) {}

  const GenAlgebra& algebra() const { return *alg_; }
  int cap() const { return cap_; }
  bool truncation_flag() const { return truncated_; }
  void clear_truncation_flag() const { truncated_ = false; }

  // Form degree plus the inner grading of every entry (inner grading is 0 for
  // plain finite algebras; for tensor-algebra coefficients it counts the
  // coefficient degrees, which is what the truncation window must bound).
  int total_degree(const FormKey& k) const;

  // Degree-0 embeddings.
  Form unit_form() const { return Form{{FormKey{GKey{}}, Scalar(1)}}; }
  Form from_elem(const GElem& x, const Scalar& unit_coeff = Scalar(0)) const;
  // d applied to a zero-form coefficient: 1 * dx (unit components vanish).
  Form d_of_elem(const GElem& x) const;

  Form apply_d(const Form& w) const;
  Form apply_b(const Form& w) const;
  Form apply_kappa(const Form& w) const;
  Form apply_B(const Form& w) const;

  Form multiply(const Form& a, const Form& b) const;
  Form fedosov(const Form& a, const Form& b) const;  // even inputs only

  // Right/left multiplication by an algebra element (or the adjoined unit).
  Form mul_right_elem(const Form& w, const GElem& x,
                      const Scalar& unit_coeff = Scalar(0)) const;
  Form mul_left_elem(const GElem& x, const Form& w,
                     const Scalar& unit_coeff = Scalar(0)) const;
  // Append differentials: w * dx1 ... (x ranges over a sparse element of A).
  Form append_d(const Form& w, const GElem& x) const;

  Form component(const Form& w, int degree) const;        // form-degree part
  Form degree_at_most(const Form& w, int maxdeg) const;   // form-degree cut
  Form scale(const Form& w, const Scalar& c) const;

  // Reduction modulo the Hodge filtration F^n = b(Omega^{n+1}) + Omega^{>n}:
  // keeps degrees < n, reduces the degree-n part modulo b(Omega^{n+1}), drops
  // the rest. n < 0 reduces everything to zero. Requires basis enumeration.
  Form hodge_reduce(const Form& w, int n) const;
  const SubspaceBasis<FormKey>& b_image_basis(int n) const;  // b(Omega^{n+1})

 private:
  Form clip(Form&& w) const;  // apply the cap, set the flag on overflow
  const GenAlgebra* alg_;
  int cap_;
  mutable bool truncated_ = false;
  mutable std::map<int, std::unique_ptr<SubspaceBasis<FormKey>>> b_image_;
  mutable std::mutex mu_;
};

// Matrices with Form entries (used for matrix algebras over A+ and their
// differential calculus). Entries of degree 0 encode M_r(A+).
struct FMat {
  const FormSpace* sp = nullptr;
  int rows = 0, cols = 0;
  std::vector<Form> e;  // row-major

  Form& at(int r, int c) { return e[r * cols + c]; }
  const Form& at(int r, int c) const { return e[r * cols + c]; }
};

FMat fmat_zero(const FormSpace& sp, int r, int c);
FMat fmat_identity(const FormSpace& sp, int n);
FMat fmat_add(const FMat& a, const FMat& b);
FMat fmat_sub(const FMat& a, const FMat& b);
FMat fmat_scale(const FMat& a, const Scalar& c);
FMat fmat_mul(const FMat& a, const FMat& b);
FMat fmat_d(const FMat& a);  // entrywise d
Form fmat_trace(const FMat& a);
bool fmat_is_zero(const FMat& a);

}  // namespace nca
