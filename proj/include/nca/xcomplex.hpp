#pragma once
// Truncated tensor algebra over a finite algebra A, realized as even forms
// over A under the Fedosov product; the quasi-free map phi and the Goodwillie
// map gamma; the X-complex of both tensor and plain finite algebras with the
// natural quotient and boundary; adic filtrations; canonical lifts of
// idempotents and invertibles.

#include "nca/forms.hpp"

namespace nca {

// Element of a unitalized algebra: scalar * 1 + elem.
struct UElem {
  Scalar u;
  GElem x;
};

UElem umul(const GenAlgebra& alg, const UElem& a, const UElem& b);
UElem uadd(const UElem& a, const UElem& b, const Scalar& c);
bool uzero(const UElem& a);

// ---------------------------------------------------------------------------
// T^A, truncated at (JA)^{N_trunc}: basis keys are even form tensors over A,
//   [j0, j1, ..., j_{2k}],  j0 in [0..dim] (0 = adjoined unit), j_t in [1..dim],
// excluding the pure-unit key [0]. Products are Fedosov products of the
// corresponding even forms, truncated to form degree <= 2*N_trunc.
// ---------------------------------------------------------------------------
class TensorAlg : public GenAlgebra {
 public:
  TensorAlg(const FiniteAlgebra& a, int ntrunc, int nforms = -1);

  const FiniteAlgebra& base() const { return *a_; }
  const FiniteAsGen& base_gen() const { return agen_; }
  int ntrunc() const { return ntrunc_; }
  int nforms() const { return nforms_; }
  // Forms over A capped at form degree 2*ntrunc (the algebra window).
  const FormSpace& base_forms() const { return bsp_; }
  // Forms over T^A capped at total degree nforms (the X-complex window).
  const FormSpace& upper_forms() const { return usp_; }

  GElem mul(const GKey& a, const GKey& b) const override;
  int key_degree(const GKey& k) const override { return (int)k.size() - 1; }
  std::vector<GKey> basis_keys() const override;
  std::vector<GKey> basis_keys_of_degree(int deg) const;

  // Conversions between T-keys/elements and even forms over A.
  FormKey tkey_to_formkey(const GKey& k) const;
  GKey formkey_to_tkey(const FormKey& k) const;
  Form uelem_to_form(const UElem& x) const;    // even form over A
  UElem form_to_uelem(const Form& w) const;    // inverse (even forms only)

  // Degree-0 inclusion A -> T^A and the augmentation T^A -> A.
  GElem include(const Elem& a) const;
  Elem augment(const GElem& x) const;  // kills form degrees >= 2
  // Smallest form degree present (JA-adic order = half of it).
  static int min_formdeg(const GElem& x);

  // phi: T^A -> Omega^2(T^A), phi = 0 on generators, memoized per key, and its
  // cyclic extension to forms over T^A (degree +2).
  Form phi_key(const GKey& k) const;
  Form phi_elem(const Scalar& xu, const GElem& x) const;
  Form phi_form(const Form& w) const;
  // gamma = (1 - phi)^{-1}, a finite geometric series within the window.
  Form geometric_phi(const Form& w) const;

 private:
  const FiniteAlgebra* a_;
  FiniteAsGen agen_;
  int ntrunc_, nforms_;
  FormSpace bsp_;
  FormSpace usp_;
  mutable std::map<GKey, Form> phi_memo_;
  mutable std::map<std::pair<GKey, GKey>, GElem> mul_memo_;
  mutable std::mutex mu_;
};

// ---------------------------------------------------------------------------
// X-complex chains. The meaning of the coordinates depends on the space:
// for XFinite the even part is an element of R and the odd part a 1-form
// over R (canonical modulo commutators); for XTensor the even part is an
// element of T^A (plus possibly a multiple of the adjoined unit) and the odd
// part is stored in the canonical coordinates Omega^1(T^A)_nat = odd forms
// over A (z da, with z an even form over A).
// ---------------------------------------------------------------------------
struct XChain {
  Scalar even_unit;  // multiple of the adjoined unit (tensor case only)
  GElem even;
  Form odd;
};

bool xchain_zero(const XChain& a);
XChain xchain_add(const XChain& a, const XChain& b, const Scalar& c);
XChain xchain_scale(const XChain& a, const Scalar& c);

class XFinite {
 public:
  explicit XFinite(const FiniteAlgebra& r);

  const FiniteAlgebra& R() const { return *r_; }
  const FormSpace& forms() const { return sp_; }

  // Natural quotient: reduce a 1-form over R modulo [R, Omega^1 R].
  Form nat(const Form& oneform) const;
  const SubspaceBasis<FormKey>& commutator_basis() const;

  XChain boundary(const XChain& xi) const;  // even -> nat d, odd -> bbar

  XChain from_elem(const Elem& x) const;
  XChain from_oneform(const Form& w) const;  // odd chain

  // Adic filtration w.r.t. ideal `id` of R (levels per the filtration table).
  bool in_level(const XChain& xi, int id, int level) const;
  std::optional<int> adic_order(const XChain& xi, int id, int maxlevel) const;

 private:
  const SubspaceBasis<int>& even_span(int id, int level) const;
  const SubspaceBasis<FormKey>& odd_span(int id, int level) const;
  const FiniteAlgebra* r_;
  FiniteAsGen gen_;
  FormSpace sp_;
  mutable std::unique_ptr<SubspaceBasis<FormKey>> comm_;
  mutable std::map<std::pair<int, int>, std::unique_ptr<SubspaceBasis<int>>> even_spans_;
  mutable std::map<std::pair<int, int>, std::unique_ptr<SubspaceBasis<FormKey>>> odd_spans_;
  mutable std::mutex mu_;
};

class XTensor {
 public:
  explicit XTensor(const TensorAlg& t) : t_(&t) {}

  const TensorAlg& T() const { return *t_; }

  // nat(x dy) in the canonical coordinates (odd forms over A).
  Form nat_oneform(const UElem& x, const GElem& y) const;
  // nat of a 1-form over T^A given as form keys [x0, y].
  Form nat(const Form& oneFormOverT) const;

  XChain boundary(const XChain& xi) const;

  // Projection pi: forms over T^A -> X(T^A) (degrees 0 and 1).
  XChain project(const Form& formOverT) const;
  // Goodwillie map gamma: X(T^A) -> forms over T^A.
  Form gamma(const XChain& xi) const;

  // Truncated comparison cut: drop even keys of degree > maxdeg and odd
  // canonical coordinates of form degree > maxdeg (identity checks that
  // compose degree-raising and degree-lowering operators are exact only up
  // to this cut; see the form-space window documentation).
  XChain cut_total(const XChain& xi, int maxdeg) const;

  // JA-adic filtration of X(T^A).
  bool in_level(const XChain& xi, int level) const;
  std::optional<int> adic_order(const XChain& xi, int maxlevel) const;

 private:
  const SubspaceBasis<FormKey>& even_comm_span(int n) const;  // deg-2n part of [J^n,R]
  const SubspaceBasis<FormKey>& odd_span(int level) const;
  const TensorAlg* t_;
  mutable std::map<int, std::unique_ptr<SubspaceBasis<FormKey>>> even_comm_spans_;
  mutable std::map<int, std::unique_ptr<SubspaceBasis<FormKey>>> odd_spans_;
  mutable std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Canonical lifts. Matrices are FMat over TensorAlg::base_forms() whose
// entries are even forms over A (<=> elements of (T^A)+ entrywise). p0 is
// the diagonal unit matrix with `rank` ones.
// ---------------------------------------------------------------------------
FMat fmat_p0(const FormSpace& sp, int n, int rank);

// e: square matrix of degree-0 forms over A with e^2 = e (in M_r(A+)).
// Returns e + sum_{k>=1} (2k)!/(k!)^2 (e - 1/2)(de de)^k within the window.
FMat idempotent_lift(const FMat& e);

// g invertible in M_r(A+); returns the pair (g as 0-form, ghat^{-1} =
// sum_k g^{-1} (dg dg^{-1})^k). Throws std::domain_error when singular.
std::pair<FMat, FMat> invertible_inverse(const FMat& g);

// Exact inverse in M_r(A+) of a matrix of degree-0 forms; nullopt if singular.
std::optional<FMat> fmat_inverse0(const FMat& g);

// ---------------------------------------------------------------------------
// Classifying homomorphism T^A -> target algebra, determined by a linear map
// on the generators (images may involve the target's adjoined unit).
// ---------------------------------------------------------------------------
class ClassifyingHom {
 public:
  ClassifyingHom(const TensorAlg& src, const FormSpace& dst_forms,
                 std::vector<UElem> gen_image);

  const TensorAlg& src() const { return *src_; }
  const FormSpace& dst_forms() const { return *dsp_; }

  UElem apply_uelem(const UElem& x) const;
  UElem apply_key(const GKey& k) const;
  // Entrywise extension to forms over T^A (chain map of even degree).
  Form apply_form(const Form& w) const;

 private:
  const TensorAlg* src_;
  const FormSpace* dsp_;
  std::vector<UElem> gen_image_;
  mutable std::map<GKey, UElem> memo_;
  mutable std::mutex mu_;
};

}  // namespace nca
