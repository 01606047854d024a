#pragma once
// Chern character and Chern-Simons component families for idempotents and
// invertibles with entries in a coefficient algebra, their summability-
// improved variants obtained through a partial trace over a traced tensor
// factor, the negative Chern character, and multiplicative K-theory pairs
// with their addition, connecting map and forgetful map.

#include <functional>
#include <map>
#include <optional>

#include "nca/forms.hpp"
#include "nca/xcomplex.hpp"

namespace nca {

// ---------------------------------------------------------------------------
// Exact calculus in the path parameter. eval takes the endpoint (0 or 1).
// ---------------------------------------------------------------------------
struct ParamOps {
  std::function<Scalar(const Scalar&)> deriv;
  std::function<Scalar(const Scalar&, int)> eval;
  std::function<Scalar(const Scalar&)> integrate01;
};

// Polynomial calculus in the free registered indeterminate t_id; integrate01
// and eval throw std::domain_error on negative powers of the parameter.
ParamOps poly_param(int t_id);

using ScalarFn = std::function<Scalar(const Scalar&)>;
Form form_map_scalar(const Form& w, const ScalarFn& fn);
FMat fmat_map_scalar(const FMat& m, const ScalarFn& fn);
XChain xchain_map_scalar(const XChain& x, const ScalarFn& fn);

// ---------------------------------------------------------------------------
// Paths of matrices whose entries depend polynomially on the parameter.
// ---------------------------------------------------------------------------
struct Path {
  FMat mat;
  std::optional<FMat> mat_inv;  // invertible case: pathwise inverse
  ParamOps ops;

  FMat at(int endpoint) const;
  FMat velocity() const;  // entrywise parameter derivative
};

// Throw std::domain_error unless the declared property holds identically in t.
void require_idempotent_path(const Path& p);
void require_invertible_path(const Path& p);

// ---------------------------------------------------------------------------
// Component families over an arbitrary coefficient algebra. Keys are the form
// degrees; every representable degree within the cap is present in the map.
//   ch_0   = Tr(e - p0),   ch_{2n} = (-)^n (2n)!/n! Tr((e-1/2)(de de)^n),
//   ch_{2n+1} = (-)^n/sqrt(2 pi i) n! Tr(g^{-1} dg (dg^{-1} dg)^n),
// and the transgressed families cs_{2n+1}(e), cs_{2n}(g) integrated exactly
// over the path parameter. The form space must carry a degree cap.
// ---------------------------------------------------------------------------
std::map<int, Form> chern_even(const FMat& ehat, int rank_p0);
std::map<int, Form> chern_odd(const FMat& ghat, const FMat& ghat_inv);
std::map<int, Form> cs_even(const Path& ehat);  // odd degrees 1, 3, ...
std::map<int, Form> cs_odd(const Path& ghat);   // even degrees 0, 2, ...

// ---------------------------------------------------------------------------
// Coefficient tensor product I (x) T of a finite traced algebra with the
// truncated tensor algebra. Basis keys are [i] ++ tkey, where tkey may be the
// sentinel {0} standing for the unit of T. The adjoined global unit is still
// handled by the form space.
// ---------------------------------------------------------------------------
class ProdAlg : public GenAlgebra {
 public:
  ProdAlg(const FiniteAlgebra& coeff, const TensorAlg& inner)
      : i_(&coeff), t_(&inner) {}

  const FiniteAlgebra& coeff() const { return *i_; }
  const TensorAlg& inner() const { return *t_; }

  GElem mul(const GKey& a, const GKey& b) const override;
  int key_degree(const GKey& k) const override;

  static GKey make_key(int i, const GKey& tkey);
  static int coeff_key(const GKey& k) { return k[0]; }
  static GKey inner_part(const GKey& k);  // may be the unit sentinel {0}
  static bool inner_is_unit(const GKey& k);

 private:
  const FiniteAlgebra* i_;
  const TensorAlg* t_;
};

// ---------------------------------------------------------------------------
// Partial trace tau (x) id : forms over I (x) T -> X(T), applying the first
// TraceSpec of the coefficient algebra across the I-factors.
//   degree-0 form  -> even chain (throws std::domain_error on a surviving
//                     adjoined-unit coefficient),
//   Tr.nat(w dg)   -> odd chain in the canonical coordinates.
// ---------------------------------------------------------------------------
XChain ptrace_even(const XTensor& X, const ProdAlg& P, const Form& deg0,
                   int trace_idx = 0);
XChain ptrace_oneform(const XTensor& X, const ProdAlg& P, const FMat& w,
                      const FMat& g, int trace_idx = 0);

// ---------------------------------------------------------------------------
// Canonical lifts inside M_r((I (x) T)^+): entries are degree-0 forms over
// the product algebra; the input is the entrywise linear lift (the curvature
// x - x^2, resp. 1 - x y, must be nilpotent by inner degree).
// ---------------------------------------------------------------------------
FMat prod_idempotent_lift(const FMat& x);
std::pair<FMat, FMat> prod_invertible_lift(const FMat& x, const FMat& y);

// ---------------------------------------------------------------------------
// Higher characters: partial-traced powers landing in X(T). q is the Chern
// degree parameter; throws std::domain_error when 2q+1 is below the
// summability degree of the coefficient trace.
//   ch0^{2q}(e)  = Tr (e-p0)^{2q+1}                       (even chain)
//   ch1^{2q}(g)  = 1/sqrt(2 pi i) (q!)^2/(2q)! Tr.nat g^{-1}[(g-1)(g^{-1}-1)]^q dg
//   cs1^{2q}(e)  = int_0^1 Tr.nat (-2e+1) sum_i (e-p0)^{2i} se (e-p0)^{2(q-i)} de
//   cs0^{2q}(g)  = 1/sqrt(2 pi i) (q!)^2/(2q)! int_0^1 Tr g^{-1}[(g-1)(g^{-1}-1)]^q sg
// ---------------------------------------------------------------------------
XChain higher_ch_even(const XTensor& X, const ProdAlg& P, const FMat& ehat,
                      int rank_p0, int q);
XChain higher_ch_odd(const XTensor& X, const ProdAlg& P, const FMat& ghat,
                     const FMat& ghat_inv, int q);
XChain higher_cs_even(const XTensor& X, const ProdAlg& P, const Path& ehat,
                      int rank_p0, int q);
XChain higher_cs_odd(const XTensor& X, const ProdAlg& P, const Path& ghat,
                     int q);

// ---------------------------------------------------------------------------
// Multiplicative K-theory pairs of degree n: an idempotent (n even) or
// invertible (n odd) canonical lift together with a transgression theta of
// its higher character in the quotient complex X_{n-1}(T, JT).
// ---------------------------------------------------------------------------
struct MKPair {
  int n = 0;                     // degree; parity selects the lift flavour
  int q = 0;                     // character degree parameter
  FMat lift;                     // ehat (n even) or ghat (n odd)
  std::optional<FMat> lift_inv;  // ghat^{-1} (n odd)
  int rank_p0 = 0;               // p0 block rank (n even)
  XChain theta;                  // representative of theta
};

// Defining transgression ch^{2q}(lift) = boundary(theta) in X_{n-1};
// throws std::domain_error when it fails.
void mk_validate(const XTensor& X, const ProdAlg& P, const MKPair& pair);

// ch^{2q}(lift) - boundary(theta~), theta~ = the stored representative.
XChain negative_chern(const XTensor& X, const ProdAlg& P, const MKPair& pair);

// Connecting map: theta closed in X_{n-1} -> (p0, sqrt(2 pi i) theta) for n
// even, (1, sqrt(2 pi i) theta) for n odd. Throws std::domain_error when
// theta is not closed in the quotient.
MKPair delta_map(const XTensor& X, const ProdAlg& P, const FormSpace& psp,
                 const XChain& theta, int n, int q);

// Forgetful map: discard theta.
FMat forgetful(const MKPair& pair);

// (e,theta) + (e',theta') = (c(e (+) e')c, theta+theta') in the even case,
// (g (+) g', theta+theta') in the odd case. Throws std::domain_error on a
// degree mismatch.
MKPair mk_add(const XTensor& X, const ProdAlg& P, const MKPair& a,
              const MKPair& b);

// The 4x4 permutation matrix c exchanging the two middle coordinates (c^2=1).
FMat mk_conjugator(const FormSpace& sp);
FMat fmat_dirsum(const FMat& a, const FMat& b);

}  // namespace nca
