#pragma once
// Supertrace calculus over a doubled coefficient extension and the cyclic
// cocycles built from it:
//   - SuperTarget: the product M = I+ (x) R of a traced coefficient algebra
//     with a base extension (finite with a designated ideal, or a truncated
//     tensor algebra), its Z2-graded double Ms with multiplier F, and the
//     partial supertraces tau, tau-natural and tau' = 1/2 tau(F [F, .]).
//   - chi / eta: the degree-n cocycle and transgression pairs on forms over
//     the even part of the double, with their relation set.
//   - Quasihom: a lifted bundle A -> Ms carrying the composite character
//     X(T^A) -> X(R) (Goodwillie map, lifted homomorphism, chi/eta).
//   - the degree-2q trace on the truncated tensor algebra with a single
//     idempotent generator, and the direct images it induces on invertible /
//     idempotent classes and on multiplicative pairs (odd total degree only).
//   - conjugation and polynomial-family transgression witnesses.

#include "nca/chern.hpp"

namespace nca {

// ---------------------------------------------------------------------------
// SuperTarget: owns I+ = unitalize(I), the product algebra M = I+ (x) R and
// the graded double Ms = Super(M). The base R is either a finite algebra
// (with an optional ideal index for filtration checks; -1 means zero ideal)
// or a truncated tensor algebra (whose canonical filtration is used).
// ---------------------------------------------------------------------------
class SuperTarget {
 public:
  SuperTarget(Parity par, int p, const FiniteAlgebra& coeff, int trace_idx,
              const FiniteAlgebra& base, int jideal = -1);
  SuperTarget(Parity par, int p, const FiniteAlgebra& coeff, int trace_idx,
              const TensorAlg& base);
  SuperTarget(const SuperTarget&) = delete;
  SuperTarget& operator=(const SuperTarget&) = delete;

  Parity parity() const { return par_; }
  int p() const { return p_; }
  bool tensor_base() const { return tbase_ != nullptr; }

  const FiniteAlgebra& coeff() const { return *i_; }
  int trace_idx() const { return ti_; }
  const FiniteAlgebra& coeff_plus() const { return iplus_; }
  int unit_index() const { return i_->dim(); }  // adjoined unit of I+

  const GenAlgebra& prod() const;  // I+ (x) R
  const SuperAlg& super() const { return *ms_; }
  const FormSpace& sforms() const { return *msp_; }  // cap-2 working space

  // finite-base accessors (throw std::logic_error on the tensor flavor)
  const FiniteAlgebra& base_fin() const;
  int jideal() const { return jideal_; }
  const XFinite& xfin() const;
  // tensor-base accessors (throw std::logic_error on the finite flavor)
  const TensorAlg& base_tensor() const;
  const XTensor& xtens() const;

  // Split a key of M into (I+ index, base part). The base part is an empty
  // key when the inner tensor factor is the adjoined unit (tensor flavor).
  std::pair<int, GKey> split(const GKey& mkey) const;

  // Partial supertrace of an element of Ms: supertrace to M, then the trace
  // of the I+ factor. Throws std::domain_error when a unit I+ component
  // survives (the element is outside the traced ideal).
  XChain tau(const GElem& x) const;
  // Natural partial supertrace of a 1-form over Ms (an odd chain over R).
  // fpow left-multiplies the whole form by F before tracing (F^2 = 1).
  XChain tau_nat(const Form& oneform, int fpow = 0) const;
  // Summability-improving functional tau'(x) = 1/2 tau(F [F, x]).
  XChain tau_prime(const GElem& x) const;
  XChain tau_prime_nat(const Form& oneform, int fpow = 0) const;

  XChain boundary(const XChain& xi) const;  // X(R) boundary (either flavor)

  // Finite materialization of the even part of Ms, with the index maps
  // between its basis and the even keys of Ms (finite flavor only).
  const FiniteAlgebra& even_part() const;
  const std::vector<GKey>& even_keys() const { return even_keys_; }
  int even_index(const GKey& k) const;  // throws on odd/unknown keys

 private:
  void init();
  Parity par_;
  int p_, ti_, jideal_ = -1;
  const FiniteAlgebra* i_;
  const FiniteAlgebra* fbase_ = nullptr;
  const TensorAlg* tbase_ = nullptr;
  FiniteAlgebra iplus_;
  std::unique_ptr<FiniteAsGen> igen_;     // I+ through the generic interface
  std::unique_ptr<SuperAlg> si_;          // double of I+ (supertrace bookkeeping)
  FiniteAlgebra mfin_;                    // finite flavor: I+ (x) R
  std::unique_ptr<ProdAlg> mprod_;        // tensor flavor: I+ (x) T
  std::unique_ptr<FiniteAsGen> mgen_;
  std::unique_ptr<SuperAlg> ms_;
  std::unique_ptr<FormSpace> msp_;
  std::unique_ptr<XFinite> xfin_;
  std::unique_ptr<XTensor> xtens_;
  std::unique_ptr<FiniteAlgebra> even_;
  std::vector<GKey> even_keys_;
  std::map<GKey, int> even_index_;
};

// ---------------------------------------------------------------------------
// The cocycle pair chi^n and the transgression pair eta^n, evaluated on a
// form over the even part of the double. chi expects degree n (even output)
// or n+1 (odd output) and throws std::domain_error otherwise; eta returns
// zero outside its two active degrees n and n+1. Gates: chi needs n >= p of
// the same parity; eta needs n >= p+1 of the opposite parity. The tau_pr
// flag replaces tau by tau' throughout.
// ---------------------------------------------------------------------------
XChain chi(const SuperTarget& t, int n, const Form& omega, bool tau_pr = false);
XChain eta(const SuperTarget& t, int n, const Form& omega, bool tau_pr = false);

// ---------------------------------------------------------------------------
// Quasihomomorphism bundle: a source algebra A with its truncated tensor
// algebra, and the lifted images of the A-basis inside the even part of the
// target double. Validation checks (naming the failing basis element):
//   - evenness of every image;
//   - the commutator [F, rho(a)] has all coefficient factors in the traced
//     ideal of I+;
//   - multiplicativity holds modulo the base ideal J (exactly when J = 0).
// ---------------------------------------------------------------------------
struct Quasihom {
  const SuperTarget* target = nullptr;
  const FiniteAlgebra* source = nullptr;  // A
  const TensorAlg* tsource = nullptr;     // T^A
  std::vector<GElem> rho;                 // images of the A basis in Ms
  std::unique_ptr<XTensor> xsrc;
  std::unique_ptr<ClassifyingHom> lift;   // rho_*: T^A -> Ms (entrywise)
};

Quasihom build_quasihom(const SuperTarget& t, const FiniteAlgebra& a,
                        const TensorAlg& ta, std::vector<GElem> rho);

// rho_* gamma of a chain (the form over Ms fed to chi/eta), exposed for the
// window-cut comparisons in tests.
Form lift_gamma(const Quasihom& q, const XChain& xi);

// Composite characters X(T^A) -> X(R). bivariant_chern requires n >= p of
// the same parity; bivariant_eta n >= p+1 of the opposite parity.
XChain bivariant_chern(const Quasihom& q, int n, const XChain& xi,
                       bool tau_pr = false);
XChain bivariant_eta(const Quasihom& q, int n, const XChain& xi);

// ---------------------------------------------------------------------------
// Truncated tensor algebra on one idempotent generator, materialized as a
// finite algebra: basis e (de de)^k and (de de)^k up to the degree window,
// with the degree-2q class as its trace (value (q!)^2/(2q)! on e (de de)^q).
// ---------------------------------------------------------------------------
struct TCData {
  FiniteAlgebra alg;
  int maxdeg = 0;
  int qdeg = 0;
  std::vector<int> e_idx;  // e_idx[k] = index of e (de de)^k, 2k <= maxdeg
  std::vector<int> o_idx;  // o_idx[k] = index of (de de)^k, k >= 1
  Elem ehat() const;       // canonical idempotent lift of the generator
};
TCData make_tc_algebra(int maxdeg, int q);

// The degree-2q trace evaluated on an element of any truncated tensor
// algebra over a one-dimensional base (unit coefficient contributes zero).
Scalar fundamental_class(const TensorAlg& tc, int q, const UElem& x);

// ---------------------------------------------------------------------------
// Multiplication map on the traced coefficient: a homomorphism I (x) I -> I
// compatible with the trace on p-fold products.
// ---------------------------------------------------------------------------
struct BoxMap {
  std::vector<Elem> img;  // img[i * dim + j] = image of e_i (x) e_j
};
// Throws std::domain_error when the map is not multiplicative or when
// Tr(box(z_1)...box(z_p)) differs from (Tr (x) Tr)(z_1...z_p) on basis
// p-tuples of I (x) I.
void validate_box(const FiniteAlgebra& coeff, int trace_idx, const BoxMap& box);
// Fold I (x) I+ -> I (the adjoined unit acts as identity).
Elem box_fold(const FiniteAlgebra& coeff, const BoxMap& box, int i, int jplus);

// ---------------------------------------------------------------------------
// Direct image on invertible classes at the algebra level (finite base with
// zero ideal): g is an invertible matrix of degree-0 forms over the
// unitalization of I (x) A. Even parity returns rho_+(g) rho_-(g)^{-1};
// odd parity returns the conjugated projector rho(g)^{-1} p0 rho(g) (block
// size doubles; p0 has rank g.rows). Entries land in out_forms, whose
// algebra must be I (x) R.
// ---------------------------------------------------------------------------
FMat pushforward_ktop(const Quasihom& q, const BoxMap& box, const FMat& g,
                      const FormSpace& out_forms);

// ---------------------------------------------------------------------------
// Direct image on multiplicative pairs (tensor-flavor target only). The
// source pair lives over I (x) T^A (the algebra of pair.lift.sp), the image
// over I (x) T^B (the algebra of dst_forms, whose inner factor must be the
// target base). Only odd total degree n is supported: even parity p maps
// invertible pairs to invertible pairs, odd parity p maps invertible pairs
// to idempotent pairs; even n throws std::invalid_argument (suspension is
// out of scope). When check_window >= 0 the defining character identity of
// the construction is asserted after a cut to total degree <= check_window.
// ---------------------------------------------------------------------------
MKPair pushforward_mk(const Quasihom& q, const BoxMap& box,
                      const FormSpace& dst_forms, const MKPair& pair,
                      int check_window = -1);

// ---------------------------------------------------------------------------
// Conjugation. U is an invertible even element of the unitalized double
// (finite flavor); its inverse is computed exactly and the conjugated bundle
// is re-validated. Throws std::domain_error when U is singular or odd.
// ---------------------------------------------------------------------------
UElem super_uelem_inverse(const GenAlgebra& alg, const UElem& u);
Quasihom conjugate_quasihom(const Quasihom& q, const UElem& u);

// ---------------------------------------------------------------------------
// Transgression witnesses through the middle tensor algebra T(E) over the
// even part E of the double (finite flavor). The witness owns T(E) and the
// collapse (multiplication) map Omega T(E) -> Omega Ms.
// ---------------------------------------------------------------------------
class HomotopyWitness {
 public:
  HomotopyWitness(const SuperTarget& t, int ntrunc, int nforms = -1);

  const SuperTarget& target() const { return *t_; }
  const TensorAlg& mid() const { return mid_; }
  const XTensor& xmid() const { return xmid_; }

  // zero-form inclusion of an even element of Ms+ into T(E)+
  UElem include0(const UElem& x) const;
  // lifted homomorphism T^A -> T(E) from generator images in Ms (even part)
  ClassifyingHom make_phi(const TensorAlg& ta,
                          const std::vector<GElem>& rho) const;
  // entrywise multiplication map down to forms over Ms
  Form collapse(const Form& form_over_mid) const;

  // canonical invertible lift into T(E)+ of an invertible U of Ms+ (series
  // sum_k U^{-1} (dU dU^{-1})^k for the inverse)
  std::pair<UElem, UElem> lift_invertible(const UElem& u,
                                          const UElem& uinv) const;

 private:
  const SuperTarget* t_;
  TensorAlg mid_;
  XTensor xmid_;
  std::unique_ptr<FormSpace> msdst_;           // forms over Ms for collapse
  std::unique_ptr<ClassifyingHom> mu_;         // T(E) -> Ms
};

// X(phi) chain map X(T^A) -> X(T(E)) of a lifted homomorphism.
XChain x_of_phi(const HomotopyWitness& w, const ClassifyingHom& phi,
                const XChain& xi);

// Conjugation cochain h(x) = nat(Uhat^{-1} phi0(x) d Uhat), h(odd) = 0.
XChain conj_cochain(const HomotopyWitness& w, const ClassifyingHom& phi0,
                    const UElem& uhat, const UElem& uhat_inv,
                    const XChain& xi);

// Polynomial family of lifted homomorphisms: generator images in T(E) whose
// coefficients are polynomials in the path parameter.
struct PolyFamily {
  std::vector<UElem> images;  // over T(E), degree 0
  ParamOps ops;
};

// Integrated Cartan cochain H = int_0^1 iota phi dt : X(T^A) -> X(T(E)).
XChain cartan_cochain(const HomotopyWitness& w, const TensorAlg& ta,
                      const PolyFamily& fam, const XChain& xi);

// Endpoint evaluation of a polynomial family (0 or 1) as generator images.
std::vector<UElem> family_endpoint(const PolyFamily& fam, int endpoint);

// Order-n composite chi^n . collapse . gamma_mid applied to a chain over
// T(E); together with conj_cochain this assembles the total conjugation
// transgression H_total = chi^n(collapse(gamma(h(.)))).
XChain chi_collapse(const HomotopyWitness& w, int n, const XChain& xi_mid,
                    int cut = -1);

}  // namespace nca
