#include "nca/chern.hpp"

#include <stdexcept>

namespace nca {

// ---------------------------------------------------------------------------
// Parameter calculus.
// ---------------------------------------------------------------------------

namespace {

// Rebuild a single term as a Scalar, skipping the indeterminate skip_id and
// reporting its exponent through texp.
Scalar mono_rebuild(const Scalar::Mono& m, const mpq_class& c, int skip_id,
                    int* texp) {
  *texp = 0;
  Scalar out{c};
  for (int k = 0; k < m.ei; ++k) out *= Scalar::i();
  for (int k = 0; k < m.er2; ++k) out *= Scalar::r2();
  for (int k = 0; k < m.eri; ++k) out *= Scalar::ri();
  if (m.erp > 0) {
    for (int k = 0; k < m.erp; ++k) out *= Scalar::rp();
  } else if (m.erp < 0) {
    Scalar rpinv = *Scalar::rp().inverse();
    for (int k = 0; k < -m.erp; ++k) out *= rpinv;
  }
  for (const auto& [id, e] : m.ind) {
    if (id == skip_id) {
      *texp = e;
      continue;
    }
    out *= Scalar::indeterminate(id, e);
  }
  return out;
}

mpq_class mpq_factorial(int n) {
  mpq_class f = 1;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

Scalar inv_sqrt_2pi_i() { return *Scalar::sqrt_2pi_i().inverse(); }

void require_cap(const FormSpace& sp) {
  if (sp.cap() < 0)
    throw std::logic_error("component families require a degree cap");
}

void require_deg0(const FMat& m, const char* what) {
  for (const auto& f : m.e)
    for (const auto& [k, c] : f)
      if (form_degree(k) != 0)
        throw std::domain_error(std::string(what) +
                                ": entries must have form degree 0");
}

}  // namespace

ParamOps poly_param(int t_id) {
  if (indeterminate_order(t_id) != 0)
    throw std::logic_error("path parameter must be a free indeterminate");
  ParamOps ops;
  ops.deriv = [t_id](const Scalar& s) {
    Scalar out;
    for (const auto& [m, c] : s.terms()) {
      int k = 0;
      Scalar base = mono_rebuild(m, c, t_id, &k);
      if (k == 0) continue;
      out += Scalar(k) * base * Scalar::indeterminate(t_id, k - 1);
    }
    return out;
  };
  ops.eval = [t_id](const Scalar& s, int endpoint) {
    Scalar out;
    for (const auto& [m, c] : s.terms()) {
      int k = 0;
      Scalar base = mono_rebuild(m, c, t_id, &k);
      if (k < 0)
        throw std::domain_error(
            "endpoint evaluation of a negative parameter power");
      if (k == 0 || endpoint == 1) out += base;
    }
    return out;
  };
  ops.integrate01 = [t_id](const Scalar& s) {
    Scalar out;
    for (const auto& [m, c] : s.terms()) {
      int k = 0;
      Scalar base = mono_rebuild(m, c, t_id, &k);
      if (k < 0)
        throw std::domain_error("integrand is not polynomial in the parameter");
      out += Scalar::rational(1, k + 1) * base;
    }
    return out;
  };
  return ops;
}

Form form_map_scalar(const Form& w, const ScalarFn& fn) {
  Form out;
  for (const auto& [k, c] : w) {
    Scalar v = fn(c);
    if (!v.is_zero()) out[k] = v;
  }
  return out;
}

FMat fmat_map_scalar(const FMat& m, const ScalarFn& fn) {
  FMat out = m;
  for (auto& f : out.e) f = form_map_scalar(f, fn);
  return out;
}

XChain xchain_map_scalar(const XChain& x, const ScalarFn& fn) {
  XChain out;
  out.even_unit = fn(x.even_unit);
  for (const auto& [k, c] : x.even) {
    Scalar v = fn(c);
    if (!v.is_zero()) out.even[k] = v;
  }
  for (const auto& [k, c] : x.odd) {
    Scalar v = fn(c);
    if (!v.is_zero()) out.odd[k] = v;
  }
  return out;
}

FMat Path::at(int endpoint) const {
  return fmat_map_scalar(
      mat, [this, endpoint](const Scalar& s) { return ops.eval(s, endpoint); });
}

FMat Path::velocity() const { return fmat_map_scalar(mat, ops.deriv); }

void require_idempotent_path(const Path& p) {
  if (!fmat_is_zero(fmat_sub(fmat_mul(p.mat, p.mat), p.mat)))
    throw std::domain_error("path is not pathwise idempotent");
}

void require_invertible_path(const Path& p) {
  if (!p.mat_inv) throw std::domain_error("path carries no inverse");
  FMat one = fmat_identity(*p.mat.sp, p.mat.rows);
  if (!fmat_is_zero(fmat_sub(fmat_mul(p.mat, *p.mat_inv), one)) ||
      !fmat_is_zero(fmat_sub(fmat_mul(*p.mat_inv, p.mat), one)))
    throw std::domain_error("path is not pathwise invertible");
}

// ---------------------------------------------------------------------------
// Component families.
// ---------------------------------------------------------------------------

std::map<int, Form> chern_even(const FMat& ehat, int rank_p0) {
  const FormSpace& sp = *ehat.sp;
  require_cap(sp);
  std::map<int, Form> out;
  out[0] = fmat_trace(fmat_sub(ehat, fmat_p0(sp, ehat.rows, rank_p0)));
  FMat de = fmat_d(ehat);
  FMat dede = fmat_mul(de, de);
  FMat half = fmat_sub(ehat, fmat_scale(fmat_identity(sp, ehat.rows),
                                        Scalar::rational(1, 2)));
  FMat pw = dede;
  for (int n = 1; 2 * n <= sp.cap(); ++n) {
    mpq_class coeff = mpq_factorial(2 * n) / mpq_factorial(n);
    if (n % 2) coeff = -coeff;
    out[2 * n] = sp.scale(fmat_trace(fmat_mul(half, pw)), Scalar(coeff));
    if (2 * (n + 1) <= sp.cap()) pw = fmat_mul(pw, dede);
  }
  return out;
}

std::map<int, Form> chern_odd(const FMat& ghat, const FMat& ghat_inv) {
  const FormSpace& sp = *ghat.sp;
  require_cap(sp);
  std::map<int, Form> out;
  FMat dg = fmat_d(ghat);
  FMat dgi = fmat_d(ghat_inv);
  FMat head = fmat_mul(ghat_inv, dg);   // g^{-1} dg
  FMat quad = fmat_mul(dgi, dg);        // dg^{-1} dg
  FMat acc = head;
  for (int n = 0; 2 * n + 1 <= sp.cap(); ++n) {
    Scalar coeff = inv_sqrt_2pi_i() * Scalar(mpq_factorial(n));
    if (n % 2) coeff = -coeff;
    out[2 * n + 1] = sp.scale(fmat_trace(acc), coeff);
    if (2 * (n + 1) + 1 <= sp.cap()) acc = fmat_mul(acc, quad);
  }
  return out;
}

std::map<int, Form> cs_even(const Path& ehat) {
  const FormSpace& sp = *ehat.mat.sp;
  require_cap(sp);
  FMat de = fmat_d(ehat.mat);
  FMat se = ehat.velocity();
  FMat lead = fmat_add(fmat_scale(ehat.mat, Scalar(-2)),
                       fmat_identity(sp, ehat.mat.rows));
  // powers of de up to the cap
  std::vector<FMat> dp{fmat_identity(sp, ehat.mat.rows)};
  while ((int)dp.size() <= sp.cap()) dp.push_back(fmat_mul(dp.back(), de));
  std::map<int, Form> out;
  for (int n = 0; 2 * n + 1 <= sp.cap(); ++n) {
    FMat sum = fmat_zero(sp, ehat.mat.rows, ehat.mat.rows);
    for (int i = 0; i <= 2 * n; ++i) {
      // the velocity term carries odd parameter parity, so commuting it past
      // each one-form factor costs a sign
      FMat term = fmat_mul(dp[i], fmat_mul(se, dp[2 * n + 1 - i]));
      sum = fmat_add(sum, i % 2 ? fmat_scale(term, Scalar(-1)) : term);
    }
    mpq_class coeff = mpq_factorial(2 * n) / mpq_factorial(n);
    if (n % 2) coeff = -coeff;
    Form tr = sp.scale(fmat_trace(fmat_mul(lead, sum)), Scalar(coeff));
    out[2 * n + 1] = form_map_scalar(tr, ehat.ops.integrate01);
  }
  return out;
}

std::map<int, Form> cs_odd(const Path& ghat) {
  const FormSpace& sp = *ghat.mat.sp;
  require_cap(sp);
  if (!ghat.mat_inv) throw std::domain_error("path carries no inverse");
  const FMat& g = ghat.mat;
  const FMat& gi = *ghat.mat_inv;
  FMat dg = fmat_d(g);
  FMat dgi = fmat_d(gi);
  FMat head = fmat_mul(gi, dg);           // g^{-1} dg
  FMat quad = fmat_mul(dgi, dg);          // dg^{-1} dg
  FMat omega = fmat_mul(gi, ghat.velocity());
  FMat domega = fmat_d(omega);
  std::map<int, Form> out;
  out[0] = form_map_scalar(
      sp.scale(fmat_trace(omega), inv_sqrt_2pi_i()), ghat.ops.integrate01);
  std::vector<FMat> qp{fmat_identity(sp, g.rows)};
  while (2 * (int)qp.size() <= sp.cap()) qp.push_back(fmat_mul(qp.back(), quad));
  for (int n = 1; 2 * n <= sp.cap(); ++n) {
    FMat sum = fmat_zero(sp, g.rows, g.rows);
    for (int i = 0; i <= n - 1; ++i)
      sum = fmat_add(sum,
                     fmat_mul(qp[i], fmat_mul(domega, qp[n - 1 - i])));
    Scalar coeff = inv_sqrt_2pi_i() * Scalar(mpq_factorial(n - 1));
    if (n % 2) coeff = -coeff;
    Form tr = sp.scale(fmat_trace(fmat_mul(head, sum)), coeff);
    out[2 * n] = form_map_scalar(tr, ghat.ops.integrate01);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Product algebra I (x) T.
// ---------------------------------------------------------------------------

GKey ProdAlg::make_key(int i, const GKey& tkey) {
  GKey out{i};
  out.insert(out.end(), tkey.begin(), tkey.end());
  return out;
}

GKey ProdAlg::inner_part(const GKey& k) {
  return GKey(k.begin() + 1, k.end());
}

bool ProdAlg::inner_is_unit(const GKey& k) {
  return k.size() == 2 && k[1] == 0;
}

int ProdAlg::key_degree(const GKey& k) const {
  if (inner_is_unit(k)) return 0;
  return t_->key_degree(inner_part(k));
}

GElem ProdAlg::mul(const GKey& a, const GKey& b) const {
  Elem iprod = i_->mul_keys(a[0], b[0]);
  // inner factor: unit sentinels absorb
  GElem tprod;
  if (inner_is_unit(a) && inner_is_unit(b))
    tprod[GKey{0}] = Scalar(1);
  else if (inner_is_unit(a))
    tprod[inner_part(b)] = Scalar(1);
  else if (inner_is_unit(b))
    tprod[inner_part(a)] = Scalar(1);
  else
    tprod = t_->mul(inner_part(a), inner_part(b));
  GElem out;
  for (const auto& [ik, ic] : iprod)
    for (const auto& [tk, tc] : tprod) {
      Scalar v = ic * tc;
      if (!v.is_zero()) out[make_key(ik, tk)] = v;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Partial trace.
// ---------------------------------------------------------------------------

namespace {

Scalar coeff_trace(const ProdAlg& P, const Elem& u, int trace_idx) {
  return P.coeff().traces.at(trace_idx)(u);
}

}  // namespace

XChain ptrace_even(const XTensor& X, const ProdAlg& P, const Form& deg0,
                   int trace_idx) {
  XChain out;
  out.even_unit = Scalar(0);
  const TraceSpec& tau = P.coeff().traces.at(trace_idx);
  for (const auto& [k, c] : deg0) {
    if (form_degree(k) != 0)
      throw std::domain_error("partial trace expects a degree-0 form");
    if (k[0].empty())
      throw std::domain_error(
          "partial trace undefined on the adjoined unit");
    Scalar t = tau(Elem{{ProdAlg::coeff_key(k[0]), Scalar(1)}}) * c;
    if (t.is_zero()) continue;
    if (ProdAlg::inner_is_unit(k[0]))
      out.even_unit += t;
    else
      vec_add(out.even, GElem{{ProdAlg::inner_part(k[0]), Scalar(1)}}, t);
  }
  (void)X;
  return out;
}

XChain ptrace_oneform(const XTensor& X, const ProdAlg& P, const FMat& w,
                      const FMat& g, int trace_idx) {
  require_deg0(w, "partial trace");
  require_deg0(g, "partial trace");
  const FiniteAlgebra& I = P.coeff();
  XChain out;
  out.even_unit = Scalar(0);
  for (int r = 0; r < w.rows; ++r)
    for (int l = 0; l < w.cols; ++l) {
      const Form& wf = w.at(r, l);
      const Form& gf = g.at(l, r);
      if (wf.empty() || gf.empty()) continue;
      for (const auto& [hk, hc] : wf)
        for (const auto& [gk, gc] : gf) {
          if (gk[0].empty()) continue;  // d kills the adjoined unit
          if (ProdAlg::inner_is_unit(gk[0])) continue;  // d(1_T) = 0
          int ig = ProdAlg::coeff_key(gk[0]);
          Scalar tval;
          UElem head;
          head.u = Scalar(0);
          if (hk[0].empty()) {
            // global unit head: the I-factor reduces to the d-argument's
            tval = coeff_trace(P, Elem{{ig, Scalar(1)}}, trace_idx);
            head.u = Scalar(1);
          } else {
            int iw = ProdAlg::coeff_key(hk[0]);
            tval = coeff_trace(P, I.mul_keys(iw, ig), trace_idx);
            if (ProdAlg::inner_is_unit(hk[0]))
              head.u = Scalar(1);
            else
              head.x[ProdAlg::inner_part(hk[0])] = Scalar(1);
          }
          Scalar v = tval * hc * gc;
          if (v.is_zero()) continue;
          vec_add(out.odd,
                  X.nat_oneform(head,
                                GElem{{ProdAlg::inner_part(gk[0]), Scalar(1)}}),
                  v);
        }
    }
  return out;
}

// ---------------------------------------------------------------------------
// Canonical lifts over the product algebra.
// ---------------------------------------------------------------------------

FMat prod_idempotent_lift(const FMat& x) {
  const FormSpace& sp = *x.sp;
  require_deg0(x, "idempotent lift");
  FMat omega = fmat_sub(x, fmat_mul(x, x));
  FMat half = fmat_sub(
      x, fmat_scale(fmat_identity(sp, x.rows), Scalar::rational(1, 2)));
  FMat out = x;
  FMat pw = omega;
  mpq_class coeff = 2;  // (2k)! / (k!)^2 at k = 1
  for (int k = 1; !fmat_is_zero(pw); ++k) {
    if (k > 200)
      throw std::domain_error("idempotent lift: curvature is not nilpotent");
    out = fmat_add(out, fmat_scale(fmat_mul(half, pw), Scalar(coeff)));
    pw = fmat_mul(pw, omega);
    coeff = coeff * (2 * k + 1) * (2 * k + 2) / ((k + 1) * (k + 1));
  }
  if (!fmat_is_zero(fmat_sub(fmat_mul(out, out), out)))
    throw std::logic_error("idempotent lift failed to square");
  return out;
}

std::pair<FMat, FMat> prod_invertible_lift(const FMat& x, const FMat& y) {
  const FormSpace& sp = *x.sp;
  require_deg0(x, "invertible lift");
  require_deg0(y, "invertible lift");
  FMat r = fmat_sub(fmat_identity(sp, x.rows), fmat_mul(x, y));
  for (const auto& f : r.e)
    for (const auto& [k, c] : f)
      if (sp.total_degree(k) == 0)
        throw std::domain_error("matrix is singular");
  FMat inv = fmat_zero(sp, x.rows, x.rows);
  FMat pw = fmat_identity(sp, x.rows);
  for (int k = 0; !fmat_is_zero(pw); ++k) {
    if (k > 200)
      throw std::domain_error("invertible lift: curvature is not nilpotent");
    inv = fmat_add(inv, fmat_mul(y, pw));
    pw = fmat_mul(pw, r);
  }
  FMat one = fmat_identity(sp, x.rows);
  if (!fmat_is_zero(fmat_sub(fmat_mul(x, inv), one)) ||
      !fmat_is_zero(fmat_sub(fmat_mul(inv, x), one)))
    throw std::logic_error("invertible lift failed to invert");
  return {x, inv};
}

// ---------------------------------------------------------------------------
// Higher characters.
// ---------------------------------------------------------------------------

namespace {

void require_summable(const ProdAlg& P, int q, int trace_idx = 0) {
  if (P.coeff().traces.empty())
    throw std::domain_error("coefficient algebra carries no trace");
  if (2 * q + 1 < P.coeff().traces.at(trace_idx).p)
    throw std::domain_error("character degree below the summability degree");
}

Scalar hodd_coeff(int q) {
  mpq_class c = mpq_factorial(q) * mpq_factorial(q) / mpq_factorial(2 * q);
  return inv_sqrt_2pi_i() * Scalar(c);
}

FMat fmat_pow(const FMat& m, int k) {
  FMat out = fmat_identity(*m.sp, m.rows);
  for (int i = 0; i < k; ++i) out = fmat_mul(out, m);
  return out;
}

}  // namespace

XChain higher_ch_even(const XTensor& X, const ProdAlg& P, const FMat& ehat,
                      int rank_p0, int q) {
  require_summable(P, q);
  FMat m = fmat_sub(ehat, fmat_p0(*ehat.sp, ehat.rows, rank_p0));
  return ptrace_even(X, P, fmat_trace(fmat_pow(m, 2 * q + 1)));
}

XChain higher_ch_odd(const XTensor& X, const ProdAlg& P, const FMat& ghat,
                     const FMat& ghat_inv, int q) {
  require_summable(P, q);
  const FormSpace& sp = *ghat.sp;
  FMat one = fmat_identity(sp, ghat.rows);
  FMat quad = fmat_mul(fmat_sub(ghat, one), fmat_sub(ghat_inv, one));
  FMat w = fmat_mul(ghat_inv, fmat_pow(quad, q));
  return xchain_scale(ptrace_oneform(X, P, w, ghat), hodd_coeff(q));
}

XChain higher_cs_even(const XTensor& X, const ProdAlg& P, const Path& ehat,
                      int rank_p0, int q) {
  require_summable(P, q);
  const FormSpace& sp = *ehat.mat.sp;
  FMat m = fmat_sub(ehat.mat, fmat_p0(sp, ehat.mat.rows, rank_p0));
  FMat se = ehat.velocity();
  FMat lead = fmat_add(fmat_scale(ehat.mat, Scalar(-2)),
                       fmat_identity(sp, ehat.mat.rows));
  FMat sum = fmat_zero(sp, m.rows, m.rows);
  for (int i = 0; i <= q; ++i)
    sum = fmat_add(sum, fmat_mul(fmat_pow(m, 2 * i),
                                 fmat_mul(se, fmat_pow(m, 2 * (q - i)))));
  XChain raw = ptrace_oneform(X, P, fmat_mul(lead, sum), ehat.mat);
  return xchain_map_scalar(raw, ehat.ops.integrate01);
}

XChain higher_cs_odd(const XTensor& X, const ProdAlg& P, const Path& ghat,
                     int q) {
  require_summable(P, q);
  if (!ghat.mat_inv) throw std::domain_error("path carries no inverse");
  const FormSpace& sp = *ghat.mat.sp;
  FMat one = fmat_identity(sp, ghat.mat.rows);
  FMat quad = fmat_mul(fmat_sub(ghat.mat, one), fmat_sub(*ghat.mat_inv, one));
  FMat w = fmat_mul(*ghat.mat_inv,
                    fmat_mul(fmat_pow(quad, q), ghat.velocity()));
  XChain raw = ptrace_even(X, P, fmat_trace(w));
  return xchain_map_scalar(xchain_scale(raw, hodd_coeff(q)),
                           ghat.ops.integrate01);
}

// ---------------------------------------------------------------------------
// Multiplicative K-theory pairs.
// ---------------------------------------------------------------------------

namespace {

// ch^{2q} of the stored lift.
XChain mk_character(const XTensor& X, const ProdAlg& P, const MKPair& pair) {
  if (pair.n % 2 == 0)
    return higher_ch_even(X, P, pair.lift, pair.rank_p0, pair.q);
  if (!pair.lift_inv) throw std::domain_error("pair carries no inverse lift");
  return higher_ch_odd(X, P, pair.lift, *pair.lift_inv, pair.q);
}

// boundary(theta), restricted to the parity opposite to theta's content.
XChain mk_transgression(const XTensor& X, const MKPair& pair) {
  XChain bd = X.boundary(pair.theta);
  XChain out;
  out.even_unit = Scalar(0);
  if (pair.n % 2 == 0) {
    out.even = bd.even;  // bbar of the odd representative
    out.even_unit = bd.even_unit;
  } else {
    out.odd = bd.odd;  // nat d of the even representative
  }
  return out;
}

}  // namespace

void mk_validate(const XTensor& X, const ProdAlg& P, const MKPair& pair) {
  XChain diff =
      xchain_add(mk_character(X, P, pair), mk_transgression(X, pair),
                 Scalar(-1));
  if (!X.in_level(diff, pair.n - 1))
    throw std::domain_error(
        "pair transgression fails in the quotient complex");
}

XChain negative_chern(const XTensor& X, const ProdAlg& P, const MKPair& pair) {
  return xchain_add(mk_character(X, P, pair), mk_transgression(X, pair),
                    Scalar(-1));
}

MKPair delta_map(const XTensor& X, const ProdAlg& P, const FormSpace& psp,
                 const XChain& theta, int n, int q) {
  MKPair out;
  out.n = n;
  out.q = q;
  out.theta = xchain_scale(theta, Scalar::sqrt_2pi_i());
  if (n % 2 == 0) {
    out.rank_p0 = 1;
    out.lift = fmat_p0(psp, 2, 1);
  } else {
    out.lift = fmat_identity(psp, 1);
    out.lift_inv = out.lift;
  }
  // theta must be closed in the quotient complex.
  if (!X.in_level(X.boundary(theta), n - 1))
    throw std::domain_error("chain is not closed in the quotient complex");
  (void)P;
  return out;
}

FMat forgetful(const MKPair& pair) { return pair.lift; }

FMat fmat_dirsum(const FMat& a, const FMat& b) {
  FMat out = fmat_zero(*a.sp, a.rows + b.rows, a.cols + b.cols);
  for (int r = 0; r < a.rows; ++r)
    for (int c = 0; c < a.cols; ++c) out.at(r, c) = a.at(r, c);
  for (int r = 0; r < b.rows; ++r)
    for (int c = 0; c < b.cols; ++c) out.at(a.rows + r, a.cols + c) = b.at(r, c);
  return out;
}

FMat mk_conjugator(const FormSpace& sp) {
  FMat c = fmat_zero(sp, 4, 4);
  c.at(0, 0) = sp.unit_form();
  c.at(1, 2) = sp.unit_form();
  c.at(2, 1) = sp.unit_form();
  c.at(3, 3) = sp.unit_form();
  return c;
}

MKPair mk_add(const XTensor& X, const ProdAlg& P, const MKPair& a,
              const MKPair& b) {
  if (a.n != b.n) throw std::domain_error("pair degrees do not match");
  if (a.q != b.q) throw std::domain_error("character degrees do not match");
  MKPair out;
  out.n = a.n;
  out.q = a.q;
  out.theta = xchain_add(a.theta, b.theta, Scalar(1));
  if (a.n % 2 == 0) {
    FMat c = mk_conjugator(*a.lift.sp);
    out.lift = fmat_mul(c, fmat_mul(fmat_dirsum(a.lift, b.lift), c));
    out.rank_p0 = a.rank_p0 + b.rank_p0;
  } else {
    out.lift = fmat_dirsum(a.lift, b.lift);
    if (!a.lift_inv || !b.lift_inv)
      throw std::domain_error("pair carries no inverse lift");
    out.lift_inv = fmat_dirsum(*a.lift_inv, *b.lift_inv);
  }
  (void)X;
  (void)P;
  return out;
}

}  // namespace nca
