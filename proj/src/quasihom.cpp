#include "nca/quasihom.hpp"

#include <sstream>

namespace nca {

namespace {

UElem uscale(const UElem& a, const Scalar& c) {
  UElem out{a.u * c, {}};
  for (const auto& [k, v] : a.x) out.x[k] = v * c;
  return out;
}

UElem umap(const UElem& a, const ScalarFn& fn) {
  UElem out{fn(a.u), {}};
  for (const auto& [k, v] : a.x) {
    Scalar c = fn(v);
    if (!c.is_zero()) out.x[k] = c;
  }
  return out;
}

Form pick_degrees(const Form& w, int n) {
  Form out;
  for (const auto& [k, c] : w) {
    int d = form_degree(k);
    if (d == n || d == n + 1) out[k] = c;
  }
  return out;
}

std::string elem_name(const FiniteAlgebra& a, int i) {
  if (i < (int)a.names.size() && !a.names[i].empty()) return a.names[i];
  std::ostringstream os;
  os << "basis element " << i;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// SuperTarget
// ---------------------------------------------------------------------------

SuperTarget::SuperTarget(Parity par, int p, const FiniteAlgebra& coeff,
                         int trace_idx, const FiniteAlgebra& base, int jideal)
    : par_(par), p_(p), ti_(trace_idx), jideal_(jideal), i_(&coeff),
      fbase_(&base), iplus_(unitalize(coeff)) {
  init();
}

SuperTarget::SuperTarget(Parity par, int p, const FiniteAlgebra& coeff,
                         int trace_idx, const TensorAlg& base)
    : par_(par), p_(p), ti_(trace_idx), i_(&coeff), tbase_(&base),
      iplus_(unitalize(coeff)) {
  init();
}

void SuperTarget::init() {
  if (p_ < 0) throw std::invalid_argument("summability degree must be >= 0");
  if (ti_ < 0 || ti_ >= (int)i_->traces.size())
    throw std::invalid_argument("coefficient trace index out of range");
  igen_ = std::make_unique<FiniteAsGen>(iplus_);
  si_ = std::make_unique<SuperAlg>(*igen_, par_);
  if (fbase_) {
    mfin_ = tensor_product(iplus_, *fbase_);
    mgen_ = std::make_unique<FiniteAsGen>(mfin_);
    ms_ = std::make_unique<SuperAlg>(*mgen_, par_);
    xfin_ = std::make_unique<XFinite>(*fbase_);
    if (jideal_ >= (int)fbase_->ideals.size())
      throw std::invalid_argument("base ideal index out of range");
    // materialize the even part for the transgression witnesses
    for (const GKey& k : ms_->basis_keys())
      if (ms_->key_parity(k) == 0) {
        even_index_[k] = (int)even_keys_.size();
        even_keys_.push_back(k);
      }
    even_ = std::make_unique<FiniteAlgebra>();
    int d = (int)even_keys_.size();
    even_->mult.assign(d, std::vector<Elem>(d));
    for (int a = 0; a < d; ++a) {
      std::ostringstream os;
      os << "E[";
      for (int v : even_keys_[a]) os << v << " ";
      os << "]";
      even_->names.push_back(os.str());
      for (int b = 0; b < d; ++b) {
        Elem pr;
        for (const auto& [k, c] : ms_->mul(even_keys_[a], even_keys_[b]))
          pr[even_index_.at(k)] = c;
        even_->mult[a][b] = pr;
      }
    }
    if (mfin_.unit) {
      Elem u;
      for (const auto& [m, c] : *mfin_.unit)
        for (int which = 0; which < 2; ++which)
          u[even_index_.at(ms_->plus_key_diag(which, GKey{m}))] = c;
      even_->unit = u;
    }
  } else {
    mprod_ = std::make_unique<ProdAlg>(iplus_, *tbase_);
    ms_ = std::make_unique<SuperAlg>(*mprod_, par_);
    xtens_ = std::make_unique<XTensor>(*tbase_);
  }
  msp_ = std::make_unique<FormSpace>(*ms_, -1);
}

const GenAlgebra& SuperTarget::prod() const {
  if (fbase_) return *mgen_;
  return *mprod_;
}

const FiniteAlgebra& SuperTarget::base_fin() const {
  if (!fbase_) throw std::logic_error("target has a tensor-algebra base");
  return *fbase_;
}

const XFinite& SuperTarget::xfin() const {
  if (!fbase_) throw std::logic_error("target has a tensor-algebra base");
  return *xfin_;
}

const TensorAlg& SuperTarget::base_tensor() const {
  if (!tbase_) throw std::logic_error("target has a finite base");
  return *tbase_;
}

const XTensor& SuperTarget::xtens() const {
  if (!tbase_) throw std::logic_error("target has a finite base");
  return *xtens_;
}

const FiniteAlgebra& SuperTarget::even_part() const {
  if (!even_) throw std::logic_error("even part is materialized for finite bases only");
  return *even_;
}

int SuperTarget::even_index(const GKey& k) const {
  auto it = even_index_.find(k);
  if (it == even_index_.end())
    throw std::domain_error("key is not an even basis key of the double");
  return it->second;
}

std::pair<int, GKey> SuperTarget::split(const GKey& mkey) const {
  if (fbase_) {
    int dR = fbase_->dim();
    return {mkey[0] / dR, GKey{mkey[0] % dR}};
  }
  if (ProdAlg::inner_is_unit(mkey)) return {mkey[0], GKey{}};
  return {mkey[0], ProdAlg::inner_part(mkey)};
}

namespace {
Scalar trace_iplus(const SuperTarget& t, int ip) {
  if (ip == t.unit_index())
    throw std::domain_error("supertrace escapes the traced coefficient ideal");
  return t.coeff().traces[t.trace_idx()].values[ip];
}
}  // namespace

XChain SuperTarget::tau(const GElem& x) const {
  XChain out;
  out.even_unit = Scalar(0);
  SparseVec<GKey> st = ms_->supertrace(x);
  for (const auto& [mk, c] : st) {
    auto [ip, bk] = split(mk);
    Scalar v = c * trace_iplus(*this, ip);
    if (v.is_zero()) continue;
    if (bk.empty())
      out.even_unit += v;
    else
      vec_add(out.even, GElem{{bk, Scalar(1)}}, v);
  }
  return out;
}

XChain SuperTarget::tau_nat(const Form& oneform, int fpow) const {
  XChain out;
  out.even_unit = Scalar(0);
  Form accF;        // finite-base accumulator (1-forms over R)
  Form escaped;     // net adjoined-unit coefficients (must cancel)
  int plen = ms_->prefix_len();
  for (const auto& [fk, c] : oneform) {
    if ((int)fk.size() != 2)
      throw std::domain_error("tau_nat: a 1-form is required");
    const GKey& k1 = fk[1];
    auto [ip1, b1] = split(ms_->inner_key(k1));
    GKey beta(k1.begin(), k1.begin() + plen);
    beta.push_back(ip1);
    GElem betaE{{beta, Scalar(1)}};
    bool unit_head = fk[0].empty();
    GKey b0;
    SparseVec<GKey> st;
    if (unit_head) {
      st = si_->supertrace(fpow ? si_->F_left(betaE) : betaE);
    } else {
      const GKey& k0 = fk[0];
      auto [ip0, bb0] = split(ms_->inner_key(k0));
      b0 = bb0;
      GKey a0(k0.begin(), k0.begin() + plen);
      a0.push_back(ip0);
      GElem alpha{{a0, Scalar(1)}};
      if (fpow) alpha = si_->F_left(alpha);
      st = si_->supertrace(gmul(*si_, alpha, betaE));
    }
    Scalar tot(0), tot_unit(0);
    for (const auto& [ik, cc] : st) {
      if (ik[0] == unit_index())
        tot_unit += cc;
      else
        tot += cc * coeff().traces[ti_].values[ik[0]];
    }
    Scalar coeff_tr = c * tot;
    Scalar coeff_unit = c * tot_unit;
    if (ms_->key_parity(k1) % 2) {
      coeff_tr = -coeff_tr;
      coeff_unit = -coeff_unit;
    }
    FormKey ok{unit_head ? GKey{} : b0, b1};
    if (!coeff_unit.is_zero())
      vec_add(escaped, Form{{ok, Scalar(1)}}, coeff_unit);
    if (coeff_tr.is_zero()) continue;
    if (tbase_) {
      if (b1.empty()) continue;  // d of the base unit
      UElem head = (unit_head || b0.empty())
                       ? UElem{coeff_tr, {}}
                       : UElem{Scalar(0), {{b0, coeff_tr}}};
      vec_add(out.odd, xtens_->nat_oneform(head, GElem{{b1, Scalar(1)}}),
              Scalar(1));
    } else {
      vec_add(accF, Form{{ok, Scalar(1)}}, coeff_tr);
    }
  }
  if (!escaped.empty())
    throw std::domain_error("supertrace escapes the traced coefficient ideal");
  if (fbase_) out.odd = xfin_->nat(accF);
  return out;
}

XChain SuperTarget::tau_prime(const GElem& x) const {
  // tau'(x) = 1/2 tau(F [F, x]) = 1/2 (tau(x) - (-1)^{|x|} tau(F x F))
  GElem alt;
  for (const auto& [k, c] : x) {
    GElem fxf = ms_->F_left(ms_->F_right(GElem{{k, c}}));
    Scalar sg = (ms_->key_parity(k) % 2 == 0) ? Scalar(1) : Scalar(-1);
    vec_add(alt, fxf, sg);
  }
  XChain a = tau(x);
  XChain b = tau(alt);
  return xchain_scale(xchain_add(a, b, Scalar(-1)), Scalar::rational(1, 2));
}

XChain SuperTarget::tau_prime_nat(const Form& oneform, int fpow) const {
  Form w2tot;
  for (const auto& [fk, c] : oneform) {
    if ((int)fk.size() != 2)
      throw std::domain_error("tau_prime_nat: a 1-form is required");
    int p0 = fk[0].empty() ? 0 : ms_->key_parity(fk[0]);
    int p1 = ms_->key_parity(fk[1]);
    int s = (fpow + p0 + p1 + 1) % 2;
    Scalar sc = s ? c : -c;
    for (const auto& [kk, cc] : ms_->F_right(GElem{{fk[1], Scalar(1)}}))
      vec_add(w2tot, Form{{FormKey{fk[0], kk}, Scalar(1)}}, sc * cc);
  }
  XChain t1 = tau_nat(oneform, fpow);
  XChain t2 = tau_nat(w2tot, (fpow + 1) % 2);
  return xchain_scale(xchain_add(t1, t2, Scalar(1)), Scalar::rational(1, 2));
}

XChain SuperTarget::boundary(const XChain& xi) const {
  if (fbase_) return xfin_->boundary(xi);
  return xtens_->boundary(xi);
}

// ---------------------------------------------------------------------------
// chi and eta
// ---------------------------------------------------------------------------

XChain chi(const SuperTarget& t, int n, const Form& omega, bool tau_pr) {
  if (n < t.p() || (n - t.p()) % 2 != 0)
    throw std::domain_error("chi: degree fails the summability/parity gate");
  const SuperAlg& ms = t.super();
  const FormSpace& msp = t.sforms();
  Scalar cn = gamma_half(n + 2) / factorial(n + 1);
  if (n % 2) cn = -cn;
  GElem ptot;
  Form wtot;
  for (const auto& [fk, c] : omega) {
    int d = form_degree(fk);
    if (d == n) {
      for (int k = 0; k <= n; ++k) {
        if (k > 0 && fk[0].empty()) continue;  // [F, unit] = 0
        bool unit_head = (k == 0 && fk[0].empty());
        Scalar eps = ((k * n) % 2) ? Scalar(-1) : Scalar(1);
        GElem p;
        bool started = false;
        if (!unit_head) {
          p = GElem{{fk[k], Scalar(1)}};
          started = true;
        }
        for (int j = 1; j <= n; ++j) {
          int idx = (k + j) % (n + 1);
          GElem f = ms.F_comm(GElem{{fk[idx], Scalar(1)}});
          p = started ? gmul(ms, p, f) : f;
          started = true;
          if (p.empty()) break;
        }
        if (!started || p.empty()) continue;
        vec_add(ptot, p, c * eps);
      }
    } else if (d == n + 1) {
      for (int i = 1; i <= n + 1; ++i) {
        Form w = fk[0].empty() ? msp.from_elem(GElem{}, Scalar(1))
                               : msp.from_elem(GElem{{fk[0], Scalar(1)}});
        for (int j = 1; j <= n + 1; ++j) {
          if (j == i)
            w = msp.append_d(w, GElem{{fk[j], Scalar(1)}});
          else
            w = msp.mul_right_elem(w, ms.F_comm(GElem{{fk[j], Scalar(1)}}));
          if (w.empty()) break;
        }
        vec_add(wtot, w, c);
      }
    } else {
      throw std::domain_error("chi: form degree mismatch");
    }
  }
  XChain e = tau_pr ? t.tau_prime(ptot) : t.tau(ptot);
  XChain o = tau_pr ? t.tau_prime_nat(wtot) : t.tau_nat(wtot);
  return xchain_scale(xchain_add(e, o, Scalar(1)), cn);
}

XChain eta(const SuperTarget& t, int n, const Form& omega, bool tau_pr) {
  if (n < t.p() + 1 || (n - t.p()) % 2 == 0)
    throw std::domain_error("eta: degree fails the summability/parity gate");
  const SuperAlg& ms = t.super();
  const FormSpace& msp = t.sforms();
  Scalar an = gamma_half(n + 1) / factorial(n + 1);
  Scalar bn = gamma_half(n + 1) / factorial(n + 2);
  GElem ptot;
  Form wtot0, wtotF;
  for (const auto& [fk, c] : omega) {
    int d = form_degree(fk);
    if (d == n) {
      bool unit_head = fk[0].empty();
      std::vector<GElem> comm(n + 1);
      for (int j = 1; j <= n; ++j)
        comm[j] = ms.F_comm(GElem{{fk[j], Scalar(1)}});
      // suffix products suf[i] = comm_i ... comm_n
      std::vector<GElem> suf(n + 2);
      if (n >= 1) {
        suf[n] = comm[n];
        for (int i = n - 1; i >= 1; --i) suf[i] = gmul(ms, comm[i], suf[i + 1]);
      }
      // prefix products pre[i] = comm_1 ... comm_i
      std::vector<GElem> pre(n + 1);
      if (n >= 1) {
        pre[1] = comm[1];
        for (int i = 2; i <= n; ++i) pre[i] = gmul(ms, pre[i - 1], comm[i]);
      }
      // i = 0 term: F x0 [F,x1] ... [F,xn]
      GElem p0;
      if (!unit_head) {
        p0 = ms.F_left(GElem{{fk[0], Scalar(1)}});
        if (n >= 1) p0 = gmul(ms, p0, suf[1]);
      } else if (n >= 1) {
        p0 = ms.F_left(suf[1]);
      }
      vec_add(ptot, p0, c);
      // i = 1..n terms: (-)^{ni} [F,xi]..[F,xn] F x0 [F,x1]..[F,x_{i-1}]
      for (int i = 1; i <= n; ++i) {
        Scalar sg = ((n * i) % 2) ? Scalar(-1) : Scalar(1);
        GElem p;
        if (!unit_head) {
          p = gmul(ms, suf[i], ms.F_left(GElem{{fk[0], Scalar(1)}}));
        } else {
          p = ms.F_right(suf[i]);
        }
        if (i > 1) p = gmul(ms, p, pre[i - 1]);
        vec_add(ptot, p, c * sg);
      }
    } else if (d == n + 1) {
      bool unit_head = fk[0].empty();
      for (int i = 1; i <= n + 1; ++i) {
        GElem head;
        Scalar unit_coeff(0);
        bool use_f = false;
        if (!unit_head) {
          vec_add(head, ms.F_right(GElem{{fk[0], Scalar(1)}}), Scalar(i));
          vec_add(head, ms.F_left(GElem{{fk[0], Scalar(1)}}),
                  Scalar(n + 2 - i));
        } else {
          // x0 = 1: the head is (n+2) F, traced with one extra F power
          unit_coeff = Scalar(n + 2);
          use_f = true;
        }
        Form w = msp.from_elem(head, unit_coeff);
        for (int j = 1; j <= n + 1; ++j) {
          if (j == i)
            w = msp.append_d(w, GElem{{fk[j], Scalar(1)}});
          else
            w = msp.mul_right_elem(w, ms.F_comm(GElem{{fk[j], Scalar(1)}}));
          if (w.empty()) break;
        }
        vec_add(use_f ? wtotF : wtot0, w, c);
      }
    }
    // other degrees: eta vanishes
  }
  Scalar half = Scalar::rational(1, 2);
  XChain e = tau_pr ? t.tau_prime(ptot) : t.tau(ptot);
  XChain o0 = tau_pr ? t.tau_prime_nat(wtot0, 0) : t.tau_nat(wtot0, 0);
  XChain oF = tau_pr ? t.tau_prime_nat(wtotF, 1) : t.tau_nat(wtotF, 1);
  XChain out = xchain_scale(e, an * half);
  out = xchain_add(out, o0, bn * half);
  out = xchain_add(out, oF, bn * half);
  return out;
}

// ---------------------------------------------------------------------------
// Quasihom
// ---------------------------------------------------------------------------

Quasihom build_quasihom(const SuperTarget& t, const FiniteAlgebra& a,
                        const TensorAlg& ta, std::vector<GElem> rho) {
  if ((int)rho.size() != a.dim())
    throw std::invalid_argument("one image per source basis element required");
  const SuperAlg& ms = t.super();
  for (int i = 0; i < a.dim(); ++i) {
    for (const auto& [k, c] : rho[i])
      if (ms.key_parity(k) != 0)
        throw std::domain_error("odd component in the image of " +
                                elem_name(a, i));
    for (const auto& [k, c] : ms.F_comm(rho[i])) {
      auto [ip, bk] = t.split(ms.inner_key(k));
      if (ip == t.unit_index())
        throw std::domain_error("[F, image of " + elem_name(a, i) +
                                "] leaves the traced coefficient ideal");
    }
  }
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j) {
      GElem defect = gmul(ms, rho[i], rho[j]);
      for (const auto& [k, c] : a.mul_keys(i, j))
        vec_add(defect, rho[k], -c);
      for (const auto& [k, c] : defect) {
        auto [ip, bk] = t.split(ms.inner_key(k));
        bool ok;
        if (t.tensor_base()) {
          ok = !bk.empty() && (int)bk.size() - 1 >= 2;
        } else {
          ok = t.jideal() >= 0 &&
               t.base_fin().ideals[t.jideal()].contains_key(bk[0]);
        }
        if (!ok)
          throw std::domain_error(
              "multiplicativity fails modulo the base ideal on " +
              elem_name(a, i) + " * " + elem_name(a, j));
      }
    }
  Quasihom out;
  out.target = &t;
  out.source = &a;
  out.tsource = &ta;
  out.rho = std::move(rho);
  out.xsrc = std::make_unique<XTensor>(ta);
  std::vector<UElem> imgs;
  for (const GElem& r : out.rho) imgs.push_back(UElem{Scalar(0), r});
  out.lift = std::make_unique<ClassifyingHom>(ta, t.sforms(), std::move(imgs));
  return out;
}

Form lift_gamma(const Quasihom& q, const XChain& xi) {
  return q.lift->apply_form(q.xsrc->gamma(xi));
}

XChain bivariant_chern(const Quasihom& q, int n, const XChain& xi,
                       bool tau_pr) {
  return chi(*q.target, n, pick_degrees(lift_gamma(q, xi), n), tau_pr);
}

XChain bivariant_eta(const Quasihom& q, int n, const XChain& xi) {
  return eta(*q.target, n, lift_gamma(q, xi));
}

// ---------------------------------------------------------------------------
// Truncated one-generator tensor algebra and its degree trace
// ---------------------------------------------------------------------------

TCData make_tc_algebra(int maxdeg, int q) {
  if (maxdeg < 0 || maxdeg % 2 != 0)
    throw std::invalid_argument("degree window must be even and nonnegative");
  if (2 * q > maxdeg)
    throw std::invalid_argument("degree window too small for the trace degree");
  TCData out;
  out.maxdeg = maxdeg;
  out.qdeg = q;
  int m = maxdeg / 2;
  int dim = 2 * m + 1;
  out.e_idx.resize(m + 1);
  out.o_idx.assign(m + 1, -1);
  FiniteAlgebra& A = out.alg;
  A.names.resize(dim);
  for (int k = 0; k <= m; ++k) {
    out.e_idx[k] = 2 * k;
    std::ostringstream os;
    os << "e(dd)^" << k;
    A.names[2 * k] = os.str();
    if (k >= 1) {
      out.o_idx[k] = 2 * k - 1;
      std::ostringstream os2;
      os2 << "(dd)^" << k;
      A.names[2 * k - 1] = os2.str();
    }
  }
  A.mult.assign(dim, std::vector<Elem>(dim));
  auto eI = [&](int k) { return out.e_idx[k]; };
  auto oI = [&](int k) { return out.o_idx[k]; };
  for (int j = 0; j <= m; ++j)
    for (int k = 0; k <= m; ++k) {
      // E_j o E_k = E_{j+k} - O_{j+k+1}
      Elem ee;
      if (j + k <= m) ee[eI(j + k)] = Scalar(1);
      if (j + k + 1 <= m) ee[oI(j + k + 1)] = Scalar(-1);
      A.mult[eI(j)][eI(k)] = ee;
      if (k >= 1) {
        Elem eo;
        if (j + k <= m) eo[eI(j + k)] = Scalar(1);
        A.mult[eI(j)][oI(k)] = eo;   // E_j o O_k = E_{j+k}
        A.mult[oI(k)][eI(j)] = eo;   // O_k o E_j = E_{j+k}
        if (j >= 1) {
          Elem oo;
          if (j + k <= m) oo[oI(j + k)] = Scalar(1);
          A.mult[oI(j)][oI(k)] = oo;  // O_j o O_k = O_{j+k}
        }
      }
    }
  TraceSpec tr;
  tr.p = 1;
  tr.values.assign(dim, Scalar(0));
  tr.values[eI(q)] = factorial(q) * factorial(q) / factorial(2 * q);
  A.traces.push_back(tr);
  IdealSpec all;
  for (int i = 0; i < dim; ++i) all.basis.push_back(i);
  A.ideals.push_back(all);
  A.validate();
  return out;
}

Elem TCData::ehat() const {
  Elem out;
  out[e_idx[0]] = Scalar(1);
  int m = maxdeg / 2;
  for (int k = 1; k <= m; ++k) {
    Scalar c = factorial(2 * k) / (factorial(k) * factorial(k));
    out[e_idx[k]] += c;
    out[o_idx[k]] += -c * Scalar::rational(1, 2);
  }
  return out;
}

Scalar fundamental_class(const TensorAlg& tc, int q, const UElem& x) {
  if (tc.base().dim() != 1)
    throw std::invalid_argument("the degree trace needs a one-dimensional base");
  Scalar val = factorial(q) * factorial(q) / factorial(2 * q);
  Scalar out(0);
  for (const auto& [k, c] : x.x)
    if ((int)k.size() == 2 * q + 1 && k[0] == 1) out += c * val;
  return out;
}

// ---------------------------------------------------------------------------
// BoxMap
// ---------------------------------------------------------------------------

namespace {
Elem box_eval(const FiniteAlgebra& coeff, const BoxMap& box, const Elem& x,
              const Elem& y) {
  int d = coeff.dim();
  Elem out;
  for (const auto& [i, cx] : x)
    for (const auto& [j, cy] : y) vec_add(out, box.img[i * d + j], cx * cy);
  return out;
}
}  // namespace

void validate_box(const FiniteAlgebra& coeff, int trace_idx,
                  const BoxMap& box) {
  int d = coeff.dim();
  if ((int)box.img.size() != d * d)
    throw std::invalid_argument("multiplication map needs dim^2 images");
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          Elem lhs = box_eval(coeff, box, coeff.mul_keys(i, k),
                              coeff.mul_keys(j, l));
          Elem rhs = coeff.mul(box.img[i * d + j], box.img[k * d + l]);
          vec_add(lhs, rhs, Scalar(-1));
          if (!lhs.empty()) {
            std::ostringstream os;
            os << "multiplication map fails on (" << elem_name(coeff, i)
               << " (x) " << elem_name(coeff, j) << ") * ("
               << elem_name(coeff, k) << " (x) " << elem_name(coeff, l) << ")";
            throw std::domain_error(os.str());
          }
        }
  const TraceSpec& tr = coeff.traces[trace_idx];
  int p = tr.p;
  // trace compatibility on basis p-tuples of I (x) I
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) pairs.push_back({i, j});
  std::vector<int> idx(p, 0);
  while (true) {
    Elem prod_box = box.img[pairs[idx[0]].first * d + pairs[idx[0]].second];
    Elem prod_l{{pairs[idx[0]].first, Scalar(1)}};
    Elem prod_r{{pairs[idx[0]].second, Scalar(1)}};
    for (int s = 1; s < p; ++s) {
      prod_box = coeff.mul(
          prod_box, box.img[pairs[idx[s]].first * d + pairs[idx[s]].second]);
      prod_l = coeff.mul(prod_l, Elem{{pairs[idx[s]].first, Scalar(1)}});
      prod_r = coeff.mul(prod_r, Elem{{pairs[idx[s]].second, Scalar(1)}});
    }
    Scalar lhs = tr(prod_box);
    Scalar rhs = tr(prod_l) * tr(prod_r);
    if (!(lhs - rhs).is_zero())
      throw std::domain_error(
          "multiplication map is not compatible with the trace on p-fold products");
    int pos = p - 1;
    while (pos >= 0 && idx[pos] + 1 == (int)pairs.size()) idx[pos--] = 0;
    if (pos < 0) break;
    ++idx[pos];
  }
}

Elem box_fold(const FiniteAlgebra& coeff, const BoxMap& box, int i,
              int jplus) {
  int d = coeff.dim();
  if (jplus == d) return Elem{{i, Scalar(1)}};
  return box.img[i * d + jplus];
}

// ---------------------------------------------------------------------------
// Direct image at the algebra level
// ---------------------------------------------------------------------------

FMat pushforward_ktop(const Quasihom& q, const BoxMap& box, const FMat& g,
                      const FormSpace& out_forms) {
  const SuperTarget& t = *q.target;
  if (t.tensor_base() || t.jideal() >= 0)
    throw std::invalid_argument(
        "algebra-level direct image needs a finite base with zero ideal");
  const FiniteAlgebra& I = t.coeff();
  int dI = I.dim();
  int dA = q.source->dim();
  int dR = t.base_fin().dim();
  const SuperAlg& ms = t.super();
  int plen = ms.prefix_len();
  // image of e_i (x) a in block (s, s2) as coordinates over I (x) R
  auto rho_block = [&](int s, int s2, int a, int i) {
    Elem out;
    for (const auto& [k, c] : q.rho[a]) {
      int off = plen - 2;
      if (k[off] != s || k[off + 1] != s2) continue;
      auto [ip, bk] = t.split(ms.inner_key(k));
      for (const auto& [i2, c2] : box_fold(I, box, i, ip))
        out[i2 * dR + bk[0]] += c * c2;
    }
    return out;
  };
  auto push_entry = [&](const Form& w, int s, int s2) {
    Form out;
    for (const auto& [fk, c] : w) {
      if ((int)fk.size() != 1)
        throw std::domain_error("entries must be degree-0 forms");
      if (fk[0].empty()) {
        if (s == s2) vec_add(out, out_forms.unit_form(), c);
        continue;
      }
      int ci = fk[0][0];
      Elem img = rho_block(s, s2, ci % dA, ci / dA);
      for (const auto& [i2, c2] : img)
        vec_add(out, Form{{FormKey{GKey{i2}}, Scalar(1)}}, c * c2);
    }
    return out;
  };
  int r = g.rows;
  if (g.cols != r) throw std::invalid_argument("a square matrix is required");
  if (t.parity() == Parity::Even) {
    FMat hp = fmat_zero(out_forms, r, r), hm = fmat_zero(out_forms, r, r);
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < r; ++b) {
        hp.at(a, b) = push_entry(g.at(a, b), 0, 0);
        hm.at(a, b) = push_entry(g.at(a, b), 1, 1);
      }
    auto hminv = fmat_inverse0(hm);
    if (!hminv)
      throw std::domain_error("direct image: the minus part of g is singular");
    return fmat_mul(hp, *hminv);
  }
  // odd parity: conjugated projector in doubled size
  FMat w = fmat_zero(out_forms, 2 * r, 2 * r);
  for (int s = 0; s < 2; ++s)
    for (int s2 = 0; s2 < 2; ++s2)
      for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b)
          w.at(s * r + a, s2 * r + b) = push_entry(g.at(a, b), s, s2);
  auto winv = fmat_inverse0(w);
  if (!winv) throw std::domain_error("direct image: rho(g) is singular");
  FMat p0 = fmat_p0(out_forms, 2 * r, r);
  return fmat_mul(*winv, fmat_mul(p0, w));
}

// ---------------------------------------------------------------------------
// Direct image on multiplicative pairs
// ---------------------------------------------------------------------------

namespace {

int path_param() {
  static const int id = register_indeterminate("_mk_path_t");
  return id;
}

// Strip the unit part: check unit coefficients are exactly those of the
// rank-`rank` diagonal projector (rank = rows gives the identity) and return
// the proper part.
FMat strip_units(const FMat& m, int rank) {
  FMat out = fmat_zero(*m.sp, m.rows, m.cols);
  for (int a = 0; a < m.rows; ++a)
    for (int b = 0; b < m.cols; ++b) {
      Form f;
      Scalar u(0);
      for (const auto& [k, c] : m.at(a, b)) {
        if ((int)k.size() != 1)
          throw std::domain_error("pair lift entries must be degree 0");
        if (k[0].empty())
          u += c;
        else
          f[k] = c;
      }
      Scalar expect = (a == b && a < rank) ? Scalar(1) : Scalar(0);
      if (!(u - expect).is_zero())
        throw std::invalid_argument(
            "pair lift must be trivial modulo the coefficient ideal");
      out.at(a, b) = f;
    }
  return out;
}

FMat strip_identity(const FMat& m) { return strip_units(m, m.rows); }

// Embed a proper matrix over I (x) T into TC (x) I (x) T with the given
// coefficient in the one-generator algebra.
FMat tc_embed(const FormSpace& dst, int dimI, const Elem& tcpart,
              const FMat& m) {
  FMat out = fmat_zero(dst, m.rows, m.cols);
  for (int a = 0; a < m.rows; ++a)
    for (int b = 0; b < m.cols; ++b)
      for (const auto& [k, c] : m.at(a, b)) {
        if ((int)k.size() != 1 || k[0].empty())
          throw std::domain_error("only proper degree-0 entries embed");
        GKey base = k[0];
        for (const auto& [tci, cc] : tcpart) {
          GKey nk = base;
          nk[0] = tci * dimI + base[0];
          vec_add(out.at(a, b), Form{{FormKey{nk}, Scalar(1)}}, c * cc);
        }
      }
  return out;
}

FMat fmat_proper_mul(const FMat& a, const FMat& b) { return fmat_mul(a, b); }

// Geometric inverse of 1 + N for a nilpotent proper matrix N (polynomial in
// any parameters the entries carry).
FMat one_plus_inverse(const FMat& n) {
  FMat id = fmat_identity(*n.sp, n.rows);
  FMat out = id;
  FMat pw = n;
  Scalar sign(-1);
  int guard = 0;
  while (!fmat_is_zero(pw)) {
    out = fmat_add(out, fmat_scale(pw, sign));
    pw = fmat_proper_mul(pw, n);
    sign = -sign;
    if (++guard > 512)
      throw std::logic_error("inverse series does not terminate");
  }
  return out;
}

}  // namespace

MKPair pushforward_mk(const Quasihom& q, const BoxMap& box,
                      const FormSpace& dst_forms, const MKPair& pair,
                      int check_window) {
  const SuperTarget& t = *q.target;
  if (!t.tensor_base())
    throw std::invalid_argument("pair-level direct image needs a tensor base");
  if (pair.n % 2 == 0)
    throw std::invalid_argument(
        "even-degree direct images require suspension and are unsupported");
  const SuperAlg& ms = t.super();
  const FiniteAlgebra& a = *q.source;
  // the direct image needs an exactly multiplicative lift
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j) {
      GElem defect = gmul(ms, q.rho[i], q.rho[j]);
      for (const auto& [k, c] : a.mul_keys(i, j)) vec_add(defect, q.rho[k], -c);
      if (!defect.empty())
        throw std::domain_error(
            "direct image requires an exactly multiplicative lift");
    }
  int p = t.p();
  int qq = (t.parity() == Parity::Even) ? p / 2 : (p - 1) / 2;
  if (pair.q != qq)
    throw std::invalid_argument(
        "pair character degree does not match the target summability");
  const ProdAlg* pdst = dynamic_cast<const ProdAlg*>(&dst_forms.algebra());
  const ProdAlg* psrc = dynamic_cast<const ProdAlg*>(&pair.lift.sp->algebra());
  if (!pdst || !psrc || &pdst->inner() != &t.base_tensor() ||
      &psrc->inner() != q.tsource)
    throw std::invalid_argument("pair form spaces do not match the bundle");
  const FiniteAlgebra& I = t.coeff();
  int dI = I.dim();
  const TensorAlg& TB = t.base_tensor();
  XTensor xb(TB);

  // one-generator world: TC (x) I with the degree-2q class times the trace
  TCData tc = make_tc_algebra(2 * qq + 2, qq);
  FiniteAlgebra icopy;
  icopy.names = I.names;
  icopy.mult = I.mult;
  icopy.unit = I.unit;
  icopy.traces = I.traces;
  icopy.ideals = I.ideals;
  if (t.trace_idx() != 0)
    std::swap(icopy.traces[0], icopy.traces[t.trace_idx()]);
  FiniteAlgebra tci = tensor_product(tc.alg, icopy);
  ProdAlg pa2(tci, *q.tsource);
  ProdAlg pb2(tci, TB);
  FormSpace fpa2(pa2, -1), fpb2(pb2, -1);

  int r = pair.lift.rows;
  FMat gprop = strip_identity(pair.lift);
  if (!pair.lift_inv)
    throw std::invalid_argument("an odd pair carries an inverse lift");
  FMat gpropinv = strip_identity(*pair.lift_inv);

  // uhat = 1 + e (x) (ghat - 1) and its explicit series inverse
  FMat id_pa2 = fmat_identity(fpa2, r);
  FMat uhat = fmat_add(id_pa2, tc_embed(fpa2, dI, Elem{{tc.e_idx[0], Scalar(1)}}, gprop));
  // X = (ghat^{-1} - 1)(ghat - 1), proper over I (x) T^A
  FMat X = fmat_mul(gpropinv, gprop);
  FMat uhat_inv = id_pa2;
  {
    int m = tc.maxdeg / 2;
    FMat xpow = fmat_identity(*pair.lift.sp, r);  // X^0 (with unit part)
    for (int i = 0; i <= m; ++i) {
      if (i >= 1) {
        // (dede)^i (x) X^i
        FMat term = fmat_zero(*pair.lift.sp, r, r);
        bool nonzero = false;
        for (int aa = 0; aa < r; ++aa)
          for (int bb = 0; bb < r; ++bb) {
            Form f;
            for (const auto& [k, c] : xpow.at(aa, bb))
              if (!((int)k.size() == 1 && k[0].empty())) f[k] = c;
            if (!f.empty()) nonzero = true;
            term.at(aa, bb) = f;
          }
        if (nonzero)
          uhat_inv = fmat_add(uhat_inv,
                              tc_embed(fpa2, dI, Elem{{tc.o_idx[i], Scalar(1)}}, term));
      }
      // e (dede)^i (x) X^i (ghat^{-1} - 1)
      FMat term2 = fmat_mul(xpow, gpropinv);
      bool nonzero2 = false;
      FMat term2p = fmat_zero(*pair.lift.sp, r, r);
      for (int aa = 0; aa < r; ++aa)
        for (int bb = 0; bb < r; ++bb) {
          Form f;
          for (const auto& [k, c] : term2.at(aa, bb))
            if (!((int)k.size() == 1 && k[0].empty())) f[k] = c;
          if (!f.empty()) nonzero2 = true;
          term2p.at(aa, bb) = f;
        }
      if (nonzero2)
        uhat_inv = fmat_add(uhat_inv,
                            tc_embed(fpa2, dI, Elem{{tc.e_idx[i], Scalar(1)}}, term2p));
      if (i < m) xpow = fmat_mul(xpow, X);
    }
  }
  if (!fmat_is_zero(fmat_sub(fmat_mul(uhat, uhat_inv), id_pa2)) ||
      !fmat_is_zero(fmat_sub(fmat_mul(uhat_inv, uhat), id_pa2)))
    throw std::logic_error("series inverse of the embedded lift failed");

  // entrywise direct image TC (x) I (x) T^A -> TC (x) I (x) T^B on a block
  int plen = ms.prefix_len();
  auto rho_push = [&](const FMat& m, int s, int s2) {
    FMat out = fmat_zero(fpb2, m.rows, m.cols);
    for (int aa = 0; aa < m.rows; ++aa)
      for (int bb = 0; bb < m.cols; ++bb)
        for (const auto& [fk, c] : m.at(aa, bb)) {
          if ((int)fk.size() != 1)
            throw std::domain_error("entries must be degree-0 forms");
          if (fk[0].empty()) {
            if (s == s2) vec_add(out.at(aa, bb), fpb2.unit_form(), c);
            continue;
          }
          const GKey& k = fk[0];
          int tcpart = k[0] / dI, i = k[0] % dI;
          GKey tpart(k.begin() + 1, k.end());
          if (tpart.size() == 1 && tpart[0] == 0)
            throw std::logic_error("unexpected scalar tensor part");
          UElem img = q.lift->apply_key(tpart);
          if (!img.u.is_zero())
            throw std::logic_error("unexpected unit component in the image");
          for (const auto& [mk, mc] : img.x) {
            int off = plen - 2;
            if (plen == 3 && mk[0] != 0)
              throw std::logic_error("unexpected multiplier component");
            if (mk[off] != s || mk[off + 1] != s2) continue;
            GKey inner = ms.inner_key(mk);
            int ip = inner[0];
            GKey tb(inner.begin() + 1, inner.end());
            for (const auto& [i2, c2] : box_fold(I, box, i, ip)) {
              GKey nk{tcpart * dI + i2};
              nk.insert(nk.end(), tb.begin(), tb.end());
              vec_add(out.at(aa, bb), Form{{FormKey{nk}, Scalar(1)}},
                      c * mc * c2);
            }
          }
        }
    return out;
  };

  // collapse TC (x) I (x) T^B -> I (x) T^B along the augmentation of TC and
  // the inner degree-0 part (the linear lift of the base-level image)
  auto collapse0 = [&](const FMat& m) {
    FMat out = fmat_zero(dst_forms, m.rows, m.cols);
    for (int aa = 0; aa < m.rows; ++aa)
      for (int bb = 0; bb < m.cols; ++bb)
        for (const auto& [fk, c] : m.at(aa, bb)) {
          if (fk[0].empty()) {
            vec_add(out.at(aa, bb), dst_forms.unit_form(), c);
            continue;
          }
          const GKey& k = fk[0];
          int tcpart = k[0] / dI, i = k[0] % dI;
          if (tcpart != tc.e_idx[0]) continue;  // TC augmentation
          GKey tb(k.begin() + 1, k.end());
          bool sentinel = (tb.size() == 1 && tb[0] == 0);
          if (!sentinel && (int)tb.size() != 1) continue;  // inner degree > 0
          GKey nk = ProdAlg::make_key(i, tb);
          vec_add(out.at(aa, bb), Form{{FormKey{nk}, Scalar(1)}}, c);
        }
    return out;
  };

  MKPair out;
  out.n = pair.n - p;
  out.q = qq;
  ParamOps ops = poly_param(path_param());
  Scalar tvar = Scalar::indeterminate(path_param());

  if (t.parity() == Parity::Even) {
    // invertible image: utilde = u_+ u_-^{-1}
    FMat utilde = fmat_mul(rho_push(uhat, 0, 0), rho_push(uhat_inv, 1, 1));
    FMat utilde_inv = fmat_mul(rho_push(uhat, 1, 1), rho_push(uhat_inv, 0, 0));
    // base-level image and its canonical lift
    FMat w0 = collapse0(utilde);
    FMat w0inv = collapse0(utilde_inv);
    auto [ghat2, ghat2inv] = prod_invertible_lift(w0, w0inv);
    out.lift = ghat2;
    out.lift_inv = ghat2inv;
    // endpoint v1 = 1 + ehat (x) (ghat2 - 1)
    FMat id_pb2 = fmat_identity(fpb2, r);
    FMat v1 = fmat_add(id_pb2, tc_embed(fpb2, dI, tc.ehat(), strip_identity(ghat2)));
    FMat delta = fmat_sub(v1, utilde);
    FMat vpath = fmat_add(utilde, fmat_scale(delta, tvar));
    FMat vinv = fmat_mul(one_plus_inverse(fmat_scale(fmat_mul(utilde_inv, delta), tvar)),
                         utilde_inv);
    Path vp{vpath, vinv, ops};
    require_invertible_path(vp);
    // cs = 1/sqrt(2 pi i) int Tr[2q] v^{-1} dv/dt
    FMat vdot = fmat_map_scalar(vpath, ops.deriv);
    Form trv = form_map_scalar(fmat_trace(fmat_mul(vinv, vdot)), ops.integrate01);
    XChain cs = xchain_scale(ptrace_even(xb, pb2, trv),
                             Scalar(1) / Scalar::sqrt_2pi_i());
    out.theta = xchain_add(bivariant_chern(q, p, pair.theta), cs, Scalar(1));
    if (check_window >= 0) {
      XChain chA = higher_ch_odd(*q.xsrc, *psrc, pair.lift, *pair.lift_inv, qq);
      XChain lhs = bivariant_chern(q, p, chA);
      XChain rhs = xchain_scale(ptrace_oneform(xb, pb2, utilde_inv, utilde),
                                Scalar(1) / Scalar::sqrt_2pi_i());
      XChain diff = xb.cut_total(xchain_add(lhs, rhs, Scalar(-1)), check_window);
      if (!xchain_zero(diff))
        throw std::logic_error("direct image: character identity failed");
    }
    return out;
  }

  // odd parity: idempotent image in doubled size
  int r2 = 2 * r;
  FMat utilde = fmat_zero(fpb2, r2, r2);
  FMat utilde_inv = fmat_zero(fpb2, r2, r2);
  for (int s = 0; s < 2; ++s)
    for (int s2 = 0; s2 < 2; ++s2) {
      FMat blk = rho_push(uhat, s, s2);
      FMat blki = rho_push(uhat_inv, s, s2);
      for (int aa = 0; aa < r; ++aa)
        for (int bb = 0; bb < r; ++bb) {
          utilde.at(s * r + aa, s2 * r + bb) = blk.at(aa, bb);
          utilde_inv.at(s * r + aa, s2 * r + bb) = blki.at(aa, bb);
        }
    }
  FMat p0 = fmat_p0(fpb2, r2, r);
  FMat ftilde = fmat_mul(utilde_inv, fmat_mul(p0, utilde));
  // base-level idempotent and its canonical lift
  FMat f0 = collapse0(ftilde);
  FMat fhat1_base = prod_idempotent_lift(f0);
  out.lift = fhat1_base;
  out.rank_p0 = r;
  // h-cochain: 1/2 Tr.nat [2q] (ftilde - p0)^p utilde^{-1} d utilde
  FMat diffp = fmat_identity(fpb2, r2);
  FMat fd = fmat_sub(ftilde, p0);
  for (int i = 0; i < p; ++i) diffp = fmat_mul(diffp, fd);
  XChain hterm = xchain_scale(
      ptrace_oneform(xb, pb2, fmat_mul(diffp, utilde_inv), utilde),
      Scalar::rational(1, 2));
  // idempotent path from ftilde to p0 + ehat (x) (fhat1 - p0)
  FMat fhat1 =
      fmat_add(p0, tc_embed(fpb2, dI, tc.ehat(), strip_units(fhat1_base, r)));
  FMat v = fmat_add(fmat_sub(fmat_identity(fpb2, r2),
                             fmat_add(ftilde, fhat1)),
                    fmat_scale(fmat_mul(fhat1, ftilde), Scalar(2)));
  FMat vm1 = fmat_sub(v, fmat_identity(fpb2, r2));
  FMat ut = fmat_add(fmat_identity(fpb2, r2), fmat_scale(vm1, tvar));
  FMat utinv = one_plus_inverse(fmat_scale(vm1, tvar));
  FMat fpath = fmat_mul(ut, fmat_mul(ftilde, utinv));
  Path fp{fpath, std::nullopt, ops};
  require_idempotent_path(fp);
  XChain cs = higher_cs_even(xb, pb2, fp, r, qq);
  out.theta = xchain_add(xchain_add(hterm, cs, Scalar(1)),
                         bivariant_chern(q, p, pair.theta), Scalar(-1));
  if (check_window >= 0) {
    XChain chA = higher_ch_odd(*q.xsrc, *psrc, pair.lift, *pair.lift_inv, qq);
    XChain lhs = bivariant_chern(q, p, chA);
    XChain ch0 = higher_ch_even(xb, pb2, ftilde, r, qq);
    XChain bh = xb.boundary(hterm);
    XChain rhs = xchain_add(ch0, bh, Scalar(-1));
    XChain diff = xb.cut_total(xchain_add(lhs, rhs, Scalar(-1)), check_window);
    if (!xchain_zero(diff))
      throw std::logic_error("direct image: character identity failed");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conjugation
// ---------------------------------------------------------------------------

UElem super_uelem_inverse(const GenAlgebra& alg, const UElem& u) {
  std::vector<GKey> keys = alg.basis_keys();
  int d = (int)keys.size();
  std::map<GKey, int> index;
  for (int i = 0; i < d; ++i) index[keys[i]] = i;
  auto coords = [&](const UElem& x) {
    std::vector<Scalar> out(d + 1, Scalar(0));
    out[0] = x.u;
    for (const auto& [k, c] : x.x) out[index.at(k) + 1] += c;
    return out;
  };
  std::vector<std::vector<Scalar>> L(d + 1, std::vector<Scalar>(d + 1, Scalar(0)));
  for (int b = 0; b <= d; ++b) {
    UElem eb = (b == 0) ? UElem{Scalar(1), {}}
                        : UElem{Scalar(0), {{keys[b - 1], Scalar(1)}}};
    std::vector<Scalar> col = coords(umul(alg, u, eb));
    for (int rr = 0; rr <= d; ++rr) L[rr][b] = col[rr];
  }
  std::vector<Scalar> rhs(d + 1, Scalar(0));
  rhs[0] = Scalar(1);
  auto sol = scalar_solve_system(L, rhs);
  if (!sol) throw std::domain_error("conjugator is singular");
  UElem inv{(*sol)[0], {}};
  for (int i = 0; i < d; ++i)
    if (!(*sol)[i + 1].is_zero()) inv.x[keys[i]] = (*sol)[i + 1];
  UElem check = umul(alg, inv, u);
  check.u -= Scalar(1);
  if (!uzero(check)) throw std::domain_error("conjugator is singular");
  return inv;
}

Quasihom conjugate_quasihom(const Quasihom& q, const UElem& u) {
  const SuperTarget& t = *q.target;
  const SuperAlg& ms = t.super();
  for (const auto& [k, c] : u.x)
    if (ms.key_parity(k) != 0)
      throw std::domain_error("conjugator must be even");
  UElem uinv = super_uelem_inverse(ms, u);
  std::vector<GElem> rho2;
  for (const GElem& ri : q.rho) {
    UElem v = umul(ms, umul(ms, uinv, UElem{Scalar(0), ri}), u);
    if (!v.u.is_zero())
      throw std::logic_error("conjugated image has a unit component");
    rho2.push_back(v.x);
  }
  return build_quasihom(t, *q.source, *q.tsource, std::move(rho2));
}

// ---------------------------------------------------------------------------
// HomotopyWitness
// ---------------------------------------------------------------------------

HomotopyWitness::HomotopyWitness(const SuperTarget& t, int ntrunc, int nforms)
    : t_(&t), mid_(t.even_part(), ntrunc, nforms), xmid_(mid_) {
  msdst_ = std::make_unique<FormSpace>(t.super(), -1);
  std::vector<UElem> imgs;
  for (const GKey& ek : t.even_keys())
    imgs.push_back(UElem{Scalar(0), GElem{{ek, Scalar(1)}}});
  mu_ = std::make_unique<ClassifyingHom>(mid_, *msdst_, std::move(imgs));
}

UElem HomotopyWitness::include0(const UElem& x) const {
  Elem e;
  for (const auto& [k, c] : x.x) e[t_->even_index(k)] = c;
  return UElem{x.u, mid_.include(e)};
}

ClassifyingHom HomotopyWitness::make_phi(const TensorAlg& ta,
                                         const std::vector<GElem>& rho) const {
  std::vector<UElem> imgs;
  for (const GElem& r : rho) imgs.push_back(include0(UElem{Scalar(0), r}));
  return ClassifyingHom(ta, mid_.upper_forms(), std::move(imgs));
}

Form HomotopyWitness::collapse(const Form& form_over_mid) const {
  return mu_->apply_form(form_over_mid);
}

std::pair<UElem, UElem> HomotopyWitness::lift_invertible(
    const UElem& u, const UElem& uinv) const {
  UElem chk = umul(t_->super(), u, uinv);
  chk.u -= Scalar(1);
  if (!uzero(chk))
    throw std::domain_error("the declared inverse fails in the double");
  const FormSpace& bsp = mid_.base_forms();
  FMat g = fmat_zero(bsp, 1, 1);
  Form f;
  if (!u.u.is_zero()) f[FormKey{GKey{}}] = u.u;
  for (const auto& [k, c] : u.x) f[FormKey{GKey{t_->even_index(k)}}] = c;
  g.at(0, 0) = f;
  auto [g0, ginv] = invertible_inverse(g);
  return {mid_.form_to_uelem(g0.at(0, 0)), mid_.form_to_uelem(ginv.at(0, 0))};
}

XChain x_of_phi(const HomotopyWitness& w, const ClassifyingHom& phi,
                const XChain& xi) {
  XChain out;
  UElem ev = phi.apply_uelem(UElem{xi.even_unit, xi.even});
  out.even_unit = ev.u;
  out.even = ev.x;
  const TensorAlg& ta = phi.src();
  for (const auto& [fk, c] : xi.odd) {
    FormKey zpart(fk.begin(), fk.end() - 1);
    UElem fz = (zpart.size() == 1 && zpart[0].empty())
                   ? UElem{Scalar(1), {}}
                   : phi.apply_key(ta.formkey_to_tkey(zpart));
    UElem fa = phi.apply_key(GKey{fk.back()[0] + 1});
    vec_add(out.odd, w.xmid().nat_oneform(uscale(fz, c), fa.x), Scalar(1));
  }
  return out;
}

XChain conj_cochain(const HomotopyWitness& w, const ClassifyingHom& phi0,
                    const UElem& uhat, const UElem& uhat_inv,
                    const XChain& xi) {
  XChain out;
  out.even_unit = Scalar(0);
  UElem ev = phi0.apply_uelem(UElem{xi.even_unit, xi.even});
  UElem a = umul(w.mid(), uhat_inv, ev);
  out.odd = w.xmid().nat_oneform(a, uhat.x);
  return out;  // vanishes on odd chains
}

std::vector<UElem> family_endpoint(const PolyFamily& fam, int endpoint) {
  std::vector<UElem> out;
  for (const UElem& u : fam.images)
    out.push_back(umap(u, [&](const Scalar& c) {
      return fam.ops.eval(c, endpoint);
    }));
  return out;
}

XChain cartan_cochain(const HomotopyWitness& w, const TensorAlg& ta,
                      const PolyFamily& fam, const XChain& xi) {
  ClassifyingHom phi(ta, w.mid().upper_forms(), fam.images);
  const FormSpace& msp = w.mid().upper_forms();
  auto dphi = [&](const GKey& tk) {
    return umap(phi.apply_key(tk), fam.ops.deriv);
  };
  // contraction: x0 dx1 ... dxm -> phi(x0) phidot(x1) d phi(x2) ... d phi(xm)
  auto iota = [&](const Form& overTA) {
    Form out;
    for (const auto& [fk, c] : overTA) {
      int m = form_degree(fk);
      if (m < 1) continue;
      UElem a0 = fk[0].empty() ? UElem{Scalar(1), {}} : phi.apply_key(fk[0]);
      UElem head = umul(w.mid(), a0, dphi(fk[1]));
      Form f = msp.from_elem(head.x, head.u);
      for (int j = 2; j <= m; ++j) {
        if (f.empty()) break;
        f = msp.append_d(f, phi.apply_key(fk[j]).x);
      }
      vec_add(out, f, c);
    }
    return out;
  };
  XChain h;
  h.even_unit = Scalar(0);
  // even chains: h = nat iota phi(x)
  Form p2 = ta.phi_elem(xi.even_unit, xi.even);
  h.odd = w.xmid().nat(iota(p2));
  // odd chains: h = iota(z da + b(z phi(a)))
  const FormSpace& usp = ta.upper_forms();
  Form w1tot;
  for (const auto& [fk, c] : xi.odd) {
    FormKey zpart(fk.begin(), fk.end() - 1);
    bool zunit = (zpart.size() == 1 && zpart[0].empty());
    GKey akey{fk.back()[0] + 1};
    GKey tz;
    if (!zunit) tz = ta.formkey_to_tkey(zpart);
    FormKey k1{zunit ? GKey{} : tz, akey};
    vec_add(w1tot, Form{{k1, Scalar(1)}}, c);
    Form pa = ta.phi_key(akey);
    Form zpa = zunit ? pa : usp.mul_left_elem(GElem{{tz, Scalar(1)}}, pa);
    vec_add(w1tot, usp.apply_b(zpa), c);
  }
  Form i1 = iota(w1tot);
  for (const auto& [k, cc] : i1) {
    if (k[0].empty())
      h.even_unit += cc;
    else
      vec_add(h.even, GElem{{k[0], Scalar(1)}}, cc);
  }
  return xchain_map_scalar(h, fam.ops.integrate01);
}

XChain chi_collapse(const HomotopyWitness& w, int n, const XChain& xi_mid,
                    int cut) {
  Form g = w.xmid().gamma(xi_mid);
  if (cut >= 0) {
    Form f;
    const FormSpace& usp = w.mid().upper_forms();
    for (const auto& [k, c] : g)
      if (usp.total_degree(k) <= cut) f[k] = c;
    g = std::move(f);
  }
  Form collapsed = w.collapse(g);
  return chi(w.target(), n, pick_degrees(collapsed, n));
}

}  // namespace nca
