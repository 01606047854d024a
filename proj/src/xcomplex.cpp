#include "nca/xcomplex.hpp"

#include <functional>
#include <sstream>

namespace nca {

UElem umul(const GenAlgebra& alg, const UElem& a, const UElem& b) {
  UElem out;
  out.u = a.u * b.u;
  out.x = gmul(alg, a.x, b.x);
  vec_add(out.x, b.x, a.u);
  vec_add(out.x, a.x, b.u);
  return out;
}

UElem uadd(const UElem& a, const UElem& b, const Scalar& c) {
  UElem out = a;
  out.u += b.u * c;
  vec_add(out.x, b.x, c);
  return out;
}

bool uzero(const UElem& a) { return a.u.is_zero() && a.x.empty(); }

// ---------------------------------------------------------------------------
// TensorAlg
// ---------------------------------------------------------------------------

TensorAlg::TensorAlg(const FiniteAlgebra& a, int ntrunc, int nforms)
    : a_(&a),
      agen_(a),
      ntrunc_(ntrunc),
      nforms_(nforms < 0 ? 2 * ntrunc + 2 : nforms),
      // The working window carries two degrees of slack beyond 2*ntrunc:
      // truncated products re-enter lower degrees through the derivation
      // rule for curvatures, so identities are only reliable two degrees
      // below the cap. Even products live up to 2*ntrunc+2 and the odd
      // natural coordinates up to 2*ntrunc+3.
      bsp_(agen_, 2 * ntrunc + 3),
      usp_(*this, nforms < 0 ? 2 * ntrunc + 2 : nforms) {}

FormKey TensorAlg::tkey_to_formkey(const GKey& k) const {
  FormKey out;
  out.push_back(k[0] == 0 ? GKey{} : GKey{k[0] - 1});
  for (size_t i = 1; i < k.size(); ++i) out.push_back(GKey{k[i] - 1});
  return out;
}

GKey TensorAlg::formkey_to_tkey(const FormKey& k) const {
  GKey out;
  out.push_back(k[0].empty() ? 0 : k[0][0] + 1);
  for (size_t i = 1; i < k.size(); ++i) out.push_back(k[i][0] + 1);
  return out;
}

Form TensorAlg::uelem_to_form(const UElem& x) const {
  Form out;
  if (!x.u.is_zero()) out[FormKey{GKey{}}] = x.u;
  for (const auto& [k, c] : x.x) out[tkey_to_formkey(k)] = c;
  return out;
}

UElem TensorAlg::form_to_uelem(const Form& w) const {
  UElem out;
  out.u = Scalar(0);
  for (const auto& [k, c] : w) {
    if (((int)k.size() - 1) % 2 != 0)
      throw std::domain_error("odd form is not a tensor-algebra element");
    if (k.size() == 1 && k[0].empty())
      out.u += c;
    else
      out.x[formkey_to_tkey(k)] = c;
  }
  return out;
}

GElem TensorAlg::mul(const GKey& a, const GKey& b) const {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = mul_memo_.find({a, b});
    if (it != mul_memo_.end()) return it->second;
  }
  Form p = bsp_.fedosov(Form{{tkey_to_formkey(a), Scalar(1)}},
                        Form{{tkey_to_formkey(b), Scalar(1)}});
  // form degree > 2*ntrunc is already clipped; degrees are even.
  GElem out;
  for (const auto& [k, c] : p) out[formkey_to_tkey(k)] = c;
  std::lock_guard<std::mutex> lock(mu_);
  mul_memo_.emplace(std::make_pair(a, b), out);
  return out;
}

std::vector<GKey> TensorAlg::basis_keys_of_degree(int deg) const {
  std::vector<GKey> out;
  int d = a_->dim();
  std::function<void(GKey&)> rec = [&](GKey& cur) {
    if ((int)cur.size() == deg + 1) {
      out.push_back(cur);
      return;
    }
    for (int j = 1; j <= d; ++j) {
      cur.push_back(j);
      rec(cur);
      cur.pop_back();
    }
  };
  for (int j0 = 0; j0 <= d; ++j0) {
    if (deg == 0 && j0 == 0) continue;  // the pure unit is not in T^A
    GKey cur{j0};
    rec(cur);
  }
  return out;
}

std::vector<GKey> TensorAlg::basis_keys() const {
  std::vector<GKey> out;
  for (int deg = 0; deg <= 2 * ntrunc_ + 2; deg += 2) {
    auto part = basis_keys_of_degree(deg);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

GElem TensorAlg::include(const Elem& a) const {
  GElem out;
  for (const auto& [i, c] : a) out[GKey{i + 1}] = c;
  return out;
}

Elem TensorAlg::augment(const GElem& x) const {
  Elem out;
  for (const auto& [k, c] : x)
    if (k.size() == 1) out[k[0] - 1] = c;
  return out;
}

int TensorAlg::min_formdeg(const GElem& x) {
  int best = -1;
  for (const auto& [k, c] : x) {
    int d = (int)k.size() - 1;
    if (best < 0 || d < best) best = d;
  }
  return best;
}

Form TensorAlg::phi_key(const GKey& k) const {
  {
    std::scoped_lock lk(mu_);
    auto it = phi_memo_.find(k);
    if (it != phi_memo_.end()) return it->second;
  }
  Form out;
  int deg = (int)k.size() - 1;
  if (deg > 0) {
    // k = u (.) omega(a,b) exactly, with u the key minus its last two slots.
    GKey u(k.begin(), k.end() - 2);
    int a = k[k.size() - 2], b = k[k.size() - 1];
    GKey vkey{0, a, b};
    GElem velem{{vkey, Scalar(1)}};
    // da db = (ab) - a.b in T^A and phi kills generators, so
    // phi(da db) = -d(gen a) d(gen b)
    Form phiv{{FormKey{GKey{}, GKey{a}, GKey{b}}, Scalar(-1)}};
    bool u_is_unit = (u.size() == 1 && u[0] == 0);
    if (u_is_unit) {
      out = phiv;
    } else {
      GElem uelem{{u, Scalar(1)}};
      out = usp_.mul_right_elem(phi_key(u), velem);
      vec_add(out, usp_.mul_left_elem(uelem, phiv), Scalar(1));
      vec_add(out, usp_.append_d(usp_.d_of_elem(uelem), velem), Scalar(1));
    }
  }
  std::scoped_lock lk(mu_);
  auto [it, ok] = phi_memo_.emplace(k, std::move(out));
  return it->second;
}

Form TensorAlg::phi_elem(const Scalar& xu, const GElem& x) const {
  (void)xu;  // phi vanishes on the adjoined unit
  Form out;
  for (const auto& [k, c] : x) vec_add(out, phi_key(k), c);
  return out;
}

Form TensorAlg::phi_form(const Form& w) const {
  Form out;
  for (const auto& [key, c] : w) {
    int n = (int)key.size() - 1;
    for (int i = 0; i <= n; ++i) {
      if (key[i].empty()) continue;  // phi and d kill the adjoined unit
      bool dead = false;
      for (int j = 1; j <= n; ++j) {
        int pos = (i + j) % (n + 1);
        if (key[pos].empty()) dead = true;
      }
      if (dead) continue;
      Form term = phi_key(key[i]);
      for (int j = 1; j <= n && !term.empty(); ++j) {
        int pos = (i + j) % (n + 1);
        term = usp_.append_d(term, GElem{{key[pos], Scalar(1)}});
      }
      Scalar sign = ((n * i) % 2 == 0) ? Scalar(1) : Scalar(-1);
      vec_add(out, term, sign * c);
    }
  }
  return out;
}

Form TensorAlg::geometric_phi(const Form& w) const {
  Form res = w;
  Form acc = w;
  for (int k = 0; k <= nforms_ / 2 + 1 && !acc.empty(); ++k) {
    acc = phi_form(acc);
    vec_add(res, acc, Scalar(1));
  }
  return res;
}

// ---------------------------------------------------------------------------
// XChain helpers
// ---------------------------------------------------------------------------

bool xchain_zero(const XChain& a) {
  return a.even_unit.is_zero() && a.even.empty() && a.odd.empty();
}

XChain xchain_add(const XChain& a, const XChain& b, const Scalar& c) {
  XChain out = a;
  out.even_unit += b.even_unit * c;
  vec_add(out.even, b.even, c);
  vec_add(out.odd, b.odd, c);
  return out;
}

XChain xchain_scale(const XChain& a, const Scalar& c) {
  XChain out;
  out.even_unit = a.even_unit * c;
  if (!c.is_zero()) {
    for (const auto& [k, v] : a.even) out.even[k] = v * c;
    for (const auto& [k, v] : a.odd) out.odd[k] = v * c;
  }
  return out;
}

// ---------------------------------------------------------------------------
// XFinite
// ---------------------------------------------------------------------------

XFinite::XFinite(const FiniteAlgebra& r) : r_(&r), gen_(r), sp_(gen_, -1) {}

const SubspaceBasis<FormKey>& XFinite::commutator_basis() const {
  std::scoped_lock lk(mu_);
  if (comm_) return *comm_;
  comm_ = std::make_unique<SubspaceBasis<FormKey>>();
  int d = r_->dim();
  for (int h = -1; h < d; ++h)
    for (int y = 0; y < d; ++y)
      for (int z = 0; z < d; ++z) {
        FormKey k;
        k.push_back(h < 0 ? GKey{} : GKey{h});
        k.push_back(GKey{y});
        k.push_back(GKey{z});
        Form img = sp_.apply_b(Form{{k, Scalar(1)}});
        if (!img.empty()) comm_->add(std::move(img));
      }
  return *comm_;
}

Form XFinite::nat(const Form& oneform) const {
  return commutator_basis().reduce(oneform);
}

XChain XFinite::boundary(const XChain& xi) const {
  XChain out;
  out.even_unit = Scalar(0);
  // odd result = nat d (even part)
  GElem evenform;
  Form dx;
  for (const auto& [k, c] : xi.even)
    vec_add(dx, Form{{FormKey{GKey{}, k}, Scalar(1)}}, c);
  out.odd = nat(dx);
  // even result = bbar (odd part)
  Form b = sp_.apply_b(xi.odd);
  for (const auto& [k, c] : b) out.even[k[0]] = c;
  return out;
}

XChain XFinite::from_elem(const Elem& x) const {
  XChain out;
  out.even_unit = Scalar(0);
  for (const auto& [i, c] : x) out.even[GKey{i}] = c;
  return out;
}

XChain XFinite::from_oneform(const Form& w) const {
  XChain out;
  out.even_unit = Scalar(0);
  out.odd = nat(w);
  return out;
}

const SubspaceBasis<int>& XFinite::even_span(int id, int level) const {
  std::scoped_lock lk(mu_);
  auto key = std::make_pair(id, level);
  auto it = even_spans_.find(key);
  if (it != even_spans_.end()) return *it->second;
  auto basis = std::make_unique<SubspaceBasis<int>>();
  int n = level / 2;
  // I^{n+1} in both parities
  for (const auto& [pivot, row] : r_->ideal_power(id, n + 1).rows())
    basis->add(row);
  if (level % 2 == 0) {
    // + [I^n, R]
    std::vector<Elem> gens;
    if (n == 0) {
      for (int i = 0; i < r_->dim(); ++i) gens.push_back(Elem{{i, Scalar(1)}});
    } else {
      for (const auto& [pivot, row] : r_->ideal_power(id, n).rows())
        gens.push_back(row);
    }
    for (const Elem& v : gens)
      for (int j = 0; j < r_->dim(); ++j) {
        Elem e{{j, Scalar(1)}};
        Elem comm = r_->mul(v, e);
        vec_add(comm, r_->mul(e, v), Scalar(-1));
        if (!comm.empty()) basis->add(std::move(comm));
      }
  }
  auto& slot = even_spans_[key];
  slot = std::move(basis);
  return *slot;
}

const SubspaceBasis<FormKey>& XFinite::odd_span(int id, int level) const {
  {
    std::scoped_lock lk(mu_);
    auto it = odd_spans_.find(std::make_pair(id, level));
    if (it != odd_spans_.end()) return *it->second;
  }
  auto basis = std::make_unique<SubspaceBasis<FormKey>>();
  int n = level / 2;
  int d = r_->dim();
  // heads at power p: rows of I^p (p=0: unit and all of R)
  auto heads = [&](int p) {
    std::vector<Form> out;
    if (p == 0) {
      out.push_back(sp_.unit_form());
      for (int i = 0; i < d; ++i)
        out.push_back(Form{{FormKey{GKey{i}}, Scalar(1)}});
    } else {
      for (const auto& [pivot, row] : r_->ideal_power(id, p).rows()) {
        Form f;
        for (const auto& [i, c] : row) f[FormKey{GKey{i}}] = c;
        out.push_back(f);
      }
    }
    return out;
  };
  auto add_gens = [&](int headpow, const std::vector<Elem>& tails) {
    for (const Form& h : heads(headpow))
      for (const Elem& t : tails) {
        GElem tg;
        for (const auto& [i, c] : t) tg[GKey{i}] = c;
        Form gen = nat(sp_.append_d(h, tg));
        if (!gen.empty()) basis->add(std::move(gen));
      }
  };
  std::vector<Elem> allR;
  for (int i = 0; i < d; ++i) allR.push_back(Elem{{i, Scalar(1)}});
  std::vector<Elem> ideal;
  for (const auto& [pivot, row] : r_->ideal_power(id, 1).rows())
    ideal.push_back(row);
  if (level % 2 == 0) {
    add_gens(n, allR);  // nat I^n dR
  } else {
    add_gens(n + 1, allR);  // nat I^{n+1} dR
    add_gens(n, ideal);     // + nat I^n dI
  }
  std::scoped_lock lk(mu_);
  auto& slot = odd_spans_[std::make_pair(id, level)];
  if (!slot) slot = std::move(basis);
  return *slot;
}

bool XFinite::in_level(const XChain& xi, int id, int level) const {
  if (!xi.even_unit.is_zero()) return false;
  Elem ev;
  for (const auto& [k, c] : xi.even) ev[k[0]] = c;
  if (!even_span(id, level).contains(ev)) return false;
  Form od = nat(xi.odd);
  return odd_span(id, level).contains(od);
}

std::optional<int> XFinite::adic_order(const XChain& xi, int id,
                                       int maxlevel) const {
  std::optional<int> best;
  for (int m = 0; m <= maxlevel; ++m) {
    if (in_level(xi, id, m))
      best = m;
    else
      break;
  }
  return best;
}

// ---------------------------------------------------------------------------
// XTensor
// ---------------------------------------------------------------------------

namespace {

// A Fedosov factor of a basis tensor key: a generator or a curvature.
struct TFactor {
  bool curvature;
  int a, b;  // generator indices into A (0-based); b unused for generators
};

std::vector<TFactor> factorize(const GKey& k) {
  std::vector<TFactor> out;
  if (k[0] != 0) out.push_back(TFactor{false, k[0] - 1, -1});
  for (size_t i = 1; i + 1 < k.size(); i += 2)
    out.push_back(TFactor{true, k[i] - 1, k[i + 1] - 1});
  return out;
}

}  // namespace

Form XTensor::nat_oneform(const UElem& x, const GElem& y) const {
  const TensorAlg& T = *t_;
  const FormSpace& bsp = T.base_forms();
  Form out;
  for (const auto& [ykey, yc] : y) {
    std::vector<TFactor> fs = factorize(ykey);
    // factor elements as UElems of T^A
    std::vector<UElem> fe;
    for (const TFactor& f : fs) {
      if (f.curvature)
        fe.push_back(UElem{Scalar(0),
                           GElem{{GKey{0, f.a + 1, f.b + 1}, Scalar(1)}}});
      else
        fe.push_back(UElem{Scalar(0), GElem{{GKey{f.a + 1}, Scalar(1)}}});
    }
    for (size_t j = 0; j < fs.size(); ++j) {
      UElem P{Scalar(1), {}};
      for (size_t t = 0; t < j; ++t) P = umul(T, P, fe[t]);
      UElem S{Scalar(1), {}};
      for (size_t t = j + 1; t < fs.size(); ++t) S = umul(T, S, fe[t]);
      // D(factor) = sum of alpha * d(c) * beta
      struct DTerm {
        UElem alpha;
        Elem c;
        UElem beta;
        Scalar coeff;
      };
      std::vector<DTerm> terms;
      UElem one{Scalar(1), {}};
      if (!fs[j].curvature) {
        terms.push_back({one, Elem{{fs[j].a, Scalar(1)}}, one, Scalar(1)});
      } else {
        // da db = (ab) - a.b, so D(da db) = D(ab) - D(a).b - a.D(b)
        int a = fs[j].a, b = fs[j].b;
        UElem ga{Scalar(0), GElem{{GKey{a + 1}, Scalar(1)}}};
        UElem gb{Scalar(0), GElem{{GKey{b + 1}, Scalar(1)}}};
        terms.push_back({one, T.base().mul_keys(a, b), one, Scalar(1)});
        terms.push_back({one, Elem{{a, Scalar(1)}}, gb, Scalar(-1)});
        terms.push_back({ga, Elem{{b, Scalar(1)}}, one, Scalar(-1)});
      }
      for (const DTerm& dt : terms) {
        if (dt.c.empty()) continue;
        // nat(x P alpha d(c) beta S) = (beta S x P alpha) dc
        UElem z = umul(T, dt.beta, S);
        z = umul(T, z, x);
        z = umul(T, z, P);
        z = umul(T, z, dt.alpha);
        if (uzero(z)) continue;
        GElem cg;
        for (const auto& [i, cc] : dt.c) cg[GKey{i}] = cc;
        Form zf = T.uelem_to_form(z);
        vec_add(out, bsp.append_d(zf, cg), yc * dt.coeff);
      }
    }
  }
  return out;
}

Form XTensor::nat(const Form& oneFormOverT) const {
  Form out;
  for (const auto& [k, c] : oneFormOverT) {
    if (k.size() != 2) throw std::domain_error("nat expects a 1-form");
    UElem x;
    x.u = Scalar(0);
    if (k[0].empty())
      x.u = Scalar(1);
    else
      x.x[k[0]] = Scalar(1);
    vec_add(out, nat_oneform(x, GElem{{k[1], Scalar(1)}}), c);
  }
  return out;
}

XChain XTensor::boundary(const XChain& xi) const {
  const TensorAlg& T = *t_;
  XChain out;
  out.even_unit = Scalar(0);
  // odd result = nat d(even); d kills the adjoined unit.
  out.odd = nat_oneform(UElem{Scalar(1), {}}, xi.even);
  // even result = bbar(odd): bbar(z da) = z().a - a().z
  for (const auto& [k, c] : xi.odd) {
    FormKey zkey(k.begin(), k.end() - 1);
    int a = k.back()[0];
    UElem z;
    z.u = Scalar(0);
    if (zkey.size() == 1 && zkey[0].empty())
      z.u = Scalar(1);
    else
      z.x[T.formkey_to_tkey(zkey)] = Scalar(1);
    UElem ga{Scalar(0), T.include(Elem{{a, Scalar(1)}})};
    UElem comm = uadd(umul(T, z, ga), umul(T, ga, z), Scalar(-1));
    vec_add(out.even, comm.x, c);
    out.even_unit += comm.u * c;  // always zero, kept for safety
  }
  return out;
}

XChain XTensor::cut_total(const XChain& xi, int maxdeg) const {
  XChain out;
  out.even_unit = xi.even_unit;
  for (const auto& [k, c] : xi.even)
    if (t_->key_degree(k) <= maxdeg) out.even[k] = c;
  for (const auto& [k, c] : xi.odd)
    if (t_->base_forms().total_degree(k) <= maxdeg) out.odd[k] = c;
  return out;
}

XChain XTensor::project(const Form& formOverT) const {
  XChain out;
  out.even_unit = Scalar(0);
  Form deg1;
  for (const auto& [k, c] : formOverT) {
    if (k.size() == 1) {
      if (k[0].empty())
        out.even_unit += c;
      else
        out.even[k[0]] = c;
    } else if (k.size() == 2) {
      deg1[k] = c;
    }
  }
  out.odd = nat(deg1);
  return out;
}

Form XTensor::gamma(const XChain& xi) const {
  const TensorAlg& T = *t_;
  const FormSpace& usp = T.upper_forms();
  Form w0 = usp.from_elem(xi.even, xi.even_unit);
  Form res = T.geometric_phi(w0);
  // Odd canonical coordinates are z da with a a generator, and phi(a) = 0,
  // so gamma(nat z da) = (1 - phi)^{-1}(z da).
  Form odd1;
  for (const auto& [k, c] : xi.odd) {
    FormKey zkey(k.begin(), k.end() - 1);
    int a = k.back()[0];
    Scalar zu(0);
    GElem zx;
    if (zkey.size() == 1 && zkey[0].empty())
      zu = Scalar(1);
    else
      zx[T.formkey_to_tkey(zkey)] = Scalar(1);
    Form zf = usp.from_elem(zx, zu);
    vec_add(odd1, usp.append_d(zf, T.include(Elem{{a, Scalar(1)}})), c);
  }
  vec_add(res, T.geometric_phi(odd1), Scalar(1));
  return res;
}

const SubspaceBasis<FormKey>& XTensor::even_comm_span(int n) const {
  {
    std::scoped_lock lk(mu_);
    auto it = even_comm_spans_.find(n);
    if (it != even_comm_spans_.end()) return *it->second;
  }
  const TensorAlg& T = *t_;
  const FormSpace& bsp = T.base_forms();
  auto basis = std::make_unique<SubspaceBasis<FormKey>>();
  // degree-2n component of [J^n, T^A]: [j, a] with deg j = 2n, a a generator
  for (const GKey& j : T.basis_keys_of_degree(2 * n))
    for (int a = 0; a < T.base().dim(); ++a) {
      Form jf{{T.tkey_to_formkey(j), Scalar(1)}};
      GElem ag{{GKey{a}, Scalar(1)}};
      Form comm = bsp.mul_right_elem(jf, ag);
      vec_add(comm, bsp.mul_left_elem(ag, jf), Scalar(-1));
      comm = bsp.component(comm, 2 * n);
      if (!comm.empty()) basis->add(std::move(comm));
    }
  std::scoped_lock lk(mu_);
  auto& slot = even_comm_spans_[n];
  if (!slot) slot = std::move(basis);
  return *slot;
}

const SubspaceBasis<FormKey>& XTensor::odd_span(int level) const {
  {
    std::scoped_lock lk(mu_);
    auto it = odd_spans_.find(level);
    if (it != odd_spans_.end()) return *it->second;
  }
  const TensorAlg& T = *t_;
  int n = level / 2;
  int maxdeg = 2 * T.ntrunc() + 2;
  auto basis = std::make_unique<SubspaceBasis<FormKey>>();
  auto add_gens = [&](int minheaddeg, bool unit_head, int mintaildeg) {
    for (int hd = minheaddeg == 0 ? 0 : 2 * ((minheaddeg + 1) / 2);
         hd <= maxdeg; hd += 2) {
      std::vector<UElem> heads;
      if (hd == 0 && unit_head) heads.push_back(UElem{Scalar(1), {}});
      if (hd > 0 || minheaddeg == 0)
        for (const GKey& j : T.basis_keys_of_degree(hd))
          heads.push_back(UElem{Scalar(0), GElem{{j, Scalar(1)}}});
      for (int td = mintaildeg; hd + td + 1 <= maxdeg + 1; td += 2)
        for (const GKey& tkey : T.basis_keys_of_degree(td))
          for (UElem& h : heads) {
            Form gen = nat_oneform(h, GElem{{tkey, Scalar(1)}});
            if (!gen.empty()) basis->add(std::move(gen));
          }
    }
  };
  if (level % 2 == 0) {
    // nat J^n d(T^A); J^0 includes the adjoined unit head.
    add_gens(2 * n, n == 0, 0);
  } else {
    // nat(J^{n+1} d(T^A) + J^n d J)
    add_gens(2 * (n + 1), false, 0);
    add_gens(2 * n, n == 0, 2);
  }
  std::scoped_lock lk(mu_);
  auto& slot = odd_spans_[level];
  if (!slot) slot = std::move(basis);
  return *slot;
}

bool XTensor::in_level(const XChain& xi, int level) const {
  if (!xi.even_unit.is_zero()) return false;
  int n = level / 2;
  Form low;  // degree-2n part if the level is even; everything below fails
  for (const auto& [k, c] : xi.even) {
    int deg = (int)k.size() - 1;
    if (deg >= 2 * n + 2) continue;  // inside J^{n+1}
    if (level % 2 == 1) return false;
    if (deg < 2 * n) return false;
    low[t_->tkey_to_formkey(k)] = c;
  }
  if (!low.empty() && !even_comm_span(n).contains(low)) return false;
  if (xi.odd.empty()) return true;
  return odd_span(level).contains(xi.odd);
}

std::optional<int> XTensor::adic_order(const XChain& xi, int maxlevel) const {
  std::optional<int> best;
  for (int m = 0; m <= maxlevel; ++m) {
    if (in_level(xi, m))
      best = m;
    else
      break;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Canonical lifts
// ---------------------------------------------------------------------------

FMat fmat_p0(const FormSpace& sp, int n, int rank) {
  FMat m = fmat_zero(sp, n, n);
  for (int i = 0; i < rank && i < n; ++i) m.at(i, i) = sp.unit_form();
  return m;
}

FMat idempotent_lift(const FMat& e) {
  const FormSpace& sp = *e.sp;
  FMat diff = fmat_sub(fmat_mul(e, e), e);
  if (!fmat_is_zero(diff))
    throw std::domain_error("idempotent_lift: input is not idempotent");
  FMat ehalf = fmat_sub(e, fmat_scale(fmat_identity(sp, e.rows),
                                      Scalar::rational(1, 2)));
  FMat de = fmat_d(e);
  FMat dede = fmat_mul(de, de);
  FMat out = e;
  FMat pw = dede;
  for (int k = 1; !fmat_is_zero(pw); ++k) {
    Scalar coef = factorial(2 * k) / (factorial(k) * factorial(k));
    out = fmat_add(out, fmat_scale(fmat_mul(ehalf, pw), coef));
    pw = fmat_mul(pw, dede);
    if (sp.cap() >= 0 && 2 * (k + 1) > sp.cap()) break;
  }
  return out;
}

std::optional<FMat> fmat_inverse0(const FMat& g) {
  const FormSpace& sp = *g.sp;
  const GenAlgebra& alg = sp.algebra();
  std::vector<GKey> keys = alg.basis_keys();
  int d = (int)keys.size();
  int n = g.rows;
  int dim = n * (d + 1);  // coordinates: (row, unit/basis)
  // Extract degree-0 coordinates of g.
  auto coords = [&](const Form& f) {
    std::vector<Scalar> out(d + 1, Scalar(0));
    for (const auto& [k, c] : f) {
      if (k.size() != 1)
        throw std::domain_error("fmat_inverse0: entries must be degree 0");
      if (k[0].empty())
        out[0] += c;
      else {
        for (int i = 0; i < d; ++i)
          if (keys[i] == k[0]) out[i + 1] += c;
      }
    }
    return out;
  };
  // Left multiplication matrix L: column (k, co') -> coordinates of g_{ik} * co'
  std::vector<std::vector<Scalar>> L(dim, std::vector<Scalar>(dim, Scalar(0)));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      std::vector<Scalar> gik = coords(g.at(i, k));
      for (int cp = 0; cp <= d; ++cp) {
        // product gik * basis(cp) in coordinates
        std::vector<Scalar> prod(d + 1, Scalar(0));
        if (cp == 0) {
          prod = gik;
        } else {
          prod[cp] += gik[0];
          for (int a = 0; a < d; ++a) {
            if (gik[a + 1].is_zero()) continue;
            for (const auto& [kk, cc] : alg.mul(keys[a], keys[cp - 1]))
              for (int b = 0; b < d; ++b)
                if (keys[b] == kk) prod[b + 1] += gik[a + 1] * cc;
          }
        }
        for (int co = 0; co <= d; ++co)
          L[i * (d + 1) + co][k * (d + 1) + cp] = prod[co];
      }
    }
  FMat inv = fmat_zero(sp, n, n);
  for (int j = 0; j < n; ++j) {
    std::vector<Scalar> rhs(dim, Scalar(0));
    rhs[j * (d + 1) + 0] = Scalar(1);
    auto sol = scalar_solve_system(L, rhs);
    if (!sol) return std::nullopt;
    for (int k = 0; k < n; ++k) {
      Form f;
      Scalar uc = (*sol)[k * (d + 1) + 0];
      if (!uc.is_zero()) f[FormKey{GKey{}}] = uc;
      for (int a = 0; a < d; ++a) {
        Scalar c = (*sol)[k * (d + 1) + a + 1];
        if (!c.is_zero()) f[FormKey{keys[a]}] = c;
      }
      inv.at(k, j) = f;
    }
  }
  // verify two-sided
  if (!fmat_is_zero(fmat_sub(fmat_mul(g, inv), fmat_identity(sp, n))))
    return std::nullopt;
  if (!fmat_is_zero(fmat_sub(fmat_mul(inv, g), fmat_identity(sp, n))))
    return std::nullopt;
  return inv;
}

std::pair<FMat, FMat> invertible_inverse(const FMat& g) {
  auto inv0 = fmat_inverse0(g);
  if (!inv0) throw std::domain_error("invertible_inverse: matrix is singular");
  const FormSpace& sp = *g.sp;
  FMat dg = fmat_d(g);
  FMat dginv = fmat_d(*inv0);
  FMat m = fmat_mul(dg, dginv);
  FMat out = *inv0;
  FMat pw = m;
  for (int k = 1; !fmat_is_zero(pw); ++k) {
    out = fmat_add(out, fmat_mul(*inv0, pw));
    pw = fmat_mul(pw, m);
    if (sp.cap() >= 0 && 2 * (k + 1) > sp.cap()) break;
  }
  return {g, out};
}

// ---------------------------------------------------------------------------
// ClassifyingHom
// ---------------------------------------------------------------------------

ClassifyingHom::ClassifyingHom(const TensorAlg& src, const FormSpace& dst_forms,
                               std::vector<UElem> gen_image)
    : src_(&src), dsp_(&dst_forms), gen_image_(std::move(gen_image)) {
  if ((int)gen_image_.size() != src.base().dim())
    throw std::domain_error("classifying hom: one image per generator required");
}

UElem ClassifyingHom::apply_key(const GKey& k) const {
  {
    std::scoped_lock lk(mu_);
    auto it = memo_.find(k);
    if (it != memo_.end()) return it->second;
  }
  const GenAlgebra& dst = dsp_->algebra();
  UElem out{Scalar(0), {}};
  if (k.size() == 1) {
    out = gen_image_[k[0] - 1];
  } else {
    GKey u(k.begin(), k.end() - 2);
    int a = k[k.size() - 2] - 1, b = k[k.size() - 1] - 1;
    // da db = (ab) - a.b, so the curvature maps to im(ab) - im(a) im(b)
    UElem iab = umul(dst, gen_image_[a], gen_image_[b]);
    UElem lin{Scalar(0), {}};
    for (const auto& [i, c] : src_->base().mul_keys(a, b))
      lin = uadd(lin, gen_image_[i], c);
    UElem iomega = uadd(lin, iab, Scalar(-1));
    bool u_is_unit = (u.size() == 1 && u[0] == 0);
    if (u_is_unit)
      out = iomega;
    else
      out = umul(dst, apply_key(u), iomega);
  }
  std::scoped_lock lk(mu_);
  auto [it, ok] = memo_.emplace(k, std::move(out));
  return it->second;
}

UElem ClassifyingHom::apply_uelem(const UElem& x) const {
  UElem out{x.u, {}};
  for (const auto& [k, c] : x.x) out = uadd(out, apply_key(k), c);
  return out;
}

Form ClassifyingHom::apply_form(const Form& w) const {
  Form out;
  for (const auto& [k, c] : w) {
    Form f;
    if (k[0].empty()) {
      f = dsp_->unit_form();
    } else {
      UElem im = apply_key(k[0]);
      f = dsp_->from_elem(im.x, im.u);
    }
    for (size_t t = 1; t < k.size() && !f.empty(); ++t) {
      UElem im = apply_key(k[t]);
      f = dsp_->multiply(f, dsp_->d_of_elem(im.x));
    }
    vec_add(out, f, c);
  }
  return out;
}

}  // namespace nca
