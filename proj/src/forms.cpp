#include "nca/forms.hpp"

#include <functional>

namespace nca {

int FormSpace::total_degree(const FormKey& k) const {
  int d = (int)k.size() - 1;
  for (const GKey& g : k)
    if (!g.empty()) d += alg_->key_degree(g);
  return d;
}

Form FormSpace::clip(Form&& w) const {
  if (cap_ < 0) return std::move(w);
  for (auto it = w.begin(); it != w.end();) {
    if (total_degree(it->first) > cap_) {
      truncated_ = true;
      it = w.erase(it);
    } else {
      ++it;
    }
  }
  return std::move(w);
}

Form FormSpace::from_elem(const GElem& x, const Scalar& unit_coeff) const {
  Form out;
  if (!unit_coeff.is_zero()) out[FormKey{GKey{}}] = unit_coeff;
  for (const auto& [k, c] : x) vec_add(out, Form{{FormKey{k}, Scalar(1)}}, c);
  return clip(std::move(out));
}

Form FormSpace::d_of_elem(const GElem& x) const {
  Form out;
  for (const auto& [k, c] : x)
    vec_add(out, Form{{FormKey{GKey{}, k}, Scalar(1)}}, c);
  return clip(std::move(out));
}

namespace {

// Right multiplication of a single basis tensor by a single basis key of A,
// by the Leibniz normalization (w' d xn) a = w' d(xn a) - (w' xn) da.
Form mul_key_right(const GenAlgebra& alg, const FormKey& k, const Scalar& c,
                   const GKey& a) {
  Form out;
  int n = (int)k.size() - 1;
  if (n == 0) {
    if (k[0].empty()) {
      out[FormKey{a}] = c;
    } else {
      for (const auto& [p, cp] : alg.mul(k[0], a))
        vec_add(out, Form{{FormKey{p}, Scalar(1)}}, c * cp);
    }
    return out;
  }
  FormKey prefix(k.begin(), k.end() - 1);
  const GKey& xn = k[n];
  for (const auto& [p, cp] : alg.mul(xn, a)) {
    FormKey nk = prefix;
    nk.push_back(p);
    vec_add(out, Form{{nk, Scalar(1)}}, c * cp);
  }
  Form wxn = mul_key_right(alg, prefix, c, xn);
  for (const auto& [k2, c2] : wxn) {
    FormKey nk = k2;
    nk.push_back(a);
    vec_add(out, Form{{nk, Scalar(1)}}, -c2);
  }
  return out;
}

}  // namespace

Form FormSpace::mul_right_elem(const Form& w, const GElem& x,
                               const Scalar& unit_coeff) const {
  Form out;
  for (const auto& [k, c] : w) {
    if (!unit_coeff.is_zero()) vec_add(out, Form{{k, Scalar(1)}}, c * unit_coeff);
    for (const auto& [a, ca] : x)
      vec_add(out, mul_key_right(*alg_, k, c * ca, a), Scalar(1));
  }
  return clip(std::move(out));
}

Form FormSpace::mul_left_elem(const GElem& x, const Form& w,
                              const Scalar& unit_coeff) const {
  Form out;
  for (const auto& [k, c] : w) {
    if (!unit_coeff.is_zero()) vec_add(out, Form{{k, Scalar(1)}}, c * unit_coeff);
    for (const auto& [a, ca] : x) {
      if (k[0].empty()) {
        FormKey nk = k;
        nk[0] = a;
        vec_add(out, Form{{nk, Scalar(1)}}, c * ca);
      } else {
        for (const auto& [p, cp] : alg_->mul(a, k[0])) {
          FormKey nk = k;
          nk[0] = p;
          vec_add(out, Form{{nk, Scalar(1)}}, c * ca * cp);
        }
      }
    }
  }
  return clip(std::move(out));
}

Form FormSpace::append_d(const Form& w, const GElem& x) const {
  Form out;
  for (const auto& [k, c] : w)
    for (const auto& [a, ca] : x) {
      FormKey nk = k;
      nk.push_back(a);
      vec_add(out, Form{{nk, Scalar(1)}}, c * ca);
    }
  return clip(std::move(out));
}

Form FormSpace::apply_d(const Form& w) const {
  Form out;
  for (const auto& [k, c] : w) {
    if (k[0].empty()) continue;  // d of the adjoined unit vanishes
    FormKey nk;
    nk.push_back(GKey{});
    nk.insert(nk.end(), k.begin(), k.end());
    vec_add(out, Form{{nk, Scalar(1)}}, c);
  }
  return clip(std::move(out));
}

Form FormSpace::apply_b(const Form& w) const {
  Form out;
  for (const auto& [k, c] : w) {
    int n = (int)k.size() - 1;
    if (n == 0) continue;
    Scalar sign = ((n - 1) % 2 == 0) ? Scalar(1) : Scalar(-1);
    FormKey prefix(k.begin(), k.end() - 1);
    const GKey& a = k[n];
    // (-)^{n-1} (w' a - a w') for w = w' da
    vec_add(out, mul_key_right(*alg_, prefix, c, a), sign);
    if (prefix[0].empty()) {
      FormKey nk = prefix;
      nk[0] = a;
      vec_add(out, Form{{nk, Scalar(1)}}, -sign * c);
    } else {
      for (const auto& [p, cp] : alg_->mul(a, prefix[0])) {
        FormKey nk = prefix;
        nk[0] = p;
        vec_add(out, Form{{nk, Scalar(1)}}, -sign * c * cp);
      }
    }
  }
  return out;
}

Form FormSpace::apply_kappa(const Form& w) const {
  Form out;
  for (const auto& [k, c] : w) {
    int n = (int)k.size() - 1;
    if (n == 0) {
      vec_add(out, Form{{k, Scalar(1)}}, c);
      continue;
    }
    Scalar sign = ((n - 1) % 2 == 0) ? Scalar(1) : Scalar(-1);
    const GKey& a = k[n];
    if (k[0].empty()) {
      // da (1 dx1 ... dx_{n-1}) = 1 da dx1 ... dx_{n-1}
      FormKey nk;
      nk.push_back(GKey{});
      nk.push_back(a);
      nk.insert(nk.end(), k.begin() + 1, k.end() - 1);
      vec_add(out, Form{{nk, Scalar(1)}}, sign * c);
    } else {
      // da (x0 dx1 ...) = d(a x0) dx1 ... - a dx0 dx1 ...
      for (const auto& [p, cp] : alg_->mul(a, k[0])) {
        FormKey nk;
        nk.push_back(GKey{});
        nk.push_back(p);
        nk.insert(nk.end(), k.begin() + 1, k.end() - 1);
        vec_add(out, Form{{nk, Scalar(1)}}, sign * c * cp);
      }
      FormKey nk;
      nk.push_back(a);
      nk.insert(nk.end(), k.begin(), k.end() - 1);
      vec_add(out, Form{{nk, Scalar(1)}}, -sign * c);
    }
  }
  return out;
}

Form FormSpace::apply_B(const Form& w) const {
  // B = (1 + kappa + ... + kappa^n) d on Omega^n, per degree component.
  std::map<int, Form> comps;
  for (const auto& [k, c] : w) comps[(int)k.size() - 1][k] = c;
  Form out;
  for (auto& [n, comp] : comps) {
    Form dw = apply_d(comp);
    Form acc = dw;
    vec_add(out, dw, Scalar(1));
    for (int i = 1; i <= n; ++i) {
      acc = apply_kappa(acc);
      vec_add(out, acc, Scalar(1));
    }
  }
  return clip(std::move(out));
}

Form FormSpace::multiply(const Form& a, const Form& b) const {
  Form out;
  for (const auto& [kb, cb] : b) {
    for (const auto& [ka, ca] : a) {
      Form m;
      if (kb[0].empty())
        m = Form{{ka, ca}};
      else
        m = mul_key_right(*alg_, ka, ca, kb[0]);
      for (const auto& [km, cm] : m) {
        FormKey nk = km;
        nk.insert(nk.end(), kb.begin() + 1, kb.end());
        vec_add(out, Form{{nk, Scalar(1)}}, cm * cb);
      }
    }
  }
  return clip(std::move(out));
}

Form FormSpace::fedosov(const Form& a, const Form& b) const {
  for (const auto& [k, c] : a)
    if (((int)k.size() - 1) % 2 != 0)
      throw std::domain_error("fedosov product requires even forms");
  for (const auto& [k, c] : b)
    if (((int)k.size() - 1) % 2 != 0)
      throw std::domain_error("fedosov product requires even forms");
  Form out = multiply(a, b);
  vec_add(out, multiply(apply_d(a), apply_d(b)), Scalar(-1));
  return clip(std::move(out));
}

Form FormSpace::component(const Form& w, int degree) const {
  Form out;
  for (const auto& [k, c] : w)
    if ((int)k.size() - 1 == degree) out[k] = c;
  return out;
}

Form FormSpace::degree_at_most(const Form& w, int maxdeg) const {
  Form out;
  for (const auto& [k, c] : w)
    if ((int)k.size() - 1 <= maxdeg) out[k] = c;
  return out;
}

Form FormSpace::scale(const Form& w, const Scalar& c) const {
  Form out;
  if (c.is_zero()) return out;
  for (const auto& [k, v] : w) out[k] = v * c;
  return out;
}

const SubspaceBasis<FormKey>& FormSpace::b_image_basis(int n) const {
  std::scoped_lock lk(mu_);
  auto it = b_image_.find(n);
  if (it != b_image_.end()) return *it->second;
  auto basis = std::make_unique<SubspaceBasis<FormKey>>();
  std::vector<GKey> keys = alg_->basis_keys();
  std::vector<GKey> heads = keys;
  heads.insert(heads.begin(), GKey{});  // adjoined unit in position 0
  // Enumerate basis tensors of degree n+1 and span the image of b.
  std::vector<FormKey> stack;
  std::function<void(FormKey&)> rec = [&](FormKey& cur) {
    if ((int)cur.size() == n + 2) {
      Form img = apply_b(Form{{cur, Scalar(1)}});
      if (!img.empty()) basis->add(std::move(img));
      return;
    }
    for (const GKey& g : keys) {
      cur.push_back(g);
      rec(cur);
      cur.pop_back();
    }
  };
  for (const GKey& h : heads) {
    FormKey cur{h};
    rec(cur);
  }
  auto& slot = b_image_[n];
  slot = std::move(basis);
  return *slot;
}

Form FormSpace::hodge_reduce(const Form& w, int n) const {
  Form out;
  if (n < 0) return out;
  Form degn;
  for (const auto& [k, c] : w) {
    int d = (int)k.size() - 1;
    if (d < n)
      out[k] = c;
    else if (d == n)
      degn[k] = c;
  }
  if (!degn.empty()) {
    Form red = b_image_basis(n).reduce(degn);
    vec_add(out, red, Scalar(1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matrices of forms.
// ---------------------------------------------------------------------------

FMat fmat_zero(const FormSpace& sp, int r, int c) {
  FMat m;
  m.sp = &sp;
  m.rows = r;
  m.cols = c;
  m.e.resize((size_t)r * c);
  return m;
}

FMat fmat_identity(const FormSpace& sp, int n) {
  FMat m = fmat_zero(sp, n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = sp.unit_form();
  return m;
}

FMat fmat_add(const FMat& a, const FMat& b) {
  FMat m = a;
  for (size_t i = 0; i < m.e.size(); ++i) vec_add(m.e[i], b.e[i], Scalar(1));
  return m;
}

FMat fmat_sub(const FMat& a, const FMat& b) {
  FMat m = a;
  for (size_t i = 0; i < m.e.size(); ++i) vec_add(m.e[i], b.e[i], Scalar(-1));
  return m;
}

FMat fmat_scale(const FMat& a, const Scalar& c) {
  FMat m = a;
  for (auto& f : m.e) f = a.sp->scale(f, c);
  return m;
}

FMat fmat_mul(const FMat& a, const FMat& b) {
  FMat m = fmat_zero(*a.sp, a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k) {
      if (a.at(i, k).empty()) continue;
      for (int j = 0; j < b.cols; ++j) {
        if (b.at(k, j).empty()) continue;
        vec_add(m.at(i, j), a.sp->multiply(a.at(i, k), b.at(k, j)), Scalar(1));
      }
    }
  return m;
}

FMat fmat_d(const FMat& a) {
  FMat m = a;
  for (auto& f : m.e) f = a.sp->apply_d(f);
  return m;
}

Form fmat_trace(const FMat& a) {
  Form out;
  for (int i = 0; i < a.rows && i < a.cols; ++i)
    vec_add(out, a.at(i, i), Scalar(1));
  return out;
}

bool fmat_is_zero(const FMat& a) {
  for (const auto& f : a.e)
    if (!f.empty()) return false;
  return true;
}

}  // namespace nca
