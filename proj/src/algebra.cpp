#include "nca/algebra.hpp"

#include <sstream>

namespace nca {

GElem gmul(const GenAlgebra& alg, const GElem& a, const GElem& b) {
  GElem out;
  for (const auto& [ka, ca] : a)
    for (const auto& [kb, cb] : b) vec_add(out, alg.mul(ka, kb), ca * cb);
  return out;
}

Scalar TraceSpec::operator()(const Elem& x) const {
  Scalar out;
  for (const auto& [k, c] : x) out += values.at(k) * c;
  return out;
}

bool IdealSpec::contains_key(int k) const {
  for (int b : basis)
    if (b == k) return true;
  return false;
}

Elem FiniteAlgebra::mul(const Elem& x, const Elem& y) const {
  Elem out;
  for (const auto& [i, ci] : x)
    for (const auto& [j, cj] : y) vec_add(out, mult[i][j], ci * cj);
  return out;
}

void FiniteAlgebra::validate() const {
  int n = dim();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        Elem lhs = mul(mult[i][j], Elem{{k, Scalar(1)}});
        Elem rhs = mul(Elem{{i, Scalar(1)}}, mult[j][k]);
        for (const auto& [key, c] : rhs) vec_add(lhs, Elem{{key, Scalar(1)}}, -c);
        if (!lhs.empty()) {
          std::ostringstream os;
          os << "associativity fails on basis triple (" << i << "," << j << ","
             << k << ")";
          throw std::logic_error(os.str());
        }
      }
  if (unit) {
    for (int i = 0; i < n; ++i) {
      Elem e{{i, Scalar(1)}};
      Elem l = mul(*unit, e), r = mul(e, *unit);
      if (!(l == e) || !(r == e)) {
        std::ostringstream os;
        os << "declared unit is not an identity on basis element " << i;
        throw std::logic_error(os.str());
      }
    }
  }
  // Ideal closure under left/right multiplication by the ambient algebra.
  for (size_t id = 0; id < ideals.size(); ++id) {
    for (int b : ideals[id].basis)
      for (int i = 0; i < n; ++i) {
        for (const Elem& prod : {mult[i][b], mult[b][i]})
          for (const auto& [key, c] : prod)
            if (!ideals[id].contains_key(key)) {
              std::ostringstream os;
              os << "ideal " << id << " not closed: product involving basis "
                 << b << " and " << i << " leaves the span";
              throw std::logic_error(os.str());
            }
      }
  }
}

const SubspaceBasis<int>& FiniteAlgebra::ideal_power(int id, int n) const {
  if (n < 1) throw std::domain_error("ideal_power requires n >= 1");
  if (power_cache_.size() < ideals.size()) power_cache_.resize(ideals.size());
  auto& cache = power_cache_[id];
  while ((int)cache.size() < n) {
    int k = (int)cache.size() + 1;
    auto basis = std::make_unique<SubspaceBasis<int>>();
    if (k == 1) {
      for (int b : ideals[id].basis) basis->add(Elem{{b, Scalar(1)}});
    } else {
      const auto& prev = *cache[k - 2];
      for (const auto& [pivot, vec] : prev.rows())
        for (int b : ideals[id].basis) {
          Elem prod = mul(vec, Elem{{b, Scalar(1)}});
          if (!prod.empty()) basis->add(std::move(prod));
        }
    }
    cache.push_back(std::move(basis));
  }
  return *cache[n - 1];
}

bool FiniteAlgebra::in_ideal_power(const Elem& x, int id, int n) const {
  if (n <= 0) return true;
  return ideal_power(id, n).contains(x);
}

FiniteAlgebra make_matrix_algebra(int n) {
  if (n < 1) throw std::domain_error("matrix algebra needs n >= 1");
  FiniteAlgebra a;
  int d = n * n;
  a.names.resize(d);
  a.mult.assign(d, std::vector<Elem>(d));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      std::ostringstream os;
      os << "e" << i << j;
      a.names[i * n + j] = os.str();
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          if (j == k) a.mult[i * n + j][k * n + l] = Elem{{i * n + l, Scalar(1)}};
    }
  Elem unit;
  for (int i = 0; i < n; ++i) unit[i * n + i] = Scalar(1);
  a.unit = unit;
  TraceSpec tr;
  tr.p = 1;
  tr.values.assign(d, Scalar(0));
  for (int i = 0; i < n; ++i) tr.values[i * n + i] = Scalar(1);
  a.traces.push_back(std::move(tr));
  return a;
}

FiniteAlgebra unitalize(const FiniteAlgebra& a) {
  FiniteAlgebra out;
  int n = a.dim();
  out.names = a.names;
  out.names.push_back("1+");
  out.mult.assign(n + 1, std::vector<Elem>(n + 1));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.mult[i][j] = a.mult[i][j];
  for (int i = 0; i <= n; ++i) {
    out.mult[n][i] = Elem{{i, Scalar(1)}};
    out.mult[i][n] = Elem{{i, Scalar(1)}};
  }
  out.unit = Elem{{n, Scalar(1)}};
  IdealSpec orig;
  for (int i = 0; i < n; ++i) orig.basis.push_back(i);
  out.ideals.push_back(std::move(orig));
  for (const auto& t : a.traces) {
    TraceSpec nt = t;
    nt.values.push_back(Scalar(0));  // adjoined unit is never traced
    out.traces.push_back(std::move(nt));
  }
  return out;
}

FiniteAlgebra tensor_product(const FiniteAlgebra& a, const FiniteAlgebra& b) {
  FiniteAlgebra out;
  int da = a.dim(), db = b.dim();
  int d = da * db;
  out.names.resize(d);
  out.mult.assign(d, std::vector<Elem>(d));
  for (int i = 0; i < da; ++i)
    for (int j = 0; j < db; ++j) out.names[i * db + j] = a.names[i] + "(x)" + b.names[j];
  for (int i1 = 0; i1 < da; ++i1)
    for (int j1 = 0; j1 < db; ++j1)
      for (int i2 = 0; i2 < da; ++i2)
        for (int j2 = 0; j2 < db; ++j2) {
          Elem prod;
          for (const auto& [ka, ca] : a.mult[i1][i2])
            for (const auto& [kb, cb] : b.mult[j1][j2])
              prod[ka * db + kb] = ca * cb;
          out.mult[i1 * db + j1][i2 * db + j2] = std::move(prod);
        }
  if (a.unit && b.unit) {
    Elem u;
    for (const auto& [ka, ca] : *a.unit)
      for (const auto& [kb, cb] : *b.unit) u[ka * db + kb] = ca * cb;
    out.unit = u;
  }
  if (!a.traces.empty() && !b.traces.empty()) {
    TraceSpec t;
    t.p = std::max(a.traces[0].p, b.traces[0].p);
    t.values.assign(d, Scalar(0));
    for (int i = 0; i < da; ++i)
      for (int j = 0; j < db; ++j)
        t.values[i * db + j] = a.traces[0].values[i] * b.traces[0].values[j];
    out.traces.push_back(std::move(t));
  }
  return out;
}

FiniteAlgebra direct_sum(const FiniteAlgebra& a, const FiniteAlgebra& b) {
  FiniteAlgebra out;
  int da = a.dim(), db = b.dim();
  out.names = a.names;
  for (const auto& nm : b.names) out.names.push_back(nm + "'");
  out.mult.assign(da + db, std::vector<Elem>(da + db));
  for (int i = 0; i < da; ++i)
    for (int j = 0; j < da; ++j) out.mult[i][j] = a.mult[i][j];
  for (int i = 0; i < db; ++i)
    for (int j = 0; j < db; ++j) {
      Elem prod;
      for (const auto& [k, c] : b.mult[i][j]) prod[da + k] = c;
      out.mult[da + i][da + j] = std::move(prod);
    }
  if (a.unit && b.unit) {
    Elem u = *a.unit;
    for (const auto& [k, c] : *b.unit) u[da + k] = c;
    out.unit = u;
  }
  return out;
}

GElem FiniteAsGen::mul(const GKey& x, const GKey& y) const {
  GElem out;
  for (const auto& [k, c] : a_->mult[x.at(0)][y.at(0)]) out[GKey{k}] = c;
  return out;
}

// ---------------------------------------------------------------------------
// SuperAlg
// ---------------------------------------------------------------------------

GKey SuperAlg::make_key(int eps, int r, int c, const GKey& inner) const {
  GKey k;
  if (parity_ == Parity::Odd) k.push_back(eps);
  k.push_back(r);
  k.push_back(c);
  k.insert(k.end(), inner.begin(), inner.end());
  return k;
}

GKey SuperAlg::inner_key(const GKey& k) const {
  return GKey(k.begin() + prefix_len(), k.end());
}

int SuperAlg::key_parity(const GKey& k) const {
  // Even case: matrix parity. Odd case: the Clifford degree alone grades the
  // algebra (the 2x2 matrix part is trivially graded).
  if (parity_ == Parity::Even) return (k[0] != k[1]) ? 1 : 0;
  return k[0] % 2;
}

int SuperAlg::key_degree(const GKey& k) const {
  return m_->key_degree(inner_key(k));
}

GElem SuperAlg::mul(const GKey& a, const GKey& b) const {
  GElem out;
  int off = (parity_ == Parity::Odd) ? 1 : 0;
  int ra = a[off], ca = a[off + 1];
  int rb = b[off], cb = b[off + 1];
  if (ca != rb) return out;
  int eps = 0;
  if (parity_ == Parity::Odd) eps = (a[0] + b[0]) % 2;
  GElem prod = m_->mul(inner_key(a), inner_key(b));
  for (const auto& [k, c] : prod) out[make_key(eps, ra, cb, k)] = c;
  return out;
}

GElem SuperAlg::F_left(const GElem& x) const {
  GElem out;
  for (const auto& [k, c] : x) {
    GKey nk = k;
    if (parity_ == Parity::Even) {
      nk[0] = 1 - nk[0];
      out[nk] = out.count(nk) ? out[nk] + c : c;
    } else {
      nk[0] = 1 - nk[0];
      Scalar v = (k[1] == 0) ? c : -c;
      auto it = out.find(nk);
      if (it == out.end())
        out[nk] = v;
      else {
        it->second += v;
        if (it->second.is_zero()) out.erase(it);
      }
    }
  }
  return out;
}

GElem SuperAlg::F_right(const GElem& x) const {
  GElem out;
  for (const auto& [k, c] : x) {
    GKey nk = k;
    Scalar v = c;
    if (parity_ == Parity::Even) {
      nk[1] = 1 - nk[1];
    } else {
      nk[0] = 1 - nk[0];
      v = (k[2] == 0) ? c : -c;
    }
    auto it = out.find(nk);
    if (it == out.end())
      out[nk] = v;
    else {
      it->second += v;
      if (it->second.is_zero()) out.erase(it);
    }
  }
  return out;
}

GElem SuperAlg::F_comm(const GElem& x) const {
  GElem out;
  for (const auto& [k, c] : x) {
    GElem single{{k, c}};
    GElem l = F_left(single);
    GElem r = F_right(single);
    Scalar sign = (key_parity(k) % 2 == 0) ? Scalar(-1) : Scalar(1);
    for (const auto& [kk, cc] : l) vec_add(out, GElem{{kk, Scalar(1)}}, cc);
    for (const auto& [kk, cc] : r) vec_add(out, GElem{{kk, Scalar(1)}}, cc * sign);
  }
  return out;
}

SparseVec<GKey> SuperAlg::supertrace(const GElem& x) const {
  SparseVec<GKey> out;
  for (const auto& [k, c] : x) {
    if (parity_ == Parity::Even) {
      if (k[0] != k[1]) continue;
      Scalar v = (k[0] == 0) ? c : -c;
      vec_add(out, SparseVec<GKey>{{inner_key(k), Scalar(1)}}, v);
    } else {
      if (k[0] != 1 || k[1] != k[2]) continue;
      vec_add(out, SparseVec<GKey>{{inner_key(k), Scalar(1)}}, -Scalar::sqrt_2i() * c);
    }
  }
  return out;
}

GKey SuperAlg::plus_key_diag(int which, const GKey& inner) const {
  return make_key(0, which, which, inner);
}

std::vector<GKey> SuperAlg::basis_keys() const {
  std::vector<GKey> out;
  int neps = (parity_ == Parity::Odd) ? 2 : 1;
  for (const GKey& ik : m_->basis_keys())
    for (int eps = 0; eps < neps; ++eps)
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) out.push_back(make_key(eps, r, c, ik));
  return out;
}

}  // namespace nca
