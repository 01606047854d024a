#include "nca/scalar.hpp"

#include <sstream>

namespace nca {

namespace {
struct IndRegistry {
  std::vector<std::string> names;
  std::vector<int> orders;
};
IndRegistry& registry() {
  static IndRegistry r;
  return r;
}
}  // namespace

int register_indeterminate(const std::string& name, int order) {
  auto& r = registry();
  for (size_t k = 0; k < r.names.size(); ++k)
    if (r.names[k] == name) {
      r.orders[k] = order;  // re-registration updates the rewrite order
      return (int)k;
    }
  r.names.push_back(name);
  r.orders.push_back(order);
  return (int)r.names.size() - 1;
}

const std::string& indeterminate_name(int id) { return registry().names.at(id); }
int indeterminate_order(int id) { return registry().orders.at(id); }

void Scalar::insert_term(Mono m, const mpq_class& c) {
  if (c == 0) return;
  mpq_class coeff = c;
  // Normalize radical exponents via the rewrite rules.
  // ri^2 -> i first, then i^2 -> -1, r2^2 -> 2.
  if (m.eri < 0) throw std::logic_error("negative ri exponent");
  m.ei += m.eri / 2;
  m.eri %= 2;
  if (m.ei < 0) throw std::logic_error("negative i exponent");
  if ((m.ei / 2) % 2 == 1) coeff = -coeff;
  m.ei %= 2;
  if (m.er2 < 0) throw std::logic_error("negative r2 exponent");
  for (int k = 0; k < m.er2 / 2; ++k) coeff *= 2;
  m.er2 %= 2;
  // Indeterminate rewrites x^order -> 1 (exponents canonical in [0, order)).
  std::vector<std::pair<int, int>> ind;
  for (auto [id, e] : m.ind) {
    int order = indeterminate_order(id);
    if (order > 0) {
      e %= order;
      if (e < 0) e += order;
    }
    if (e != 0) ind.emplace_back(id, e);
  }
  m.ind = std::move(ind);
  auto it = terms_.find(m);
  if (it == terms_.end()) {
    terms_.emplace(std::move(m), coeff);
  } else {
    it->second += coeff;
    if (it->second == 0) terms_.erase(it);
  }
}

Scalar Scalar::rational(long num, long den) {
  if (den == 0) throw std::domain_error("zero denominator");
  mpq_class q(num, den);
  q.canonicalize();
  Scalar s;
  if (q != 0) s.terms_[Mono{}] = q;
  return s;
}

Scalar Scalar::i() {
  Scalar s;
  s.terms_[Mono{1, 0, 0, 0, {}}] = 1;
  return s;
}
Scalar Scalar::r2() {
  Scalar s;
  s.terms_[Mono{0, 1, 0, 0, {}}] = 1;
  return s;
}
Scalar Scalar::ri() {
  Scalar s;
  s.terms_[Mono{0, 0, 1, 0, {}}] = 1;
  return s;
}
Scalar Scalar::rp() {
  Scalar s;
  s.terms_[Mono{0, 0, 0, 1, {}}] = 1;
  return s;
}
Scalar Scalar::sqrt_2pi_i() {
  Scalar s;
  s.terms_[Mono{0, 1, 1, 1, {}}] = 1;
  return s;
}
Scalar Scalar::sqrt_2i() {
  Scalar s;
  s.terms_[Mono{0, 1, 1, 0, {}}] = 1;
  return s;
}
Scalar Scalar::indeterminate(int id, int exponent) {
  Scalar s;
  Mono m;
  m.ind.emplace_back(id, exponent);
  s.insert_term(m, 1);
  return s;
}

Scalar Scalar::operator-() const {
  Scalar s(*this);
  for (auto& [m, c] : s.terms_) c = -c;
  return s;
}

Scalar& Scalar::operator+=(const Scalar& o) {
  for (const auto& [m, c] : o.terms_) {
    auto it = terms_.find(m);
    if (it == terms_.end()) {
      terms_.emplace(m, c);
    } else {
      it->second += c;
      if (it->second == 0) terms_.erase(it);
    }
  }
  return *this;
}

Scalar& Scalar::operator-=(const Scalar& o) { return *this += -o; }

Scalar operator*(const Scalar& a, const Scalar& b) {
  Scalar out;
  for (const auto& [ma, ca] : a.terms_)
    for (const auto& [mb, cb] : b.terms_) {
      Scalar::Mono m;
      m.ei = ma.ei + mb.ei;
      m.er2 = ma.er2 + mb.er2;
      m.eri = ma.eri + mb.eri;
      m.erp = ma.erp + mb.erp;
      // merge sorted indeterminate exponent lists
      auto ia = ma.ind.begin();
      auto ib = mb.ind.begin();
      while (ia != ma.ind.end() || ib != mb.ind.end()) {
        if (ib == mb.ind.end() || (ia != ma.ind.end() && ia->first < ib->first)) {
          m.ind.push_back(*ia++);
        } else if (ia == ma.ind.end() || ib->first < ia->first) {
          m.ind.push_back(*ib++);
        } else {
          m.ind.emplace_back(ia->first, ia->second + ib->second);
          ++ia;
          ++ib;
        }
      }
      out.insert_term(std::move(m), ca * cb);
    }
  return out;
}

std::optional<mpq_class> Scalar::as_rational() const {
  if (terms_.empty()) return mpq_class(0);
  if (terms_.size() == 1 && terms_.begin()->first == Mono{})
    return terms_.begin()->second;
  return std::nullopt;
}

std::optional<Scalar> Scalar::inverse() const {
  if (terms_.empty()) return std::nullopt;
  // All terms must share the same rp exponent and indeterminate monomial with
  // every indeterminate of finite order (so the monomial is invertible), or be
  // a single term (rp Laurent exponents are allowed; free indeterminates with
  // negative exponents are allowed too since the ring is treated as Laurent).
  const Mono& m0 = terms_.begin()->first;
  for (const auto& [m, c] : terms_)
    if (m.erp != m0.erp || m.ind != m0.ind) return std::nullopt;

  // Invert the shared monomial part (rp and indeterminates).
  Scalar monoinv;
  {
    Mono m;
    m.erp = -m0.erp;
    for (auto [id, e] : m0.ind) {
      int order = indeterminate_order(id);
      m.ind.emplace_back(id, order > 0 ? order - e : -e);
    }
    monoinv.insert_term(m, 1);
  }

  // Collect the radical part as an element of the 8-dim algebra
  // Q[i,r2,ri]/(i^2+1, r2^2-2, ri^2-i) and invert via an 8x8 rational solve.
  auto idx = [](int ei, int er2, int eri) { return ei + 2 * er2 + 4 * eri; };
  std::vector<mpq_class> v(8, 0);
  for (const auto& [m, c] : terms_) v[idx(m.ei, m.er2, m.eri)] = c;
  // mult[k][j]: basis_k * basis_j expanded back into the 8 basis slots with a
  // rational coefficient.
  std::vector<std::vector<mpq_class>> M(8, std::vector<mpq_class>(8, 0));
  for (int k = 0; k < 8; ++k) {
    int kei = k & 1, ker2 = (k >> 1) & 1, keri = (k >> 2) & 1;
    if (v[k] == 0) continue;
    for (int j = 0; j < 8; ++j) {
      int jei = j & 1, jer2 = (j >> 1) & 1, jeri = (j >> 2) & 1;
      int ei = kei + jei, er2 = ker2 + jer2, eri = keri + jeri;
      mpq_class c = v[k];
      ei += eri / 2;
      eri %= 2;
      if ((ei / 2) % 2 == 1) c = -c;
      ei %= 2;
      if (er2 >= 2) {
        c *= 2;
        er2 -= 2;
      }
      M[idx(ei, er2, eri)][j] += c;
    }
  }
  // Solve M x = e0 (the unit is basis slot 0) by rational Gaussian elimination.
  std::vector<mpq_class> rhs(8, 0);
  rhs[0] = 1;
  for (int col = 0, row = 0; col < 8 && row < 8; ++col) {
    int piv = -1;
    for (int r = row; r < 8; ++r)
      if (M[r][col] != 0) {
        piv = r;
        break;
      }
    if (piv < 0) continue;
    std::swap(M[piv], M[row]);
    std::swap(rhs[piv], rhs[row]);
    mpq_class p = M[row][col];
    for (int c = 0; c < 8; ++c) M[row][c] /= p;
    rhs[row] /= p;
    for (int r = 0; r < 8; ++r) {
      if (r == row || M[r][col] == 0) continue;
      mpq_class f = M[r][col];
      for (int c = 0; c < 8; ++c) M[r][c] -= f * M[row][c];
      rhs[r] -= f * rhs[row];
    }
    ++row;
  }
  // Back-substitution check: rhs must now be the solution in rref order; verify.
  std::vector<mpq_class> x(8, 0);
  {
    // After full Gauss-Jordan above, rows with a leading 1 give x directly.
    // Recompute cleanly: find for each column a row that is the unit vector.
    for (int col = 0; col < 8; ++col) {
      int found = -1;
      for (int r = 0; r < 8; ++r) {
        if (M[r][col] == 0) continue;
        bool unitrow = (M[r][col] == 1);
        if (unitrow)
          for (int c = 0; c < 8; ++c)
            if (c != col && M[r][c] != 0) unitrow = false;
        if (unitrow) {
          found = r;
          break;
        }
      }
      if (found >= 0) x[col] = rhs[found];
    }
    // Rows that reduced to zero must have zero rhs for solvability.
    for (int r = 0; r < 8; ++r) {
      bool zero = true;
      for (int c = 0; c < 8; ++c)
        if (M[r][c] != 0) zero = false;
      if (zero && rhs[r] != 0) return std::nullopt;
    }
  }
  Scalar rad;
  for (int k = 0; k < 8; ++k)
    if (x[k] != 0) {
      Mono m;
      m.ei = k & 1;
      m.er2 = (k >> 1) & 1;
      m.eri = (k >> 2) & 1;
      rad.insert_term(m, x[k]);
    }
  // Verify (guards against an unsolvable system slipping through).
  Scalar radpart;
  for (const auto& [m, c] : terms_) {
    Mono mm;
    mm.ei = m.ei;
    mm.er2 = m.er2;
    mm.eri = m.eri;
    radpart.insert_term(mm, c);
  }
  if (!((radpart * rad) == Scalar(1))) return std::nullopt;
  return rad * monoinv;
}

Scalar operator/(const Scalar& a, const Scalar& b) {
  auto inv = b.inverse();
  if (!inv) throw std::domain_error("Scalar division by non-invertible value");
  return a * *inv;
}

std::string Scalar::str() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [m, c] : terms_) {
    if (!first) os << " + ";
    first = false;
    os << c.get_str();
    if (m.ei) os << "*i";
    if (m.er2) os << "*r2";
    if (m.eri) os << "*ri";
    if (m.erp) os << "*rp^" << m.erp;
    for (auto [id, e] : m.ind) os << "*" << indeterminate_name(id) << "^" << e;
  }
  return os.str();
}

Scalar factorial(int n) {
  if (n < 0) throw std::domain_error("factorial of negative");
  mpq_class q = 1;
  for (int k = 2; k <= n; ++k) q *= k;
  return Scalar(q);
}

Scalar gamma_half(int k) {
  if (k <= 0) throw std::domain_error("gamma_half requires k >= 1");
  if (k % 2 == 0) return factorial(k / 2 - 1);
  // Gamma(k/2) = sqrt(pi) * (k-2)!! / 2^((k-1)/2)
  mpq_class num = 1;
  for (int j = k - 2; j >= 1; j -= 2) num *= j;
  mpq_class den = 1;
  for (int j = 0; j < (k - 1) / 2; ++j) den *= 2;
  return Scalar(mpq_class(num / den)) * Scalar::rp();
}

}  // namespace nca
