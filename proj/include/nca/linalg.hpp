#pragma once
// Exact linear algebra over Scalar: sparse vectors keyed by an ordered basis
// key type, incremental echelon subspace bases for membership/quotient tests,
// and dense fraction-free elimination (rank / kernel / solve).

#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nca/scalar.hpp"

namespace nca {

template <class Key>
using SparseVec = std::map<Key, Scalar>;

template <class Key>
void vec_add(SparseVec<Key>& a, const SparseVec<Key>& b, const Scalar& coeff) {
  if (coeff.is_zero()) return;
  for (const auto& [k, c] : b) {
    auto it = a.find(k);
    if (it == a.end()) {
      Scalar v = c * coeff;
      if (!v.is_zero()) a.emplace(k, std::move(v));
    } else {
      it->second += c * coeff;
      if (it->second.is_zero()) a.erase(it);
    }
  }
}

template <class Key>
SparseVec<Key> vec_scale(const SparseVec<Key>& a, const Scalar& coeff) {
  SparseVec<Key> out;
  if (coeff.is_zero()) return out;
  for (const auto& [k, c] : a) {
    Scalar v = c * coeff;
    if (!v.is_zero()) out.emplace(k, std::move(v));
  }
  return out;
}

// Incrementally built reduced echelon basis of a subspace. Each stored vector
// is normalized to leading (pivot) coefficient 1; pivots are the largest keys
// (std::map order) whose coefficient is invertible.
template <class Key>
class SubspaceBasis {
 public:
  // Reduce v against the basis; returns the residual (empty iff v is in the span).
  SparseVec<Key> reduce(SparseVec<Key> v) const {
    bool changed = true;
    while (changed && !v.empty()) {
      changed = false;
      for (auto it = v.rbegin(); it != v.rend(); ++it) {
        auto b = rows_.find(it->first);
        if (b != rows_.end()) {
          vec_add(v, b->second, -it->second);
          changed = true;
          break;
        }
      }
    }
    return v;
  }

  bool contains(const SparseVec<Key>& v) const { return reduce(v).empty(); }

  // Adds v to the span. Returns true if the dimension grew.
  bool add(SparseVec<Key> v) {
    v = reduce(std::move(v));
    if (v.empty()) return false;
    // pick the largest key with invertible coefficient as pivot
    for (auto it = v.rbegin(); it != v.rend(); ++it) {
      auto inv = it->second.inverse();
      if (!inv) continue;
      SparseVec<Key> row = vec_scale(v, *inv);
      Key pivot = it->first;
      // keep the basis reduced: eliminate this pivot from existing rows
      for (auto& [p, r] : rows_) {
        auto hit = r.find(pivot);
        if (hit != r.end()) vec_add(r, row, -hit->second);
      }
      rows_.emplace(std::move(pivot), std::move(row));
      return true;
    }
    throw std::domain_error("SubspaceBasis: no invertible pivot available");
  }

  size_t dim() const { return rows_.size(); }
  const std::map<Key, SparseVec<Key>>& rows() const { return rows_; }

 private:
  std::map<Key, SparseVec<Key>> rows_;  // pivot key -> normalized vector
};

// Dense elimination result.
struct SolveResult {
  int rank = 0;
  std::vector<std::vector<Scalar>> rref;  // echelon form (row-reduced when pivots invert)
  std::vector<int> pivot_cols;
  std::vector<std::vector<Scalar>> kernel;  // basis of the null space
};

// Exact elimination over Scalar. Prefers invertible pivots (Gauss-Jordan);
// when no invertible pivot exists in the remaining block, falls back to
// fraction-free cross-multiplication (Bareiss-style), which still produces an
// echelon form and the correct rank over the domain.
inline SolveResult scalar_solve(std::vector<std::vector<Scalar>> m) {
  SolveResult res;
  size_t rows = m.size();
  size_t cols = rows ? m[0].size() : 0;
  size_t row = 0;
  for (size_t col = 0; col < cols && row < rows; ++col) {
    // invertible pivot first
    size_t piv = rows;
    std::optional<Scalar> pinv;
    for (size_t r = row; r < rows; ++r) {
      if (m[r][col].is_zero()) continue;
      if (auto inv = m[r][col].inverse()) {
        piv = r;
        pinv = inv;
        break;
      }
      if (piv == rows) piv = r;  // remember a nonzero fallback
    }
    if (piv == rows) continue;
    std::swap(m[piv], m[row]);
    if (pinv) {
      for (size_t c = 0; c < cols; ++c) m[row][c] = m[row][c] * *pinv;
      for (size_t r = 0; r < rows; ++r) {
        if (r == row || m[r][col].is_zero()) continue;
        Scalar f = m[r][col];
        for (size_t c = 0; c < cols; ++c) m[r][c] -= f * m[row][c];
      }
    } else {
      // fraction-free: r <- pivot*r - f*rowvec
      for (size_t r = row + 1; r < rows; ++r) {
        if (m[r][col].is_zero()) continue;
        Scalar f = m[r][col];
        for (size_t c = 0; c < cols; ++c)
          m[r][c] = m[row][col] * m[r][c] - f * m[row][c];
      }
    }
    res.pivot_cols.push_back((int)col);
    ++row;
  }
  res.rank = (int)row;
  // kernel basis from the echelon form (requires invertible pivots for the
  // free-variable back-substitution; true whenever Gauss-Jordan was used)
  std::vector<int> pivot_of_col(cols, -1);
  for (size_t k = 0; k < res.pivot_cols.size(); ++k)
    pivot_of_col[res.pivot_cols[k]] = (int)k;
  for (size_t col = 0; col < cols; ++col) {
    if (pivot_of_col[col] >= 0) continue;
    std::vector<Scalar> v(cols, Scalar(0));
    v[col] = Scalar(1);
    bool ok = true;
    for (size_t k = 0; k < res.pivot_cols.size(); ++k) {
      int pc = res.pivot_cols[k];
      Scalar val = m[k][col];
      if (val.is_zero()) continue;
      auto pinv = m[k][pc].inverse();
      if (!pinv) {
        ok = false;
        break;
      }
      v[pc] = -(val * *pinv);
    }
    if (ok) res.kernel.push_back(std::move(v));
  }
  res.rref = std::move(m);
  return res;
}

// Solve A x = b; returns a solution if one exists (first-found coordinates).
inline std::optional<std::vector<Scalar>> scalar_solve_system(
    const std::vector<std::vector<Scalar>>& a, const std::vector<Scalar>& b) {
  size_t rows = a.size();
  size_t cols = rows ? a[0].size() : 0;
  std::vector<std::vector<Scalar>> aug(rows, std::vector<Scalar>(cols + 1));
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols; ++c) aug[r][c] = a[r][c];
    aug[r][cols] = b[r];
  }
  SolveResult res = scalar_solve(std::move(aug));
  std::vector<Scalar> x(cols, Scalar(0));
  for (size_t k = 0; k < res.pivot_cols.size(); ++k) {
    int pc = res.pivot_cols[k];
    if ((size_t)pc == cols) return std::nullopt;  // pivot in rhs column: inconsistent
    auto pinv = res.rref[k][pc].inverse();
    if (!pinv) return std::nullopt;
    // row k: pivot*x_pc + (free columns) = rhs; set free variables to zero
    Scalar rhs = res.rref[k][cols];
    for (size_t c = pc + 1; c < cols; ++c) {
      // columns after the pivot that are themselves pivots contribute 0 after
      // Gauss-Jordan; free columns were set to zero
      (void)c;
    }
    x[pc] = rhs * *pinv;
  }
  // verify (cheap, and guards the fraction-free fallback path)
  for (size_t r = 0; r < rows; ++r) {
    Scalar acc;
    for (size_t c = 0; c < cols; ++c) acc += a[r][c] * x[c];
    if (!(acc == b[r])) return std::nullopt;
  }
  return x;
}

}  // namespace nca
