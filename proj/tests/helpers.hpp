#pragma once
// Shared test utilities: a deterministic RNG producing integer coefficients
// in [-3, 3] and random elements/forms over finite algebras.

#include <random>

#include "nca/algebra.hpp"
#include "nca/forms.hpp"

namespace ncatest {

using namespace nca;

struct Rng {
  std::mt19937 gen;
  explicit Rng(unsigned seed) : gen(seed) {}
  int coeff() { return (int)(gen() % 7) - 3; }
  int index(int n) { return (int)(gen() % (unsigned)n); }
};

inline Elem random_elem(Rng& r, const FiniteAlgebra& a) {
  Elem out;
  for (int i = 0; i < a.dim(); ++i) {
    int c = r.coeff();
    if (c != 0) out[i] = Scalar(c);
  }
  return out;
}

inline GElem random_gelem(Rng& r, const std::vector<GKey>& keys) {
  GElem out;
  for (const GKey& k : keys) {
    int c = r.coeff();
    if (c != 0) out[k] = Scalar(c);
  }
  return out;
}

// Random homogeneous form of the given degree: a few random basis tensors.
inline Form random_form(Rng& r, const FormSpace& sp, int degree,
                        int terms = 3) {
  std::vector<GKey> keys = sp.algebra().basis_keys();
  Form out;
  for (int t = 0; t < terms; ++t) {
    FormKey k;
    int head = r.index((int)keys.size() + 1);
    k.push_back(head == 0 ? GKey{} : keys[head - 1]);
    for (int i = 0; i < degree; ++i) k.push_back(keys[r.index((int)keys.size())]);
    int c = r.coeff();
    if (c != 0) vec_add(out, Form{{k, Scalar(1)}}, Scalar(c));
  }
  return out;
}

inline Form random_mixed_form(Rng& r, const FormSpace& sp, int maxdeg) {
  Form out;
  for (int d = 0; d <= maxdeg; ++d)
    vec_add(out, random_form(r, sp, d, 2), Scalar(1));
  return out;
}

inline bool form_eq(const Form& a, const Form& b) {
  Form d = a;
  vec_add(d, b, Scalar(-1));
  return d.empty();
}

}  // namespace ncatest
