#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "helpers.hpp"

using namespace nca;
using namespace ncatest;

namespace {

// 2-dimensional nilpotent algebra: x*x = y, all other products zero.
FiniteAlgebra make_nilpotent2() {
  FiniteAlgebra a;
  a.names = {"x", "y"};
  a.mult.assign(2, std::vector<Elem>(2));
  a.mult[0][0] = Elem{{1, Scalar(1)}};
  IdealSpec all;
  all.basis = {0, 1};
  a.ideals.push_back(all);
  return a;
}

}  // namespace

TEST_CASE("matrix algebra structure and trace") {
  FiniteAlgebra m2 = make_matrix_algebra(2);
  m2.validate();
  // e01 * e10 = e00, e10 * e01 = e11, e01 * e01 = 0
  CHECK(m2.mul_keys(0 * 2 + 1, 1 * 2 + 0) == Elem{{0, Scalar(1)}});
  CHECK(m2.mul_keys(1 * 2 + 0, 0 * 2 + 1) == Elem{{3, Scalar(1)}});
  CHECK(m2.mul_keys(1, 1).empty());

  FiniteAlgebra m3 = make_matrix_algebra(3);
  m3.validate();
  Rng r(42);
  for (int t = 0; t < 20; ++t) {
    Elem x = random_elem(r, m3), y = random_elem(r, m3);
    Scalar lhs = m3.traces[0](m3.mul(x, y));
    Scalar rhs = m3.traces[0](m3.mul(y, x));
    CHECK(lhs == rhs);
  }
}

TEST_CASE("validate reports the failing basis triple") {
  FiniteAlgebra bad = make_matrix_algebra(2);
  bad.mult[1][2] = Elem{{1, Scalar(1)}};  // corrupt e01*e10
  CHECK_THROWS_AS(bad.validate(), std::logic_error);
}

TEST_CASE("unitalization and ideal powers") {
  FiniteAlgebra n2 = make_nilpotent2();
  n2.validate();
  FiniteAlgebra u = unitalize(n2);
  u.validate();
  CHECK(u.dim() == 3);
  REQUIRE(u.unit.has_value());
  // ideal 0 = original algebra; I^2 = span{y}, I^3 = 0
  CHECK(u.in_ideal_power(Elem{{1, Scalar(1)}}, 0, 2));
  CHECK(!u.in_ideal_power(Elem{{0, Scalar(1)}}, 0, 2));
  CHECK(!u.in_ideal_power(Elem{{1, Scalar(1)}}, 0, 3));
  CHECK(u.ideal_power(0, 1).dim() == 2);
  CHECK(u.ideal_power(0, 2).dim() == 1);
  CHECK(u.ideal_power(0, 3).dim() == 0);
}

TEST_CASE("tensor product is the Kronecker product") {
  FiniteAlgebra m2 = make_matrix_algebra(2);
  FiniteAlgebra t = tensor_product(m2, m2);
  t.validate();
  CHECK(t.dim() == 16);
  // (e01 (x) e10)(e10 (x) e01) = e00 (x) e11
  Elem p = t.mul(Elem{{1 * 4 + 2, Scalar(1)}}, Elem{{2 * 4 + 1, Scalar(1)}});
  CHECK(p == Elem{{0 * 4 + 3, Scalar(1)}});
  // product trace
  Rng r(7);
  for (int i = 0; i < 10; ++i) {
    Elem x = random_elem(r, m2), y = random_elem(r, m2);
    Elem xy;
    for (const auto& [kx, cx] : x)
      for (const auto& [ky, cy] : y) xy[kx * 4 + ky] = cx * cy;
    CHECK(t.traces[0](xy) == m2.traces[0](x) * m2.traces[0](y));
  }
}

TEST_CASE("direct sum") {
  FiniteAlgebra m1 = make_matrix_algebra(1);
  FiniteAlgebra m2 = make_matrix_algebra(2);
  FiniteAlgebra s = direct_sum(m1, m2);
  s.validate();
  CHECK(s.dim() == 5);
  CHECK(s.mul(Elem{{0, Scalar(1)}}, Elem{{1, Scalar(1)}}).empty());
}

TEST_CASE("super construction, even parity") {
  FiniteAlgebra m2 = make_matrix_algebra(2);
  FiniteAsGen g(m2);
  SuperAlg s(g, Parity::Even);
  Rng r(11);
  std::vector<GKey> keys;
  for (int rr = 0; rr < 2; ++rr)
    for (int cc = 0; cc < 2; ++cc)
      for (int i = 0; i < 4; ++i) keys.push_back(s.make_key(0, rr, cc, GKey{i}));

  // F^2 = 1
  for (const GKey& k : keys) {
    GElem x{{k, Scalar(1)}};
    CHECK(s.F_left(s.F_left(x)) == x);
    CHECK(s.F_right(s.F_right(x)) == x);
  }

  // full supertrace tau = Tr_M o tr_s vanishes on graded commutators
  auto tau = [&](const GElem& x) {
    Scalar out;
    for (const auto& [k, c] : s.supertrace(x))
      out += m2.traces[0](Elem{{k[0], Scalar(1)}}) * c;
    return out;
  };
  for (int t = 0; t < 30; ++t) {
    GKey ka = keys[r.index((int)keys.size())];
    GKey kb = keys[r.index((int)keys.size())];
    int pa = s.key_parity(ka), pb = s.key_parity(kb);
    GElem comm = s.mul(ka, kb);
    Scalar sign = (pa * pb) % 2 ? Scalar(1) : Scalar(-1);
    vec_add(comm, s.mul(kb, ka), sign);
    CHECK(tau(comm).is_zero());
  }

  // tau([F, x]) = 0: the graded commutator with F is supertraceless
  for (const GKey& k : keys) CHECK(tau(s.F_comm(GElem{{k, Scalar(1)}})).is_zero());
}

TEST_CASE("super construction, odd parity") {
  FiniteAlgebra m2 = make_matrix_algebra(2);
  FiniteAsGen g(m2);
  SuperAlg s(g, Parity::Odd);
  Rng r(13);
  std::vector<GKey> keys;
  for (int eps = 0; eps < 2; ++eps)
    for (int rr = 0; rr < 2; ++rr)
      for (int cc = 0; cc < 2; ++cc)
        for (int i = 0; i < 4; ++i) keys.push_back(s.make_key(eps, rr, cc, GKey{i}));

  for (const GKey& k : keys) {
    GElem x{{k, Scalar(1)}};
    CHECK(s.F_left(s.F_left(x)) == x);
    CHECK(s.F_right(s.F_right(x)) == x);
  }

  auto tau = [&](const GElem& x) {
    Scalar out;
    for (const auto& [k, c] : s.supertrace(x))
      out += m2.traces[0](Elem{{k[0], Scalar(1)}}) * c;
    return out;
  };
  for (int t = 0; t < 30; ++t) {
    GKey ka = keys[r.index((int)keys.size())];
    GKey kb = keys[r.index((int)keys.size())];
    int pa = s.key_parity(ka), pb = s.key_parity(kb);
    GElem comm = s.mul(ka, kb);
    Scalar sign = (pa * pb) % 2 ? Scalar(1) : Scalar(-1);
    vec_add(comm, s.mul(kb, ka), sign);
    CHECK(tau(comm).is_zero());
  }
  for (const GKey& k : keys) CHECK(tau(s.F_comm(GElem{{k, Scalar(1)}})).is_zero());
}
