// Tensor algebra over a finite algebra, the quasi-free correction map and its
// geometric inverse, X-complex boundaries in canonical coordinates, adic
// filtrations, canonical lifts of idempotents/invertibles, and classifying
// homomorphisms.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "nca/xcomplex.hpp"

using namespace nca;
using namespace ncatest;

namespace {

// Two-dimensional noncommutative algebra (a row of a 2x2 matrix algebra):
// p*p = p, p*q = q, q*p = 0, q*q = 0.
FiniteAlgebra make_row2() {
  FiniteAlgebra a;
  a.names = {"p", "q"};
  a.mult.assign(2, std::vector<Elem>(2));
  a.mult[0][0] = Elem{{0, Scalar(1)}};
  a.mult[0][1] = Elem{{1, Scalar(1)}};
  IdealSpec iq;
  iq.basis = {1};
  a.ideals.push_back(iq);
  return a;
}

UElem random_uelem(Rng& r, const TensorAlg& T, int maxdeg) {
  UElem out;
  out.u = Scalar(r.coeff());
  for (int d = 0; d <= maxdeg; d += 2) {
    auto keys = T.basis_keys_of_degree(d);
    for (int t = 0; t < 2; ++t) {
      int c = r.coeff();
      if (c != 0) {
        GKey k = keys[r.index((int)keys.size())];
        vec_add(out.x, GElem{{k, Scalar(1)}}, Scalar(c));
      }
    }
  }
  return out;
}

XChain random_xchain(Rng& r, const TensorAlg& T) {
  XChain out;
  out.even_unit = Scalar(r.coeff());
  for (int d = 0; d <= 2 * T.ntrunc(); d += 2) {
    auto keys = T.basis_keys_of_degree(d);
    int c = r.coeff();
    if (c != 0)
      vec_add(out.even, GElem{{keys[r.index((int)keys.size())], Scalar(1)}},
              Scalar(c));
  }
  for (int d = 1; d <= 2 * T.ntrunc() + 1; d += 2)
    vec_add(out.odd, random_form(r, T.base_forms(), d, 2), Scalar(1));
  return out;
}

// Restrict a form to total degree <= maxd: identities over the truncated
// tensor algebra are only meaningful strictly inside the working window.
Form cut_total(const FormSpace& sp, const Form& w, int maxd) {
  Form out;
  for (const auto& [k, c] : w)
    if (sp.total_degree(k) <= maxd) out[k] = c;
  return out;
}

bool xchain_eq(const XChain& a, const XChain& b) {
  XChain d = xchain_add(a, b, Scalar(-1));
  return xchain_zero(d);
}

// Entrywise Fedosov matrix product (the product of the lifted algebra).
FMat fmat_fedosov(const FMat& a, const FMat& b) {
  FMat out = fmat_zero(*a.sp, a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j)
      for (int k = 0; k < a.cols; ++k)
        vec_add(out.at(i, j), a.sp->fedosov(a.at(i, k), b.at(k, j)),
                Scalar(1));
  return out;
}

}  // namespace

TEST_CASE("tensor algebra structure") {
  FiniteAlgebra m2 = make_matrix_algebra(2);
  TensorAlg T(m2, 1);
  Rng rng(11);

  SUBCASE("include and augment are mutually inverse on degree zero") {
    for (int t = 0; t < 20; ++t) {
      Elem a = random_elem(rng, m2);
      CHECK(T.augment(T.include(a)) == a);
    }
  }

  SUBCASE("augmentation is multiplicative") {
    std::vector<GKey> low = T.basis_keys_of_degree(0);
    for (const GKey& k : T.basis_keys_of_degree(2)) low.push_back(k);
    for (int t = 0; t < 10; ++t) {
      GElem x = random_gelem(rng, low);
      GElem y = random_gelem(rng, low);
      Elem lhs = T.augment(gmul(T, x, y));
      Elem rhs = m2.mul(T.augment(x), T.augment(y));
      vec_add(lhs, rhs, Scalar(-1));
      CHECK(lhs.empty());
    }
  }

  SUBCASE("product is associative in the truncated algebra") {
    for (int t = 0; t < 15; ++t) {
      GElem x = random_gelem(rng, T.basis_keys_of_degree(0));
      GElem y = random_gelem(rng, T.basis_keys_of_degree(2));
      GElem z = random_gelem(rng, T.basis_keys_of_degree(0));
      GElem lhs = gmul(T, gmul(T, x, y), z);
      GElem rhs = gmul(T, x, gmul(T, y, z));
      vec_add(lhs, rhs, Scalar(-1));
      CHECK(lhs.empty());
    }
  }

  SUBCASE("key/form conversions round-trip") {
    for (const GKey& k : T.basis_keys()) {
      CHECK(T.formkey_to_tkey(T.tkey_to_formkey(k)) == k);
    }
  }

  SUBCASE("curvature keys have adic order from their degree") {
    // a single degree-2k key lies in J^k
    GKey k{0, 1, 2, 2, 1};  // degree 4
    CHECK(TensorAlg::min_formdeg(GElem{{k, Scalar(1)}}) == 4);
  }
}

TEST_CASE("correction map phi") {
  FiniteAlgebra row = make_row2();
  row.validate();
  TensorAlg T(row, 2);
  const FormSpace& usp = T.upper_forms();
  Rng rng(23);

  SUBCASE("phi vanishes on generators and the unit") {
    for (int i = 1; i <= row.dim(); ++i) CHECK(T.phi_key(GKey{i}).empty());
    CHECK(T.phi_elem(Scalar(5), GElem{}).empty());
  }

  SUBCASE("phi of a curvature key is minus the product of differentials") {
    Form p = T.phi_key(GKey{0, 1, 2});
    Form want{{FormKey{GKey{}, GKey{1}, GKey{2}}, Scalar(-1)}};
    CHECK(form_eq(p, want));
  }

  SUBCASE("phi is a second-order correction of the product") {
    // phi(xy) = phi(x) y + x phi(y) + dx dy for x, y in the tensor algebra
    for (int t = 0; t < 30; ++t) {
      UElem x = random_uelem(rng, T, 2);
      UElem y = random_uelem(rng, T, 2);
      UElem xy = umul(T, x, y);
      Form lhs = T.phi_elem(xy.u, xy.x);
      Form rhs = usp.mul_right_elem(T.phi_elem(x.u, x.x), y.x);
      vec_add(rhs, usp.scale(T.phi_elem(x.u, x.x), y.u), Scalar(1));
      vec_add(rhs, usp.mul_left_elem(x.x, T.phi_elem(y.u, y.x)), Scalar(1));
      vec_add(rhs, usp.scale(T.phi_elem(y.u, y.x), x.u), Scalar(1));
      vec_add(rhs, usp.multiply(usp.d_of_elem(x.x), usp.d_of_elem(y.x)),
              Scalar(1));
      CHECK(form_eq(lhs, rhs));
    }
  }

  SUBCASE("cyclic extension kills d and B and is kappa-invariant") {
    for (int t = 0; t < 20; ++t) {
      Form w = random_mixed_form(rng, usp, 2);
      CHECK(T.phi_form(usp.apply_d(w)).empty());
      CHECK(T.phi_form(usp.apply_B(w)).empty());
      CHECK(form_eq(T.phi_form(usp.apply_kappa(w)), T.phi_form(w)));
    }
  }
}

TEST_CASE("X-complex of the tensor algebra") {
  FiniteAlgebra row = make_row2();
  TensorAlg T(row, 2);
  XTensor X(T);
  const FormSpace& usp = T.upper_forms();
  Rng rng(37);

  SUBCASE("boundary squares to zero") {
    for (int t = 0; t < 100; ++t) {
      XChain xi = random_xchain(rng, T);
      CHECK(xchain_zero(X.boundary(X.boundary(xi))));
    }
  }

  SUBCASE("nat reproduces canonical coordinates on z d(gen)") {
    for (int t = 0; t < 20; ++t) {
      UElem z = random_uelem(rng, T, 4);
      int a = rng.index(row.dim());
      Form got = X.nat_oneform(z, T.include(Elem{{a, Scalar(1)}}));
      Form want = T.base_forms().append_d(T.uelem_to_form(z),
                                          GElem{{GKey{a}, Scalar(1)}});
      CHECK(form_eq(got, want));
    }
  }

  SUBCASE("nat kills commutators with the algebra") {
    for (int t = 0; t < 20; ++t) {
      UElem x = random_uelem(rng, T, 2);
      UElem r = random_uelem(rng, T, 2);
      GElem y = random_gelem(rng, T.basis_keys_of_degree(2));
      // nat(r * (x dy)) = nat((x dy) * r): x dy * r = x d(yr) - (xy) dr
      Form lhs = X.nat_oneform(umul(T, r, x), y);
      UElem yu{Scalar(0), y};
      Form rhs = X.nat_oneform(x, umul(T, yu, r).x);
      vec_add(rhs, X.nat_oneform(x, GElem{}), r.u);  // unit part of yr: d dies
      vec_add(rhs, X.nat_oneform(umul(T, x, yu), r.x), Scalar(-1));
      CHECK(form_eq(lhs, rhs));
    }
  }

  SUBCASE("projection after gamma is the identity") {
    for (int t = 0; t < 50; ++t) {
      XChain xi = random_xchain(rng, T);
      CHECK(xchain_eq(X.project(X.gamma(xi)), xi));
    }
  }

  SUBCASE("gamma is a chain map into the de Rham complex") {
    for (int t = 0; t < 25; ++t) {
      XChain xi = random_xchain(rng, T);
      Form lhs = X.gamma(X.boundary(xi));
      Form g = X.gamma(xi);
      Form rhs = usp.apply_b(g);
      vec_add(rhs, usp.apply_B(g), Scalar(1));
      int w = 2 * T.ntrunc();
      CHECK(form_eq(cut_total(usp, lhs, w), cut_total(usp, rhs, w)));
    }
  }

  SUBCASE("adic orders") {
    // the adjoined unit is not in the filtration at all
    XChain u;
    u.even_unit = Scalar(1);
    CHECK(!X.adic_order(u, 4).has_value());
    // a degree-2k curvature key has order exactly 2k-1
    XChain c;
    c.even_unit = Scalar(0);
    c.even[GKey{0, 1, 2}] = Scalar(1);
    auto ord = X.adic_order(c, 2 * T.ntrunc());
    REQUIRE(ord.has_value());
    CHECK(*ord == 1);
    XChain c2;
    c2.even_unit = Scalar(0);
    c2.even[GKey{0, 1, 2, 2, 1}] = Scalar(1);
    ord = X.adic_order(c2, 2 * T.ntrunc());
    REQUIRE(ord.has_value());
    CHECK(*ord == 3);
    // an odd chain with head in J^n has order >= 2n
    XChain o;
    o.even_unit = Scalar(0);
    o.odd = X.nat_oneform(UElem{Scalar(0), GElem{{GKey{0, 1, 2}, Scalar(1)}}},
                          GElem{{GKey{1}, Scalar(1)}});
    ord = X.adic_order(o, 2 * T.ntrunc());
    REQUIRE(ord.has_value());
    CHECK(*ord >= 2);
    // level 0 is J + [T,T]: the commutator [p,q] = q is in it, p is not
    XChain g;
    g.even_unit = Scalar(0);
    g.even[GKey{2}] = Scalar(1);
    ord = X.adic_order(g, 2 * T.ntrunc());
    REQUIRE(ord.has_value());
    CHECK(*ord == 0);
    XChain gp;
    gp.even_unit = Scalar(0);
    gp.even[GKey{1}] = Scalar(1);
    CHECK(!X.adic_order(gp, 2 * T.ntrunc()).has_value());
    // boundaries respect the filtration shift by one
    XChain bc = X.boundary(c2);
    ord = X.adic_order(bc, 2 * T.ntrunc());
    if (!xchain_zero(bc)) {
      REQUIRE(ord.has_value());
      CHECK(*ord >= 2);
    }
  }
}

TEST_CASE("X-complex of a finite algebra") {
  FiniteAlgebra m2 = make_matrix_algebra(2);
  XFinite X(m2);
  const FormSpace& sp = X.forms();
  Rng rng(41);

  SUBCASE("bbar of nat x dy is the commutator") {
    for (int t = 0; t < 20; ++t) {
      Elem x = random_elem(rng, m2);
      Elem y = random_elem(rng, m2);
      GElem yg;
      for (const auto& [i, c] : y) yg[GKey{i}] = c;
      Form w;
      for (const auto& [i, c] : x)
        vec_add(w, sp.append_d(Form{{FormKey{GKey{i}}, Scalar(1)}}, yg), c);
      XChain xi = X.from_oneform(w);
      XChain b = X.boundary(xi);
      Elem comm = m2.mul(x, y);
      vec_add(comm, m2.mul(y, x), Scalar(-1));
      Elem got;
      for (const auto& [k, c] : b.even) got[k[0]] = c;
      vec_add(got, comm, Scalar(-1));
      CHECK(got.empty());
      CHECK(b.odd.empty());
    }
  }

  SUBCASE("nat kills commutators") {
    for (int t = 0; t < 20; ++t) {
      Form w = random_form(rng, sp, 1, 3);
      Elem r = random_elem(rng, m2);
      GElem rg;
      for (const auto& [i, c] : r) rg[GKey{i}] = c;
      Form comm = sp.mul_left_elem(rg, w);
      vec_add(comm, sp.mul_right_elem(w, rg), Scalar(-1));
      CHECK(X.nat(comm).empty());
    }
  }

  SUBCASE("boundary squares to zero") {
    for (int t = 0; t < 50; ++t) {
      XChain xi = X.from_elem(random_elem(rng, m2));
      vec_add(xi.odd, X.nat(random_form(rng, sp, 1, 3)), Scalar(1));
      XChain b2 = X.boundary(X.boundary(xi));
      CHECK(xchain_zero(b2));
    }
  }

  SUBCASE("commutator quotient of one-forms over the matrix algebra") {
    // Omega^1(M2) has dimension (4+1)*4 = 20 and the commutator subspace has
    // rank 17, so the quotient is 3-dimensional. Consistency: the boundary
    // from the quotient onto traceless matrices is then an isomorphism, which
    // forces nat(dx) = 0 for every x.
    CHECK(X.commutator_basis().dim() == 17);
    for (int i = 0; i < 4; ++i) {
      Form dx{{FormKey{GKey{}, GKey{i}}, Scalar(1)}};
      CHECK(X.nat(dx).empty());
    }
  }
}

TEST_CASE("adic filtration for a nilpotent ideal") {
  // unitalized two-dimensional nilpotent algebra: x*x = y, ideal I = (x, y)
  FiniteAlgebra nil;
  nil.names = {"x", "y"};
  nil.mult.assign(2, std::vector<Elem>(2));
  nil.mult[0][0] = Elem{{1, Scalar(1)}};
  IdealSpec all;
  all.basis = {0, 1};
  nil.ideals.push_back(all);
  FiniteAlgebra r = unitalize(nil);
  XFinite X(r);
  // I^2 = span{y}, I^3 = 0
  XChain cx = X.from_elem(Elem{{0, Scalar(1)}});
  XChain cy = X.from_elem(Elem{{1, Scalar(1)}});
  XChain cu = X.from_elem(Elem{{2, Scalar(1)}});
  auto ox = X.adic_order(cx, 0, 8);
  auto oy = X.adic_order(cy, 0, 8);
  auto ou = X.adic_order(cu, 0, 8);
  REQUIRE(ox.has_value());
  REQUIRE(oy.has_value());
  CHECK(*ox == 1);  // x in I, not in I^2 + [I, R] (commutative algebra)
  CHECK(*oy == 3);  // y in I^2, I^3 = 0
  CHECK(!ou.has_value());  // the unit is not in F^0 = I + [R, R]
  // odd part: nat(y dx) has head in I^2
  GElem xg{{GKey{0}, Scalar(1)}};
  XChain o = X.from_oneform(
      X.forms().append_d(Form{{FormKey{GKey{1}}, Scalar(1)}}, xg));
  auto oo = X.adic_order(o, 0, 8);
  REQUIRE(oo.has_value());
  CHECK(*oo >= 4);
}

TEST_CASE("canonical lifts") {
  FiniteAlgebra alg = make_row2();
  TensorAlg T(alg, 2);
  const FormSpace& sp = T.base_forms();
  Rng rng(53);

  auto random_unipotent = [&](int n) {
    // (I + strictly lower) * (I + strictly upper), entries in A
    FMat lo = fmat_identity(sp, n);
    FMat up = fmat_identity(sp, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i > j) {
          GElem g;
          for (const auto& [k, c] : random_elem(rng, alg)) g[GKey{k}] = c;
          lo.at(i, j) = sp.from_elem(g);
        }
        if (i < j) {
          GElem g;
          for (const auto& [k, c] : random_elem(rng, alg)) g[GKey{k}] = c;
          up.at(i, j) = sp.from_elem(g);
        }
      }
    return fmat_mul(lo, up);
  };

  SUBCASE("idempotent lift is idempotent through the window") {
    for (int t = 0; t < 3; ++t) {
      FMat s = random_unipotent(2);
      auto sinv = fmat_inverse0(s);
      REQUIRE(sinv.has_value());
      FMat e = fmat_mul(fmat_mul(s, fmat_p0(sp, 2, 1)), *sinv);
      FMat ehat = idempotent_lift(e);
      FMat resid = fmat_sub(fmat_fedosov(ehat, ehat), ehat);
      CHECK(fmat_is_zero(resid));
      // degree-zero part is the original idempotent
      bool proj_ok = true;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          if (!form_eq(sp.component(ehat.at(i, j), 0), e.at(i, j)))
            proj_ok = false;
      CHECK(proj_ok);
    }
  }

  SUBCASE("non-idempotent input is rejected") {
    FMat m = fmat_identity(sp, 2);
    m.at(0, 1) = sp.unit_form();
    m.at(0, 0) = sp.scale(sp.unit_form(), Scalar(2));
    CHECK_THROWS_AS(idempotent_lift(m), std::domain_error);
  }

  SUBCASE("invertible lift inverts through the window") {
    for (int t = 0; t < 3; ++t) {
      FMat g = random_unipotent(2);
      auto [ghat, ghatinv] = invertible_inverse(g);
      FMat one = fmat_identity(sp, 2);
      CHECK(fmat_is_zero(fmat_sub(fmat_fedosov(ghat, ghatinv), one)));
      CHECK(fmat_is_zero(fmat_sub(fmat_fedosov(ghatinv, ghat), one)));
    }
  }

  SUBCASE("singular input is rejected") {
    FMat z = fmat_zero(sp, 2, 2);
    CHECK_THROWS_AS(invertible_inverse(z), std::domain_error);
  }
}

TEST_CASE("classifying homomorphism") {
  FiniteAlgebra m2 = make_matrix_algebra(2);
  TensorAlg T(m2, 2);
  Rng rng(67);

  SUBCASE("a multiplicative section factors through the augmentation") {
    // images = the generators of A itself; curvatures map to zero
    FiniteAsGen agen(m2);
    FormSpace dst(agen, 6);
    std::vector<UElem> img;
    for (int i = 0; i < m2.dim(); ++i)
      img.push_back(UElem{Scalar(0), GElem{{GKey{i}, Scalar(1)}}});
    ClassifyingHom rho(T, dst, img);
    for (const GKey& k : T.basis_keys()) {
      UElem got = rho.apply_key(k);
      if (k.size() > 1) {
        CHECK(uzero(got));
      } else {
        CHECK(got.u.is_zero());
        CHECK(got.x == GElem{{GKey{k[0] - 1}, Scalar(1)}});
      }
    }
  }

  SUBCASE("the identity on generators induces the identity") {
    std::vector<UElem> img;
    for (int i = 0; i < m2.dim(); ++i)
      img.push_back(UElem{Scalar(0), GElem{{GKey{i + 1}, Scalar(1)}}});
    ClassifyingHom rho(T, T.upper_forms(), img);
    for (const GKey& k : T.basis_keys()) {
      UElem got = rho.apply_key(k);
      CHECK(got.u.is_zero());
      CHECK(got.x == GElem{{k, Scalar(1)}});
    }
  }

  SUBCASE("multiplicativity on random elements") {
    std::vector<UElem> img;
    for (int i = 0; i < m2.dim(); ++i)
      img.push_back(UElem{Scalar(0), GElem{{GKey{i + 1}, Scalar(1)}}});
    ClassifyingHom rho(T, T.upper_forms(), img);
    for (int t = 0; t < 50; ++t) {
      UElem x = random_uelem(rng, T, 2);
      UElem y = random_uelem(rng, T, 2);
      UElem lhs = rho.apply_uelem(umul(T, x, y));
      UElem rhs = umul(T, rho.apply_uelem(x), rho.apply_uelem(y));
      UElem d = uadd(lhs, rhs, Scalar(-1));
      CHECK(uzero(d));
    }
  }

  SUBCASE("wrong number of generator images is rejected") {
    CHECK_THROWS_AS(ClassifyingHom(T, T.upper_forms(), {}),
                    std::domain_error);
  }
}
