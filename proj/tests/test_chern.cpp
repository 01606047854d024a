// Character component families of idempotents and invertibles, transgression
// along polynomial paths, partial-traced higher characters over a coefficient
// algebra, and multiplicative pair structure (validation, connecting map,
// addition, negative character).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "nca/chern.hpp"

using namespace nca;
using namespace ncatest;

namespace {

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

// One-dimensional traced coefficient algebra: c*c = c, tau(c) = 1, degree p.
FiniteAlgebra make_scalar_coeff(int p) {
  FiniteAlgebra a;
  a.names = {"c"};
  a.mult.assign(1, std::vector<Elem>(1));
  a.mult[0][0] = Elem{{0, Scalar(1)}};
  TraceSpec t;
  t.p = p;
  t.values = {Scalar(1)};
  a.traces.push_back(t);
  return a;
}

// Elementary unipotent 1 + w * E_{rc} x over degree-0 entries, with its exact
// inverse 1 - w * E_{rc} x (r != c, so the perturbation squares to zero).
struct Unip {
  FMat u, uinv;
};

Unip elementary(const FormSpace& sp, int n, int r, int c, const Form& entry) {
  Unip out{fmat_identity(sp, n), fmat_identity(sp, n)};
  out.u.at(r, c) = entry;
  out.uinv.at(r, c) = sp.scale(entry, Scalar(-1));
  return out;
}

Unip random_unipotent(Rng& rng, const FormSpace& sp,
                      const std::vector<GKey>& gens, int n, int steps) {
  Unip out{fmat_identity(sp, n), fmat_identity(sp, n)};
  for (int s = 0; s < steps; ++s) {
    int r = rng.index(n), c = rng.index(n);
    if (r == c) continue;
    int w = rng.coeff();
    if (w == 0) continue;
    Form entry = sp.scale(
        sp.from_elem(GElem{{gens[rng.index((int)gens.size())], Scalar(1)}}),
        Scalar(w));
    Unip e = elementary(sp, n, r, c, entry);
    out.u = fmat_mul(out.u, e.u);
    out.uinv = fmat_mul(e.uinv, out.uinv);
  }
  return out;
}

bool form_zero(const Form& w) { return w.empty(); }

bool xchain_eq(const XChain& a, const XChain& b) {
  return xchain_zero(xchain_add(a, b, Scalar(-1)));
}

}  // namespace

TEST_CASE("character components of idempotents") {
  FiniteAlgebra m2 = make_matrix_algebra(2);
  FiniteAsGen gen(m2);
  FormSpace sp(gen, 6);
  Rng rng(101);
  std::vector<GKey> gens = gen.basis_keys();

  SUBCASE("the base point has vanishing components") {
    FMat p0 = fmat_p0(sp, 2, 1);
    for (const auto& [d, w] : chern_even(p0, 1)) {
      (void)d;
      CHECK(form_zero(w));
    }
  }

  SUBCASE("components form an even cycle for conjugated idempotents") {
    for (int t = 0; t < 10; ++t) {
      Unip u = random_unipotent(rng, sp, gens, 2, 3);
      FMat e = fmat_mul(u.u, fmat_mul(fmat_p0(sp, 2, 1), u.uinv));
      REQUIRE(fmat_is_zero(fmat_sub(fmat_mul(e, e), e)));
      auto ch = chern_even(e, 1);
      for (int n = 0; 2 * n + 2 <= sp.cap(); ++n) {
        Form rel = sp.apply_B(ch.at(2 * n));
        vec_add(rel, sp.apply_b(ch.at(2 * n + 2)), Scalar(1));
        CHECK(form_zero(rel));
      }
    }
  }
}

TEST_CASE("character components of invertibles") {
  FiniteAlgebra m2 = make_matrix_algebra(2);
  FiniteAsGen gen(m2);
  FormSpace sp(gen, 7);
  Rng rng(103);
  std::vector<GKey> gens = gen.basis_keys();

  for (int t = 0; t < 10; ++t) {
    Unip u = random_unipotent(rng, sp, gens, 2, 4);
    auto ch = chern_odd(u.u, u.uinv);

    // leading term oracle: 1/sqrt(2 pi i) Tr g^{-1} dg, expanded directly
    Form direct;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c)
        vec_add(direct, sp.multiply(u.uinv.at(r, c), sp.apply_d(u.u.at(c, r))),
                Scalar(1));
    direct = sp.scale(direct, *Scalar::sqrt_2pi_i().inverse());
    CHECK(form_eq(ch.at(1), direct));

    // odd cycle relations
    for (int n = 0; 2 * n + 3 <= sp.cap(); ++n) {
      Form rel = sp.apply_B(ch.at(2 * n + 1));
      vec_add(rel, sp.apply_b(ch.at(2 * n + 3)), Scalar(1));
      CHECK(form_zero(rel));
    }
  }
}

TEST_CASE("parameter calculus") {
  int t = register_indeterminate("t_cal");
  ParamOps ops = poly_param(t);
  Scalar tt = Scalar::indeterminate(t);
  Scalar s = Scalar(3) * tt * tt + Scalar(2) * tt + Scalar(5);
  CHECK(ops.deriv(s) == Scalar(6) * tt + Scalar(2));
  CHECK(ops.eval(s, 0) == Scalar(5));
  CHECK(ops.eval(s, 1) == Scalar(10));
  CHECK(ops.integrate01(s) == Scalar(1) + Scalar(1) + Scalar(5));
  CHECK_THROWS_AS((void)ops.integrate01(Scalar::indeterminate(t, -1)),
                  std::domain_error);
}

TEST_CASE("transgression along polynomial paths") {
  FiniteAlgebra m2 = make_matrix_algebra(2);
  FiniteAsGen gen(m2);
  FormSpace sp(gen, 6);
  Rng rng(107);
  std::vector<GKey> gens = gen.basis_keys();
  int tid = register_indeterminate("t");
  ParamOps ops = poly_param(tid);
  Scalar tt = Scalar::indeterminate(tid);

  auto random_t_unipotent = [&](int n, int steps) {
    Unip out{fmat_identity(sp, n), fmat_identity(sp, n)};
    for (int s = 0; s < steps; ++s) {
      int r = rng.index(n), c = rng.index(n);
      if (r == c) continue;
      int w = rng.coeff();
      if (w == 0) continue;
      Form entry = sp.scale(
          sp.from_elem(GElem{{gens[rng.index((int)gens.size())], Scalar(1)}}),
          Scalar(w) * tt);
      Unip e = elementary(sp, n, r, c, entry);
      out.u = fmat_mul(out.u, e.u);
      out.uinv = fmat_mul(e.uinv, out.uinv);
    }
    return out;
  };

  SUBCASE("constant paths transgress to zero") {
    Path p{fmat_p0(sp, 2, 1), std::nullopt, ops};
    for (const auto& [d, w] : cs_even(p)) {
      (void)d;
      CHECK(form_zero(w));
    }
  }

  SUBCASE("idempotent paths") {
    for (int t = 0; t < 10; ++t) {
      Unip u0 = random_unipotent(rng, sp, gens, 2, 2);
      FMat e = fmat_mul(u0.u, fmat_mul(fmat_p0(sp, 2, 1), u0.uinv));
      Unip w = random_t_unipotent(2, 2);
      Path p{fmat_mul(w.u, fmat_mul(e, w.uinv)), std::nullopt, ops};
      require_idempotent_path(p);
      auto cs = cs_even(p);
      auto ch0 = chern_even(p.at(0), 1);
      auto ch1 = chern_even(p.at(1), 1);
      for (int n = 0; 2 * n + 1 <= sp.cap(); ++n) {
        Form lhs = sp.apply_b(cs.at(2 * n + 1));
        if (n >= 1) vec_add(lhs, sp.apply_B(cs.at(2 * n - 1)), Scalar(1));
        Form rhs = ch1.at(2 * n);
        vec_add(rhs, ch0.at(2 * n), Scalar(-1));
        vec_add(lhs, rhs, Scalar(-1));
        CHECK(form_zero(lhs));
      }
    }
  }

  SUBCASE("invertible paths") {
    FormSpace sp7(gen, 7);
    auto gens7 = gens;
    for (int t = 0; t < 10; ++t) {
      // path g(t) = W(t) g0, with exact polynomial inverse
      Unip g0{fmat_identity(sp7, 2), fmat_identity(sp7, 2)};
      for (int s = 0; s < 3; ++s) {
        int r = rng.index(2), c = rng.index(2);
        if (r == c) continue;
        int w = rng.coeff();
        if (w == 0) continue;
        Scalar coeff = Scalar(w) * (s == 0 ? tt : Scalar(1));
        Form entry = sp7.scale(
            sp7.from_elem(
                GElem{{gens7[rng.index((int)gens7.size())], Scalar(1)}}),
            coeff);
        Unip e = elementary(sp7, 2, r, c, entry);
        g0.u = fmat_mul(g0.u, e.u);
        g0.uinv = fmat_mul(e.uinv, g0.uinv);
      }
      Path p{g0.u, g0.uinv, ops};
      require_invertible_path(p);
      auto cs = cs_odd(p);
      auto ch0 = chern_odd(p.at(0), fmat_map_scalar(*p.mat_inv, [&](const Scalar& s) {
                             return ops.eval(s, 0);
                           }));
      auto ch1 = chern_odd(p.at(1), fmat_map_scalar(*p.mat_inv, [&](const Scalar& s) {
                             return ops.eval(s, 1);
                           }));
      for (int n = 0; 2 * n + 2 <= sp7.cap(); ++n) {
        Form lhs = sp7.apply_b(cs.at(2 * n + 2));
        vec_add(lhs, sp7.apply_B(cs.at(2 * n)), Scalar(1));
        Form rhs = ch1.at(2 * n + 1);
        vec_add(rhs, ch0.at(2 * n + 1), Scalar(-1));
        vec_add(lhs, rhs, Scalar(-1));
        CHECK(form_zero(lhs));
      }
    }
  }
}

TEST_CASE("higher characters over a traced coefficient algebra") {
  FiniteAlgebra alg = make_row2();
  FiniteAlgebra coeff = make_scalar_coeff(1);
  TensorAlg T(alg, 2);
  XTensor X(T);
  ProdAlg P(coeff, T);
  FormSpace psp(P, -1);
  Rng rng(113);
  int tid = register_indeterminate("t_h");
  ParamOps ops = poly_param(tid);
  Scalar tt = Scalar::indeterminate(tid);

  // degree-0 product-algebra generator keys c (x) a_j
  std::vector<GKey> pgens;
  for (int j = 0; j < alg.dim(); ++j) {
    GElem inc = T.include(Elem{{j, Scalar(1)}});
    pgens.push_back(ProdAlg::make_key(0, inc.begin()->first));
  }

  auto t_unipotent = [&](int n, int steps, bool with_t) {
    Unip out{fmat_identity(psp, n), fmat_identity(psp, n)};
    for (int s = 0; s < steps; ++s) {
      int r = rng.index(n), c = rng.index(n);
      if (r == c) continue;
      int w = rng.coeff();
      if (w == 0) continue;
      Scalar coeff = Scalar(w) * (with_t && s % 2 == 0 ? tt : Scalar(1));
      Form entry = psp.scale(
          psp.from_elem(GElem{{pgens[rng.index((int)pgens.size())], Scalar(1)}}),
          coeff);
      Unip e = elementary(psp, n, r, c, entry);
      out.u = fmat_mul(out.u, e.u);
      out.uinv = fmat_mul(e.uinv, out.uinv);
    }
    return out;
  };

  SUBCASE("summability guard") {
    FiniteAlgebra coarse = make_scalar_coeff(3);
    ProdAlg P3(coarse, T);
    FMat p0 = fmat_p0(psp, 2, 1);
    CHECK_THROWS_AS((void)higher_ch_even(X, P3, p0, 1, 0), std::domain_error);
    CHECK_NOTHROW((void)higher_ch_even(X, P3, p0, 1, 1));
  }

  SUBCASE("partial trace rejects the adjoined unit") {
    CHECK_THROWS_AS((void)ptrace_even(X, P, psp.unit_form()), std::domain_error);
  }

  SUBCASE("base points vanish") {
    FMat p0 = fmat_p0(psp, 2, 1);
    for (int q = 0; q <= 1; ++q)
      CHECK(xchain_zero(higher_ch_even(X, P, p0, 1, q)));
    FMat one = fmat_identity(psp, 1);
    for (int q = 0; q <= 1; ++q)
      CHECK(xchain_zero(higher_ch_odd(X, P, one, one, q)));
  }

  SUBCASE("idempotent transgression") {
    for (int t = 0; t < 3; ++t) {
      Unip u0 = t_unipotent(2, 2, false);
      FMat e = fmat_mul(u0.u, fmat_mul(fmat_p0(psp, 2, 1), u0.uinv));
      FMat ehat = prod_idempotent_lift(e);
      Unip w = t_unipotent(2, 2, true);
      Path p{fmat_mul(w.u, fmat_mul(ehat, w.uinv)), std::nullopt, ops};
      require_idempotent_path(p);
      for (int q = 0; q <= 1; ++q) {
        XChain cs = higher_cs_even(X, P, p, 1, q);
        XChain lhs = X.boundary(cs);
        lhs.odd.clear();  // compare the bbar part only
        XChain rhs = xchain_add(
            higher_ch_even(X, P, p.at(1), 1, q),
            higher_ch_even(X, P, p.at(0), 1, q), Scalar(-1));
        XChain diff = xchain_add(lhs, rhs, Scalar(-1));
        CHECK(xchain_zero(X.cut_total(diff, 2 * T.ntrunc())));
      }
    }
  }

  SUBCASE("invertible transgression") {
    for (int t = 0; t < 3; ++t) {
      Unip g = t_unipotent(2, 3, true);
      auto lift = prod_invertible_lift(g.u, g.uinv);
      Path p{lift.first, lift.second, ops};
      require_invertible_path(p);
      for (int q = 0; q <= 1; ++q) {
        XChain cs = higher_cs_odd(X, P, p, q);
        XChain lhs = X.boundary(cs);
        lhs.even.clear();
        lhs.even_unit = Scalar(0);
        auto at = [&](int ep) {
          return fmat_map_scalar(
              p.mat, [&](const Scalar& s) { return ops.eval(s, ep); });
        };
        auto atinv = [&](int ep) {
          return fmat_map_scalar(
              *p.mat_inv, [&](const Scalar& s) { return ops.eval(s, ep); });
        };
        XChain rhs = xchain_add(
            higher_ch_odd(X, P, at(1), atinv(1), q),
            higher_ch_odd(X, P, at(0), atinv(0), q), Scalar(-1));
        XChain diff = xchain_add(lhs, rhs, Scalar(-1));
        CHECK(xchain_zero(X.cut_total(diff, 2 * T.ntrunc())));
      }
    }
  }
}

TEST_CASE("multiplicative pairs") {
  FiniteAlgebra alg = make_row2();
  FiniteAlgebra coeff = make_scalar_coeff(1);
  TensorAlg T(alg, 2);
  XTensor X(T);
  ProdAlg P(coeff, T);
  FormSpace psp(P, -1);
  Rng rng(127);
  int tid = register_indeterminate("t_mk");
  ParamOps ops = poly_param(tid);
  Scalar tt = Scalar::indeterminate(tid);
  const int n = 2, q = 1;

  std::vector<GKey> pgens;
  for (int j = 0; j < alg.dim(); ++j) {
    GElem inc = T.include(Elem{{j, Scalar(1)}});
    pgens.push_back(ProdAlg::make_key(0, inc.begin()->first));
  }

  auto t_unipotent = [&](int sz, int steps) {
    Unip out{fmat_identity(psp, sz), fmat_identity(psp, sz)};
    for (int s = 0; s < steps; ++s) {
      int r = rng.index(sz), c = rng.index(sz);
      if (r == c) continue;
      int w = rng.coeff();
      if (w == 0) continue;
      Form entry = psp.scale(
          psp.from_elem(GElem{{pgens[rng.index((int)pgens.size())], Scalar(1)}}),
          Scalar(w) * tt);
      Unip e = elementary(psp, sz, r, c, entry);
      out.u = fmat_mul(out.u, e.u);
      out.uinv = fmat_mul(e.uinv, out.uinv);
    }
    return out;
  };

  // pair built by transgression from the base point along a deformation path
  auto make_pair = [&]() {
    Unip w = t_unipotent(2, 2);
    Path path{fmat_mul(w.u, fmat_mul(fmat_p0(psp, 2, 1), w.uinv)), std::nullopt,
              ops};
    MKPair pr;
    pr.n = n;
    pr.q = q;
    pr.rank_p0 = 1;
    pr.lift = path.at(1);
    pr.theta = higher_cs_even(X, P, path, 1, q);
    return pr;
  };

  // random chain inside filtration level n-1
  auto deep_chain = [&]() {
    XChain out;
    out.even_unit = Scalar(0);
    for (int d = 2; d <= 2 * T.ntrunc(); d += 2) {
      auto keys = T.basis_keys_of_degree(d);
      int c = rng.coeff();
      if (c != 0)
        vec_add(out.even, GElem{{keys[rng.index((int)keys.size())], Scalar(1)}},
                Scalar(c));
    }
    for (int d = 3; d <= 2 * T.ntrunc() + 1; d += 2)
      vec_add(out.odd, random_form(rng, T.base_forms(), d, 2), Scalar(1));
    return out;
  };

  SUBCASE("validation and negative character") {
    for (int t = 0; t < 3; ++t) {
      MKPair pr = make_pair();
      CHECK_NOTHROW(mk_validate(X, P, pr));
      // exact transgression representative: negative character vanishes
      XChain nc0 = negative_chern(X, P, pr);
      CHECK(xchain_zero(X.cut_total(nc0, 2 * T.ntrunc())));

      // shifting theta inside the filtration level keeps the pair valid and
      // moves the negative character by the boundary of the shift
      XChain lam = deep_chain();
      REQUIRE(X.in_level(lam, n - 1));
      XChain lam_odd{Scalar(0), {}, lam.odd};
      MKPair shifted = pr;
      shifted.theta = xchain_add(pr.theta, lam_odd, Scalar(1));
      CHECK_NOTHROW(mk_validate(X, P, shifted));
      XChain nc = negative_chern(X, P, shifted);
      CHECK(X.in_level(nc, n - 1));
      XChain expect = X.boundary(lam_odd);
      expect.odd.clear();
      XChain diff = xchain_add(nc, xchain_scale(expect, Scalar(-1)),
                               Scalar(-1));
      CHECK(xchain_zero(X.cut_total(diff, 2 * T.ntrunc())));
      // closed within the window
      CHECK(xchain_zero(X.cut_total(X.boundary(nc), 2 * T.ntrunc())));
    }
  }

  SUBCASE("connecting and forgetful maps") {
    XChain lam = deep_chain();
    XChain lam_odd{Scalar(0), {}, lam.odd};
    MKPair d = delta_map(X, P, psp, lam_odd, n, q);
    CHECK_NOTHROW(mk_validate(X, P, d));
    // forgetful: the trivial base point
    CHECK(fmat_is_zero(fmat_sub(forgetful(d), fmat_p0(psp, 2, 1))));
    // negative character of a connecting pair: -sqrt(2 pi i) bbar(theta~)
    XChain nc = negative_chern(X, P, d);
    XChain expect = X.boundary(lam_odd);
    expect.odd.clear();
    XChain diff = xchain_add(
        nc, xchain_scale(expect, -Scalar::sqrt_2pi_i()), Scalar(-1));
    CHECK(xchain_zero(X.cut_total(diff, 2 * T.ntrunc())));

    // a chain whose boundary escapes the filtration level is rejected:
    // the commutator [p, q] = q sits in degree zero, outside the ideal tower
    XChain bad;
    bad.even_unit = Scalar(0);
    UElem head{Scalar(0), T.include(Elem{{0, Scalar(1)}})};
    bad.odd = X.nat_oneform(head, T.include(Elem{{1, Scalar(1)}}));
    CHECK_THROWS_AS((void)delta_map(X, P, psp, bad, n, q), std::domain_error);
  }

  SUBCASE("addition") {
    FMat c = mk_conjugator(psp);
    CHECK(fmat_is_zero(fmat_sub(fmat_mul(c, c), fmat_identity(psp, 4))));

    MKPair a = make_pair();
    MKPair b = make_pair();
    MKPair s = mk_add(X, P, a, b);
    CHECK(s.rank_p0 == 2);
    CHECK_NOTHROW(mk_validate(X, P, s));
    // character of the sum = sum of characters
    XChain lhs = higher_ch_even(X, P, s.lift, s.rank_p0, q);
    XChain rhs = xchain_add(higher_ch_even(X, P, a.lift, 1, q),
                            higher_ch_even(X, P, b.lift, 1, q), Scalar(1));
    CHECK(xchain_eq(lhs, rhs));

    // trivial pairs add to the doubled base point
    XChain lam = deep_chain();
    XChain lam_odd{Scalar(0), {}, lam.odd};
    MKPair d1 = delta_map(X, P, psp, lam_odd, n, q);
    MKPair d2 = delta_map(X, P, psp, lam_odd, n, q);
    MKPair ds = mk_add(X, P, d1, d2);
    CHECK(fmat_is_zero(fmat_sub(ds.lift, fmat_p0(psp, 4, 2))));

    MKPair wrong = a;
    wrong.n = 4;
    CHECK_THROWS_AS((void)mk_add(X, P, a, wrong), std::domain_error);
  }
}
