#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "codamed/coda.hpp"
#include "test_util.hpp"

using namespace codamed;
using coda::SbpMatrix;

namespace {

// five-part taxonomy contrast: A | BCDE, BC | DE, B | C, D | E
Eigen::MatrixXi taxonomy_entries() {
  Eigen::MatrixXi m(5, 4);
  m << 1, 0, 0, 0,
      -1, 1, 1, 0,
      -1, 1, -1, 0,
      -1, -1, 0, 1,
      -1, -1, 0, -1;
  return m;
}

}  // namespace

TEST_CASE("validate_sbp accepts the taxonomy and pivotal matrices") {
  auto tax = coda::validate_sbp(taxonomy_entries(), {"A", "B", "C", "D", "E"});
  CHECK(tax.parts() == 5);
  CHECK(tax.balances() == 4);
  CHECK(tax.part_labels[0] == "A");

  auto piv = coda::pivotal_sbp(5);
  CHECK(piv.entries(0, 0) == 1);
  CHECK(piv.entries(4, 3) == -1);
  CHECK_NOTHROW(coda::validate_sbp(piv.entries, piv.part_labels));
}

TEST_CASE("validate_sbp reports the first broken rule") {
  SUBCASE("empty side") {
    Eigen::MatrixXi m(3, 2);
    m << 1, 0,
        -1, 0,
        -1, 0;
    try {
      coda::validate_sbp(m);
      FAIL("expected EmptySide");
    } catch (const SbpError& e) {
      CHECK(e.code() == errc::empty_side);
      CHECK(e.column() == 1);
    }
  }
  SUBCASE("non-binary entry") {
    Eigen::MatrixXi m(3, 2);
    m << 2, 0,
        -1, 1,
        -1, -1;
    CHECK_THROWS_AS(coda::validate_sbp(m), SbpError);
    try {
      coda::validate_sbp(m);
    } catch (const SbpError& e) {
      CHECK(e.code() == errc::non_binary_entry);
      CHECK(e.column() == 0);
    }
  }
  SUBCASE("column one must cover all parts") {
    Eigen::MatrixXi m(3, 2);
    m << 1, 1,
        -1, -1,
        0, 0;  // part 3 never enters
    try {
      coda::validate_sbp(m);
      FAIL("expected NotATree");
    } catch (const SbpError& e) {
      CHECK(e.code() == errc::not_a_tree);
      CHECK(e.column() == 0);
    }
  }
  SUBCASE("support must be an earlier group") {
    Eigen::MatrixXi m(4, 3);
    m << 1, 0, 0,
        1, 0, 1,
        -1, 1, -1,
        -1, -1, 0;
    // column 3 mixes rows {1,2} across the column-1 split
    try {
      coda::validate_sbp(m);
      FAIL("expected NotATree");
    } catch (const SbpError& e) {
      CHECK(e.code() == errc::not_a_tree);
      CHECK(e.column() == 2);
    }
  }
  SUBCASE("group split twice") {
    Eigen::MatrixXi m(4, 3);
    m << 1, 1, 0,
        1, -1, 0,
        -1, 0, 1,
        -1, 0, 1;  // column 3 has no -1 side: EmptySide fires first
    CHECK_THROWS_AS(coda::validate_sbp(m), SbpError);
    Eigen::MatrixXi m2(4, 3);
    m2 << 1, 1, 1,
        1, -1, -1,
        -1, 0, 0,
        -1, 0, 0;  // column 3 re-splits {0,1}
    try {
      coda::validate_sbp(m2);
      FAIL("expected NotATree");
    } catch (const SbpError& e) {
      CHECK(e.code() == errc::not_a_tree);
      CHECK(e.column() == 2);
    }
  }
  SUBCASE("dimension mismatch") {
    Eigen::MatrixXi m(3, 3);
    m.setZero();
    try {
      coda::validate_sbp(m);
      FAIL("expected DimensionMismatch");
    } catch (const SbpError& e) {
      CHECK(e.code() == errc::dimension_mismatch);
    }
  }
}

TEST_CASE("pivotal_sbp matches the displayed pattern") {
  SUBCASE("two parts") {
    auto sbp = coda::pivotal_sbp(2);
    CHECK(sbp.entries(0, 0) == 1);
    CHECK(sbp.entries(1, 0) == -1);
  }
  SUBCASE("three parts") {
    auto sbp = coda::pivotal_sbp(3);
    Eigen::MatrixXi expected(3, 2);
    expected << 1, 0,
        -1, 1,
        -1, -1;
    CHECK(sbp.entries == expected);
  }
  SUBCASE("five parts, identity order") {
    auto sbp = coda::pivotal_sbp(5);
    for (Eigen::Index k = 0; k < 4; ++k) {
      CHECK(sbp.entries(k, k) == 1);
      for (Eigen::Index j = 0; j < k; ++j) CHECK(sbp.entries(j, k) == 0);
      for (Eigen::Index j = k + 1; j < 5; ++j) CHECK(sbp.entries(j, k) == -1);
    }
  }
  SUBCASE("permuted order still validates") {
    auto sbp = coda::pivotal_sbp(5, {4, 3, 2, 1, 0});
    CHECK(sbp.entries(4, 0) == 1);
    CHECK_NOTHROW(coda::validate_sbp(sbp.entries));
  }
  CHECK_THROWS_AS(coda::pivotal_sbp(1), Error);
}

TEST_CASE("basis_from_sbp evaluates the contrast weights") {
  SUBCASE("two parts") {
    auto basis = coda::basis_from_sbp(coda::pivotal_sbp(2));
    CHECK(basis.v(0, 0) == doctest::Approx(0.7071067811865475).epsilon(1e-14));
    CHECK(basis.v(1, 0) == doctest::Approx(-0.7071067811865475).epsilon(1e-14));
  }
  SUBCASE("five-part pivotal, first column") {
    auto basis = coda::basis_from_sbp(coda::pivotal_sbp(5));
    CHECK(basis.v(0, 0) == doctest::Approx(0.8944271909999159).epsilon(1e-14));
    for (Eigen::Index j = 1; j < 5; ++j)
      CHECK(basis.v(j, 0) == doctest::Approx(-0.22360679774997896).epsilon(1e-14));
  }
  SUBCASE("orthonormal, zero column sums") {
    auto basis = coda::basis_from_sbp(coda::validate_sbp(taxonomy_entries()));
    Eigen::MatrixXd gram = basis.v.transpose() * basis.v;
    CHECK((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(basis.v.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("close_counts replaces zeros then closes") {
  auto comp = coda::close_counts((Eigen::Matrix<std::int64_t, 3, 1>() << 10, 0, 10).finished());
  CHECK(comp.proportions()[0] == doctest::Approx(0.4878048780487805).epsilon(1e-15));
  CHECK(comp.proportions()[1] == doctest::Approx(0.024390243902439025).epsilon(1e-15));
  CHECK(comp.proportions().sum() == doctest::Approx(1.0).epsilon(1e-15));

  auto uniform = coda::close_counts((Eigen::Matrix<std::int64_t, 4, 1>() << 1, 1, 1, 1).finished());
  for (Eigen::Index j = 0; j < 4; ++j) CHECK(uniform.proportions()[j] == doctest::Approx(0.25));

  try {
    coda::close_counts((Eigen::Matrix<std::int64_t, 3, 1>() << 0, 0, 0).finished());
    FAIL("expected AllZero");
  } catch (const Error& e) {
    CHECK(e.code() == errc::all_zero);
  }
  try {
    coda::close_counts((Eigen::Matrix<std::int64_t, 3, 1>() << 1, -2, 3).finished());
    FAIL("expected NegativeCount");
  } catch (const Error& e) {
    CHECK(e.code() == errc::negative_count);
  }
  CHECK_THROWS_AS(
      coda::close_counts((Eigen::Matrix<std::int64_t, 3, 1>() << 1, 0, 3).finished(), -1.0),
      Error);
}

TEST_CASE("ilr_forward: uniform maps to zero, frozen pivotal example") {
  auto basis = coda::basis_from_sbp(coda::pivotal_sbp(3));
  auto uniform = coda::close_counts((Eigen::Matrix<std::int64_t, 3, 1>() << 7, 7, 7).finished());
  CHECK(coda::ilr_forward(uniform, basis).coords().cwiseAbs().maxCoeff() < 1e-14);

  coda::Composition p((Eigen::VectorXd(3) << 0.5, 0.25, 0.25).finished());
  Eigen::VectorXd m = coda::ilr_forward(p, basis).coords();
  CHECK(m[0] == doctest::Approx(0.5659523030068885).epsilon(1e-12));
  CHECK(std::abs(m[1]) < 1e-14);
}

TEST_CASE("matrix form agrees with the balance-form oracle") {
  std::mt19937_64 gen(2024);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index parts = 3 + static_cast<Eigen::Index>(gen() % 6);
    auto sbp = testutil::random_sbp(parts, gen);
    auto basis = coda::basis_from_sbp(sbp);
    Eigen::VectorXd p = testutil::random_composition(parts, gen);
    Eigen::VectorXd via_matrix = coda::ilr_forward(coda::Composition(p), basis).coords();
    Eigen::VectorXd via_balances = testutil::balance_form_ilr(p, sbp);
    CHECK((via_matrix - via_balances).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("ilr round trips") {
  std::mt19937_64 gen(99);
  auto basis = coda::basis_from_sbp(coda::pivotal_sbp(3));

  // zero vector -> uniform composition
  auto uniform = coda::ilr_inverse(coda::IlrVector(Eigen::VectorXd::Zero(2)), basis);
  for (Eigen::Index j = 0; j < 3; ++j)
    CHECK(uniform.proportions()[j] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  coda::Composition p((Eigen::VectorXd(3) << 0.5, 0.25, 0.25).finished());
  auto back = coda::ilr_inverse(coda::ilr_forward(p, basis), basis);
  CHECK((back.proportions() - p.proportions()).cwiseAbs().maxCoeff() < 1e-12);

  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index parts = 3 + static_cast<Eigen::Index>(gen() % 6);
    auto b = coda::basis_from_sbp(testutil::random_sbp(parts, gen));
    std::normal_distribution<double> coord(0.0, 2.0);
    Eigen::VectorXd m(parts - 1);
    for (Eigen::Index k = 0; k + 1 < parts; ++k) m[k] = coord(gen);
    Eigen::VectorXd m_back =
        coda::ilr_forward(coda::ilr_inverse(coda::IlrVector(m), b), b).coords();
    CHECK((m_back - m).cwiseAbs().maxCoeff() < 1e-10);

    Eigen::VectorXd q = testutil::random_composition(parts, gen);
    Eigen::VectorXd q_back =
        coda::ilr_inverse(coda::ilr_forward(coda::Composition(q), b), b).proportions();
    CHECK((q_back - q).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("perturbation additivity: ilr(close(p*q)) = ilr(p) + ilr(q)") {
  std::mt19937_64 gen(4242);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index parts = 3 + static_cast<Eigen::Index>(gen() % 6);
    auto basis = coda::basis_from_sbp(testutil::random_sbp(parts, gen));
    Eigen::VectorXd p = testutil::random_composition(parts, gen);
    Eigen::VectorXd q = testutil::random_composition(parts, gen);
    Eigen::VectorXd prod = (p.array() * q.array()).matrix();
    Eigen::VectorXd lhs =
        coda::ilr_forward(coda::Composition(prod / prod.sum()), basis).coords();
    Eigen::VectorXd rhs = coda::ilr_forward(coda::Composition(p), basis).coords() +
                          coda::ilr_forward(coda::Composition(q), basis).coords();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("random SBP trees always validate and give orthonormal bases") {
  std::mt19937_64 gen(7);
  for (int rep = 0; rep < 300; ++rep) {
    const Eigen::Index parts = 2 + static_cast<Eigen::Index>(gen() % 9);
    Eigen::MatrixXi entries = testutil::random_sbp_entries(parts, gen);
    SbpMatrix sbp;
    CHECK_NOTHROW(sbp = coda::validate_sbp(entries));
    auto basis = coda::basis_from_sbp(sbp);
    Eigen::MatrixXd gram = basis.v.transpose() * basis.v;
    CHECK((gram - Eigen::MatrixXd::Identity(parts - 1, parts - 1)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("basis_rotation is orthogonal and preserves inner products") {
  auto tax = coda::basis_from_sbp(coda::validate_sbp(taxonomy_entries()));
  auto piv = coda::basis_from_sbp(coda::pivotal_sbp(5));

  SUBCASE("identity for equal bases") {
    Eigen::MatrixXd p = coda::basis_rotation(tax, tax);
    CHECK((p - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("taxonomy to pivotal") {
    Eigen::MatrixXd p = coda::basis_rotation(tax, piv);
    CHECK((p.transpose() * p - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);

    std::mt19937_64 gen(5);
    Eigen::VectorXd comp = testutil::random_composition(5, gen);
    Eigen::VectorXd under_tax = coda::ilr_forward(coda::Composition(comp), tax).coords();
    Eigen::VectorXd under_piv = coda::ilr_forward(coda::Composition(comp), piv).coords();
    CHECK((p * under_tax - under_piv).cwiseAbs().maxCoeff() < 1e-10);

    std::normal_distribution<double> coord(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
      Eigen::VectorXd g(4), b(4);
      for (int k = 0; k < 4; ++k) {
        g[k] = coord(gen);
        b[k] = coord(gen);
      }
      CHECK((p * g).dot(p * b) == doctest::Approx(g.dot(b)).epsilon(1e-12));
    }
  }
}

TEST_CASE("the scalar-templated kernel also instantiates for float") {
  auto basis = coda::basis_from_sbp<float>(coda::pivotal_sbp(4));
  coda::CompositionT<float> p((Eigen::Vector4f() << 0.4f, 0.3f, 0.2f, 0.1f).finished());
  auto m = coda::ilr_forward(p, basis);
  auto back = coda::ilr_inverse(m, basis);
  CHECK((back.proportions() - p.proportions()).cwiseAbs().maxCoeff() < 1e-5f);
}
