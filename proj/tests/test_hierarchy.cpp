#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "hts/hierarchy.hpp"
#include "hts/rng.hpp"
#include "test_helpers.hpp"

using namespace hts;

TEST_CASE("aggregation matrix for the three-level example tree") {
  const auto spec = test::fig1_hierarchy();
  const auto agg = build_aggregation(spec);

  const double expected[8][8] = {
      {0, 0, 0, 1, 1, 1, 1, 1},
      {0, 0, 0, 1, 1, 1, 0, 0},
      {0, 0, 0, 0, 0, 0, 1, 1},
      {0, 0, 0, 1, 0, 0, 0, 0},
      {0, 0, 0, 0, 1, 0, 0, 0},
      {0, 0, 0, 0, 0, 1, 0, 0},
      {0, 0, 0, 0, 0, 0, 1, 0},
      {0, 0, 0, 0, 0, 0, 0, 1},
  };
  REQUIRE(agg.entries.rows == 8);
  REQUIRE(agg.entries.cols == 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) REQUIRE(agg.entries(i, j) == expected[i][j]);
  REQUIRE(agg.leaf_indices == std::vector<int>{3, 4, 5, 6, 7});

  SECTION("matches the independent parent-chain oracle") {
    REQUIRE(max_abs_diff(agg.entries, test::aggregation_by_parent_chains(spec)) == 0.0);
  }
}

TEST_CASE("aggregation of a single node is the 1x1 identity") {
  const auto spec = make_hierarchy({{"only", ""}});
  const auto agg = build_aggregation(spec);
  REQUIRE(agg.entries.rows == 1);
  REQUIRE(agg.entries(0, 0) == 1.0);
  REQUIRE(agg.leaf_indices == std::vector<int>{0});
}

TEST_CASE("aggregation of two leaves under one root") {
  const auto spec = make_hierarchy({{"root", ""}, {"l1", "root"}, {"l2", "root"}});
  const auto agg = build_aggregation(spec);
  const double expected[3][3] = {{0, 1, 1}, {0, 1, 0}, {0, 0, 1}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) REQUIRE(agg.entries(i, j) == expected[i][j]);
}

TEST_CASE("hierarchy validation errors") {
  CHECK_THROWS(make_hierarchy({}));
  CHECK_THROWS(make_hierarchy({{"a", "b"}, {"a", "c"}}));          // duplicate node id
  CHECK_THROWS(make_hierarchy({{"a", "b"}, {"b", "c"}, {"c", "a"}}));  // cycle
  CHECK_THROWS(make_hierarchy({{"a", "a"}}));                      // self-cycle
}

TEST_CASE("levels are depths from the root") {
  const auto spec = test::fig1_hierarchy();
  CHECK(spec.level.at("y1") == 1);
  CHECK(spec.level.at("y2") == 2);
  CHECK(spec.level.at("y3") == 2);
  CHECK(spec.level.at("y8") == 3);
  CHECK(spec.max_level() == 3);
}

TEST_CASE("coherency of example forecasts") {
  const auto agg = build_aggregation(test::fig1_hierarchy());

  const Matrix coherent = Matrix::column({12, 7, 5, 3, 2, 2, 3, 2});
  CHECK(coherency(coherent, agg) == 0.0);

  const Matrix off_top = Matrix::column({13, 7, 5, 3, 2, 2, 3, 2});
  CHECK(coherency(off_top, agg) == Catch::Approx(1.0).margin(1e-14));

  CHECK_THROWS(coherency(Matrix::column({1, 2, 3}), agg));
}

TEST_CASE("A is idempotent and A·y is always coherent") {
  const auto agg = build_aggregation(test::fig1_hierarchy());
  REQUIRE(max_abs_diff(matmul(agg.entries, agg.entries), agg.entries) == 0.0);

  Rng rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix y = gaussian_matrix(8, 1, rng);
    const Matrix ay = matmul(agg.entries, y);
    CHECK(coherency(ay, agg) <= 1e-10 * frobenius_norm(y));
  }
}

TEST_CASE("panel coherency is the mean over timesteps") {
  const auto agg = build_aggregation(test::fig1_hierarchy());

  SECTION("all columns coherent gives zero") {
    Rng rng(7);
    Matrix panel = matmul(agg.entries, gaussian_matrix(8, 5, rng));
    CHECK(coherency_panel(panel, agg) <= 1e-12);
  }

  SECTION("single column equals vector coherency") {
    const Matrix y = Matrix::column({13, 7, 5, 3, 2, 2, 3, 2});
    CHECK(coherency_panel(y, agg) == coherency(y, agg));
  }

  SECTION("two columns with coherencies 1 and 3 give 2") {
    // Column 0: top entry off by 1 -> coherency 1. Column 1: off by 3.
    Matrix panel(8, 2);
    const double base[8] = {12, 7, 5, 3, 2, 2, 3, 2};
    for (int i = 0; i < 8; ++i) {
      panel(i, 0) = base[i];
      panel(i, 1) = base[i];
    }
    panel(0, 0) += 1.0;
    panel(0, 1) += 3.0;
    CHECK(coherency_panel(panel, agg) == Catch::Approx(2.0).margin(1e-12));
  }
}

TEST_CASE("projection matrix properties") {
  const auto spec = test::fig1_hierarchy();
  const auto agg = build_aggregation(spec);
  const auto s = summing_matrix(agg);
  const Matrix p = projection_matrix(s);

  SECTION("symmetric and idempotent within 1e-10") {
    CHECK(max_abs_diff(p, transpose(p)) <= 1e-10);
    CHECK(max_abs_diff(matmul(p, p), p) <= 1e-10);
  }

  SECTION("P·y is coherent for 100 random y") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
      const Matrix y = gaussian_matrix(8, 1, rng);
      const Matrix py = matmul(p, y);
      CHECK(coherency(py, agg) <= 1e-8 * frobenius_norm(y));
    }
  }

  SECTION("P fixes already-coherent vectors") {
    Rng rng(5);
    const Matrix y = matmul(agg.entries, gaussian_matrix(8, 1, rng));
    CHECK(max_abs_diff(matmul(p, y), y) <= 1e-10);
  }

  SECTION("flat hierarchy projects with the identity") {
    const auto flat = make_hierarchy({{"a", ""}, {"b", ""}, {"c", ""}});
    const Matrix pf = projection_matrix(summing_matrix(build_aggregation(flat)));
    CHECK(max_abs_diff(pf, Matrix::identity(3)) <= 1e-12);
  }
}

TEST_CASE("summing matrix columns are the leaf columns of A") {
  const auto agg = build_aggregation(test::fig1_hierarchy());
  const auto s = summing_matrix(agg);
  REQUIRE(s.entries.rows == 8);
  REQUIRE(s.entries.cols == 5);
  for (int i = 0; i < 8; ++i)
    for (int k = 0; k < 5; ++k)
      CHECK(s.entries(i, k) == agg.entries(i, agg.leaf_indices[k]));
  // Leaf rows form the identity.
  for (int k = 0; k < 5; ++k)
    for (int k2 = 0; k2 < 5; ++k2)
      CHECK(s.entries(agg.leaf_indices[k], k2) == (k == k2 ? 1.0 : 0.0));
}

TEST_CASE("hierarchy csv round trip preserves node order") {
  const auto spec = test::fig1_hierarchy();
  const std::string path = "hierarchy_roundtrip_test.csv";
  save_hierarchy_csv(spec, path);
  const auto loaded = load_hierarchy_csv(path);
  CHECK(loaded.node_ids == spec.node_ids);
  CHECK(loaded.parent == spec.parent);
  CHECK(loaded.level == spec.level);
  std::remove(path.c_str());
}

TEST_CASE("hierarchy csv rejects malformed input") {
  const std::string path = "hierarchy_bad_test.csv";
  {
    std::ofstream out(path);
    out << "wrong,header\na,b\n";
  }
  CHECK_THROWS(load_hierarchy_csv(path));
  std::remove(path.c_str());
  CHECK_THROWS(load_hierarchy_csv("does_not_exist_anywhere.csv"));
}
