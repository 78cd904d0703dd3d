#include <cmath>

#include "ccm/dataset.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace ccm;

TEST_CASE("load_csv codes a binary column lexicographically") {
  const auto path = testutil::write_temp("binary.csv", "a\nb\na\nb\n");
  Dataset data = load_csv(path);
  CHECK(data.n() == 4);
  CHECK(data.d() == 1);
  CHECK(data.modalities(1) == 2);
  CHECK(data.code(0, 1) == 1);
  CHECK(data.code(1, 1) == 2);
  CHECK(data.code(2, 1) == 1);
  CHECK(data.code(3, 1) == 2);
  CHECK(data.label_of(1, 1) == "a");
}

TEST_CASE("load_csv rejects bad inputs") {
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv"), InputError);

  const auto ragged = testutil::write_temp("ragged.csv", "a,b\na\n");
  CHECK_THROWS_AS(load_csv(ragged), InputError);

  const auto constant = testutil::write_temp("constant.csv", "a,x\nb,x\na,x\n");
  CHECK_THROWS_WITH_AS(load_csv(constant), doctest::Contains("degenerate"), InputError);

  const auto missing = testutil::write_temp("missing.csv", "a,x\nb,\na,y\n");
  CHECK_THROWS_AS(load_csv(missing), InputError);

  // schema declaring fewer modalities than observed
  const auto data_path = testutil::write_temp("three.csv", "a\nb\nc\n");
  const auto schema_path =
      testutil::write_temp("schema2.json", R"([{"name":"V1","modalities":["a","b"]}])");
  CHECK_THROWS_AS(load_csv(data_path, {}, load_schema(schema_path)), InputError);
}

TEST_CASE("schema declares coding order and extra modalities") {
  const auto data_path = testutil::write_temp("sch.csv", "b\na\nb\n");
  const auto schema_path = testutil::write_temp(
      "schema3.json", R"([{"name":"grade","modalities":["b","a","c"]}])");
  Dataset data = load_csv(data_path, {}, load_schema(schema_path));
  CHECK(data.modalities(1) == 3);
  CHECK(data.variable_name(1) == "grade");
  CHECK(data.code(0, 1) == 1);  // "b" is declared first
  CHECK(data.code(1, 1) == 2);
}

TEST_CASE("header row is consumed when requested") {
  const auto path = testutil::write_temp("hdr.csv", "first,second\nx,u\ny,v\n");
  CsvOptions opts;
  opts.header = true;
  Dataset data = load_csv(path, opts);
  CHECK(data.n() == 2);
  CHECK(data.variable_name(1) == "first");
  CHECK(data.variable_name(2) == "second");
}

TEST_CASE("csv round-trip reproduces codes") {
  Rng rng(7);
  std::vector<int> codes;
  std::vector<int> m = {3, 2, 4};
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 3; ++j) codes.push_back(rng.uniform_int(1, m[j]));
  Dataset original(codes, m);
  const auto csv_path = testutil::write_temp("roundtrip.csv", "");
  save_csv(original, csv_path);
  const auto schema_path = testutil::write_temp("roundtrip_schema.json", schema_json(original));
  CsvOptions opts;
  opts.header = true;
  Dataset reloaded = load_csv(csv_path, opts, load_schema(schema_path));
  CHECK(reloaded.codes() == original.codes());
  CHECK(reloaded.modality_counts() == original.modality_counts());
}

namespace {

// rows that realize a given 2x2 contingency table
Dataset dataset_from_2x2(int c11, int c12, int c21, int c22) {
  std::vector<int> codes;
  auto add = [&](int a, int b, int count) {
    for (int i = 0; i < count; ++i) {
      codes.push_back(a);
      codes.push_back(b);
    }
  };
  add(1, 1, c11);
  add(1, 2, c12);
  add(2, 1, c21);
  add(2, 2, c22);
  return Dataset(codes, {2, 2});
}

}  // namespace

TEST_CASE("cramers_v on hand-built tables") {
  SUBCASE("identical binary columns give 1") {
    Dataset data = dataset_from_2x2(30, 0, 0, 20);
    CHECK(cramers_v(data, 1, 2) == doctest::Approx(1.0));
  }
  SUBCASE("exact product-form table gives 0") {
    // marginals (40, 40) x (40, 40): every cell expects 20
    Dataset data = dataset_from_2x2(20, 20, 20, 20);
    CHECK(cramers_v(data, 1, 2) == doctest::Approx(0.0));
  }
  SUBCASE("((30,10),(10,30)) gives 0.5") {
    Dataset data = dataset_from_2x2(30, 10, 10, 30);
    CHECK(cramers_v(data, 1, 2) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("errors") {
    Dataset data = dataset_from_2x2(30, 10, 10, 30);
    CHECK_THROWS_AS(cramers_v(data, 1, 1), InputError);
    std::vector<double> zero(data.n(), 0.0);
    CHECK_THROWS_AS(cramers_v(data, 1, 2, zero), InputError);
  }
}

TEST_CASE("cramers_v properties on random data") {
  Rng rng(42);
  std::vector<int> codes;
  std::vector<int> m = {3, 4, 2, 3};
  const int n = 200;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 4; ++j) codes.push_back(rng.uniform_int(1, m[j]));
  Dataset data(codes, m);

  SUBCASE("symmetry and range") {
    for (int j = 1; j <= 4; ++j)
      for (int j2 = j + 1; j2 <= 4; ++j2) {
        const double v = cramers_v(data, j, j2);
        CHECK(v == cramers_v(data, j2, j));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
  }

  SUBCASE("invariance under modality relabeling") {
    // swap modalities 1 and 3 of variable 1
    std::vector<int> swapped = data.codes();
    for (int i = 0; i < n; ++i) {
      int& c = swapped[i * 4];
      if (c == 1)
        c = 3;
      else if (c == 3)
        c = 1;
    }
    Dataset permuted(swapped, m);
    for (int j2 = 2; j2 <= 4; ++j2)
      CHECK(cramers_v(data, 1, j2) == doctest::Approx(cramers_v(permuted, 1, j2)).epsilon(1e-12));
  }

  SUBCASE("fractional weights are honored") {
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = 0.25 + 0.5 * (i % 3);
    const double v = cramers_v(data, 1, 2, w);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    // doubling all weights changes nothing
    std::vector<double> w2 = w;
    for (auto& x : w2) x *= 2.0;
    CHECK(cramers_v(data, 1, 2, w2) == doctest::Approx(v).epsilon(1e-12));
  }

  SUBCASE("pairwise matrix is symmetric with unit diagonal") {
    auto v = pairwise_v_matrix(data);
    for (int a = 0; a < 4; ++a) {
      CHECK(v[a][a] == 1.0);
      for (int b = 0; b < 4; ++b) CHECK(v[a][b] == v[b][a]);
    }
  }
}

TEST_CASE("pairwise_v_matrix on constructed columns") {
  // three variables: 1 and 2 identical, 3 independent with product-form table
  std::vector<int> codes;
  for (int rep = 0; rep < 2; ++rep)
    for (int a = 1; a <= 2; ++a)
      for (int c = 1; c <= 2; ++c) {
        codes.push_back(a);
        codes.push_back(a);
        codes.push_back(c);
      }
  Dataset data(codes, {2, 2, 2});
  auto v = pairwise_v_matrix(data);
  CHECK(v[0][1] == doctest::Approx(1.0));
  CHECK(v[0][2] == doctest::Approx(0.0));
  CHECK(v[1][2] == doctest::Approx(0.0));
}

TEST_CASE("dataset invariants") {
  CHECK_THROWS_AS(Dataset({1, 3}, {2}), InputError);         // code out of range
  CHECK_THROWS_AS(Dataset({1, 1, 2}, {2, 2}), InputError);   // not a multiple of d
  CHECK_THROWS_AS(Dataset({1, 1}, {2, 1}), InputError);      // m_j < 2
  CHECK_THROWS_AS(Dataset({}, {2}), InputError);             // n = 0
}
