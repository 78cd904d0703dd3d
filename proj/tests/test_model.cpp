#include <cmath>
#include <map>
#include <set>

#include "ccm/model.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace ccm;

namespace {

// the two maximum dependency examples used throughout: a (4,3) block with a
// merged top modality, and a (2,2,2) block with identity links
MaxDepParams maxdep_4_3() {
  MaxDepParams p;
  p.tau = {0.1, 0.3, 0.2, 0.4};
  p.links = {{1, 2, 3, 3}};
  return p;
}

MaxDepParams maxdep_2_2_2() {
  MaxDepParams p;
  p.tau = {0.5, 0.5};
  p.links = {{1, 2}, {1, 2}};
  return p;
}

}  // namespace

TEST_CASE("indep_log_pdf") {
  std::vector<std::vector<double>> uniform2 = {{0.5, 0.5}, {0.5, 0.5}};
  CHECK(indep_log_pdf(std::vector<int>{1, 2}, uniform2) == doctest::Approx(std::log(0.25)));

  std::vector<std::vector<double>> one = {{0.2, 0.8}};
  CHECK(indep_log_pdf(std::vector<int>{2}, one) == doctest::Approx(std::log(0.8)));

  std::vector<std::vector<double>> ternary(3, std::vector<double>{0.2, 0.2, 0.6});
  CHECK(indep_log_pdf(std::vector<int>{3, 3, 3}, ternary) == doctest::Approx(std::log(0.216)));
}

TEST_CASE("maxdep_log_pdf") {
  const MaxDepParams a = maxdep_4_3();
  CHECK(maxdep_log_pdf(std::vector<int>{1, 1}, a) == doctest::Approx(std::log(0.1)));
  CHECK(maxdep_log_pdf(std::vector<int>{1, 2}, a) == kNegInf);
  CHECK(maxdep_log_pdf(std::vector<int>{4, 3}, a) == doctest::Approx(std::log(0.4)));

  const MaxDepParams b = maxdep_2_2_2();
  CHECK(maxdep_log_pdf(std::vector<int>{2, 2, 2}, b) == doctest::Approx(std::log(0.5)));
  CHECK(maxdep_log_pdf(std::vector<int>{2, 2, 1}, b) == kNegInf);
}

TEST_CASE("block_log_pdf") {
  SUBCASE("rho = 0 equals the independence density exactly") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int> mb = {rng.uniform_int(2, 4), rng.uniform_int(2, 3)};
      std::sort(mb.rbegin(), mb.rend());
      BlockParams theta = random_block_params(mb, rng);
      theta.rho = 0.0;
      std::vector<int> cell = {rng.uniform_int(1, mb[0]), rng.uniform_int(1, mb[1])};
      CHECK(block_log_pdf(cell, theta) == indep_log_pdf(cell, theta.alpha));
    }
  }
  SUBCASE("rho = 1 on-support equals the maximum dependency density") {
    BlockParams theta;
    theta.rho = 1.0;
    theta.alpha = {{0.25, 0.25, 0.25, 0.25}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
    theta.maxdep = maxdep_4_3();
    CHECK(block_log_pdf(std::vector<int>{2, 2}, theta) == doctest::Approx(std::log(0.3)));
  }
  SUBCASE("rho = 0.5 with uniform alpha on the (2,2,2) block") {
    BlockParams theta;
    theta.rho = 0.5;
    theta.alpha = {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
    theta.maxdep = maxdep_2_2_2();
    CHECK(block_log_pdf(std::vector<int>{1, 1, 1}, theta) == doctest::Approx(std::log(0.3125)));
    // off-support cell: only the independence part contributes
    CHECK(block_log_pdf(std::vector<int>{1, 1, 2}, theta) ==
          doctest::Approx(std::log(0.5 * 0.125)));
  }
}

TEST_CASE("mixture_log_pdf") {
  SUBCASE("g=1 with singleton blocks reduces to a sum of marginal logs") {
    CcmModel model;
    model.g = 1;
    model.m = {2, 3};
    model.partition = BlockPartition::all_singletons(1, 2);
    model.pi = {1.0};
    model.blocks.resize(1);
    BlockParams b1, b2;
    b1.alpha = {{0.3, 0.7}};
    b2.alpha = {{0.2, 0.3, 0.5}};
    model.blocks[0] = {b1, b2};
    model.validate();
    CHECK(mixture_log_pdf(std::vector<int>{2, 3}, model) ==
          doctest::Approx(std::log(0.7) + std::log(0.5)));
  }

  SUBCASE("mixture of two identical components equals the component") {
    Rng rng(3);
    CcmModel one = testutil::random_model(3, 3, 1, rng);
    CcmModel two = one;
    two.g = 2;
    two.pi = {0.5, 0.5};
    two.partition = BlockPartition::canonical(
        {one.partition.component(0), one.partition.component(0)}, one.m);
    two.blocks = {one.blocks[0], one.blocks[0]};
    two.validate();
    std::vector<int> cell(one.d());
    for (int j = 0; j < one.d(); ++j) cell[j] = rng.uniform_int(1, one.m[j]);
    CHECK(mixture_log_pdf(cell, two) == doctest::Approx(mixture_log_pdf(cell, one)));
  }

  SUBCASE("total probability mass is 1 (brute force)") {
    Rng rng(17);
    for (int trial = 0; trial < 25; ++trial) {
      CcmModel model = testutil::random_model(4, 4, 3, rng);
      CHECK(testutil::total_mass(model) == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("parameter counts") {
  SUBCASE("nu_cim") {
    CHECK(nu_cim(1, std::vector<int>{2, 2}) == 2);
    CHECK(nu_cim(2, std::vector<int>{2, 2, 2, 2, 2}) == 11);
    // nine variables with sum (m_j - 1) = 17
    const std::vector<int> calves_m = {4, 4, 4, 3, 3, 2, 2, 2, 2};
    CHECK(nu_cim(8, calves_m) == 143);
    CHECK(nu_cim(1, calves_m) == 17);
  }

  SUBCASE("nu_ccm equals nu_cim for all-singleton partitions") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const int d = rng.uniform_int(1, 6);
      const int g = rng.uniform_int(1, 4);
      std::vector<int> m(d);
      for (auto& mj : m) mj = rng.uniform_int(2, 5);
      CHECK(nu_ccm(g, BlockPartition::all_singletons(g, d), m) == nu_cim(g, m));
    }
  }

  SUBCASE("nu_ccm on the five-binary-variable two-component structure") {
    const std::vector<int> m = {2, 2, 2, 2, 2};
    auto part = BlockPartition::canonical({{{1, 2, 3, 4, 5}}, {{3, 4}, {1, 2, 5}}}, m);
    CHECK(nu_ccm(2, part, m) == 17);
  }

  SUBCASE("nu_ccm = 24 at g = 1 for the nine-variable structure sizes") {
    const std::vector<int> m = {4, 4, 4, 3, 3, 2, 2, 2, 2};
    auto part = BlockPartition::canonical({{{1}, {2}, {3}, {4, 5}, {6, 7}, {8, 9}}}, m);
    CHECK(nu_ccm(1, part, m) == 24);
  }

  SUBCASE("free-parameter enumeration oracle") {
    // independent route: count simplex and proportion degrees of freedom
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
      CcmModel model = testutil::random_model(5, 5, 3, rng);
      long long count = model.g - 1;
      for (int k = 0; k < model.g; ++k)
        for (int b = 0; b < model.partition.n_blocks(k); ++b) {
          const auto mb = model.block_modalities(k, b);
          for (int mj : mb) count += mj - 1;           // alpha vectors
          if (mb.size() > 1) count += 1 + (mb[0] - 1);  // rho and tau
        }
      CHECK(nu_ccm(model) == count);
    }
  }
}

TEST_CASE("surjection counting and enumeration") {
  CHECK(surjection_space_size(std::vector<int>{2, 2}) == 2);
  CHECK(surjection_space_size(std::vector<int>{3, 2}) == 6);
  CHECK(surjection_space_size(std::vector<int>{5, 4, 3}) == 36000);
  CHECK(surjection_count(5, 4) == 240);
  CHECK(surjection_count(5, 3) == 150);
  CHECK_THROWS_AS(surjection_space_size(std::vector<int>{2, 3}), InvariantError);

  SUBCASE("enumeration matches the closed-form count") {
    for (int a = 2; a <= 5; ++a)
      for (int b = 2; b <= a; ++b) {
        const auto all = enumerate_surjections(a, b);
        CHECK(all.size() == surjection_count(a, b));
        std::set<std::vector<int>> unique(all.begin(), all.end());
        CHECK(unique.size() == all.size());
        for (const auto& img : all) {
          std::set<int> hit(img.begin(), img.end());
          CHECK(static_cast<int>(hit.size()) == b);
        }
      }
  }
}

TEST_CASE("sampling") {
  // single maximum-dependency block, (4,3) structure
  CcmModel model;
  model.g = 1;
  model.m = {4, 3};
  model.partition = BlockPartition::canonical({{{1, 2}}}, model.m);
  model.pi = {1.0};
  BlockParams th;
  th.rho = 1.0;
  th.alpha = {{0.25, 0.25, 0.25, 0.25}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  th.maxdep = maxdep_4_3();
  model.blocks = {{th}};
  model.validate();

  SUBCASE("rho = 1 rows always land on the support") {
    Rng rng(100);
    SampleResult draw = sample(model, 500, rng);
    for (int i = 0; i < draw.data.n(); ++i) {
      const int h = draw.data.code(i, 1);
      CHECK(draw.data.code(i, 2) == th.maxdep->links[0][h - 1]);
      CHECK(draw.y[i][0] == 1);
    }
  }

  SUBCASE("empirical cell frequency approaches tau") {
    Rng rng(101);
    SampleResult draw = sample(model, 100000, rng);
    int hits = 0;
    for (int i = 0; i < draw.data.n(); ++i)
      if (draw.data.code(i, 1) == 1 && draw.data.code(i, 2) == 1) ++hits;
    CHECK(std::abs(hits / 100000.0 - 0.1) < 0.01);
  }

  SUBCASE("same seed gives identical datasets") {
    Rng rng1(2024), rng2(2024);
    SampleResult a = sample(model, 200, rng1);
    SampleResult b = sample(model, 200, rng2);
    CHECK(a.data.codes() == b.data.codes());
    CHECK(a.labels == b.labels);
  }
}

TEST_CASE("sampled frequencies match the density (3 sigma)") {
  Rng rng(55);
  CcmModel model = testutil::random_model(3, 3, 2, rng);
  const int n = 50000;
  SampleResult draw = sample(model, n, rng);
  // count every cell of the product space
  std::map<std::vector<int>, int> counts;
  for (int i = 0; i < n; ++i) {
    std::vector<int> cell(model.d());
    for (int j = 1; j <= model.d(); ++j) cell[j - 1] = draw.data.code(i, j);
    ++counts[cell];
  }
  std::vector<int> cell(model.d(), 1);
  while (true) {
    const double p = std::exp(mixture_log_pdf(cell, model));
    const double observed = counts.count(cell) ? counts[cell] : 0;
    const double sd = std::sqrt(n * p * (1.0 - p));
    CHECK(std::abs(observed - n * p) <= std::max(3.0 * sd, 1.0) + 6.0);
    int pos = 0;
    while (pos < model.d() && ++cell[pos] > model.m[pos]) cell[pos++] = 1;
    if (pos == model.d()) break;
  }
}

TEST_CASE("per-variable marginals recoverable from block parameters") {
  // marginal of variable t = (1 - rho) alpha_t + rho (tau pushed through the link)
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> mb = {rng.uniform_int(2, 4), rng.uniform_int(2, 3)};
    std::sort(mb.rbegin(), mb.rend());
    BlockParams theta = random_block_params(mb, rng);
    // brute-force marginal of the second variable
    std::vector<double> marginal(mb[1], 0.0);
    std::vector<int> cell(2);
    for (int h = 1; h <= mb[0]; ++h)
      for (int h2 = 1; h2 <= mb[1]; ++h2) {
        cell = {h, h2};
        marginal[h2 - 1] += std::exp(block_log_pdf(cell, theta));
      }
    for (int h2 = 1; h2 <= mb[1]; ++h2) {
      double expected = (1.0 - theta.rho) * theta.alpha[1][h2 - 1];
      for (int h = 1; h <= mb[0]; ++h)
        if (theta.maxdep->links[0][h - 1] == h2) expected += theta.rho * theta.maxdep->tau[h - 1];
      CHECK(marginal[h2 - 1] == doctest::Approx(expected).epsilon(1e-10));
    }
  }
}

TEST_CASE("block normalization (brute force)") {
  Rng rng(88);
  for (int trial = 0; trial < 30; ++trial) {
    const int dkb = rng.uniform_int(1, 3);
    std::vector<int> mb(dkb);
    for (auto& mj : mb) mj = rng.uniform_int(2, 4);
    std::sort(mb.rbegin(), mb.rend());
    BlockParams theta = random_block_params(mb, rng);
    CHECK(testutil::block_total_mass(theta, mb) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("model JSON round-trip") {
  Rng rng(99);
  CcmModel model = testutil::random_model(4, 4, 3, rng);
  FitMeta meta;
  meta.loglik = -123.456;
  meta.bic = -130.0;
  meta.nu = nu_ccm(model);
  meta.n = 500;
  meta.seed = 99;
  model.meta = meta;

  const std::string text = model_to_json(model);
  CcmModel reloaded = model_from_json(text);
  CHECK(model_to_json(reloaded) == text);  // byte-stable round trip
  CHECK(reloaded.g == model.g);
  CHECK(reloaded.m == model.m);
  CHECK(reloaded.partition == model.partition);

  SUBCASE("rho = 0 blocks serialize without maxdep parameters") {
    CcmModel plain = testutil::random_model(3, 3, 1, rng);
    for (auto& comp : plain.blocks)
      for (auto& blk : comp) blk.rho = 0.0;
    const std::string t = model_to_json(plain);
    CHECK(t.find("delta_images") == std::string::npos);
    CcmModel back = model_from_json(t);
    for (const auto& comp : back.blocks)
      for (const auto& blk : comp) CHECK(!blk.maxdep.has_value());
  }
}

TEST_CASE("partition canonical form") {
  const std::vector<int> m = {2, 3, 2, 4};
  // blocks handed over scrambled: variables reorder by decreasing modality,
  // blocks reorder by smallest member
  auto p = BlockPartition::canonical({{{3, 1}, {2, 4}}}, m);
  CHECK(p.block(0, 0) == std::vector<int>{1, 3});  // both binary: ascending index
  CHECK(p.block(0, 1) == std::vector<int>{4, 2});  // m=4 before m=3
  auto q = BlockPartition::canonical({{{4, 2}, {1, 3}}}, m);
  CHECK(p == q);

  CHECK_THROWS_AS(BlockPartition::canonical({{{1, 2}, {2, 3, 4}}}, m), InputError);  // overlap
  CHECK_THROWS_AS(BlockPartition::canonical({{{1, 2}}}, m), InputError);             // gap
}
