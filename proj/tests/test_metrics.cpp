#include <vector>

#include "doctest.h"
#include "mbt/errors.hpp"
#include "mbt/metrics.hpp"
#include "mbt/rng.hpp"
#include "oracles.hpp"

using namespace mbt;

TEST_SUITE("metrics") {

TEST_CASE("fidelity examples") {
  const std::vector<double> y{0.3, -1.0, 2.5, 4.0};
  auto same = fidelity(y, y);
  CHECK(*same.r2 == 1.0);
  CHECK(same.mse == 0.0);
  CHECK(same.mae == 0.0);
  CHECK(same.max_ae == 0.0);

  const std::vector<double> mean(4, (0.3 - 1.0 + 2.5 + 4.0) / 4);
  CHECK(*fidelity(y, mean).r2 == doctest::Approx(0.0).scale(1.0));

  auto hand = fidelity(std::vector<double>{0, 2}, std::vector<double>{1, 1});
  CHECK(hand.mse == 1.0);
  CHECK(hand.mae == 1.0);
  CHECK(hand.max_ae == 1.0);
  CHECK(*hand.r2 == 0.0);
  CHECK(hand.n == 2);

  auto flat = fidelity(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 0});
  CHECK(!flat.r2.has_value());
  CHECK(flat.max_ae == 1.0);
}

TEST_CASE("fidelity is invariant to common affine maps") {
  Rng rng(51);
  std::vector<double> a(50);
  std::vector<double> b(50);
  for (std::size_t i = 0; i < 50; ++i) {
    a[i] = rng.normal();
    b[i] = a[i] + 0.3 * rng.normal();
  }
  const double base = *fidelity(a, b).r2;
  for (double s : {-3.0, 0.5, 7.0}) {
    std::vector<double> as(50);
    std::vector<double> bs(50);
    for (std::size_t i = 0; i < 50; ++i) {
      as[i] = s * a[i] + 2.0;
      bs[i] = s * b[i] + 2.0;
    }
    CHECK(*fidelity(as, bs).r2 == doctest::Approx(base).epsilon(1e-12));
  }
  auto r = fidelity(a, b);
  CHECK(r.mse >= 0.0);
  CHECK(r.mae <= r.max_ae);
  CHECK(*r.r2 <= 1.0);
}

TEST_CASE("rand index examples") {
  const std::vector<int> a{1, 1, 2};
  const std::vector<int> b{1, 2, 2};
  auto r = rand_index(a, b);
  CHECK(r.n11 == 0);
  CHECK(r.n00 == 1);
  CHECK(r.n_pairs == 3);
  CHECK(r.ri == doctest::Approx(1.0 / 3.0));

  auto z = rand_index(std::vector<int>{7, 7, 7, 7}, std::vector<int>{0, 1, 2, 3});
  CHECK(z.n11 == 0);
  CHECK(z.n00 == 0);
  CHECK(z.ri == 0.0);

  const std::vector<int> one{5};
  CHECK_THROWS(rand_index(one, one));
}

TEST_CASE("contingency rand index equals pair enumeration") {
  Rng rng(52);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng.index(199);
    const std::size_t ka = 1 + rng.index(8);
    const std::size_t kb = 1 + rng.index(8);
    std::vector<int> a(n);
    std::vector<int> b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.index(ka)) * 3 - 4;
      b[i] = static_cast<int>(rng.index(kb)) + 100;
    }
    std::uint64_t n11 = 0;
    std::uint64_t n00 = 0;
    const double ri = oracle::rand_index_pairs(a, b, &n11, &n00);
    auto r = rand_index(a, b);
    CHECK(r.n11 == n11);
    CHECK(r.n00 == n00);
    CHECK(r.n_pairs == n * (n - 1) / 2);
    CHECK(r.ri == ri);
    CHECK(rand_index(b, a).ri == r.ri);
    CHECK(rand_index(a, a).ri == 1.0);
    std::vector<int> renamed(n);
    for (std::size_t i = 0; i < n; ++i) renamed[i] = 1000 - a[i];
    CHECK(rand_index(renamed, b).ri == r.ri);
  }
}

}  // TEST_SUITE
