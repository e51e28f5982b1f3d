// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "chanprune/errors.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace chanprune;

TEST_CASE("tensor shape and storage") {
  Tensor t({2, 3}, 1.5f);
  CHECK(t.rank() == 2);
  CHECK(t.size() == 6);
  CHECK(t.dim(1) == 3);
  CHECK(t[5] == 1.5f);
  t.fill(0.0f);
  CHECK(std::all_of(t.values().begin(), t.values().end(), [](float v) { return v == 0.0f; }));
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>(3)), DimensionError);
  CHECK(shape_size({2, 3, 4}) == 24);
  CHECK(shape_string({2, 3}) == "[2, 3]");
}

TEST_CASE("all_finite spots nan and inf") {
  Tensor t({3});
  CHECK(t.all_finite());
  t[1] = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
  t[1] = std::numeric_limits<float>::infinity();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("filter tensor layout") {
  FilterTensor f("c", 3, 2, 2, 2);
  CHECK(f.filter_size() == 8);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(i);
  // Filter j is the contiguous block [j * 8, (j + 1) * 8).
  CHECK(f.filter(1)[0] == 8.0f);
  CHECK(f.filter(2)[7] == 23.0f);
  CHECK_THROWS_AS(FilterTensor("c", Tensor({2, 2})), DimensionError);
  CHECK_THROWS_AS(FilterTensor("c", Tensor({0, 1, 1, 1})), DimensionError);

  FilterTensor g("other", f.tensor());
  CHECK(g.same_values(f));
  g[0] = 1.0f;
  CHECK_FALSE(g.same_values(f));
}

TEST_CASE("norms accumulate in double") {
  std::vector<float> a = {3.0f, 4.0f};
  std::vector<float> b = {0.0f, 1.0f};
  CHECK(squared_norm(a) == 25.0);
  CHECK(squared_distance(a, b) == 18.0);
  CHECK_THROWS_AS(require_same_shape({1, 2}, {2, 1}, "x"), DimensionError);
}

TEST_CASE("rng streams are reproducible and well spread") {
  Rng a(42), b(42), c(43);
  std::vector<std::uint64_t> xa, xb, xc;
  for (int i = 0; i < 16; ++i) {
    xa.push_back(a.next());
    xb.push_back(b.next());
    xc.push_back(c.next());
  }
  CHECK(xa == xb);
  CHECK(xa != xc);

  Rng r(7);
  std::vector<int> counts(5, 0);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    ++counts[r.below(5)];
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  for (int k : counts) CHECK(std::abs(k - n / 5) < 300);
  CHECK(std::fabs(sum / n) < 0.05);
  CHECK(std::fabs(sq / n - 1.0) < 0.05);

  std::vector<int> items(10);
  std::iota(items.begin(), items.end(), 0);
  Rng s(3);
  s.shuffle(std::span<int>(items));
  CHECK(std::set<int>(items.begin(), items.end()).size() == 10);

  CHECK(Rng::derive(1, 2).next() == Rng::derive(1, 2).next());
  CHECK(Rng::derive(1, 2).next() != Rng::derive(1, 3).next());
}
