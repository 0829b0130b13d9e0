#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hda/huffman.hpp"
#include "hda/types.hpp"

using Catch::Matchers::WithinAbs;

TEST_CASE("dyadic probabilities get their ideal lengths", "[huffman]") {
  const std::vector<double> p{0.5, 0.25, 0.125, 0.125};
  const auto code = hda::build_huffman(p);
  CHECK(code.lengths == std::vector<int>{1, 2, 3, 3});
  CHECK(code.expected_length(p) == 1.75);
  CHECK(hda::entropy_bits(p) == 1.75);
  CHECK(code.kraft_sum() == 1.0);
}

TEST_CASE("canonical codewords are prefix-free", "[huffman]") {
  const std::vector<double> p{0.3, 0.2, 0.2, 0.1, 0.1, 0.05, 0.05};
  const auto code = hda::build_huffman(p);
  for (std::size_t a = 0; a < p.size(); ++a) {
    for (std::size_t b = 0; b < p.size(); ++b) {
      if (a == b || code.lengths[a] > code.lengths[b]) continue;
      const auto prefix = code.codewords[b] >> (code.lengths[b] - code.lengths[a]);
      INFO(a << " vs " << b);
      CHECK(prefix != code.codewords[a]);
    }
  }
}

TEST_CASE("expected length lies within one bit of the entropy", "[huffman]") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(u(gen) * 40);
    std::vector<double> p(n);
    double total = 0.0;
    for (auto& v : p) total += (v = std::pow(u(gen), 3.0));
    for (auto& v : p) v /= total;
    const auto code = hda::build_huffman(p);
    const double h = hda::entropy_bits(p);
    const double len = code.expected_length(p);
    REQUIRE(len >= h - 1e-12);
    REQUIRE(len < h + 1.0);
    REQUIRE_THAT(code.kraft_sum(), WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("degenerate alphabets", "[huffman]") {
  const auto one = hda::build_huffman({1.0});
  CHECK(one.lengths == std::vector<int>{1});
  const auto zeros = hda::build_huffman({0.5, 0.5, 0.0});
  CHECK(zeros.lengths.size() == 3);
  CHECK(zeros.lengths[2] > 0);
  CHECK(hda::entropy_bits({1.0, 0.0}) == 0.0);
}

TEST_CASE("ties break toward lower symbol indices", "[huffman]") {
  const auto a = hda::build_huffman({0.25, 0.25, 0.25, 0.25});
  CHECK(a.lengths == std::vector<int>{2, 2, 2, 2});
  const auto b = hda::build_huffman({0.2, 0.2, 0.2, 0.2, 0.2});
  CHECK(b.lengths == hda::build_huffman({0.2, 0.2, 0.2, 0.2, 0.2}).lengths);
  CHECK_THAT(b.expected_length({0.2, 0.2, 0.2, 0.2, 0.2}), WithinAbs(2.4, 1e-15));
}

TEST_CASE("invalid weights", "[huffman]") {
  CHECK_THROWS_AS(hda::build_huffman({}), hda::ValidationError);
  CHECK_THROWS_AS(hda::build_huffman({0.5, -0.1}), hda::ValidationError);
}
