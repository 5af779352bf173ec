#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "hegd/ring.hpp"
#include "oracles.hpp"

using namespace hegd;

namespace {

RnsPoly random_poly(const BasisPtr& basis, int level, std::mt19937_64& rng) {
  return sample(SampleKind::Uniform, rng, basis, level);
}

}  // namespace

TEST_CASE("ntt: forward then inverse is the identity") {
  auto basis = RnsBasis::create_custom(64, {7681, 12289}, 13);
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    RnsPoly p = random_poly(basis, 1, rng);
    RnsPoly round = ntt(ntt(p, NttDirection::Forward), NttDirection::Inverse);
    CHECK(round == p);
  }
}

TEST_CASE("ntt: zero maps to zero") {
  auto basis = RnsBasis::create_custom(16, {97}, 6);
  RnsPoly z(basis, 0, Domain::Coeff);
  RnsPoly fz = ntt(z, NttDirection::Forward);
  CHECK(fz == RnsPoly(basis, 0, Domain::Eval));
}

TEST_CASE("ntt: domain mismatch is a contract violation") {
  auto basis = RnsBasis::create_custom(16, {97}, 6);
  RnsPoly z(basis, 0, Domain::Eval);
  CHECK_THROWS_AS(ntt(z, NttDirection::Forward), ContractError);
  RnsPoly c(basis, 0, Domain::Coeff);
  CHECK_THROWS_AS(ntt(c, NttDirection::Inverse), ContractError);
}

TEST_CASE("poly_mul: (1+X)^2 = 1+2X+X^2 at N=4, q=97 via NTT pointwise") {
  auto basis = RnsBasis::create_custom(4, {97}, 6);
  RnsPoly a = RnsPoly::from_signed_coeffs(basis, 0, {1, 1, 0, 0});
  RnsPoly ea = ntt(a, NttDirection::Forward);
  RnsPoly prod = ntt(poly_mul(ea, ea), NttDirection::Inverse);
  RnsPoly expect = RnsPoly::from_signed_coeffs(basis, 0, {1, 2, 1, 0});
  CHECK(prod == expect);
}

TEST_CASE("poly_mul: multiplicative identity") {
  auto basis = RnsBasis::create_custom(8, {97}, 6);
  std::mt19937_64 rng(7);
  RnsPoly a = random_poly(basis, 0, rng);
  RnsPoly one = RnsPoly::from_signed_coeffs(basis, 0, {1});
  CHECK(poly_mul(a, one) == a);
}

TEST_CASE("poly_mul: ring relation X^N = -1") {
  auto basis = RnsBasis::create_custom(4, {97}, 6);
  RnsPoly x3 = RnsPoly::from_signed_coeffs(basis, 0, {0, 0, 0, 1});
  RnsPoly x = RnsPoly::from_signed_coeffs(basis, 0, {0, 1, 0, 0});
  RnsPoly prod = poly_mul(x3, x);
  RnsPoly expect = RnsPoly::from_signed_coeffs(basis, 0, {-1});
  CHECK(prod == expect);
  CHECK(prod.residues(0)[0] == 96);  // q - 1
}

TEST_CASE("poly_mul: matches the schoolbook negacyclic oracle exactly") {
  std::mt19937_64 rng(123);
  for (uint32_t n : {4u, 8u, 16u}) {
    auto basis = RnsBasis::create_custom(n, {12289, 65537}, 13);
    for (int trial = 0; trial < 100; ++trial) {
      RnsPoly a = random_poly(basis, 1, rng);
      RnsPoly b = random_poly(basis, 1, rng);
      RnsPoly c = poly_mul(a, b);
      for (int i = 0; i <= 1; ++i) {
        auto expect = oracles::schoolbook_negacyclic(
            a.residues(i), b.residues(i), basis->prime(i).value());
        CHECK(c.residues(i) == expect);
      }
    }
  }
}

TEST_CASE("poly_mul: commutative and distributes over addition") {
  auto basis = RnsBasis::create_custom(16, {12289}, 13);
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    RnsPoly a = random_poly(basis, 0, rng);
    RnsPoly b = random_poly(basis, 0, rng);
    RnsPoly c = random_poly(basis, 0, rng);
    CHECK(poly_mul(a, b) == poly_mul(b, a));
    CHECK(poly_mul(a, b + c) == poly_mul(a, b) + poly_mul(a, c));
  }
}

TEST_CASE("poly_mul: level mismatch raises AlignmentError") {
  auto basis = RnsBasis::create_custom(8, {12289, 65537}, 13);
  std::mt19937_64 rng(5);
  RnsPoly a = random_poly(basis, 1, rng);
  RnsPoly b = random_poly(basis, 0, rng);
  CHECK_THROWS_AS(poly_mul(a, b), AlignmentError);
}

TEST_CASE("drop_last_prime_and_round: toy basis {17,5}, 7 -> round(7/5) = 1") {
  // Basis order: level-0 prime 17, level-1 prime 5 (the one dropped).
  auto basis = RnsBasis::create_custom(2, {17, 5}, 2);
  RnsPoly p = RnsPoly::from_signed_coeffs(basis, 1, {7});
  RnsPoly out = drop_last_prime_and_round(p);
  CHECK(out.level() == 0);
  CHECK(out.residues(0)[0] == 1);
}

TEST_CASE("drop_last_prime_and_round: exact multiples divide exactly") {
  auto basis = RnsBasis::create_custom(4, {97, 41}, 5);
  RnsPoly p = RnsPoly::from_signed_coeffs(basis, 1, {41, 82, -41, 0});
  RnsPoly out = drop_last_prime_and_round(p);
  RnsPoly expect = RnsPoly::from_signed_coeffs(basis, 0, {1, 2, -1, 0});
  CHECK(out == expect);
}

TEST_CASE("drop_last_prime_and_round: zero stays zero, level drops") {
  auto basis = RnsBasis::create_custom(4, {97, 41}, 5);
  RnsPoly z(basis, 1, Domain::Coeff);
  RnsPoly out = drop_last_prime_and_round(z);
  CHECK(out == RnsPoly(basis, 0, Domain::Coeff));
}

TEST_CASE("drop_last_prime_and_round: level 0 raises DepthExhausted") {
  auto basis = RnsBasis::create_custom(4, {97}, 5);
  RnsPoly p(basis, 0, Domain::Coeff);
  CHECK_THROWS_AS(drop_last_prime_and_round(p), DepthExhausted);
}

TEST_CASE("drop_last_prime_and_round: within 1/2 of the exact rational, via CRT oracle") {
  auto basis = RnsBasis::create_custom(8, {193, 113, 97}, 5);
  std::vector<uint64_t> primes = {193, 113, 97};
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    RnsPoly p = random_poly(basis, 2, rng);
    RnsPoly out = drop_last_prime_and_round(p);
    for (uint32_t k = 0; k < p.n(); ++k) {
      __int128 x = oracles::crt_centered(
          {p.residues(0)[k], p.residues(1)[k], p.residues(2)[k]}, primes);
      __int128 y = oracles::crt_centered({out.residues(0)[k], out.residues(1)[k]},
                                         {193, 113});
      // |y - x/97| <= 1/2  <=>  |97*y - x| <= 97/2.
      __int128 diff = 97 * y - x;
      if (diff < 0) diff = -diff;
      CHECK(2 * diff <= 97);
    }
  }
}

TEST_CASE("sample: ternary coefficients lie in {-1, 0, 1}") {
  auto basis = RnsBasis::create_custom(64, {12289, 65537}, 13);
  std::mt19937_64 rng(1);
  RnsPoly p = sample(SampleKind::Ternary, rng, basis, 1);
  for (int i = 0; i <= 1; ++i) {
    uint64_t q = basis->prime(i).value();
    for (uint64_t x : p.residues(i)) {
      bool ok = x == 0 || x == 1 || x == q - 1;
      CHECK(ok);
    }
  }
}

TEST_CASE("sample: same seed gives identical polynomials") {
  auto basis = RnsBasis::create_custom(64, {12289}, 13);
  for (SampleKind kind :
       {SampleKind::Ternary, SampleKind::Gaussian, SampleKind::Uniform}) {
    std::mt19937_64 rng_a(77), rng_b(77);
    RnsPoly a = sample(kind, rng_a, basis, 0);
    RnsPoly b = sample(kind, rng_b, basis, 0);
    CHECK(a == b);
  }
}

TEST_CASE("sample: gaussian empirical mean within 4*sigma/sqrt(N)") {
  uint32_t n = 4096;
  auto basis = RnsBasis::create(n, 0, 30);
  std::mt19937_64 rng(314);
  RnsPoly p = sample(SampleKind::Gaussian, rng, basis, 0);
  uint64_t q = basis->prime(0).value();
  double mean = 0.0;
  for (uint64_t x : p.residues(0)) {
    int64_t v = x > q / 2 ? static_cast<int64_t>(x) - static_cast<int64_t>(q)
                          : static_cast<int64_t>(x);
    mean += static_cast<double>(v);
  }
  mean /= n;
  CHECK(std::abs(mean) <= 4.0 * kGaussianStddev / std::sqrt(double(n)));
}

TEST_CASE("RnsBasis: generated primes are NTT-friendly and near the scale") {
  uint32_t n = 1024;
  auto basis = RnsBasis::create(n, 4, 40);
  CHECK(basis->chain_size() == 5);
  CHECK(basis->has_special());
  for (int i = 0; i < basis->chain_size(); ++i) {
    uint64_t q = basis->prime(i).value();
    CHECK(is_prime(q));
    CHECK((q - 1) % (2 * n) == 0);
    CHECK(pow_mod(basis->prime(i).root(), n, q) == q - 1);
  }
  // Chain primes (all but the level-0 one) within a factor 2 of Δ = 2^40.
  for (int i = 1; i < basis->chain_size(); ++i) {
    double ratio = static_cast<double>(basis->prime(i).value()) / std::ldexp(1.0, 40);
    CHECK(ratio > 0.5);
    CHECK(ratio < 2.0);
  }
  CHECK(basis->special().value() != basis->prime(0).value());
}

TEST_CASE("RnsBasis: deterministic for fixed (n, depth, scale_bits)") {
  auto a = RnsBasis::create(512, 3, 40);
  auto b = RnsBasis::create(512, 3, 40);
  for (int i = 0; i < a->chain_size(); ++i)
    CHECK(a->prime(i).value() == b->prime(i).value());
  CHECK(a->special().value() == b->special().value());
}
