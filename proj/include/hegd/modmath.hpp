#pragma once

// Word-size modular arithmetic helpers shared by the ring layer.
// All moduli are odd primes below 2^62 so that lazy sums fit in 64 bits
// and 128-bit products never overflow.

#include <cstdint>
#include <vector>

#include "hegd/errors.hpp"

namespace hegd {

inline uint64_t add_mod(uint64_t a, uint64_t b, uint64_t q) {
  uint64_t s = a + b;
  return s >= q ? s - q : s;
}

inline uint64_t sub_mod(uint64_t a, uint64_t b, uint64_t q) {
  return a >= b ? a - b : a + q - b;
}

inline uint64_t neg_mod(uint64_t a, uint64_t q) { return a == 0 ? 0 : q - a; }

inline uint64_t mul_mod(uint64_t a, uint64_t b, uint64_t q) {
  return static_cast<uint64_t>((static_cast<__uint128_t>(a) * b) % q);
}

// Shoup multiplication by a fixed operand w with precomputed
// w_shoup = floor(w * 2^64 / q). Requires a < q, w < q, q < 2^62.
inline uint64_t shoup_precompute(uint64_t w, uint64_t q) {
  return static_cast<uint64_t>((static_cast<__uint128_t>(w) << 64) / q);
}

inline uint64_t mul_mod_shoup(uint64_t a, uint64_t w, uint64_t w_shoup,
                              uint64_t q) {
  uint64_t hi = static_cast<uint64_t>((static_cast<__uint128_t>(a) * w_shoup) >> 64);
  uint64_t r = a * w - hi * q;
  return r >= q ? r - q : r;
}

inline uint64_t pow_mod(uint64_t base, uint64_t exp, uint64_t q) {
  uint64_t r = 1;
  base %= q;
  while (exp > 0) {
    if (exp & 1) r = mul_mod(r, base, q);
    base = mul_mod(base, base, q);
    exp >>= 1;
  }
  return r;
}

// Inverse modulo a prime q.
inline uint64_t inv_mod(uint64_t a, uint64_t q) {
  if (a % q == 0) throw ContractError("inv_mod: zero has no inverse");
  return pow_mod(a, q - 2, q);
}

// Deterministic Miller-Rabin, exact for all 64-bit integers.
inline bool is_prime(uint64_t n) {
  if (n < 2) return false;
  for (uint64_t p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull,
                     23ull, 29ull, 31ull, 37ull}) {
    if (n % p == 0) return n == p;
  }
  uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  for (uint64_t a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull,
                     23ull, 29ull, 31ull, 37ull}) {
    uint64_t x = pow_mod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = mul_mod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

inline uint32_t bit_reverse(uint32_t x, int bits) {
  uint32_t r = 0;
  for (int i = 0; i < bits; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

// Largest prime p <= hint with p ≡ 1 (mod step). Used to sieve NTT-friendly
// moduli downward from a power of two.
inline uint64_t previous_ntt_prime(uint64_t hint, uint64_t step) {
  uint64_t p = hint - (hint % step) + 1;
  if (p > hint) p -= step;
  while (p > step) {
    if (is_prime(p)) return p;
    p -= step;
  }
  throw ContractError("previous_ntt_prime: no prime found below hint");
}

}  // namespace hegd
