#pragma once

// Exact arithmetic in R_q = Z_q[X]/(X^N+1) over an RNS basis of NTT-friendly
// primes, plus the samplers RLWE schemes need. Everything here is a pure
// value type; bases are immutable after construction and freely shared.

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "hegd/errors.hpp"
#include "hegd/modmath.hpp"

namespace hegd {

// Default standard deviation of the discrete (rounded) Gaussian sampler.
inline constexpr double kGaussianStddev = 3.2;

enum class Domain : uint8_t { Coeff = 0, Eval = 1 };
enum class NttDirection { Forward, Inverse };
enum class SampleKind { Ternary, Gaussian, Uniform };

// One NTT-friendly prime q ≡ 1 (mod 2N) together with its negacyclic
// transform tables (Longa-Naehrig layout: twiddles stored in bit-reversed
// order, Shoup companions for the butterfly multiplications).
class PrimeModulus {
 public:
  PrimeModulus(uint64_t value, uint32_t n) : q_(value), n_(n) {
    if (n < 2 || (n & (n - 1)) != 0)
      throw ContractError("PrimeModulus: n must be a power of two >= 2");
    if (!is_prime(value) || (value - 1) % (2 * static_cast<uint64_t>(n)) != 0)
      throw ContractError("PrimeModulus: value must be prime with value ≡ 1 (mod 2N)");
    if (value >= (1ull << 62))
      throw ContractError("PrimeModulus: modulus must be below 2^62");
    logn_ = 0;
    while ((1u << logn_) < n) ++logn_;
    psi_ = find_2n_root();
    psi_inv_ = inv_mod(psi_, q_);
    n_inv_ = inv_mod(n_, q_);
    n_inv_shoup_ = shoup_precompute(n_inv_, q_);
    fwd_.resize(n);
    fwd_shoup_.resize(n);
    inv_.resize(n);
    inv_shoup_.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
      uint32_t r = bit_reverse(i, logn_);
      fwd_[i] = pow_mod(psi_, r, q_);
      inv_[i] = pow_mod(psi_inv_, r, q_);
      fwd_shoup_[i] = shoup_precompute(fwd_[i], q_);
      inv_shoup_[i] = shoup_precompute(inv_[i], q_);
    }
  }

  uint64_t value() const { return q_; }
  uint32_t n() const { return n_; }
  uint64_t root() const { return psi_; }

  // In-place negacyclic NTT; input in standard coefficient order, output in
  // the transform's internal (bit-reversed) order. inverse_ntt undoes it.
  void forward_ntt(std::vector<uint64_t>& a) const {
    uint32_t t = n_;
    for (uint32_t m = 1; m < n_; m <<= 1) {
      t >>= 1;
      for (uint32_t i = 0; i < m; ++i) {
        uint32_t j1 = 2 * i * t;
        uint64_t w = fwd_[m + i], ws = fwd_shoup_[m + i];
        for (uint32_t j = j1; j < j1 + t; ++j) {
          uint64_t u = a[j];
          uint64_t v = mul_mod_shoup(a[j + t], w, ws, q_);
          a[j] = add_mod(u, v, q_);
          a[j + t] = sub_mod(u, v, q_);
        }
      }
    }
  }

  void inverse_ntt(std::vector<uint64_t>& a) const {
    uint32_t t = 1;
    for (uint32_t m = n_; m > 1; m >>= 1) {
      uint32_t j1 = 0;
      uint32_t h = m >> 1;
      for (uint32_t i = 0; i < h; ++i) {
        uint64_t w = inv_[h + i], ws = inv_shoup_[h + i];
        for (uint32_t j = j1; j < j1 + t; ++j) {
          uint64_t u = a[j];
          uint64_t v = a[j + t];
          a[j] = add_mod(u, v, q_);
          a[j + t] = mul_mod_shoup(sub_mod(u, v, q_), w, ws, q_);
        }
        j1 += 2 * t;
      }
      t <<= 1;
    }
    for (uint32_t j = 0; j < n_; ++j)
      a[j] = mul_mod_shoup(a[j], n_inv_, n_inv_shoup_, q_);
  }

 private:
  uint64_t find_2n_root() const {
    // psi = c^((q-1)/2N) has order exactly 2N iff psi^N ≡ -1.
    uint64_t exp = (q_ - 1) / (2 * static_cast<uint64_t>(n_));
    for (uint64_t c = 2;; ++c) {
      uint64_t psi = pow_mod(c, exp, q_);
      if (pow_mod(psi, n_, q_) == q_ - 1) return psi;
      if (c > 1u << 20)
        throw ContractError("PrimeModulus: no primitive 2N-th root found");
    }
  }

  uint64_t q_;
  uint32_t n_;
  int logn_;
  uint64_t psi_, psi_inv_, n_inv_, n_inv_shoup_;
  std::vector<uint64_t> fwd_, fwd_shoup_, inv_, inv_shoup_;
};

// Ordered modulus chain: primes[0] is the level-0 prime (kept until the
// end), primes[depth] is the first to be dropped. An extra key-switching
// prime rides along when the basis is built for a scheme (not for the toy
// bases tests construct directly).
class RnsBasis {
 public:
  // Deterministic construction for (n, depth, scale_bits): primes are sieved
  // downward, all ≡ 1 (mod 2N). Chain primes 1..depth sit just below
  // 2^scale_bits so rescaling divides by almost exactly Δ; the level-0 and
  // key-switching primes are wider for decryption headroom and key-switch
  // noise respectively.
  static std::shared_ptr<const RnsBasis> create(uint32_t n, int depth,
                                                int scale_bits) {
    if (depth < 0) throw ContractError("RnsBasis: negative depth");
    if (scale_bits < 20 || scale_bits > 55)
      throw ContractError("RnsBasis: scale_bits out of supported range [20,55]");
    uint64_t step = 2 * static_cast<uint64_t>(n);
    std::vector<uint64_t> chain;
    chain.push_back(previous_ntt_prime((1ull << kFirstPrimeBits) - 1, step));
    uint64_t hint = (1ull << scale_bits) - 1;
    for (int i = 0; i < depth; ++i) {
      uint64_t q = previous_ntt_prime(hint, step);
      chain.push_back(q);
      hint = q - 1;
    }
    uint64_t special = previous_ntt_prime((1ull << kSpecialPrimeBits) - 1, step);
    return std::shared_ptr<const RnsBasis>(
        new RnsBasis(n, std::move(chain), scale_bits, special));
  }

  // Explicit prime list, mainly for tests against hand-computable bases.
  static std::shared_ptr<const RnsBasis> create_custom(
      uint32_t n, std::vector<uint64_t> chain, int scale_bits,
      uint64_t special = 0) {
    return std::shared_ptr<const RnsBasis>(
        new RnsBasis(n, std::move(chain), scale_bits, special));
  }

  uint32_t n() const { return n_; }
  int depth() const { return static_cast<int>(chain_.size()) - 1; }
  int scale_bits() const { return scale_bits_; }
  double scale() const { return std::ldexp(1.0, scale_bits_); }
  int chain_size() const { return static_cast<int>(chain_.size()); }
  const PrimeModulus& prime(int i) const { return chain_[i]; }
  bool has_special() const { return special_.has_value(); }
  const PrimeModulus& special() const {
    if (!special_) throw ContractError("RnsBasis: no key-switching prime");
    return *special_;
  }

  // q_j^{-1} mod q_i and q_j mod q_i, for i < j (rescale constants).
  uint64_t inv_q_mod(int j, int i) const { return inv_q_[j][i]; }
  uint64_t q_mod(int j, int i) const { return q_mod_[j][i]; }
  // Same pair for the key-switching prime against every chain prime.
  uint64_t inv_special_mod(int i) const { return inv_special_[i]; }
  uint64_t special_mod(int i) const { return special_mod_[i]; }

  static constexpr int kFirstPrimeBits = 59;
  static constexpr int kSpecialPrimeBits = 60;

 private:
  RnsBasis(uint32_t n, std::vector<uint64_t> chain, int scale_bits,
           uint64_t special)
      : n_(n), scale_bits_(scale_bits) {
    if (chain.empty()) throw ContractError("RnsBasis: empty prime chain");
    for (uint64_t q : chain) chain_.emplace_back(q, n);
    for (size_t i = 0; i < chain.size(); ++i)
      for (size_t j = i + 1; j < chain.size(); ++j)
        if (chain[i] == chain[j])
          throw ContractError("RnsBasis: primes must be distinct");
    if (special != 0) {
      for (uint64_t q : chain)
        if (q == special) throw ContractError("RnsBasis: primes must be distinct");
      special_.emplace(special, n);
    }
    int L = static_cast<int>(chain_.size());
    inv_q_.resize(L);
    q_mod_.resize(L);
    for (int j = 0; j < L; ++j) {
      inv_q_[j].resize(j);
      q_mod_[j].resize(j);
      for (int i = 0; i < j; ++i) {
        q_mod_[j][i] = chain_[j].value() % chain_[i].value();
        inv_q_[j][i] = inv_mod(q_mod_[j][i], chain_[i].value());
      }
    }
    if (special_) {
      inv_special_.resize(L);
      special_mod_.resize(L);
      for (int i = 0; i < L; ++i) {
        special_mod_[i] = special_->value() % chain_[i].value();
        inv_special_[i] = inv_mod(special_mod_[i], chain_[i].value());
      }
    }
  }

  uint32_t n_;
  int scale_bits_;
  std::vector<PrimeModulus> chain_;
  std::optional<PrimeModulus> special_;
  std::vector<std::vector<uint64_t>> inv_q_, q_mod_;
  std::vector<uint64_t> inv_special_, special_mod_;
};

using BasisPtr = std::shared_ptr<const RnsBasis>;

// Element of R_q for the modulus chain truncated at `level` (level+1 active
// primes), stored as one residue vector per active prime.
class RnsPoly {
 public:
  RnsPoly() = default;

  RnsPoly(BasisPtr basis, int level, Domain domain)
      : basis_(std::move(basis)), level_(level), domain_(domain) {
    if (level_ < 0 || level_ > basis_->depth())
      throw ContractError("RnsPoly: level outside basis chain");
    residues_.assign(level_ + 1, std::vector<uint64_t>(basis_->n(), 0));
  }

  static RnsPoly from_signed_coeffs(BasisPtr basis, int level,
                                    const std::vector<int64_t>& coeffs) {
    RnsPoly p(std::move(basis), level, Domain::Coeff);
    for (int i = 0; i <= level; ++i) {
      uint64_t q = p.basis_->prime(i).value();
      auto& r = p.residues_[i];
      for (size_t k = 0; k < coeffs.size() && k < r.size(); ++k) {
        int64_t c = coeffs[k];
        r[k] = c >= 0 ? static_cast<uint64_t>(c) % q
                      : q - 1 - (static_cast<uint64_t>(-(c + 1)) % q);
      }
    }
    return p;
  }

  const BasisPtr& basis() const { return basis_; }
  int level() const { return level_; }
  Domain domain() const { return domain_; }
  uint32_t n() const { return basis_->n(); }
  bool empty() const { return basis_ == nullptr; }

  std::vector<uint64_t>& residues(int i) { return residues_[i]; }
  const std::vector<uint64_t>& residues(int i) const { return residues_[i]; }

  void set_domain(Domain d) { domain_ = d; }

  // Drops trailing primes so the poly lives at `target` level. Exact: the
  // represented value is reduced modulo the smaller chain product.
  void truncate_to_level(int target) {
    if (target > level_)
      throw ContractError("RnsPoly: cannot truncate upward");
    residues_.resize(target + 1);
    level_ = target;
  }

  RnsPoly& operator+=(const RnsPoly& o) {
    check_compatible(o);
    for (int i = 0; i <= level_; ++i) {
      uint64_t q = basis_->prime(i).value();
      auto& a = residues_[i];
      const auto& b = o.residues_[i];
      for (uint32_t k = 0; k < n(); ++k) a[k] = add_mod(a[k], b[k], q);
    }
    return *this;
  }

  RnsPoly& operator-=(const RnsPoly& o) {
    check_compatible(o);
    for (int i = 0; i <= level_; ++i) {
      uint64_t q = basis_->prime(i).value();
      auto& a = residues_[i];
      const auto& b = o.residues_[i];
      for (uint32_t k = 0; k < n(); ++k) a[k] = sub_mod(a[k], b[k], q);
    }
    return *this;
  }

  void negate() {
    for (int i = 0; i <= level_; ++i) {
      uint64_t q = basis_->prime(i).value();
      for (auto& x : residues_[i]) x = neg_mod(x, q);
    }
  }

  // Pointwise product; requires both operands in evaluation domain, or both
  // in coefficient domain (in which case the product is computed via NTT and
  // returned in coefficient domain).
  friend RnsPoly poly_mul(const RnsPoly& a, const RnsPoly& b);

  friend bool operator==(const RnsPoly& a, const RnsPoly& b) {
    return a.level_ == b.level_ && a.domain_ == b.domain_ &&
           a.residues_ == b.residues_;
  }

 private:
  void check_compatible(const RnsPoly& o) const {
    if (basis_ != o.basis_)
      throw ContractError("RnsPoly: operands use different bases");
    if (level_ != o.level_)
      throw AlignmentError("RnsPoly: level mismatch");
    if (domain_ != o.domain_)
      throw ContractError("RnsPoly: domain mismatch");
  }

  BasisPtr basis_;
  int level_ = 0;
  Domain domain_ = Domain::Coeff;
  std::vector<std::vector<uint64_t>> residues_;
};

inline RnsPoly ntt(const RnsPoly& poly, NttDirection dir) {
  Domain want = dir == NttDirection::Forward ? Domain::Coeff : Domain::Eval;
  if (poly.domain() != want)
    throw ContractError("ntt: polynomial is not in the transform's source domain");
  RnsPoly out = poly;
  for (int i = 0; i <= out.level(); ++i) {
    const PrimeModulus& p = out.basis()->prime(i);
    if (dir == NttDirection::Forward)
      p.forward_ntt(out.residues(i));
    else
      p.inverse_ntt(out.residues(i));
  }
  out.set_domain(dir == NttDirection::Forward ? Domain::Eval : Domain::Coeff);
  return out;
}

inline RnsPoly to_eval(const RnsPoly& p) {
  return p.domain() == Domain::Eval ? p : ntt(p, NttDirection::Forward);
}

inline RnsPoly to_coeff(const RnsPoly& p) {
  return p.domain() == Domain::Coeff ? p : ntt(p, NttDirection::Inverse);
}

inline RnsPoly operator+(RnsPoly a, const RnsPoly& b) { return a += b; }
inline RnsPoly operator-(RnsPoly a, const RnsPoly& b) { return a -= b; }

inline RnsPoly poly_mul(const RnsPoly& a, const RnsPoly& b) {
  if (a.basis_ != b.basis_)
    throw ContractError("poly_mul: operands use different bases");
  if (a.level_ != b.level_) throw AlignmentError("poly_mul: level mismatch");
  if (a.domain_ != b.domain_)
    throw ContractError("poly_mul: domain mismatch");
  if (a.domain_ == Domain::Eval) {
    RnsPoly out = a;
    for (int i = 0; i <= out.level_; ++i) {
      uint64_t q = out.basis_->prime(i).value();
      auto& r = out.residues_[i];
      const auto& s = b.residues_[i];
      for (uint32_t k = 0; k < out.n(); ++k) r[k] = mul_mod(r[k], s[k], q);
    }
    return out;
  }
  RnsPoly ea = ntt(a, NttDirection::Forward);
  RnsPoly eb = ntt(b, NttDirection::Forward);
  return ntt(poly_mul(ea, eb), NttDirection::Inverse);
}

// round(x / q_last) in the remaining basis; level drops by one. The result
// differs from the exact rational x/q_last by at most 1/2 per coefficient
// (centered-remainder division).
inline RnsPoly drop_last_prime_and_round(const RnsPoly& poly) {
  if (poly.level() < 1)
    throw DepthExhausted("drop_last_prime_and_round: already at level 0");
  if (poly.domain() != Domain::Coeff)
    throw ContractError("drop_last_prime_and_round: requires coefficient domain");
  int last = poly.level();
  const RnsBasis& basis = *poly.basis();
  uint64_t q_last = basis.prime(last).value();
  uint64_t half = q_last >> 1;
  RnsPoly out(poly.basis(), last - 1, Domain::Coeff);
  const auto& r_last = poly.residues(last);
  for (int i = 0; i < last; ++i) {
    uint64_t q = basis.prime(i).value();
    uint64_t q_last_mod = basis.q_mod(last, i);
    uint64_t inv_last = basis.inv_q_mod(last, i);
    auto& dst = out.residues(i);
    const auto& src = poly.residues(i);
    for (uint32_t k = 0; k < poly.n(); ++k) {
      // Centered remainder of x modulo q_last, reduced into this prime.
      uint64_t rem = r_last[k] % q;
      if (r_last[k] > half) rem = sub_mod(rem, q_last_mod, q);
      dst[k] = mul_mod(sub_mod(src[k], rem, q), inv_last, q);
    }
  }
  return out;
}

namespace detail {

// Deterministic Box-Muller draw; avoids the implementation-defined state
// consumption of std::normal_distribution.
inline double standard_normal(std::mt19937_64& rng) {
  double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
}

}  // namespace detail

inline RnsPoly sample(SampleKind kind, std::mt19937_64& rng, BasisPtr basis,
                      int level, Domain domain = Domain::Coeff) {
  uint32_t n = basis->n();
  if (kind == SampleKind::Uniform) {
    RnsPoly p(std::move(basis), level, domain);
    for (int i = 0; i <= level; ++i) {
      uint64_t q = p.basis()->prime(i).value();
      std::uniform_int_distribution<uint64_t> dist(0, q - 1);
      for (auto& x : p.residues(i)) x = dist(rng);
    }
    return p;
  }
  std::vector<int64_t> coeffs(n);
  if (kind == SampleKind::Ternary) {
    std::uniform_int_distribution<int> dist(-1, 1);
    for (auto& c : coeffs) c = dist(rng);
  } else {
    for (auto& c : coeffs)
      c = std::llround(kGaussianStddev * detail::standard_normal(rng));
  }
  RnsPoly p = RnsPoly::from_signed_coeffs(std::move(basis), level, coeffs);
  if (domain == Domain::Eval) p = ntt(p, NttDirection::Forward);
  return p;
}

}  // namespace hegd
