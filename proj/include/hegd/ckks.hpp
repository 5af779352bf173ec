#pragma once

// The CKKS scheme: canonical-embedding encoder, RLWE key generation,
// encryption, and the leveled evaluator (add/sub, plain and cipher
// multiplication, relinearization, rescaling, slot rotation, level
// alignment). Ciphertext polynomials are kept in evaluation (NTT) domain;
// rescaling and key switching hop through coefficient domain internally.
//
// Key switching follows the single-special-prime construction: the part to
// be switched is decomposed into its per-prime RNS digits, each digit is
// multiplied by a key encrypting P*(CRT unit vector)*sk', accumulated over
// the extended basis {q_0..q_l, P}, and scaled back down by P.

#include <atomic>
#include <complex>
#include <cstdint>
#include <iostream>
#include <map>
#include <vector>

#include "hegd/errors.hpp"
#include "hegd/ring.hpp"

namespace hegd {

enum class SecurityPreset : uint8_t { Secure128 = 0, InsecureTest = 1 };

// Maximum total modulus bits (chain + key-switching prime) for 128-bit
// classical security, per the homomorphic encryption standard tables.
inline int max_modulus_bits_128(uint32_t n) {
  switch (n) {
    case 1024: return 27;
    case 2048: return 54;
    case 4096: return 109;
    case 8192: return 218;
    case 16384: return 438;
    case 32768: return 881;
    default: return 0;
  }
}

class CkksParams {
 public:
  static CkksParams make(uint32_t n, int depth, int scale_bits,
                         SecurityPreset preset, bool allow_insecure = false) {
    if (n < 4 || (n & (n - 1)) != 0)
      throw ContractError("CkksParams: n must be a power of two >= 4");
    if (depth < 1) throw ContractError("CkksParams: depth must be >= 1");
    int total_bits = RnsBasis::kFirstPrimeBits + depth * scale_bits +
                     RnsBasis::kSpecialPrimeBits;
    if (preset == SecurityPreset::Secure128) {
      int bound = max_modulus_bits_128(n);
      if (bound == 0 || total_bits > bound)
        throw ContractError(
            "CkksParams: Secure128 requires a ring degree whose 128-bit "
            "modulus budget covers the requested chain");
    } else if (!allow_insecure) {
      throw ContractError(
          "CkksParams: InsecureTest parameters require the explicit "
          "allow_insecure opt-in");
    }
    CkksParams p;
    p.n_ = n;
    p.depth_ = depth;
    p.scale_bits_ = scale_bits;
    p.preset_ = preset;
    p.basis_ = RnsBasis::create(n, depth, scale_bits);
    return p;
  }

  // Full-scale preset: supports the depth-18 circuit.
  static CkksParams secure128() {
    return make(32768, 18, 40, SecurityPreset::Secure128);
  }

  static CkksParams insecure_test(uint32_t n = 4096, int depth = 4,
                                  int scale_bits = 40) {
    return make(n, depth, scale_bits, SecurityPreset::InsecureTest, true);
  }

  uint32_t n() const { return n_; }
  uint32_t slots() const { return n_ / 2; }
  int depth() const { return depth_; }
  int scale_bits() const { return scale_bits_; }
  double scale() const { return std::ldexp(1.0, scale_bits_); }
  SecurityPreset preset() const { return preset_; }
  const BasisPtr& basis() const { return basis_; }

 private:
  uint32_t n_ = 0;
  int depth_ = 0;
  int scale_bits_ = 0;
  SecurityPreset preset_ = SecurityPreset::InsecureTest;
  BasisPtr basis_;
};

struct Plaintext {
  RnsPoly poly;  // coefficient domain
  double scale = 1.0;
  int level() const { return poly.level(); }
};

struct Ciphertext {
  std::vector<RnsPoly> parts;  // evaluation domain; 2, or 3 between mul and relin
  double scale = 1.0;
  int level() const { return parts.at(0).level(); }
  size_t size() const { return parts.size(); }
};

struct SecretKey {
  BasisPtr basis;
  std::vector<int8_t> coeffs;  // ternary
  // Secret in evaluation domain per modulus; indices 0..depth are the chain,
  // index depth+1 the key-switching prime.
  std::vector<std::vector<uint64_t>> eval;
};

struct PublicKey {
  RnsPoly b, a;  // top level, evaluation domain; b = -a*s + e
};

// One digit of a key-switching key: an RLWE pair over the extended basis
// {q_0..q_L, P}, encrypting P * (CRT unit at prime i) * sk'.
struct KskDigit {
  std::vector<std::vector<uint64_t>> b, a;  // [chain_size+1][n], eval domain
};

struct KeySwitchKey {
  BasisPtr basis;
  std::vector<KskDigit> digits;  // one per chain prime
};

using RelinKey = KeySwitchKey;

struct GaloisKey {
  uint64_t galois_elt = 0;
  KeySwitchKey key;
};

struct GaloisKeys {
  std::map<int, GaloisKey> by_step;  // steps ±1, ±2, ±4, ... up to slots/2
  bool has_step(int step) const { return by_step.count(step) != 0; }
};

struct KeySet {
  SecretKey secret;
  PublicKey pub;
  RelinKey relin;
  GaloisKeys galois;
};

namespace detail {

inline uint64_t reduce_signed(int64_t c, uint64_t q) {
  return c >= 0 ? static_cast<uint64_t>(c) % q
                : q - 1 - (static_cast<uint64_t>(-(c + 1)) % q);
}

// Residues of a small signed polynomial under every chain modulus plus the
// key-switching prime, transformed to evaluation domain.
inline std::vector<std::vector<uint64_t>> extend_signed_eval(
    const BasisPtr& basis, const std::vector<int64_t>& coeffs) {
  int m = basis->chain_size() + 1;
  std::vector<std::vector<uint64_t>> out(m);
  for (int i = 0; i < m; ++i) {
    const PrimeModulus& p =
        i < basis->chain_size() ? basis->prime(i) : basis->special();
    out[i].resize(basis->n());
    for (uint32_t k = 0; k < basis->n(); ++k)
      out[i][k] = reduce_signed(coeffs[k], p.value());
    p.forward_ntt(out[i]);
  }
  return out;
}

inline const PrimeModulus& modulus_at(const RnsBasis& basis, int idx) {
  return idx < basis.chain_size() ? basis.prime(idx) : basis.special();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

// Canonical-embedding encoder. Slot j of a plaintext polynomial m is
// m(zeta^{5^j}) for the primitive 2N-th root zeta; the special FFT below
// evaluates that map and its inverse in O(N log N).
class CkksEncoder {
 public:
  explicit CkksEncoder(const CkksParams& params)
      : basis_(params.basis()), n_(params.n()), slots_(params.slots()) {
    uint64_t m = 2ull * n_;
    ksi_.resize(m + 1);
    for (uint64_t i = 0; i <= m; ++i) {
      double angle = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(m);
      ksi_[i] = {std::cos(angle), std::sin(angle)};
    }
    rot_group_.resize(slots_);
    uint64_t power = 1;
    for (uint32_t j = 0; j < slots_; ++j) {
      rot_group_[j] = power;
      power = (power * 5) % m;
    }
  }

  uint32_t slots() const { return slots_; }

  Plaintext encode(const std::vector<std::complex<double>>& values,
                   double scale, int level) const {
    if (values.size() > slots_)
      throw ContractError("encode: more values than slots");
    if (!(scale > 0)) throw ContractError("encode: scale must be positive");
    std::vector<std::complex<double>> buf(slots_, 0.0);
    std::copy(values.begin(), values.end(), buf.begin());
    fft_inverse(buf);
    std::vector<int64_t> coeffs(n_);
    long double s = scale;
    for (uint32_t i = 0; i < slots_; ++i) {
      coeffs[i] = round_scaled(buf[i].real() * s);
      coeffs[i + slots_] = round_scaled(buf[i].imag() * s);
    }
    Plaintext pt;
    pt.poly = RnsPoly::from_signed_coeffs(basis_, level, coeffs);
    pt.scale = scale;
    return pt;
  }

  Plaintext encode(const std::vector<double>& values, double scale,
                   int level) const {
    std::vector<std::complex<double>> cv(values.begin(), values.end());
    return encode(cv, scale, level);
  }

  std::vector<std::complex<double>> decode(const Plaintext& pt) const {
    if (pt.poly.domain() != Domain::Coeff)
      throw ContractError("decode: plaintext must be in coefficient domain");
    std::vector<long double> coeffs = centered_coeffs(pt.poly);
    std::vector<std::complex<double>> buf(slots_);
    long double s = pt.scale;
    for (uint32_t i = 0; i < slots_; ++i)
      buf[i] = {static_cast<double>(coeffs[i] / s),
                static_cast<double>(coeffs[i + slots_] / s)};
    fft_forward(buf);
    return buf;
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  static int64_t round_scaled(long double x) {
    if (!(x < 4.6e18L) || !(x > -4.6e18L))
      throw ContractError("encode: scaled coefficient overflows 64 bits");
    return llroundl(x);
  }

  // Centered integer coefficients, reconstructed from at most two residues
  // (enough headroom for values up to scale^2 at any level >= 1).
  std::vector<long double> centered_coeffs(const RnsPoly& poly) const {
    std::vector<long double> out(n_);
    uint64_t q0 = basis_->prime(0).value();
    if (poly.level() == 0) {
      uint64_t half = q0 / 2;
      for (uint32_t k = 0; k < n_; ++k) {
        uint64_t r = poly.residues(0)[k];
        out[k] = r > half ? -static_cast<long double>(q0 - r)
                          : static_cast<long double>(r);
      }
      return out;
    }
    uint64_t q1 = basis_->prime(1).value();
    uint64_t inv_q0 = inv_mod(q0 % q1, q1);
    __int128 q01 = static_cast<__int128>(q0) * q1;
    __int128 half = q01 / 2;
    for (uint32_t k = 0; k < n_; ++k) {
      uint64_t r0 = poly.residues(0)[k];
      uint64_t r1 = poly.residues(1)[k];
      uint64_t t = mul_mod(sub_mod(r1 % q1, r0 % q1, q1), inv_q0, q1);
      __int128 x = static_cast<__int128>(t) * q0 + r0;
      if (x > half) x -= q01;
      out[k] = static_cast<long double>(x);
    }
    return out;
  }

  static void bit_reverse_permute(std::vector<std::complex<double>>& v) {
    size_t n = v.size();
    size_t j = 0;
    for (size_t i = 1; i < n; ++i) {
      size_t bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j |= bit;
      if (i < j) std::swap(v[i], v[j]);
    }
  }

  // Slot-order FFT over the roots zeta^{5^j} (decode direction).
  void fft_forward(std::vector<std::complex<double>>& vals) const {
    size_t size = vals.size();
    uint64_t m = 2ull * n_;
    bit_reverse_permute(vals);
    for (size_t len = 2; len <= size; len <<= 1) {
      size_t lenh = len >> 1, lenq = len << 2;
      for (size_t i = 0; i < size; i += len) {
        for (size_t j = 0; j < lenh; ++j) {
          uint64_t idx = (rot_group_[j] % lenq) * (m / lenq);
          std::complex<double> u = vals[i + j];
          std::complex<double> v = vals[i + j + lenh] * ksi_[idx];
          vals[i + j] = u + v;
          vals[i + j + lenh] = u - v;
        }
      }
    }
  }

  void fft_inverse(std::vector<std::complex<double>>& vals) const {
    size_t size = vals.size();
    uint64_t m = 2ull * n_;
    for (size_t len = size; len >= 1; len >>= 1) {
      size_t lenh = len >> 1, lenq = len << 2;
      for (size_t i = 0; i < size; i += len) {
        for (size_t j = 0; j < lenh; ++j) {
          uint64_t idx = (lenq - (rot_group_[j] % lenq)) * (m / lenq);
          std::complex<double> u = vals[i + j] + vals[i + j + lenh];
          std::complex<double> v = (vals[i + j] - vals[i + j + lenh]) * ksi_[idx];
          vals[i + j] = u;
          vals[i + j + lenh] = v;
        }
      }
    }
    bit_reverse_permute(vals);
    for (auto& v : vals) v /= static_cast<double>(size);
  }

  BasisPtr basis_;
  uint32_t n_, slots_;
  std::vector<std::complex<double>> ksi_;
  std::vector<uint64_t> rot_group_;
};

// ---------------------------------------------------------------------------
// Key generation
// ---------------------------------------------------------------------------

namespace detail {

// Key-switching key from sk' (given in extended evaluation form) to s.
inline KeySwitchKey generate_ksk(
    const BasisPtr& basis, const SecretKey& sk,
    const std::vector<std::vector<uint64_t>>& target_eval,
    std::mt19937_64& rng) {
  KeySwitchKey ksk;
  ksk.basis = basis;
  int chain = basis->chain_size();
  int mods = chain + 1;
  uint32_t n = basis->n();
  ksk.digits.resize(chain);
  for (int i = 0; i < chain; ++i) {
    KskDigit& d = ksk.digits[i];
    d.b.resize(mods);
    d.a.resize(mods);
    // Fresh noise, one integer polynomial consistently reduced everywhere.
    std::vector<int64_t> e(n);
    for (auto& c : e)
      c = std::llround(kGaussianStddev * detail::standard_normal(rng));
    auto e_ext = extend_signed_eval(basis, e);
    for (int m = 0; m < mods; ++m) {
      const PrimeModulus& pm = modulus_at(*basis, m);
      uint64_t q = pm.value();
      std::uniform_int_distribution<uint64_t> dist(0, q - 1);
      d.a[m].resize(n);
      for (auto& x : d.a[m]) x = dist(rng);
      d.b[m].resize(n);
      for (uint32_t k = 0; k < n; ++k) {
        uint64_t as = mul_mod(d.a[m][k], sk.eval[m][k], q);
        d.b[m][k] = add_mod(neg_mod(as, q), e_ext[m][k], q);
      }
    }
    // Add P * sk' at chain prime i only: the CRT unit vector makes the digit
    // reassembly work at every level.
    uint64_t qi = basis->prime(i).value();
    uint64_t p_mod = basis->special_mod(i);
    for (uint32_t k = 0; k < n; ++k) {
      d.b[i][k] = add_mod(d.b[i][k], mul_mod(p_mod, target_eval[i][k], qi), qi);
    }
  }
  return ksk;
}

inline std::vector<int64_t> automorph_signed(const std::vector<int8_t>& coeffs,
                                             uint64_t galois_elt, uint32_t n) {
  std::vector<int64_t> out(n, 0);
  uint64_t mask = 2ull * n - 1;
  for (uint32_t k = 0; k < n; ++k) {
    uint64_t idx = (static_cast<uint64_t>(k) * galois_elt) & mask;
    if (idx < n)
      out[idx] = coeffs[k];
    else
      out[idx - n] = -static_cast<int64_t>(coeffs[k]);
  }
  return out;
}

inline uint64_t galois_elt_for_step(int step, uint32_t n) {
  uint32_t slots = n / 2;
  uint64_t m = 2ull * n;
  uint64_t exp = step >= 0 ? static_cast<uint64_t>(step)
                           : slots - static_cast<uint64_t>(-step);
  uint64_t g = 1;
  for (uint64_t t = 0; t < exp; ++t) g = (g * 5) % m;
  return g;
}

}  // namespace detail

inline SecretKey make_secret_key(const CkksParams& params,
                                 std::mt19937_64& rng) {
  SecretKey sk;
  sk.basis = params.basis();
  sk.coeffs.resize(params.n());
  std::uniform_int_distribution<int> tern(-1, 1);
  for (auto& c : sk.coeffs) c = static_cast<int8_t>(tern(rng));
  std::vector<int64_t> s64(sk.coeffs.begin(), sk.coeffs.end());
  sk.eval = detail::extend_signed_eval(params.basis(), s64);
  return sk;
}

// Public key (b, a) with b = -a*s + e over the full chain.
inline PublicKey make_public_key(const CkksParams& params, const SecretKey& sk,
                                 std::mt19937_64& rng) {
  const BasisPtr& basis = params.basis();
  int top = params.depth();
  RnsPoly a = sample(SampleKind::Uniform, rng, basis, top, Domain::Eval);
  RnsPoly e = to_eval(sample(SampleKind::Gaussian, rng, basis, top));
  RnsPoly s_chain(basis, top, Domain::Eval);
  for (int i = 0; i <= top; ++i) s_chain.residues(i) = sk.eval[i];
  RnsPoly b = poly_mul(a, s_chain);
  b.negate();
  b += e;
  return PublicKey{std::move(b), std::move(a)};
}

// Relinearization key: switches s^2 back to s.
inline RelinKey make_relin_key(const CkksParams& params, const SecretKey& sk,
                               std::mt19937_64& rng) {
  const BasisPtr& basis = params.basis();
  uint32_t n = params.n();
  std::vector<std::vector<uint64_t>> s_sq(basis->chain_size() + 1);
  for (size_t m = 0; m < s_sq.size(); ++m) {
    const PrimeModulus& pm = detail::modulus_at(*basis, static_cast<int>(m));
    s_sq[m].resize(n);
    for (uint32_t k = 0; k < n; ++k)
      s_sq[m][k] = mul_mod(sk.eval[m][k], sk.eval[m][k], pm.value());
  }
  return detail::generate_ksk(basis, sk, s_sq, rng);
}

inline GaloisKey make_galois_key(const CkksParams& params, const SecretKey& sk,
                                 int step, std::mt19937_64& rng) {
  uint32_t n = params.n();
  GaloisKey gk;
  gk.galois_elt = detail::galois_elt_for_step(step, n);
  auto tau_s = detail::automorph_signed(sk.coeffs, gk.galois_elt, n);
  gk.key = detail::generate_ksk(params.basis(), sk,
                                detail::extend_signed_eval(params.basis(), tau_s),
                                rng);
  return gk;
}

// The rotation steps every key set carries: ±1, ±2, ..., ±slots/2.
inline std::vector<int> default_galois_steps(const CkksParams& params) {
  std::vector<int> steps;
  for (uint32_t step = 1; step <= params.slots() / 2; step <<= 1) {
    steps.push_back(static_cast<int>(step));
    steps.push_back(-static_cast<int>(step));
  }
  return steps;
}

inline KeySet keygen(const CkksParams& params, std::mt19937_64& rng) {
  KeySet keys;
  keys.secret = make_secret_key(params, rng);
  keys.pub = make_public_key(params, keys.secret, rng);
  keys.relin = make_relin_key(params, keys.secret, rng);
  for (int step : default_galois_steps(params))
    keys.galois.by_step.emplace(step, make_galois_key(params, keys.secret, step, rng));
  return keys;
}

// ---------------------------------------------------------------------------
// Encryption / decryption
// ---------------------------------------------------------------------------

inline Ciphertext encrypt(const Plaintext& pt, const PublicKey& pk,
                          std::mt19937_64& rng) {
  const BasisPtr& basis = pt.poly.basis();
  int level = pt.level();
  if (level > pk.b.level())
    throw ContractError("encrypt: plaintext level above the key's chain");
  RnsPoly b = pk.b;
  RnsPoly a = pk.a;
  b.truncate_to_level(level);
  a.truncate_to_level(level);
  RnsPoly u = to_eval(sample(SampleKind::Ternary, rng, basis, level));
  RnsPoly e0 = to_eval(sample(SampleKind::Gaussian, rng, basis, level));
  RnsPoly e1 = to_eval(sample(SampleKind::Gaussian, rng, basis, level));
  RnsPoly m = to_eval(pt.poly);
  Ciphertext ct;
  ct.parts.push_back(poly_mul(b, u) + e0 + m);
  ct.parts.push_back(poly_mul(a, u) + e1);
  ct.scale = pt.scale;
  return ct;
}

inline Plaintext decrypt(const Ciphertext& ct, const SecretKey& sk) {
  const BasisPtr& basis = ct.parts[0].basis();
  int level = ct.level();
  RnsPoly s(basis, level, Domain::Eval);
  for (int i = 0; i <= level; ++i) s.residues(i) = sk.eval[i];
  RnsPoly phase = ct.parts[0] + poly_mul(ct.parts[1], s);
  if (ct.size() == 3) phase += poly_mul(poly_mul(ct.parts[2], s), s);
  Plaintext pt;
  pt.poly = to_coeff(phase);
  pt.scale = ct.scale;
  return pt;
}

// ---------------------------------------------------------------------------
// Evaluator
// ---------------------------------------------------------------------------

struct OpCounter {
  std::atomic<long> rotations{0};
  std::atomic<long> key_switches{0};
  std::atomic<long> relinearizations{0};
  std::atomic<long> rescales{0};
  std::atomic<long> cipher_mults{0};
  std::atomic<long> plain_mults{0};
};

class Evaluator {
 public:
  explicit Evaluator(OpCounter* counter = nullptr) : counter_(counter) {}

  // Relative scale mismatch tolerated by additions.
  static constexpr double kScaleRelTol = 0x1.0p-10;

  Ciphertext add(const Ciphertext& x, const Ciphertext& y) const {
    return add_sub(x, y, /*subtract=*/false);
  }

  Ciphertext sub(const Ciphertext& x, const Ciphertext& y) const {
    return add_sub(x, y, /*subtract=*/true);
  }

  Ciphertext negate(const Ciphertext& x) const {
    Ciphertext out = x;
    for (auto& p : out.parts) p.negate();
    return out;
  }

  Ciphertext add_plain(const Ciphertext& x, const Plaintext& pt) const {
    check_plain_operand(x, pt);
    check_scales(x.scale, pt.scale);
    Ciphertext out = x;
    out.parts[0] += to_eval(pt.poly);
    return out;
  }

  Ciphertext sub_plain(const Ciphertext& x, const Plaintext& pt) const {
    check_plain_operand(x, pt);
    check_scales(x.scale, pt.scale);
    Ciphertext out = x;
    out.parts[0] -= to_eval(pt.poly);
    return out;
  }

  // ⊙: plaintext-ciphertext product. Scales multiply; the caller rescales.
  Ciphertext mul_plain(const Ciphertext& x, const Plaintext& pt) const {
    check_plain_operand(x, pt);
    RnsPoly m = to_eval(pt.poly);
    Ciphertext out = x;
    for (auto& p : out.parts) p = poly_mul(p, m);
    out.scale = x.scale * pt.scale;
    if (counter_) counter_->plain_mults++;
    return out;
  }

  // •: ciphertext-ciphertext product, yielding a 3-part ciphertext.
  Ciphertext mul(const Ciphertext& x, const Ciphertext& y) const {
    if (x.size() != 2 || y.size() != 2)
      throw ContractError("mul: operands must be 2-part (relinearize first)");
    if (x.level() != y.level())
      throw AlignmentError("mul: level mismatch (mod-switch first)");
    Ciphertext out;
    out.parts.resize(3);
    out.parts[0] = poly_mul(x.parts[0], y.parts[0]);
    out.parts[1] = poly_mul(x.parts[0], y.parts[1]) +
                   poly_mul(x.parts[1], y.parts[0]);
    out.parts[2] = poly_mul(x.parts[1], y.parts[1]);
    out.scale = x.scale * y.scale;
    if (counter_) counter_->cipher_mults++;
    return out;
  }

  Ciphertext relinearize(const Ciphertext& x, const RelinKey& rlk) const {
    if (x.size() == 2) {
      std::clog << "hegd: relinearize on a 2-part ciphertext is a no-op\n";
      return x;
    }
    auto [d0, d1] = key_switch(to_coeff(x.parts[2]), rlk);
    Ciphertext out;
    out.parts.push_back(x.parts[0] + d0);
    out.parts.push_back(x.parts[1] + d1);
    out.scale = x.scale;
    if (counter_) counter_->relinearizations++;
    return out;
  }

  // Divides by the last chain prime and drops it; one level is consumed.
  Ciphertext rescale(const Ciphertext& x) const {
    if (x.level() < 1)
      throw DepthExhausted("rescale: no level left in the modulus chain");
    uint64_t dropped =
        x.parts[0].basis()->prime(x.level()).value();
    Ciphertext out;
    out.parts.reserve(x.size());
    for (const auto& p : x.parts)
      out.parts.push_back(
          to_eval(drop_last_prime_and_round(to_coeff(p))));
    out.scale = x.scale / static_cast<double>(dropped);
    if (counter_) counter_->rescales++;
    return out;
  }

  // Exact level alignment: trailing primes are dropped, value and scale are
  // unchanged.
  Ciphertext mod_switch_to(const Ciphertext& x, int level) const {
    if (level > x.level())
      throw ContractError("mod_switch_to: target level above current level");
    Ciphertext out = x;
    for (auto& p : out.parts) p.truncate_to_level(level);
    return out;
  }

  // Cyclic left shift of the slot vector by `steps` (negative: right shift).
  // Arbitrary steps are composed from the stored power-of-two keys.
  Ciphertext rotate(const Ciphertext& x, int steps, const GaloisKeys& gk) const {
    uint32_t slots = x.parts[0].n() / 2;
    if (static_cast<uint32_t>(steps < 0 ? -steps : steps) >= slots)
      throw ContractError("rotate: |steps| must be below the slot count");
    if (steps == 0) return x;
    if (counter_) counter_->rotations++;
    Ciphertext cur = x;
    int sign = steps < 0 ? -1 : 1;
    uint32_t magnitude = static_cast<uint32_t>(steps < 0 ? -steps : steps);
    for (uint32_t bit = 1; bit <= magnitude; bit <<= 1) {
      if ((magnitude & bit) == 0) continue;
      auto it = gk.by_step.find(sign * static_cast<int>(bit));
      if (it == gk.by_step.end())
        throw ContractError("rotate: missing Galois key for a power-of-two step");
      cur = apply_galois(cur, it->second);
    }
    return cur;
  }

 private:
  Ciphertext add_sub(const Ciphertext& x, const Ciphertext& y, bool subtract) const {
    if (x.level() != y.level())
      throw AlignmentError("add: level mismatch (mod-switch first)");
    check_scales(x.scale, y.scale);
    const Ciphertext& big = x.size() >= y.size() ? x : y;
    Ciphertext out = big;
    if (subtract && (&big == &y)) {
      // result = x - y with y the wider one: negate then add x.
      for (auto& p : out.parts) p.negate();
      for (size_t i = 0; i < x.size(); ++i) out.parts[i] += x.parts[i];
    } else {
      const Ciphertext& small = x.size() >= y.size() ? y : x;
      for (size_t i = 0; i < small.size(); ++i) {
        if (subtract)
          out.parts[i] -= small.parts[i];
        else
          out.parts[i] += small.parts[i];
      }
    }
    out.scale = x.scale;
    return out;
  }

  void check_scales(double s1, double s2) const {
    double m = std::max(s1, s2);
    if (std::abs(s1 - s2) > m * kScaleRelTol)
      throw ScaleError("operand scales differ beyond the 2^-10 tolerance");
  }

  void check_plain_operand(const Ciphertext& x, const Plaintext& pt) const {
    if (x.level() != pt.level())
      throw AlignmentError("plaintext operand level mismatch");
  }

  Ciphertext apply_galois(const Ciphertext& x, const GaloisKey& gk) const {
    if (x.size() != 2)
      throw ContractError("rotate: relinearize before rotating");
    RnsPoly t0 = automorph(to_coeff(x.parts[0]), gk.galois_elt);
    RnsPoly t1 = automorph(to_coeff(x.parts[1]), gk.galois_elt);
    auto [d0, d1] = key_switch(t1, gk.key);
    Ciphertext out;
    out.parts.push_back(to_eval(t0) + d0);
    out.parts.push_back(std::move(d1));
    out.scale = x.scale;
    return out;
  }

  static RnsPoly automorph(const RnsPoly& p, uint64_t galois_elt) {
    RnsPoly out(p.basis(), p.level(), Domain::Coeff);
    uint32_t n = p.n();
    uint64_t mask = 2ull * n - 1;
    for (int i = 0; i <= p.level(); ++i) {
      uint64_t q = p.basis()->prime(i).value();
      const auto& src = p.residues(i);
      auto& dst = out.residues(i);
      for (uint32_t k = 0; k < n; ++k) {
        uint64_t idx = (static_cast<uint64_t>(k) * galois_elt) & mask;
        if (idx < n)
          dst[idx] = src[k];
        else
          dst[idx - n] = neg_mod(src[k], q);
      }
    }
    return out;
  }

  // Core key switch: input is a coefficient-domain polynomial at some level;
  // output is the evaluation-domain RLWE pair (d0, d1) at the same level with
  // d0 + d1*s ≈ x*sk'.
  std::pair<RnsPoly, RnsPoly> key_switch(const RnsPoly& x,
                                         const KeySwitchKey& ksk) const {
    if (x.domain() != Domain::Coeff)
      throw ContractError("key_switch: input must be in coefficient domain");
    const BasisPtr& basis = x.basis();
    const RnsBasis& b = *basis;
    int level = x.level();
    int mods = level + 2;  // active chain primes plus the special prime
    int special_idx = level + 1;
    uint32_t n = x.n();
    if (counter_) counter_->key_switches++;

    std::vector<std::vector<uint64_t>> acc0(mods), acc1(mods);
    for (int m = 0; m < mods; ++m) {
      acc0[m].assign(n, 0);
      acc1[m].assign(n, 0);
    }
    std::vector<uint64_t> digit(n);
    for (int i = 0; i <= level; ++i) {
      const KskDigit& key = ksk.digits[i];
      for (int m = 0; m < mods; ++m) {
        bool is_special = (m == special_idx);
        const PrimeModulus& pm =
            is_special ? b.special() : b.prime(m);
        uint64_t q = pm.value();
        const auto& src = x.residues(i);
        if (m == i) {
          digit = src;
        } else {
          for (uint32_t k = 0; k < n; ++k) digit[k] = src[k] % q;
        }
        pm.forward_ntt(digit);
        // Key components for the special prime live at the end of the arrays.
        int key_idx = is_special ? b.chain_size() : m;
        const auto& kb = key.b[key_idx];
        const auto& ka = key.a[key_idx];
        auto& a0 = acc0[m];
        auto& a1 = acc1[m];
        for (uint32_t k = 0; k < n; ++k) {
          a0[k] = add_mod(a0[k], mul_mod(digit[k], kb[k], q), q);
          a1[k] = add_mod(a1[k], mul_mod(digit[k], ka[k], q), q);
        }
      }
    }

    // Scale down by the special prime with centered rounding.
    uint64_t p_val = b.special().value();
    uint64_t p_half = p_val >> 1;
    auto scale_down = [&](std::vector<std::vector<uint64_t>>& acc) {
      for (int m = 0; m < mods; ++m) {
        const PrimeModulus& pm =
            m == special_idx ? b.special() : b.prime(m);
        pm.inverse_ntt(acc[m]);
      }
      RnsPoly out(basis, level, Domain::Coeff);
      const auto& r_sp = acc[special_idx];
      for (int i = 0; i <= level; ++i) {
        uint64_t q = b.prime(i).value();
        uint64_t p_mod = b.special_mod(i);
        uint64_t p_inv = b.inv_special_mod(i);
        auto& dst = out.residues(i);
        for (uint32_t k = 0; k < n; ++k) {
          uint64_t rem = r_sp[k] % q;
          if (r_sp[k] > p_half) rem = sub_mod(rem, p_mod, q);
          dst[k] = mul_mod(sub_mod(acc[i][k] % q, rem, q), p_inv, q);
        }
      }
      return to_eval(out);
    };
    RnsPoly d0 = scale_down(acc0);
    RnsPoly d1 = scale_down(acc1);
    return {std::move(d0), std::move(d1)};
  }

  OpCounter* counter_;
};

}  // namespace hegd
