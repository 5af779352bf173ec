#pragma once

// Versioned little-endian binary serialization for parameters, keys,
// plaintexts and ciphertexts. Every object starts with the magic bytes
// "CDHE", a u16 format version and a u8 object tag; every object that needs
// a basis embeds the (n, depth, scale_bits) fingerprint so loads against the
// wrong parameter set fail loudly. The format is this library's own and is
// deliberately not compatible with any other HE implementation.
//
// Parameter presets are also loadable from JSON documents of the form
// {"n": ..., "depth": ..., "scale_bits": ..., "security_preset": ...}.

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "hegd/ckks.hpp"

namespace hegd {

inline constexpr char kMagic[4] = {'C', 'D', 'H', 'E'};
inline constexpr uint16_t kFormatVersion = 1;

enum class ObjectTag : uint8_t {
  Params = 1,
  Plaintext = 2,
  Ciphertext = 3,
  SecretKey = 4,
  PublicKey = 5,
  RelinKey = 6,
  GaloisKeys = 7,
};

namespace io {

inline void put_bytes(std::ostream& os, const void* p, size_t len) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(len));
  if (!os) throw IoError("serialize: write failed");
}

inline void get_bytes(std::istream& is, void* p, size_t len) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(len));
  if (!is || is.gcount() != static_cast<std::streamsize>(len))
    throw IoError("deserialize: unexpected end of stream");
}

template <typename T>
void put_uint(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  put_bytes(os, buf, sizeof(T));
}

template <typename T>
T get_uint(std::istream& is) {
  unsigned char buf[sizeof(T)];
  get_bytes(is, buf, sizeof(T));
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

inline void put_double(std::ostream& os, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_uint<uint64_t>(os, bits);
}

inline double get_double(std::istream& is) {
  uint64_t bits = get_uint<uint64_t>(is);
  double d;
  std::memcpy(&d, &bits, sizeof(d));
  return d;
}

inline void put_u64_vec(std::ostream& os, const std::vector<uint64_t>& v) {
  put_uint<uint64_t>(os, v.size());
  for (uint64_t x : v) put_uint<uint64_t>(os, x);
}

inline std::vector<uint64_t> get_u64_vec(std::istream& is) {
  uint64_t len = get_uint<uint64_t>(is);
  if (len > (1ull << 32)) throw IoError("deserialize: implausible vector length");
  std::vector<uint64_t> v(len);
  for (auto& x : v) x = get_uint<uint64_t>(is);
  return v;
}

inline void put_header(std::ostream& os, ObjectTag tag) {
  put_bytes(os, kMagic, 4);
  put_uint<uint16_t>(os, kFormatVersion);
  put_uint<uint8_t>(os, static_cast<uint8_t>(tag));
}

inline void expect_header(std::istream& is, ObjectTag tag) {
  char magic[4];
  get_bytes(is, magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("deserialize: bad magic bytes");
  uint16_t version = get_uint<uint16_t>(is);
  if (version != kFormatVersion)
    throw IoError("deserialize: unsupported format version");
  uint8_t t = get_uint<uint8_t>(is);
  if (t != static_cast<uint8_t>(tag))
    throw IoError("deserialize: unexpected object tag");
}

inline void put_fingerprint(std::ostream& os, const CkksParams& params) {
  put_uint<uint32_t>(os, params.n());
  put_uint<uint32_t>(os, static_cast<uint32_t>(params.depth()));
  put_uint<uint32_t>(os, static_cast<uint32_t>(params.scale_bits()));
}

inline void expect_fingerprint(std::istream& is, const CkksParams& params) {
  uint32_t n = get_uint<uint32_t>(is);
  uint32_t depth = get_uint<uint32_t>(is);
  uint32_t sb = get_uint<uint32_t>(is);
  if (n != params.n() || depth != static_cast<uint32_t>(params.depth()) ||
      sb != static_cast<uint32_t>(params.scale_bits()))
    throw IoError("deserialize: object was produced under different parameters");
}

inline void put_poly(std::ostream& os, const RnsPoly& p) {
  put_uint<uint32_t>(os, static_cast<uint32_t>(p.level()));
  put_uint<uint8_t>(os, static_cast<uint8_t>(p.domain()));
  for (int i = 0; i <= p.level(); ++i) put_u64_vec(os, p.residues(i));
}

inline RnsPoly get_poly(std::istream& is, const BasisPtr& basis) {
  uint32_t level = get_uint<uint32_t>(is);
  auto domain = static_cast<Domain>(get_uint<uint8_t>(is));
  if (level > static_cast<uint32_t>(basis->depth()))
    throw IoError("deserialize: polynomial level outside basis chain");
  RnsPoly p(basis, static_cast<int>(level), domain);
  for (uint32_t i = 0; i <= level; ++i) {
    auto v = get_u64_vec(is);
    if (v.size() != basis->n())
      throw IoError("deserialize: residue vector length mismatch");
    p.residues(static_cast<int>(i)) = std::move(v);
  }
  return p;
}

}  // namespace io

// --- parameters -------------------------------------------------------------

inline void save_params(const CkksParams& params, std::ostream& os) {
  io::put_header(os, ObjectTag::Params);
  io::put_fingerprint(os, params);
  io::put_uint<uint8_t>(os, static_cast<uint8_t>(params.preset()));
}

inline CkksParams load_params(std::istream& is) {
  io::expect_header(is, ObjectTag::Params);
  uint32_t n = io::get_uint<uint32_t>(is);
  uint32_t depth = io::get_uint<uint32_t>(is);
  uint32_t sb = io::get_uint<uint32_t>(is);
  auto preset = static_cast<SecurityPreset>(io::get_uint<uint8_t>(is));
  return CkksParams::make(n, static_cast<int>(depth), static_cast<int>(sb),
                          preset, /*allow_insecure=*/true);
}

inline CkksParams params_from_json(const nlohmann::json& j) {
  std::string preset_name = j.at("security_preset").get<std::string>();
  SecurityPreset preset;
  if (preset_name == "secure128") {
    preset = SecurityPreset::Secure128;
  } else if (preset_name == "insecure-test") {
    preset = SecurityPreset::InsecureTest;
  } else {
    throw ContractError("params_from_json: unknown security_preset");
  }
  bool allow_insecure = j.value("allow_insecure", false);
  return CkksParams::make(j.at("n").get<uint32_t>(), j.at("depth").get<int>(),
                          j.at("scale_bits").get<int>(), preset, allow_insecure);
}

inline nlohmann::json params_to_json(const CkksParams& params) {
  nlohmann::json j;
  j["n"] = params.n();
  j["depth"] = params.depth();
  j["scale_bits"] = params.scale_bits();
  j["security_preset"] = params.preset() == SecurityPreset::Secure128
                             ? "secure128"
                             : "insecure-test";
  if (params.preset() == SecurityPreset::InsecureTest) j["allow_insecure"] = true;
  return j;
}

// --- plaintext / ciphertext --------------------------------------------------

inline void save_plaintext(const Plaintext& pt, const CkksParams& params,
                           std::ostream& os) {
  io::put_header(os, ObjectTag::Plaintext);
  io::put_fingerprint(os, params);
  io::put_double(os, pt.scale);
  io::put_poly(os, pt.poly);
}

inline Plaintext load_plaintext(std::istream& is, const CkksParams& params) {
  io::expect_header(is, ObjectTag::Plaintext);
  io::expect_fingerprint(is, params);
  Plaintext pt;
  pt.scale = io::get_double(is);
  pt.poly = io::get_poly(is, params.basis());
  return pt;
}

inline void save_ciphertext(const Ciphertext& ct, const CkksParams& params,
                            std::ostream& os) {
  io::put_header(os, ObjectTag::Ciphertext);
  io::put_fingerprint(os, params);
  io::put_double(os, ct.scale);
  io::put_uint<uint8_t>(os, static_cast<uint8_t>(ct.parts.size()));
  for (const auto& p : ct.parts) io::put_poly(os, p);
}

inline Ciphertext load_ciphertext(std::istream& is, const CkksParams& params) {
  io::expect_header(is, ObjectTag::Ciphertext);
  io::expect_fingerprint(is, params);
  Ciphertext ct;
  ct.scale = io::get_double(is);
  uint8_t parts = io::get_uint<uint8_t>(is);
  if (parts < 2 || parts > 3) throw IoError("deserialize: bad part count");
  for (int i = 0; i < parts; ++i)
    ct.parts.push_back(io::get_poly(is, params.basis()));
  return ct;
}

// --- keys ---------------------------------------------------------------------

inline void save_secret_key(const SecretKey& sk, const CkksParams& params,
                            std::ostream& os) {
  io::put_header(os, ObjectTag::SecretKey);
  io::put_fingerprint(os, params);
  io::put_uint<uint64_t>(os, sk.coeffs.size());
  io::put_bytes(os, sk.coeffs.data(), sk.coeffs.size());
}

inline SecretKey load_secret_key(std::istream& is, const CkksParams& params) {
  io::expect_header(is, ObjectTag::SecretKey);
  io::expect_fingerprint(is, params);
  uint64_t len = io::get_uint<uint64_t>(is);
  if (len != params.n()) throw IoError("deserialize: secret key length mismatch");
  SecretKey sk;
  sk.basis = params.basis();
  sk.coeffs.resize(len);
  io::get_bytes(is, sk.coeffs.data(), len);
  std::vector<int64_t> s64(sk.coeffs.begin(), sk.coeffs.end());
  sk.eval = detail::extend_signed_eval(params.basis(), s64);
  return sk;
}

inline void save_public_key(const PublicKey& pk, const CkksParams& params,
                            std::ostream& os) {
  io::put_header(os, ObjectTag::PublicKey);
  io::put_fingerprint(os, params);
  io::put_poly(os, pk.b);
  io::put_poly(os, pk.a);
}

inline PublicKey load_public_key(std::istream& is, const CkksParams& params) {
  io::expect_header(is, ObjectTag::PublicKey);
  io::expect_fingerprint(is, params);
  PublicKey pk;
  pk.b = io::get_poly(is, params.basis());
  pk.a = io::get_poly(is, params.basis());
  return pk;
}

namespace io {

inline void put_ksk(std::ostream& os, const KeySwitchKey& ksk) {
  put_uint<uint32_t>(os, static_cast<uint32_t>(ksk.digits.size()));
  for (const auto& d : ksk.digits) {
    put_uint<uint32_t>(os, static_cast<uint32_t>(d.b.size()));
    for (const auto& v : d.b) put_u64_vec(os, v);
    for (const auto& v : d.a) put_u64_vec(os, v);
  }
}

inline KeySwitchKey get_ksk(std::istream& is, const CkksParams& params) {
  KeySwitchKey ksk;
  ksk.basis = params.basis();
  uint32_t ndigits = get_uint<uint32_t>(is);
  if (ndigits != static_cast<uint32_t>(params.basis()->chain_size()))
    throw IoError("deserialize: key-switch digit count mismatch");
  ksk.digits.resize(ndigits);
  for (auto& d : ksk.digits) {
    uint32_t mods = get_uint<uint32_t>(is);
    if (mods != static_cast<uint32_t>(params.basis()->chain_size() + 1))
      throw IoError("deserialize: key-switch modulus count mismatch");
    d.b.resize(mods);
    d.a.resize(mods);
    for (auto& v : d.b) v = get_u64_vec(is);
    for (auto& v : d.a) v = get_u64_vec(is);
  }
  return ksk;
}

}  // namespace io

inline void save_relin_key(const RelinKey& rlk, const CkksParams& params,
                           std::ostream& os) {
  io::put_header(os, ObjectTag::RelinKey);
  io::put_fingerprint(os, params);
  io::put_ksk(os, rlk);
}

inline RelinKey load_relin_key(std::istream& is, const CkksParams& params) {
  io::expect_header(is, ObjectTag::RelinKey);
  io::expect_fingerprint(is, params);
  return io::get_ksk(is, params);
}

inline void save_galois_keys(const GaloisKeys& gk, const CkksParams& params,
                             std::ostream& os) {
  io::put_header(os, ObjectTag::GaloisKeys);
  io::put_fingerprint(os, params);
  io::put_uint<uint32_t>(os, static_cast<uint32_t>(gk.by_step.size()));
  for (const auto& [step, key] : gk.by_step) {
    io::put_uint<uint64_t>(os, static_cast<uint64_t>(static_cast<int64_t>(step)));
    io::put_uint<uint64_t>(os, key.galois_elt);
    io::put_ksk(os, key.key);
  }
}

inline GaloisKeys load_galois_keys(std::istream& is, const CkksParams& params) {
  io::expect_header(is, ObjectTag::GaloisKeys);
  io::expect_fingerprint(is, params);
  GaloisKeys gk;
  uint32_t count = io::get_uint<uint32_t>(is);
  for (uint32_t i = 0; i < count; ++i) {
    int step = static_cast<int>(static_cast<int64_t>(io::get_uint<uint64_t>(is)));
    GaloisKey key;
    key.galois_elt = io::get_uint<uint64_t>(is);
    key.key = io::get_ksk(is, params);
    gk.by_step.emplace(step, std::move(key));
  }
  return gk;
}

// --- file helpers --------------------------------------------------------------

template <typename SaveFn>
void save_to_file(const std::string& path, SaveFn&& fn) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  fn(os);
  os.flush();
  if (!os) throw IoError("write failed: " + path);
}

template <typename LoadFn>
auto load_from_file(const std::string& path, LoadFn&& fn) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  return fn(is);
}

}  // namespace hegd
