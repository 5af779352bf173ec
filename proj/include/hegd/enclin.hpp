#pragma once

// Encrypted linear algebra over CKKS slot vectors: generalized-diagonal
// plaintext maps, the Halevi-Shoup LinTrans kernel, the V_k/W_k permutation
// generators, and the depth-2 encrypted matrix product
//
//   a*(A*B) = sum_k (V_k(a) ⊙ a_enc) • (W_k ⊙ b_enc)
//
// over row-major matrix encodings. Matrices occupy the first d^2 slots;
// vectors are stored column-replicated (slot d*i+j = v[i]) so that
// matrix-vector multiplication is the same pipeline and closed under it.

#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "hegd/ckks.hpp"

namespace hegd {

// A dim x dim real matrix stored by its nonzero generalized diagonals
// u_l[i] = U[i][(i+l) mod dim], so that U*x = sum_l u_l ⊙ rot(x, l).
class PlainLinearMap {
 public:
  explicit PlainLinearMap(size_t dim) : dim_(dim) {
    if (dim == 0) throw ContractError("PlainLinearMap: dim must be positive");
  }

  static PlainLinearMap from_dense(const std::vector<double>& dense,
                                   size_t dim) {
    if (dense.size() != dim * dim)
      throw ContractError("PlainLinearMap: dense size must be dim^2");
    PlainLinearMap map(dim);
    for (size_t r = 0; r < dim; ++r)
      for (size_t c = 0; c < dim; ++c) map.add_entry(r, c, dense[r * dim + c]);
    return map;
  }

  size_t dim() const { return dim_; }

  void add_entry(size_t row, size_t col, double value) {
    if (row >= dim_ || col >= dim_)
      throw ContractError("PlainLinearMap: entry outside the matrix");
    if (value == 0.0) return;
    size_t offset = (col + dim_ - row) % dim_;
    auto it = diagonals_.find(offset);
    if (it == diagonals_.end())
      it = diagonals_.emplace(offset, std::vector<double>(dim_, 0.0)).first;
    it->second[row] = value;
  }

  const std::map<size_t, std::vector<double>>& diagonals() const {
    return diagonals_;
  }

  std::vector<double> to_dense() const {
    std::vector<double> dense(dim_ * dim_, 0.0);
    for (const auto& [l, u] : diagonals_)
      for (size_t i = 0; i < dim_; ++i)
        dense[i * dim_ + (i + l) % dim_] = u[i];
    return dense;
  }

  // Plaintext application of the Halevi-Shoup identity; the oracle for the
  // encrypted kernel and the workhorse of the pure-math decomposition check.
  std::vector<double> apply(const std::vector<double>& x) const {
    if (x.size() != dim_)
      throw ContractError("PlainLinearMap: vector length must equal dim");
    std::vector<double> out(dim_, 0.0);
    for (const auto& [l, u] : diagonals_)
      for (size_t i = 0; i < dim_; ++i) out[i] += u[i] * x[(i + l) % dim_];
    return out;
  }

  PlainLinearMap scaled(double a) const {
    PlainLinearMap out(dim_);
    if (a == 0.0) return out;
    out.diagonals_ = diagonals_;
    for (auto& [l, u] : out.diagonals_)
      for (double& v : u) v *= a;
    return out;
  }

  // offset -> diagonal, for test fixtures and debugging.
  std::string debug_dump() const {
    std::ostringstream os;
    for (const auto& [l, u] : diagonals_) {
      os << l << ":";
      for (double v : u) os << " " << v;
      os << "\n";
    }
    return os.str();
  }

 private:
  size_t dim_;
  std::map<size_t, std::vector<double>> diagonals_;
};

// V_k(d*i+j, l) = a when l = d*i + [i+j+k]_d: row i of the row-encoded A is
// cyclically shifted by i+k, scaled by a (the solver folds its step size in
// here, which is what keeps the step multiplication depth-free).
inline PlainLinearMap make_Vk(size_t d, size_t k, double a) {
  if (k >= d) throw ContractError("make_Vk: k out of range");
  PlainLinearMap map(d * d);
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j)
      map.add_entry(d * i + j, d * i + (i + j + k) % d, a);
  return map;
}

// W_k(d*i+j, l) = 1 when l = d*[i+j+k]_d + j.
inline PlainLinearMap make_Wk(size_t d, size_t k) {
  if (k >= d) throw ContractError("make_Wk: k out of range");
  PlainLinearMap map(d * d);
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j)
      map.add_entry(d * i + j, d * ((i + j + k) % d) + j, 1.0);
  return map;
}

// Row-major matrix in the first d^2 slots (slot d*i+j holds A[i][j]).
struct EncodedMatrix {
  Ciphertext ct;
  size_t d = 0;
};

// Column-replicated vector (slot d*i+j holds v[i] for every j).
struct EncodedVector {
  Ciphertext ct;
  size_t d = 0;
};

namespace detail {

// One flat (non-modular) diagonal: out[r] += mask[r] * in[r + delta]. A
// generalized diagonal of a window-packed map splits into at most two of
// these, the in-window entries and the wrapped-around ones.
struct FlatDiagonal {
  int delta;
  std::vector<double> mask;
};

inline std::vector<FlatDiagonal> flat_parts(const PlainLinearMap& map) {
  size_t dim = map.dim();
  std::vector<FlatDiagonal> parts;
  for (const auto& [l, u] : map.diagonals()) {
    FlatDiagonal main{static_cast<int>(l), std::vector<double>(dim, 0.0)};
    FlatDiagonal wrap{static_cast<int>(l) - static_cast<int>(dim),
                      std::vector<double>(dim, 0.0)};
    bool has_main = false, has_wrap = false;
    for (size_t r = 0; r < dim; ++r) {
      if (u[r] == 0.0) continue;
      if (r + l < dim) {
        main.mask[r] = u[r];
        has_main = true;
      } else {
        wrap.mask[r] = u[r];
        has_wrap = true;
      }
    }
    if (has_main) parts.push_back(std::move(main));
    if (has_wrap) parts.push_back(std::move(wrap));
  }
  return parts;
}

// sum of mask ⊙ rot(input) over the map's flat parts, then one shared
// rescale: exactly one ⊙ level regardless of the diagonal count.
inline Ciphertext apply_flat_parts(
    const std::vector<FlatDiagonal>& parts,
    const std::function<const Ciphertext&(int)>& rotated,
    const Ciphertext& base, const CkksEncoder& encoder, const Evaluator& eval) {
  double mask_scale = base.parts[0].basis()->scale();
  int level = base.level();
  std::optional<Ciphertext> acc;
  for (const auto& part : parts) {
    Plaintext mask = encoder.encode(part.mask, mask_scale, level);
    Ciphertext term = eval.mul_plain(rotated(part.delta), mask);
    acc = acc ? eval.add(*acc, term) : std::move(term);
  }
  if (!acc) {
    // Zero map: multiply by an encoded zero so depth accounting is uniform.
    Plaintext zero = encoder.encode(std::vector<double>{}, mask_scale, level);
    acc = eval.mul_plain(base, zero);
  }
  return eval.rescale(*acc);
}

}  // namespace detail

// Halevi-Shoup linear transformation: decrypts to U*v for an input
// encrypting v in the first U.dim() slots (zeros elsewhere). Consumes
// exactly one level; only stored (nonzero) diagonals are touched.
inline Ciphertext lin_trans(const Ciphertext& ct, const PlainLinearMap& U,
                            const GaloisKeys& gk, const CkksEncoder& encoder,
                            const Evaluator& eval) {
  if (U.dim() > encoder.slots())
    throw ContractError("lin_trans: map dimension exceeds slot count");
  if (ct.level() < 1)
    throw DepthExhausted("lin_trans: no level left for the plaintext product");
  std::map<int, Ciphertext> cache;
  auto rotated = [&](int delta) -> const Ciphertext& {
    if (delta == 0) return ct;
    auto it = cache.find(delta);
    if (it == cache.end()) it = cache.emplace(delta, eval.rotate(ct, delta, gk)).first;
    return it->second;
  };
  return detail::apply_flat_parts(detail::flat_parts(U), rotated, ct, encoder,
                                  eval);
}

namespace detail {

// Depth-2 matrix product kernel on raw ciphertexts. The rotations of both
// operands are hoisted out of the k-loop (each operand needs at most 2(d-1)
// distinct flat rotations across all V_k/W_k), the d partial products are
// accumulated in 3-part form, and a single relinearization plus rescale
// closes the pipeline.
inline Ciphertext mmult_ct(const Ciphertext& a_ct, const Ciphertext& b_ct,
                           size_t d, double a, const RelinKey& rlk,
                           const GaloisKeys& gk, const CkksEncoder& encoder,
                           const Evaluator& eval) {
  if (a_ct.level() != b_ct.level())
    throw AlignmentError("mmult: operands at different levels");
  if (a_ct.level() < 2)
    throw DepthExhausted("mmult: needs two levels (one ⊙, one •)");
  if (d * d > encoder.slots())
    throw ContractError("mmult: d^2 exceeds slot count");

  std::vector<std::vector<FlatDiagonal>> v_parts(d), w_parts(d);
  for (size_t k = 0; k < d; ++k) {
    v_parts[k] = flat_parts(make_Vk(d, k, a));
    w_parts[k] = flat_parts(make_Wk(d, k));
  }

  std::map<int, Ciphertext> a_rots, b_rots;
  auto cached = [&](std::map<int, Ciphertext>& cache, const Ciphertext& base) {
    return [&cache, &base, &eval, &gk](int delta) -> const Ciphertext& {
      if (delta == 0) return base;
      auto it = cache.find(delta);
      if (it == cache.end())
        it = cache.emplace(delta, eval.rotate(base, delta, gk)).first;
      return it->second;
    };
  };
  auto a_rotated = cached(a_rots, a_ct);
  auto b_rotated = cached(b_rots, b_ct);

  std::optional<Ciphertext> acc;
  for (size_t k = 0; k < d; ++k) {
    Ciphertext ak = apply_flat_parts(v_parts[k], a_rotated, a_ct, encoder, eval);
    Ciphertext bk = apply_flat_parts(w_parts[k], b_rotated, b_ct, encoder, eval);
    Ciphertext prod = eval.mul(ak, bk);
    acc = acc ? eval.add(*acc, prod) : std::move(prod);
  }
  return eval.rescale(eval.relinearize(*acc, rlk));
}

}  // namespace detail

inline EncodedMatrix mmult(const EncodedMatrix& A, const EncodedMatrix& B,
                           double a, const RelinKey& rlk, const GaloisKeys& gk,
                           const CkksEncoder& encoder, const Evaluator& eval) {
  if (A.d != B.d) throw ContractError("mmult: dimension mismatch");
  return {detail::mmult_ct(A.ct, B.ct, A.d, a, rlk, gk, encoder, eval), A.d};
}

inline EncodedVector mmult(const EncodedMatrix& A, const EncodedVector& x,
                           double a, const RelinKey& rlk, const GaloisKeys& gk,
                           const CkksEncoder& encoder, const Evaluator& eval) {
  if (A.d != x.d) throw ContractError("mmult: dimension mismatch");
  return {detail::mmult_ct(A.ct, x.ct, A.d, a, rlk, gk, encoder, eval), A.d};
}

// --- encodings ---------------------------------------------------------------

inline std::vector<double> replicate_columns(const std::vector<double>& v,
                                             size_t d) {
  std::vector<double> slots(d * d);
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j) slots[d * i + j] = v[i];
  return slots;
}

inline EncodedMatrix encode_matrix(const std::vector<double>& values, size_t d,
                                   const CkksEncoder& encoder,
                                   const PublicKey& pk, std::mt19937_64& rng,
                                   int level, double scale) {
  if (values.size() != d * d)
    throw ContractError("encode_matrix: expected d^2 row-major values");
  if (d * d > encoder.slots())
    throw ContractError("encode_matrix: d^2 exceeds slot count");
  return {encrypt(encoder.encode(values, scale, level), pk, rng), d};
}

inline EncodedVector encode_vector_replicated(const std::vector<double>& v,
                                              size_t d,
                                              const CkksEncoder& encoder,
                                              const PublicKey& pk,
                                              std::mt19937_64& rng, int level,
                                              double scale) {
  if (v.size() != d) throw ContractError("encode_vector_replicated: length != d");
  if (d * d > encoder.slots())
    throw ContractError("encode_vector_replicated: d^2 exceeds slot count");
  return {encrypt(encoder.encode(replicate_columns(v, d), scale, level), pk, rng),
          d};
}

inline std::vector<double> decode_matrix(const EncodedMatrix& m,
                                         const SecretKey& sk,
                                         const CkksEncoder& encoder) {
  auto slots = encoder.decode(decrypt(m.ct, sk));
  std::vector<double> out(m.d * m.d);
  for (size_t i = 0; i < out.size(); ++i) out[i] = slots[i].real();
  return out;
}

// Reads a column-replicated vector back. Averaging the d copies of each
// entry cancels part of the CKKS noise; pass average=false to read column 0
// as-is (layout tests do).
inline std::vector<double> decode_vector(const EncodedVector& v,
                                         const SecretKey& sk,
                                         const CkksEncoder& encoder,
                                         bool average = true) {
  auto slots = encoder.decode(decrypt(v.ct, sk));
  std::vector<double> out(v.d);
  for (size_t i = 0; i < v.d; ++i) {
    if (average) {
      double sum = 0;
      for (size_t j = 0; j < v.d; ++j) sum += slots[v.d * i + j].real();
      out[i] = sum / static_cast<double>(v.d);
    } else {
      out[i] = slots[v.d * i].real();
    }
  }
  return out;
}

}  // namespace hegd
