#include "epifi/reed_solomon.hpp"

#include <array>
#include <stdexcept>

namespace epifi::rs {

namespace {

// GF(2^8) with the primitive polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D),
// generator alpha = 2.
struct Gf256 {
  std::array<uint8_t, 256> exp_ext[2];  // exp table doubled to skip mod 255
  std::array<uint8_t, 256> log;

  constexpr Gf256() : exp_ext{}, log{} {
    uint16_t x = 1;
    for (int i = 0; i < 255; ++i) {
      exp_ext[0][i] = static_cast<uint8_t>(x);
      exp_ext[1][i] = static_cast<uint8_t>(x);  // exp[i + 255]
      log[x] = static_cast<uint8_t>(i);
      x <<= 1;
      if (x & 0x100) x ^= 0x11D;
    }
    exp_ext[0][255] = exp_ext[0][0];
    exp_ext[1][255] = exp_ext[0][0];
  }

  uint8_t exp(unsigned i) const { return exp_ext[i / 255][i % 255]; }

  uint8_t mul(uint8_t a, uint8_t b) const {
    if (a == 0 || b == 0) return 0;
    unsigned s = static_cast<unsigned>(log[a]) + log[b];
    return s < 255 ? exp_ext[0][s] : exp_ext[1][s - 255];
  }

  uint8_t div(uint8_t a, uint8_t b) const {
    if (b == 0) throw std::domain_error("gf256 division by zero");
    if (a == 0) return 0;
    unsigned s = static_cast<unsigned>(log[a]) + 255 - log[b];
    return s < 255 ? exp_ext[0][s] : exp_ext[1][s - 255];
  }
};

const Gf256 gf{};

using Matrix = std::vector<std::vector<uint8_t>>;

// Invert a k x k matrix in place by Gauss-Jordan elimination.
Matrix invert(Matrix a) {
  const std::size_t k = a.size();
  Matrix inv(k, std::vector<uint8_t>(k, 0));
  for (std::size_t i = 0; i < k; ++i) inv[i][i] = 1;

  for (std::size_t col = 0; col < k; ++col) {
    std::size_t pivot = col;
    while (pivot < k && a[pivot][col] == 0) ++pivot;
    if (pivot == k) throw std::runtime_error("singular decode matrix");
    std::swap(a[pivot], a[col]);
    std::swap(inv[pivot], inv[col]);

    const uint8_t d = a[col][col];
    for (std::size_t j = 0; j < k; ++j) {
      a[col][j] = gf.div(a[col][j], d);
      inv[col][j] = gf.div(inv[col][j], d);
    }
    for (std::size_t row = 0; row < k; ++row) {
      if (row == col || a[row][col] == 0) continue;
      const uint8_t f = a[row][col];
      for (std::size_t j = 0; j < k; ++j) {
        a[row][j] ^= gf.mul(f, a[col][j]);
        inv[row][j] ^= gf.mul(f, inv[col][j]);
      }
    }
  }
  return inv;
}

// Row i of the systematic generator matrix (m x k): identity on the first k
// rows, Vandermonde-derived parity below. Built as V * inv(V_top) where
// V[i][j] = alpha^(i*j).
Matrix generator_rows(std::size_t k, std::size_t m) {
  Matrix v(m, std::vector<uint8_t>(k, 0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j)
      v[i][j] = gf.exp(static_cast<unsigned>(i * j) % 255);

  Matrix top(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k));
  Matrix top_inv = invert(std::move(top));

  Matrix g(m, std::vector<uint8_t>(k, 0));
  for (std::size_t i = 0; i < m; ++i) {
    if (i < k) {
      g[i][i] = 1;  // exact by construction, skip the multiply
      continue;
    }
    for (std::size_t j = 0; j < k; ++j) {
      uint8_t acc = 0;
      for (std::size_t t = 0; t < k; ++t) acc ^= gf.mul(v[i][t], top_inv[t][j]);
      g[i][j] = acc;
    }
  }
  return g;
}

void check_params(std::size_t k, std::size_t m, std::size_t block_size) {
  if (k < 1 || m < k || m > 255) throw std::invalid_argument("rs: bad k/m");
  if (block_size == 0) throw std::invalid_argument("rs: bad block size");
}

}  // namespace

std::vector<std::vector<uint8_t>> encode(std::span<const uint8_t> data,
                                         std::size_t k, std::size_t m,
                                         std::size_t block_size) {
  check_params(k, m, block_size);
  if (data.size() != k * block_size)
    throw std::invalid_argument("rs: data size must be k * block_size");

  const Matrix g = generator_rows(k, m);
  std::vector<std::vector<uint8_t>> out(m, std::vector<uint8_t>(block_size, 0));
  for (std::size_t i = 0; i < k; ++i) {
    auto src = data.subspan(i * block_size, block_size);
    std::copy(src.begin(), src.end(), out[i].begin());
  }
  for (std::size_t i = k; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const uint8_t c = g[i][j];
      if (c == 0) continue;
      const uint8_t* src = data.data() + j * block_size;
      for (std::size_t b = 0; b < block_size; ++b)
        out[i][b] ^= gf.mul(c, src[b]);
    }
  }
  return out;
}

std::vector<uint8_t> decode(
    const std::vector<std::pair<std::size_t, std::vector<uint8_t>>>& blocks,
    std::size_t k, std::size_t m, std::size_t block_size) {
  check_params(k, m, block_size);
  if (blocks.size() != k)
    throw std::invalid_argument("rs: decode needs exactly k blocks");
  for (const auto& [idx, block] : blocks) {
    if (idx >= m) throw std::invalid_argument("rs: block index out of range");
    if (block.size() != block_size)
      throw std::invalid_argument("rs: bad block size");
  }

  const Matrix g = generator_rows(k, m);
  Matrix sub(k);
  for (std::size_t r = 0; r < k; ++r) sub[r] = g[blocks[r].first];
  const Matrix inv = invert(std::move(sub));

  std::vector<uint8_t> data(k * block_size, 0);
  for (std::size_t i = 0; i < k; ++i) {
    uint8_t* dst = data.data() + i * block_size;
    for (std::size_t j = 0; j < k; ++j) {
      const uint8_t c = inv[i][j];
      if (c == 0) continue;
      const auto& src = blocks[j].second;
      for (std::size_t b = 0; b < block_size; ++b) dst[b] ^= gf.mul(c, src[b]);
    }
  }
  return data;
}

}  // namespace epifi::rs
