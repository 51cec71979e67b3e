#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace epifi::rs {

// Systematic Reed-Solomon erasure code over GF(256) (polynomial 0x11D),
// Vandermonde construction: the first k output blocks are the data blocks
// verbatim, and any k of the m blocks reconstruct the original k. Limits:
// 1 <= k <= m <= 255.

// data.size() must be exactly k * block_size. Returns m blocks of
// block_size bytes, indexed 0..m-1.
std::vector<std::vector<uint8_t>> encode(std::span<const uint8_t> data,
                                         std::size_t k, std::size_t m,
                                         std::size_t block_size);

// blocks: exactly k (index, block) pairs with distinct indices < m, each
// block block_size bytes. Returns the k * block_size data bytes.
std::vector<uint8_t> decode(
    const std::vector<std::pair<std::size_t, std::vector<uint8_t>>>& blocks,
    std::size_t k, std::size_t m, std::size_t block_size);

}  // namespace epifi::rs
