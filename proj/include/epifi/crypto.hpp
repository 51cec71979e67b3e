#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace epifi {

// Injected randomness so provisioning is reproducible under test and in the
// simulator. fill() must produce independent bytes each call.
struct RandomSource {
  virtual ~RandomSource() = default;
  virtual void fill(std::span<uint8_t> out) = 0;
};

// Deterministic stream over a 64-bit seed. The simulator hands every
// component one of these; two runs with the same seed draw the same bytes.
class SeededRandomSource final : public RandomSource {
 public:
  explicit SeededRandomSource(uint64_t seed) : gen_(seed) {}
  void fill(std::span<uint8_t> out) override;

 private:
  std::mt19937_64 gen_;
};

// AES-128-CBC with PKCS#7 padding. Ciphertext is a positive multiple of 16.
std::vector<uint8_t> aes128_cbc_encrypt(const std::array<uint8_t, 16>& key,
                                        const std::array<uint8_t, 16>& iv,
                                        std::span<const uint8_t> plaintext);

// nullopt when the padding is invalid after decryption.
std::optional<std::vector<uint8_t>> aes128_cbc_decrypt(
    const std::array<uint8_t, 16>& key, const std::array<uint8_t, 16>& iv,
    std::span<const uint8_t> ciphertext);

std::array<uint8_t, 32> hmac_sha256(const std::array<uint8_t, 32>& key,
                                    std::span<const uint8_t> data);

// Constant-time comparison for MAC checks.
bool ct_equal(std::span<const uint8_t> a, std::span<const uint8_t> b);

}  // namespace epifi
