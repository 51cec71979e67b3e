#include "epifi/crypto.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <memory>
#include <stdexcept>

namespace epifi {

namespace {

struct CipherCtxFree {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxFree>;

}  // namespace

void SeededRandomSource::fill(std::span<uint8_t> out) {
  for (auto& b : out) b = static_cast<uint8_t>(gen_() >> 32);
}

std::vector<uint8_t> aes128_cbc_encrypt(const std::array<uint8_t, 16>& key,
                                        const std::array<uint8_t, 16>& iv,
                                        std::span<const uint8_t> plaintext) {
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_cbc(), nullptr,
                                 key.data(), iv.data()) != 1) {
    throw std::runtime_error("aes encrypt init failed");
  }
  std::vector<uint8_t> out(plaintext.size() + 16);
  int n1 = 0, n2 = 0;
  if (EVP_EncryptUpdate(ctx.get(), out.data(), &n1, plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1 ||
      EVP_EncryptFinal_ex(ctx.get(), out.data() + n1, &n2) != 1) {
    throw std::runtime_error("aes encrypt failed");
  }
  out.resize(static_cast<size_t>(n1 + n2));
  return out;
}

std::optional<std::vector<uint8_t>> aes128_cbc_decrypt(
    const std::array<uint8_t, 16>& key, const std::array<uint8_t, 16>& iv,
    std::span<const uint8_t> ciphertext) {
  if (ciphertext.empty() || ciphertext.size() % 16 != 0) return std::nullopt;
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx || EVP_DecryptInit_ex(ctx.get(), EVP_aes_128_cbc(), nullptr,
                                 key.data(), iv.data()) != 1) {
    throw std::runtime_error("aes decrypt init failed");
  }
  std::vector<uint8_t> out(ciphertext.size() + 16);
  int n1 = 0, n2 = 0;
  if (EVP_DecryptUpdate(ctx.get(), out.data(), &n1, ciphertext.data(),
                        static_cast<int>(ciphertext.size())) != 1) {
    return std::nullopt;
  }
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + n1, &n2) != 1) {
    return std::nullopt;  // bad padding
  }
  out.resize(static_cast<size_t>(n1 + n2));
  return out;
}

std::array<uint8_t, 32> hmac_sha256(const std::array<uint8_t, 32>& key,
                                    std::span<const uint8_t> data) {
  std::array<uint8_t, 32> md{};
  unsigned int len = 0;
  if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
            data.data(), data.size(), md.data(), &len) ||
      len != md.size()) {
    throw std::runtime_error("hmac failed");
  }
  return md;
}

bool ct_equal(std::span<const uint8_t> a, std::span<const uint8_t> b) {
  if (a.size() != b.size()) return false;
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

}  // namespace epifi
