#include "nstream/engine/sealing.hpp"

#include <openssl/evp.h>
#include <openssl/kdf.h>

#include <memory>

#include "nstream/error.hpp"

namespace nstream {
namespace {

constexpr std::string_view kSalt = "nstream/frame-seal/v1";
constexpr std::string_view kInfo = "aes-256-gcm key";

using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)>;

std::array<unsigned char, 12> make_nonce(const MediaFrame& f) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_Digest(f.track_label.data(), f.track_label.size(), digest.data(), &len, EVP_sha256(), nullptr);
  std::array<unsigned char, 12> nonce{};
  std::copy_n(digest.begin(), 4, nonce.begin());
  for (int i = 0; i < 8; ++i) nonce[4 + i] = static_cast<unsigned char>(f.seq >> (8 * (7 - i)));
  return nonce;
}

std::vector<unsigned char> make_aad(const MediaFrame& f) {
  std::vector<unsigned char> aad(f.track_label.begin(), f.track_label.end());
  aad.push_back(0);
  for (int i = 7; i >= 0; --i) aad.push_back(static_cast<unsigned char>(f.seq >> (8 * i)));
  auto ts = static_cast<std::uint64_t>(f.ts_ms);
  for (int i = 7; i >= 0; --i) aad.push_back(static_cast<unsigned char>(ts >> (8 * i)));
  return aad;
}

[[noreturn]] void crypto_failure(const char* what) { throw Error(Errc::integrity, what); }

}  // namespace

FrameSealer::FrameSealer(std::string_view secret) {
  if (secret.empty()) throw Error(Errc::validation, "empty secret");
  std::unique_ptr<EVP_PKEY_CTX, decltype(&EVP_PKEY_CTX_free)> ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_HKDF, nullptr),
                                                                  EVP_PKEY_CTX_free);
  std::size_t len = key_.size();
  if (!ctx || EVP_PKEY_derive_init(ctx.get()) <= 0 || EVP_PKEY_CTX_set_hkdf_md(ctx.get(), EVP_sha256()) <= 0 ||
      EVP_PKEY_CTX_set1_hkdf_salt(ctx.get(), reinterpret_cast<const unsigned char*>(kSalt.data()),
                                  static_cast<int>(kSalt.size())) <= 0 ||
      EVP_PKEY_CTX_set1_hkdf_key(ctx.get(), reinterpret_cast<const unsigned char*>(secret.data()),
                                 static_cast<int>(secret.size())) <= 0 ||
      EVP_PKEY_CTX_add1_hkdf_info(ctx.get(), reinterpret_cast<const unsigned char*>(kInfo.data()),
                                  static_cast<int>(kInfo.size())) <= 0 ||
      EVP_PKEY_derive(ctx.get(), key_.data(), &len) <= 0)
    throw Error(Errc::validation, "key derivation failed");
}

MediaFrame FrameSealer::seal(MediaFrame frame) const {
  if (frame.sealed) throw Error(Errc::validation, "frame already sealed");
  auto nonce = make_nonce(frame);
  auto aad = make_aad(frame);
  CipherCtx ctx(EVP_CIPHER_CTX_new(), EVP_CIPHER_CTX_free);
  std::vector<std::uint8_t> out(frame.payload.size() + kTagBytes);
  int len = 0;
  int total = 0;
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key_.data(), nonce.data()) != 1 ||
      EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1 ||
      EVP_EncryptUpdate(ctx.get(), out.data(), &len, frame.payload.data(), static_cast<int>(frame.payload.size())) != 1)
    crypto_failure("seal failed");
  total = len;
  if (EVP_EncryptFinal_ex(ctx.get(), out.data() + total, &len) != 1) crypto_failure("seal failed");
  total += len;
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kTagBytes, out.data() + total) != 1)
    crypto_failure("seal failed");
  frame.payload = std::move(out);
  frame.sealed = true;
  return frame;
}

MediaFrame FrameSealer::open(MediaFrame frame) const {
  if (!frame.sealed || frame.payload.size() < kTagBytes) throw Error(Errc::integrity, "frame is not sealed");
  auto nonce = make_nonce(frame);
  auto aad = make_aad(frame);
  auto body = frame.payload.size() - kTagBytes;
  CipherCtx ctx(EVP_CIPHER_CTX_new(), EVP_CIPHER_CTX_free);
  std::vector<std::uint8_t> out(body);
  int len = 0;
  if (!ctx || EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key_.data(), nonce.data()) != 1 ||
      EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1 ||
      EVP_DecryptUpdate(ctx.get(), out.data(), &len, frame.payload.data(), static_cast<int>(body)) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kTagBytes, frame.payload.data() + body) != 1)
    crypto_failure("open failed");
  int tail = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + len, &tail) != 1)
    throw Error(Errc::integrity, "frame authentication failed");
  frame.payload = std::move(out);
  frame.sealed = false;
  return frame;
}

MediaFrame seal_frame(MediaFrame frame, std::string_view secret) { return FrameSealer(secret).seal(std::move(frame)); }

MediaFrame open_frame(MediaFrame frame, std::string_view secret) { return FrameSealer(secret).open(std::move(frame)); }

}  // namespace nstream
