#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include <openssl/evp.h>

#include "segfuse/core.hpp"
#include "segfuse/io/file.hpp"

namespace segfuse {

inline std::string sha256_hex(std::span<const uint8_t> bytes) {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    detail::require(ctx != nullptr, "digest: failed to allocate context");
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, md, &len) == 1;
    EVP_MD_CTX_free(ctx);
    detail::require(ok, "digest: SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

inline std::string sha256_hex_file(const std::filesystem::path& path) {
    return sha256_hex(read_file(path));
}

} // namespace segfuse
