#include "firmscan/md5.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

#include "firmscan/error.hpp"

namespace firmscan::md5 {

namespace {

struct CtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

std::string finish_hex(EVP_MD_CTX* ctx) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        throw Error("MD5 finalization failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0f]);
    }
    return out;
}

std::unique_ptr<EVP_MD_CTX, CtxDeleter> make_ctx() {
    std::unique_ptr<EVP_MD_CTX, CtxDeleter> ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_md5(), nullptr) != 1) {
        throw Error("MD5 context initialization failed");
    }
    return ctx;
}

} // namespace

std::string hex_digest(std::span<const std::uint8_t> data) {
    auto ctx = make_ctx();
    if (!data.empty() &&
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1) {
        throw Error("MD5 update failed");
    }
    return finish_hex(ctx.get());
}

std::string hex_digest_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open for hashing: " + path.string());
    }
    auto ctx = make_ctx();
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        const auto n = in.gcount();
        if (n > 0 && EVP_DigestUpdate(ctx.get(), buf.data(),
                                      static_cast<std::size_t>(n)) != 1) {
            throw Error("MD5 update failed");
        }
    }
    if (in.bad()) {
        throw IoError("read error while hashing: " + path.string());
    }
    return finish_hex(ctx.get());
}

bool is_checksum(std::string_view s) {
    if (s.size() != 32) {
        return false;
    }
    for (char c : s) {
        const bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
        if (!ok) {
            return false;
        }
    }
    return true;
}

} // namespace firmscan::md5
