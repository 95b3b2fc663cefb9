#include "archive.hpp"

#include <lzma.h>
#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstring>

#include "firmscan/error.hpp"

namespace firmscan::unpack::detail {

namespace {

std::uint32_t le32(std::span<const std::uint8_t> d, std::size_t pos) {
    return static_cast<std::uint32_t>(d[pos]) |
           static_cast<std::uint32_t>(d[pos + 1]) << 8 |
           static_cast<std::uint32_t>(d[pos + 2]) << 16 |
           static_cast<std::uint32_t>(d[pos + 3]) << 24;
}

std::uint16_t le16(std::span<const std::uint8_t> d, std::size_t pos) {
    return static_cast<std::uint16_t>(d[pos] | d[pos + 1] << 8);
}

// zlib inflate from `in`, window configured by the caller (gzip wrapper or
// raw deflate). Returns output; sets consumed to total_in.
std::vector<std::uint8_t> zlib_inflate(std::span<const std::uint8_t> in,
                                       int window_bits,
                                       std::size_t& consumed,
                                       gz_header* header) {
    z_stream zs{};
    if (inflateInit2(&zs, window_bits) != Z_OK) {
        throw Error("inflate init failed");
    }
    if (header != nullptr) {
        inflateGetHeader(&zs, header);
    }
    std::vector<std::uint8_t> out;
    std::array<std::uint8_t, 1 << 16> chunk;
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(std::min<std::size_t>(in.size(), UINT32_MAX));
    int ret = Z_OK;
    do {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        ret = inflate(&zs, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END && ret != Z_BUF_ERROR) {
            inflateEnd(&zs);
            throw FormatError(std::string("corrupt deflate stream: ") +
                              (zs.msg ? zs.msg : zError(ret)));
        }
        out.insert(out.end(), chunk.data(), zs.next_out);
        if (out.size() > kMaxDecompressedBytes) {
            inflateEnd(&zs);
            throw FormatError("decompressed stream exceeds size budget");
        }
        if (ret == Z_BUF_ERROR && zs.avail_in == 0) {
            inflateEnd(&zs);
            throw FormatError("truncated deflate stream");
        }
    } while (ret != Z_STREAM_END);
    consumed = zs.total_in;
    inflateEnd(&zs);
    return out;
}

std::string sanitize_gzip_name(const char* name) {
    if (name == nullptr || name[0] == '\0') {
        return {};
    }
    std::string s(name);
    // Keep only the basename; the FNAME field is untrusted input.
    const auto slash = s.find_last_of("/\\");
    if (slash != std::string::npos) {
        s = s.substr(slash + 1);
    }
    return s == "." || s == ".." ? std::string{} : s;
}

std::vector<std::uint8_t> lzma_decode(std::span<const std::uint8_t> in,
                                      bool alone_format,
                                      std::size_t& consumed) {
    lzma_stream strm = LZMA_STREAM_INIT;
    const lzma_ret init = alone_format
        ? lzma_alone_decoder(&strm, UINT64_MAX)
        : lzma_stream_decoder(&strm, UINT64_MAX, 0);
    if (init != LZMA_OK) {
        throw Error("lzma decoder init failed");
    }
    std::vector<std::uint8_t> out;
    std::array<std::uint8_t, 1 << 16> chunk;
    strm.next_in = in.data();
    strm.avail_in = in.size();
    lzma_ret ret = LZMA_OK;
    while (true) {
        strm.next_out = chunk.data();
        strm.avail_out = chunk.size();
        ret = lzma_code(&strm, LZMA_FINISH);
        out.insert(out.end(), chunk.data(), strm.next_out);
        if (out.size() > kMaxDecompressedBytes) {
            lzma_end(&strm);
            throw FormatError("decompressed stream exceeds size budget");
        }
        if (ret == LZMA_STREAM_END) {
            break;
        }
        if (ret != LZMA_OK) {
            lzma_end(&strm);
            throw FormatError("corrupt lzma/xz stream");
        }
        if (strm.avail_in == 0 && strm.avail_out != 0) {
            lzma_end(&strm);
            throw FormatError("truncated lzma/xz stream");
        }
    }
    consumed = static_cast<std::size_t>(strm.total_in);
    lzma_end(&strm);
    return out;
}

bool block_is_zero(std::span<const std::uint8_t> block) {
    return std::all_of(block.begin(), block.end(),
                       [](std::uint8_t b) { return b == 0; });
}

// Parses a NUL- or space-terminated octal field.
bool parse_octal(std::span<const std::uint8_t> field, std::uint64_t& out) {
    out = 0;
    bool seen = false;
    for (std::uint8_t b : field) {
        if (b == ' ' && !seen) {
            continue;
        }
        if (b == '\0' || b == ' ') {
            break;
        }
        if (b < '0' || b > '7') {
            return false;
        }
        out = out * 8 + (b - '0');
        seen = true;
    }
    return seen;
}

std::string tar_string(std::span<const std::uint8_t> field) {
    const auto* begin = reinterpret_cast<const char*>(field.data());
    const auto* end = static_cast<const char*>(
        std::memchr(begin, '\0', field.size()));
    return std::string(begin, end ? end : begin + field.size());
}

bool tar_checksum_ok(std::span<const std::uint8_t> block) {
    std::uint64_t recorded = 0;
    if (!parse_octal(block.subspan(148, 8), recorded)) {
        return false;
    }
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < 512; ++i) {
        sum += (i >= 148 && i < 156) ? ' ' : block[i];
    }
    return sum == recorded;
}

} // namespace

ReadResult read_gzip(std::span<const std::uint8_t> data, std::size_t offset) {
    ReadResult result;
    gz_header hdr{};
    char name_buf[256] = {0};
    hdr.name = reinterpret_cast<Bytef*>(name_buf);
    hdr.name_max = sizeof name_buf;
    auto out = zlib_inflate(data.subspan(offset), 16 + MAX_WBITS,
                            result.consumed, &hdr);
    result.suggested_name = hdr.done == 1 ? sanitize_gzip_name(name_buf) : "";
    result.members.push_back(Member{"", std::move(out), false});
    return result;
}

ReadResult read_xz(std::span<const std::uint8_t> data, std::size_t offset) {
    ReadResult result;
    auto out = lzma_decode(data.subspan(offset), false, result.consumed);
    result.members.push_back(Member{"", std::move(out), false});
    return result;
}

ReadResult read_lzma(std::span<const std::uint8_t> data, std::size_t offset) {
    ReadResult result;
    auto out = lzma_decode(data.subspan(offset), true, result.consumed);
    result.members.push_back(Member{"", std::move(out), false});
    return result;
}

ReadResult read_zip(std::span<const std::uint8_t> data, std::size_t offset) {
    constexpr std::uint32_t kLocalFile = 0x04034b50;
    constexpr std::uint32_t kCentralDir = 0x02014b50;
    constexpr std::uint32_t kEndOfCentralDir = 0x06054b50;
    constexpr std::uint32_t kDataDescriptor = 0x08074b50;

    ReadResult result;
    std::size_t pos = offset;
    bool saw_member = false;
    while (pos + 4 <= data.size()) {
        const std::uint32_t sig = le32(data, pos);
        if (sig == kLocalFile) {
            if (pos + 30 > data.size()) {
                break;
            }
            const std::uint16_t flags = le16(data, pos + 6);
            const std::uint16_t method = le16(data, pos + 8);
            const std::uint32_t crc = le32(data, pos + 14);
            const std::uint32_t csize = le32(data, pos + 18);
            const std::uint16_t name_len = le16(data, pos + 26);
            const std::uint16_t extra_len = le16(data, pos + 28);
            const std::size_t data_start = pos + 30 + name_len + extra_len;
            if (data_start > data.size()) {
                if (!saw_member) {
                    throw FormatError("truncated zip local header");
                }
                break;
            }
            std::string name(reinterpret_cast<const char*>(data.data() + pos + 30),
                             name_len);
            Member member;
            member.path = name;
            member.is_dir = !name.empty() && name.back() == '/';
            std::size_t member_end = data_start;
            bool ok = true;
            if ((flags & 0x8) != 0 && csize == 0) {
                // Streaming member: sizes live in a trailing descriptor.
                if (method == 8) {
                    std::size_t used = 0;
                    try {
                        member.data = zlib_inflate(data.subspan(data_start),
                                                   -MAX_WBITS, used, nullptr);
                    } catch (const FormatError& e) {
                        result.warnings.push_back("zip member '" + name +
                                                  "' failed: " + e.what());
                        break;  // cannot locate the next header
                    }
                    member_end = data_start + used;
                    if (member_end + 4 <= data.size() &&
                        le32(data, member_end) == kDataDescriptor) {
                        member_end += 16;
                    } else {
                        member_end += 12;
                    }
                } else {
                    result.warnings.push_back(
                        "zip member '" + name +
                        "' skipped: streaming stored member has no length");
                    break;
                }
            } else {
                if (data_start + csize > data.size()) {
                    result.warnings.push_back("zip member '" + name +
                                              "' truncated");
                    break;
                }
                const auto payload = data.subspan(data_start, csize);
                if (method == 0) {
                    member.data.assign(payload.begin(), payload.end());
                } else if (method == 8) {
                    std::size_t used = 0;
                    try {
                        member.data = zlib_inflate(payload, -MAX_WBITS, used,
                                                   nullptr);
                    } catch (const FormatError& e) {
                        result.warnings.push_back("zip member '" + name +
                                                  "' failed: " + e.what());
                        ok = false;
                    }
                } else {
                    result.warnings.push_back(
                        "zip member '" + name + "' skipped: method " +
                        std::to_string(method) + " unsupported");
                    ok = false;
                }
                member_end = data_start + csize;
            }
            if (ok && !member.is_dir && (flags & 0x8) == 0 &&
                crc != crc32(crc32(0, nullptr, 0), member.data.data(),
                             static_cast<uInt>(member.data.size()))) {
                result.warnings.push_back("zip member '" + name +
                                          "' failed: crc mismatch");
                ok = false;
            }
            if (ok) {
                result.members.push_back(std::move(member));
            }
            saw_member = true;
            pos = member_end;
        } else if (sig == kCentralDir) {
            if (pos + 46 > data.size()) {
                break;
            }
            const std::uint16_t name_len = le16(data, pos + 28);
            const std::uint16_t extra_len = le16(data, pos + 30);
            const std::uint16_t comment_len = le16(data, pos + 32);
            pos += 46 + name_len + extra_len + comment_len;
        } else if (sig == kEndOfCentralDir) {
            if (pos + 22 > data.size()) {
                break;
            }
            pos += 22 + le16(data, pos + 20);
            break;
        } else {
            break;
        }
    }
    if (!saw_member) {
        throw FormatError("no zip members at signature offset");
    }
    result.consumed = pos - offset;
    return result;
}

ReadResult read_tar(std::span<const std::uint8_t> data, std::size_t offset) {
    ReadResult result;
    std::size_t pos = offset;
    int zero_blocks = 0;
    bool saw_member = false;
    while (pos + 512 <= data.size()) {
        const auto block = data.subspan(pos, 512);
        if (block_is_zero(block)) {
            pos += 512;
            if (++zero_blocks == 2) {
                break;
            }
            continue;
        }
        zero_blocks = 0;
        if (std::memcmp(block.data() + 257, "ustar", 5) != 0 ||
            !tar_checksum_ok(block)) {
            break;  // end of archive
        }
        std::string name = tar_string(block.subspan(0, 100));
        const std::string prefix = tar_string(block.subspan(345, 155));
        if (!prefix.empty()) {
            name = prefix + "/" + name;
        }
        std::uint64_t size = 0;
        if (!parse_octal(block.subspan(124, 12), size)) {
            size = 0;
        }
        const char type = static_cast<char>(block[156]);
        const std::size_t padded = (size + 511) / 512 * 512;
        if (pos + 512 + size > data.size()) {
            result.warnings.push_back("tar member '" + name + "' truncated");
            break;
        }
        if (type == '0' || type == '\0') {
            Member m;
            m.path = name;
            const auto payload = data.subspan(pos + 512, size);
            m.data.assign(payload.begin(), payload.end());
            result.members.push_back(std::move(m));
        } else if (type == '5') {
            result.members.push_back(Member{name, {}, true});
        } else {
            result.warnings.push_back("tar member '" + name +
                                      "' skipped: type '" + type + "'");
        }
        saw_member = true;
        pos += 512 + padded;
    }
    if (!saw_member) {
        throw FormatError("no tar members at signature offset");
    }
    result.consumed = pos - offset;
    return result;
}

} // namespace firmscan::unpack::detail
