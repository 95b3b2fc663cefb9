#include "firmscan/unpack.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <vector>

#include "archive.hpp"
#include "firmscan/error.hpp"

namespace fs = std::filesystem;

namespace firmscan::unpack {

namespace {

struct MagicSpec {
    Format format;
    std::size_t anchor;             // magic position relative to container start
    std::vector<std::uint8_t> bytes;
};

// Bit-exact magic table. Checked in this order at each candidate position.
const std::vector<MagicSpec>& magic_table() {
    static const std::vector<MagicSpec> table = {
        {Format::elf, 0, {0x7f, 0x45, 0x4c, 0x46}},
        {Format::xz, 0, {0xfd, 0x37, 0x7a, 0x58, 0x5a, 0x00}},
        {Format::zip, 0, {0x50, 0x4b, 0x03, 0x04}},
        {Format::cramfs, 0, {0x45, 0x3d, 0xcd, 0x28}},
        {Format::squashfs, 0, {'h', 's', 'q', 's'}},
        {Format::squashfs, 0, {'s', 'q', 's', 'h'}},
        // First yaffs2 object header plus the all-0xFF spare-area bytes.
        {Format::yaffs2, 0, {0x03, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0xff, 0xff}},
        {Format::gzip, 0, {0x1f, 0x8b}},
        {Format::jffs2, 0, {0x85, 0x19}},
        {Format::lzma, 0, {0x5d, 0x00, 0x00}},
        {Format::tar, 257, {'u', 's', 't', 'a', 'r'}},
        {Format::ext2, 1080, {0x53, 0xef}},
    };
    return table;
}

bool is_container(Format f) {
    switch (f) {
    case Format::gzip:
    case Format::zip:
    case Format::tar:
    case Format::xz:
    case Format::lzma:
        return true;
    default:
        return false;
    }
}

bool overlaps(const std::vector<SignatureHit>& hits, std::size_t start,
              std::size_t len) {
    for (const auto& h : hits) {
        if (start < h.offset + h.magic_len && h.offset < start + len) {
            return true;
        }
    }
    return false;
}

std::string hex_offset(std::size_t offset) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%zx", offset);
    return buf;
}

// Rejects absolute paths and any ".." component; returns the cleaned
// relative path or nullopt.
std::optional<std::string> sanitize_member_path(std::string path) {
    std::replace(path.begin(), path.end(), '\\', '/');
    if (path.empty() || path.front() == '/') {
        return std::nullopt;
    }
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= path.size()) {
        const auto slash = path.find('/', start);
        const auto part = path.substr(
            start, slash == std::string::npos ? std::string::npos : slash - start);
        if (part == "..") {
            return std::nullopt;
        }
        if (!part.empty() && part != ".") {
            parts.push_back(part);
        }
        if (slash == std::string::npos) {
            break;
        }
        start = slash + 1;
    }
    if (parts.empty()) {
        return std::nullopt;
    }
    std::string out = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) {
        out += '/';
        out += parts[i];
    }
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

struct Extractor {
    fs::path root;
    int max_depth;
    FilesystemTree tree;

    void log(std::string action, std::string locus, std::string outcome) {
        tree.extraction_log.push_back(
            LogEntry{std::move(action), std::move(locus), std::move(outcome)});
    }

    // Writes one member file below dir; returns its root-relative path.
    std::optional<std::string> write_member(const fs::path& dir,
                                            const std::string& rel,
                                            std::span<const std::uint8_t> bytes,
                                            int depth) {
        const fs::path target = dir / rel;
        if (fs::exists(target)) {
            log("skip", rel, "name collision, first occurrence kept");
            return std::nullopt;
        }
        fs::create_directories(target.parent_path());
        std::ofstream out(target, std::ios::binary);
        if (!out) {
            throw IoError("cannot write " + target.string());
        }
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        out.close();
        const std::string root_rel =
            fs::relative(target, root).generic_string();
        tree.files.push_back(FileEntry{root_rel, bytes.size(), depth});
        return root_rel;
    }

    // Derives the output name for a single-stream decompression.
    static std::string stream_output_name(const std::string& source_name,
                                          const std::string& suggested,
                                          std::size_t offset) {
        std::string base;
        if (!suggested.empty()) {
            base = suggested;
        } else {
            base = source_name;
            bool stripped = false;
            for (std::string_view suffix : {".tgz", ".gz", ".xz", ".lzma"}) {
                if (base.size() > suffix.size() && base.ends_with(suffix)) {
                    base.resize(base.size() - suffix.size());
                    if (suffix == ".tgz") {
                        base += ".tar";
                    }
                    stripped = true;
                    break;
                }
            }
            if (!stripped) {
                base += ".dec";
            }
        }
        return offset == 0 ? base : base + "_" + hex_offset(offset);
    }

    // Scans one unit of bytes and extracts its containers into dir. Files
    // written here carry `depth`. Returns root-relative paths of new files.
    std::vector<std::string> process_unit(std::span<const std::uint8_t> data,
                                          const fs::path& dir,
                                          const std::string& unit_name,
                                          int depth,
                                          bool top_level) {
        std::vector<std::string> produced;
        const auto hits = scan_signatures(data);
        std::vector<std::pair<std::size_t, std::size_t>> covered;
        std::size_t covered_end = 0;
        bool extracted_any = false;
        for (const auto& hit : hits) {
            const std::string locus = unit_name + "@" + hex_offset(hit.offset);
            if (hit.offset < covered_end) {
                // Interior match (e.g. the next tar member header) inside an
                // already-consumed container.
                continue;
            }
            if (!is_container(hit.format)) {
                log("skip", locus,
                    std::string(format_name(hit.format)) +
                        " detected, not extracted");
                continue;
            }
            detail::ReadResult read;
            try {
                switch (hit.format) {
                case Format::gzip:
                    read = detail::read_gzip(data, hit.offset);
                    break;
                case Format::xz:
                    read = detail::read_xz(data, hit.offset);
                    break;
                case Format::lzma:
                    read = detail::read_lzma(data, hit.offset);
                    break;
                case Format::zip:
                    read = detail::read_zip(data, hit.offset);
                    break;
                case Format::tar:
                    read = detail::read_tar(data, hit.offset);
                    break;
                default:
                    continue;
                }
            } catch (const FormatError& e) {
                log("extract", locus,
                    std::string("failed: ") + e.what());
                continue;
            }
            for (const auto& warning : read.warnings) {
                log("extract", locus, warning);
            }
            for (auto& member : read.members) {
                if (member.is_dir) {
                    continue;
                }
                std::string rel;
                if (member.path.empty()) {
                    rel = stream_output_name(unit_name, read.suggested_name,
                                             hit.offset);
                } else {
                    auto safe = sanitize_member_path(member.path);
                    if (!safe) {
                        log("reject", member.path,
                            "path escapes extraction root");
                        continue;
                    }
                    rel = *safe;
                }
                if (auto root_rel = write_member(dir, rel, member.data, depth)) {
                    produced.push_back(*root_rel);
                }
            }
            covered.emplace_back(hit.offset, hit.offset + read.consumed);
            covered_end = std::max(covered_end, hit.offset + read.consumed);
            extracted_any = true;
            log("extract", locus,
                std::string(format_name(hit.format)) + " ok, " +
                    std::to_string(read.members.size()) + " member(s)");
        }
        if (extracted_any || top_level) {
            log_gaps(data.size(), covered, unit_name);
        }
        return produced;
    }

    void log_gaps(std::size_t size,
                  std::vector<std::pair<std::size_t, std::size_t>> covered,
                  const std::string& unit_name) {
        std::sort(covered.begin(), covered.end());
        std::size_t pos = 0;
        for (const auto& [from, to] : covered) {
            if (from > pos) {
                log("skip",
                    unit_name + "@[" + hex_offset(pos) + "," + hex_offset(from) + ")",
                    "unknown data skipped");
            }
            pos = std::max(pos, to);
        }
        if (pos < size) {
            log("skip",
                unit_name + "@[" + hex_offset(pos) + "," + hex_offset(size) + ")",
                "unknown data skipped");
        }
    }

    void run(std::span<const std::uint8_t> blob) {
        auto pending =
            process_unit(blob, root, "image", 1, /*top_level=*/true);
        int depth = 1;
        while (!pending.empty() && depth <= max_depth) {
            std::vector<std::string> next;
            for (const auto& rel : pending) {
                const auto bytes = read_file_bytes(root / rel);
                if (depth == max_depth) {
                    const auto hits = scan_signatures(bytes);
                    const bool more = std::any_of(
                        hits.begin(), hits.end(),
                        [](const SignatureHit& h) { return is_container(h.format); });
                    if (more) {
                        tree.max_depth_reached = true;
                        log("skip", rel, "max extraction depth reached");
                    }
                    continue;
                }
                const fs::path parent = (root / rel).parent_path();
                auto out = process_unit(bytes, parent, rel, depth + 1,
                                        /*top_level=*/false);
                next.insert(next.end(), out.begin(), out.end());
            }
            pending = std::move(next);
            ++depth;
        }
    }
};

} // namespace

std::string_view format_name(Format f) {
    switch (f) {
    case Format::gzip: return "gzip";
    case Format::zip: return "zip";
    case Format::tar: return "tar";
    case Format::lzma: return "lzma";
    case Format::xz: return "xz";
    case Format::squashfs: return "squashfs";
    case Format::jffs2: return "jffs2";
    case Format::ext2: return "ext2";
    case Format::yaffs2: return "yaffs2";
    case Format::cramfs: return "cramfs";
    case Format::elf: return "elf";
    }
    return "unknown";
}

std::vector<SignatureHit> scan_signatures(std::span<const std::uint8_t> blob) {
    std::vector<SignatureHit> hits;
    const auto& table = magic_table();
    for (std::size_t pos = 0; pos < blob.size(); ++pos) {
        for (const auto& spec : table) {
            const std::size_t magic_at = pos + spec.anchor;
            if (magic_at + spec.bytes.size() > blob.size()) {
                continue;
            }
            if (blob[magic_at] != spec.bytes[0] ||
                std::memcmp(blob.data() + magic_at, spec.bytes.data(),
                            spec.bytes.size()) != 0) {
                continue;
            }
            const std::size_t magic_len = spec.anchor + spec.bytes.size();
            if (overlaps(hits, pos, magic_len)) {
                continue;
            }
            hits.push_back(SignatureHit{pos, spec.format, magic_len});
            break;
        }
    }
    std::sort(hits.begin(), hits.end(),
              [](const SignatureHit& a, const SignatureHit& b) {
                  return a.offset < b.offset;
              });
    return hits;
}

double shannon_entropy(std::span<const std::uint8_t> window) {
    if (window.empty()) {
        throw DomainError("entropy of an empty window is undefined");
    }
    std::array<std::uint64_t, 256> counts{};
    for (std::uint8_t b : window) {
        ++counts[b];
    }
    const double n = static_cast<double>(window.size());
    double h = 0.0;
    for (std::uint64_t c : counts) {
        if (c == 0) {
            continue;
        }
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h;
}

EncryptionVerdict classify_encryption(std::span<const std::uint8_t> blob) {
    if (blob.empty()) {
        throw DomainError("cannot classify an empty blob");
    }
    std::vector<double> entropies;
    const std::size_t full_windows = blob.size() / kEntropyWindow;
    if (full_windows == 0) {
        entropies.push_back(shannon_entropy(blob));
    } else {
        for (std::size_t i = 0; i < full_windows; ++i) {
            entropies.push_back(
                shannon_entropy(blob.subspan(i * kEntropyWindow, kEntropyWindow)));
        }
    }
    double mean = 0.0;
    for (double e : entropies) {
        mean += e;
    }
    mean /= static_cast<double>(entropies.size());
    double var = 0.0;
    for (double e : entropies) {
        var += (e - mean) * (e - mean);
    }
    var /= static_cast<double>(entropies.size());

    EncryptionVerdict verdict;
    verdict.mean_entropy = mean;
    verdict.entropy_stddev = std::sqrt(var);
    verdict.windows_sampled = entropies.size();
    const bool signature_free = scan_signatures(blob).empty();
    verdict.encrypted = signature_free &&
                        mean > kEncryptedMeanThreshold &&
                        verdict.entropy_stddev < kEncryptedStddevThreshold;
    return verdict;
}

FilesystemTree extract(std::span<const std::uint8_t> blob,
                       const fs::path& workdir,
                       int max_depth) {
    if (max_depth < 1) {
        throw DomainError("max_depth must be >= 1");
    }
    std::error_code ec;
    fs::create_directories(workdir, ec);
    if (ec) {
        throw IoError("cannot create workdir " + workdir.string());
    }
    if (!fs::is_empty(workdir)) {
        throw IoError("workdir not empty: " + workdir.string());
    }
    Extractor ex{workdir, max_depth, FilesystemTree{workdir, {}, {}, false}};
    ex.run(blob);
    return std::move(ex.tree);
}

FilesystemTree tree_from_directory(const fs::path& root) {
    if (!fs::is_directory(root)) {
        throw IoError("not a directory: " + root.string());
    }
    FilesystemTree tree;
    tree.root = root;
    std::vector<FileEntry> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        files.push_back(FileEntry{
            fs::relative(entry.path(), root).generic_string(),
            entry.file_size(), 0});
    }
    std::sort(files.begin(), files.end(),
              [](const FileEntry& a, const FileEntry& b) {
                  return a.rel_path < b.rel_path;
              });
    tree.files = std::move(files);
    return tree;
}

std::string_view to_string(FilesystemType v) {
    switch (v) {
    case FilesystemType::squashfs: return "squashfs";
    case FilesystemType::jffs2: return "jffs2";
    case FilesystemType::yaffs2: return "yaffs2";
    case FilesystemType::ext2: return "ext2";
    case FilesystemType::cramfs: return "cramfs";
    case FilesystemType::unknown: return "unknown";
    }
    return "unknown";
}

std::string_view to_string(Architecture v) {
    switch (v) {
    case Architecture::mips: return "mips";
    case Architecture::arm: return "arm";
    case Architecture::x86: return "x86";
    case Architecture::x86_64: return "x86_64";
    case Architecture::powerpc: return "powerpc";
    case Architecture::unknown: return "unknown";
    }
    return "unknown";
}

std::string_view to_string(OsFamily v) {
    switch (v) {
    case OsFamily::linux_os: return "linux";
    case OsFamily::vxworks: return "vxworks";
    case OsFamily::cisco_os: return "cisco_os";
    case OsFamily::windows_ce: return "windows_ce";
    case OsFamily::minix: return "minix";
    case OsFamily::unknown: return "unknown";
    }
    return "unknown";
}

namespace {

std::optional<std::size_t> find_bytes(std::span<const std::uint8_t> haystack,
                                      std::string_view needle) {
    if (needle.empty() || haystack.size() < needle.size()) {
        return std::nullopt;
    }
    const auto* found = static_cast<const std::uint8_t*>(
        memmem(haystack.data(), haystack.size(), needle.data(), needle.size()));
    if (found == nullptr) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(found - haystack.data());
}

Architecture arch_from_elf(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 20 || std::memcmp(bytes.data(), "\x7f\x45\x4c\x46", 4) != 0) {
        return Architecture::unknown;
    }
    const bool big_endian = bytes[5] == 2;
    const std::uint16_t machine = big_endian
        ? static_cast<std::uint16_t>(bytes[18] << 8 | bytes[19])
        : static_cast<std::uint16_t>(bytes[18] | bytes[19] << 8);
    switch (machine) {
    case 0x08: return Architecture::mips;
    case 0x28: return Architecture::arm;
    case 0x03: return Architecture::x86;
    case 0x3e: return Architecture::x86_64;
    case 0x14: return Architecture::powerpc;
    default: return Architecture::unknown;
    }
}

} // namespace

FirmwareTraits detect_traits(std::span<const std::uint8_t> blob,
                             const FilesystemTree& tree) {
    FirmwareTraits traits;
    const auto hits = scan_signatures(blob);
    bool elf_in_blob = false;
    for (const auto& hit : hits) {
        if (hit.format == Format::elf) {
            elf_in_blob = true;
        }
        if (traits.filesystem_type == FilesystemType::unknown) {
            switch (hit.format) {
            case Format::squashfs:
                traits.filesystem_type = FilesystemType::squashfs;
                break;
            case Format::jffs2:
                traits.filesystem_type = FilesystemType::jffs2;
                break;
            case Format::yaffs2:
                traits.filesystem_type = FilesystemType::yaffs2;
                break;
            case Format::ext2:
                traits.filesystem_type = FilesystemType::ext2;
                break;
            case Format::cramfs:
                traits.filesystem_type = FilesystemType::cramfs;
                break;
            default:
                break;
            }
        }
    }

    bool elf_in_tree = false;
    for (const auto& file : tree.files) {
        // Only the ELF identification header is needed.
        std::ifstream in(tree.root / file.rel_path, std::ios::binary);
        if (!in) {
            continue;
        }
        std::array<std::uint8_t, 64> header{};
        in.read(reinterpret_cast<char*>(header.data()), header.size());
        const auto got = static_cast<std::size_t>(in.gcount());
        if (got >= 4 &&
            std::memcmp(header.data(), "\x7f\x45\x4c\x46", 4) == 0) {
            elf_in_tree = true;
            traits.architecture = arch_from_elf(
                std::span<const std::uint8_t>(header.data(), got));
            break;
        }
    }

    struct Marker {
        std::string_view text;
        OsFamily family;
    };
    static constexpr Marker markers[] = {
        {"Linux version", OsFamily::linux_os},
        {"VxWorks", OsFamily::vxworks},
        {"Windows CE", OsFamily::windows_ce},
        {"Minix", OsFamily::minix},
    };
    std::size_t best_offset = SIZE_MAX;
    for (const auto& marker : markers) {
        if (auto at = find_bytes(blob, marker.text); at && *at < best_offset) {
            best_offset = *at;
            traits.os_family = marker.family;
        }
    }
    if (traits.os_family == OsFamily::unknown) {
        const bool fs_is_linuxish =
            traits.filesystem_type == FilesystemType::squashfs ||
            traits.filesystem_type == FilesystemType::jffs2;
        if ((elf_in_tree || elf_in_blob) && fs_is_linuxish) {
            traits.os_family = OsFamily::linux_os;
        }
    }
    return traits;
}

} // namespace firmscan::unpack
