#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace firmscan::unpack {

enum class Format {
    gzip,
    zip,
    tar,
    lzma,
    xz,
    squashfs,
    jffs2,
    ext2,
    yaffs2,
    cramfs,
    elf,
};

std::string_view format_name(Format f);

/// One magic-signature match. offset is where the container starts; for
/// formats whose magic sits inside the header (tar at +257, ext2 at +1080)
/// the magic bytes compare equal at offset + anchor, and magic_len spans
/// from the container start through the end of the magic.
struct SignatureHit {
    std::size_t offset = 0;
    Format format = Format::gzip;
    std::size_t magic_len = 0;

    bool operator==(const SignatureHit&) const = default;
};

/// All non-overlapping magic matches in ascending offset order.
std::vector<SignatureHit> scan_signatures(std::span<const std::uint8_t> blob);

/// Shannon entropy in bits/byte, in [0, 8]. Throws DomainError on an empty
/// window.
double shannon_entropy(std::span<const std::uint8_t> window);

struct EncryptionVerdict {
    bool encrypted = false;
    double mean_entropy = 0.0;
    double entropy_stddev = 0.0;
    std::size_t windows_sampled = 0;

    bool operator==(const EncryptionVerdict&) const = default;
};

inline constexpr std::size_t kEntropyWindow = 4096;
inline constexpr double kEncryptedMeanThreshold = 7.5;
inline constexpr double kEncryptedStddevThreshold = 0.3;

/// Samples non-overlapping 4096-byte windows across the blob. Encrypted
/// means: no known signature anywhere, mean entropy above 7.5 and window
/// stddev below 0.3. A blob shorter than one window is one window of its
/// actual length. Deterministic; no random sampling.
EncryptionVerdict classify_encryption(std::span<const std::uint8_t> blob);

struct FileEntry {
    std::string rel_path;       // forward-slash path relative to root
    std::uint64_t size = 0;
    int depth = 0;              // container layers peeled to produce it

    bool operator==(const FileEntry&) const = default;
};

struct LogEntry {
    std::string action;   // "extract", "skip", "reject", ...
    std::string locus;    // offset range or member path
    std::string outcome;

    bool operator==(const LogEntry&) const = default;
};

struct FilesystemTree {
    std::filesystem::path root;
    std::vector<FileEntry> files;
    std::vector<LogEntry> extraction_log;
    bool max_depth_reached = false;
};

inline constexpr int kDefaultMaxDepth = 8;

/// Converts a firmware blob into a directory tree. Every signature hit of a
/// supported container (gzip, zip, tar, xz, lzma) is extracted into workdir
/// and the produced files are recursively processed until fixpoint or
/// max_depth. Unknown data between containers is skipped and logged. Member
/// paths that are absolute or contain ".." are rejected, never written.
FilesystemTree extract(std::span<const std::uint8_t> blob,
                       const std::filesystem::path& workdir,
                       int max_depth = kDefaultMaxDepth);

/// Builds a FilesystemTree view over an already-extracted directory, for
/// trees produced outside extract() (pre-extracted fixtures, `firmscan libs`
/// on a directory). Files get depth 0 and deterministic (sorted) order.
FilesystemTree tree_from_directory(const std::filesystem::path& root);

enum class FilesystemType { squashfs, jffs2, yaffs2, ext2, cramfs, unknown };
enum class Architecture { mips, arm, x86, x86_64, powerpc, unknown };
enum class OsFamily { linux_os, vxworks, cisco_os, windows_ce, minix, unknown };

std::string_view to_string(FilesystemType v);
std::string_view to_string(Architecture v);
std::string_view to_string(OsFamily v);

struct FirmwareTraits {
    FilesystemType filesystem_type = FilesystemType::unknown;
    Architecture architecture = Architecture::unknown;
    OsFamily os_family = OsFamily::unknown;

    bool operator==(const FirmwareTraits&) const = default;
};

/// Filesystem type from container magic, CPU architecture from the ELF
/// e_machine of the first executable in the tree, OS family from marker
/// strings (falling back to Linux when an ELF plus squashfs/jffs2 is seen).
FirmwareTraits detect_traits(std::span<const std::uint8_t> blob,
                             const FilesystemTree& tree);

} // namespace firmscan::unpack
