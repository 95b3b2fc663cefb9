#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "firmscan/unpack.hpp"

namespace firmscan::libid {

enum class Category { cmd, builtin, unix_tool, open_source };

std::string_view to_string(Category c);
std::optional<Category> category_from_string(std::string_view s);

struct DictEntry {
    std::string canonical;
    Category category = Category::open_source;

    bool operator==(const DictEntry&) const = default;
};

/// Alias -> canonical library mapping. Every canonical name is its own
/// alias; aliases are unique across entries.
class TermDictionary {
public:
    static TermDictionary load(const std::filesystem::path& path);
    static TermDictionary from_json_text(std::string_view text);

    std::optional<DictEntry> lookup(std::string_view alias) const;
    std::size_t alias_count() const { return alias_index_.size(); }
    std::size_t canonical_count() const { return canonical_count_; }

private:
    std::map<std::string, DictEntry, std::less<>> alias_index_;
    std::size_t canonical_count_ = 0;
};

struct LibraryOccurrence {
    std::string firmware_checksum;
    std::string canonical;
    Category category = Category::open_source;
    std::string file_path;      // relative to the tree root
    std::string matched_alias;

    bool operator==(const LibraryOccurrence&) const = default;
};

/// Walks the tree and reports every regular file whose normalized basename
/// resolves through the dictionary. Normalization: lowercase, then try the
/// name as-is, then `lib<name>.so[.N]*` as `<name>`, then iteratively strip
/// the final extension. Matching is exact, never substring.
std::vector<LibraryOccurrence>
find_libraries(const unpack::FilesystemTree& tree,
               const TermDictionary& dict,
               std::string_view firmware_checksum);

} // namespace firmscan::libid
