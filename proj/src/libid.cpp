#include "firmscan/libid.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>

#include <json.hpp>

#include "firmscan/error.hpp"

namespace firmscan::libid {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

// lib<name>.so, lib<name>.so.1, lib<name>.so.1.2.3 ...
const std::regex& shared_object_regex() {
    static const std::regex re(R"(^lib(.+?)\.so(\.\d+)*$)");
    return re;
}

} // namespace

std::string_view to_string(Category c) {
    switch (c) {
    case Category::cmd: return "cmd";
    case Category::builtin: return "builtin";
    case Category::unix_tool: return "unix_tool";
    case Category::open_source: return "open_source";
    }
    return "open_source";
}

std::optional<Category> category_from_string(std::string_view s) {
    if (s == "cmd") return Category::cmd;
    if (s == "builtin") return Category::builtin;
    if (s == "unix_tool") return Category::unix_tool;
    if (s == "open_source") return Category::open_source;
    return std::nullopt;
}

TermDictionary TermDictionary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read dictionary: " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return from_json_text(text);
}

TermDictionary TermDictionary::from_json_text(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("dictionary is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw FormatError("dictionary top level must be a JSON object");
    }
    TermDictionary dict;
    auto insert = [&dict](const std::string& alias, const DictEntry& entry) {
        const std::string key = lower(alias);
        auto [it, inserted] = dict.alias_index_.emplace(key, entry);
        if (!inserted && it->second.canonical != entry.canonical) {
            throw FormatError("alias '" + key + "' claimed by both '" +
                              it->second.canonical + "' and '" +
                              entry.canonical + "'");
        }
    };
    for (const auto& [canonical, body] : doc.items()) {
        if (!body.is_object() || !body.contains("category")) {
            throw FormatError("dictionary entry '" + canonical +
                              "' must be an object with a category");
        }
        const auto category =
            category_from_string(body["category"].get<std::string>());
        if (!category) {
            throw FormatError("dictionary entry '" + canonical +
                              "' has unknown category");
        }
        DictEntry entry{lower(canonical), *category};
        insert(canonical, entry);
        if (body.contains("aliases")) {
            for (const auto& alias : body["aliases"]) {
                insert(alias.get<std::string>(), entry);
            }
        }
        ++dict.canonical_count_;
    }
    return dict;
}

std::optional<DictEntry> TermDictionary::lookup(std::string_view alias) const {
    const auto it = alias_index_.find(lower(alias));
    if (it == alias_index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<LibraryOccurrence>
find_libraries(const unpack::FilesystemTree& tree,
               const TermDictionary& dict,
               std::string_view firmware_checksum) {
    std::vector<LibraryOccurrence> out;
    for (const auto& file : tree.files) {
        const auto slash = file.rel_path.find_last_of('/');
        const std::string basename = lower(
            slash == std::string::npos ? file.rel_path
                                       : file.rel_path.substr(slash + 1));

        // Candidate aliases: the basename itself, the shared-object stem,
        // then the basename with trailing extensions peeled one at a time.
        std::vector<std::string> candidates{basename};
        std::smatch m;
        if (std::regex_match(basename, m, shared_object_regex())) {
            candidates.push_back(m[1].str());
        }
        std::string stripped = basename;
        while (true) {
            const auto dot = stripped.find_last_of('.');
            if (dot == std::string::npos || dot == 0) {
                break;
            }
            stripped.resize(dot);
            candidates.push_back(stripped);
        }

        for (const auto& candidate : candidates) {
            if (auto entry = dict.lookup(candidate)) {
                out.push_back(LibraryOccurrence{
                    std::string(firmware_checksum), entry->canonical,
                    entry->category, file.rel_path, candidate});
                break;
            }
        }
    }
    return out;
}

} // namespace firmscan::libid
