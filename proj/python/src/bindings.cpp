// Python bindings for the core scanning operations.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "firmscan/analytics.hpp"
#include "firmscan/error.hpp"
#include "firmscan/libid.hpp"
#include "firmscan/unpack.hpp"
#include "firmscan/version.hpp"
#include "firmscan/vulndb.hpp"

namespace py = pybind11;
using namespace firmscan;

namespace {

std::vector<std::uint8_t> as_bytes(const py::bytes& data) {
    const std::string_view view = data;
    return std::vector<std::uint8_t>(view.begin(), view.end());
}

version::Version parse_or_throw(const std::string& text) {
    auto v = version::parse_version(text);
    if (!v) {
        throw py::value_error("not a parseable version: " + text);
    }
    return *v;
}

version::Op op_from_string(const std::string& name) {
    if (name == "eq" || name == "==") return version::Op::eq;
    if (name == "ge" || name == ">=") return version::Op::ge;
    if (name == "le" || name == "<=") return version::Op::le;
    if (name == "tilde" || name == "~") return version::Op::tilde;
    if (name == "caret" || name == "^") return version::Op::caret;
    throw py::value_error("unknown operator: " + name);
}

} // namespace

PYBIND11_MODULE(_firmscan, m) {
    m.doc() = "firmware software-composition scanning primitives";

    py::register_exception<Error>(m, "FirmscanError");

    py::class_<version::Version>(m, "Version")
        .def_readonly("numeric", &version::Version::numeric)
        .def_readonly("prerelease", &version::Version::prerelease)
        .def_readonly("raw", &version::Version::raw)
        .def_property_readonly("letter",
                               [](const version::Version& v) {
                                   return v.letter
                                              ? py::object(py::str(
                                                    std::string(1, *v.letter)))
                                              : py::object(py::none());
                               })
        .def("normalized", &version::Version::normalized)
        .def("__repr__", [](const version::Version& v) {
            return "<Version " + v.normalized() + ">";
        });

    py::class_<unpack::EncryptionVerdict>(m, "EncryptionVerdict")
        .def_readonly("encrypted", &unpack::EncryptionVerdict::encrypted)
        .def_readonly("mean_entropy", &unpack::EncryptionVerdict::mean_entropy)
        .def_readonly("entropy_stddev",
                      &unpack::EncryptionVerdict::entropy_stddev)
        .def_readonly("windows_sampled",
                      &unpack::EncryptionVerdict::windows_sampled);

    py::class_<vulndb::CpeName>(m, "CpeName")
        .def_property_readonly("part",
                               [](const vulndb::CpeName& c) {
                                   return std::string(1, c.part);
                               })
        .def_readonly("vendor", &vulndb::CpeName::vendor)
        .def_readonly("product", &vulndb::CpeName::product)
        .def_readonly("version_text", &vulndb::CpeName::version_text)
        .def_readonly("wildcard_version", &vulndb::CpeName::wildcard_version)
        .def_readonly("raw", &vulndb::CpeName::raw);

    py::class_<vulndb::Finding>(m, "Finding")
        .def_readonly("library", &vulndb::Finding::library)
        .def_readonly("cve_id", &vulndb::Finding::cve_id)
        .def_readonly("cvss_base", &vulndb::Finding::cvss_base)
        .def_readonly("cwe_ids", &vulndb::Finding::cwe_ids)
        .def_readonly("low_confidence", &vulndb::Finding::low_confidence)
        .def_property_readonly("version",
                               [](const vulndb::Finding& f) {
                                   return f.version.normalized();
                               })
        .def_property_readonly("published", [](const vulndb::Finding& f) {
            return dates::format_date(f.cve_published);
        });

    py::class_<vulndb::VulnDatabase>(m, "VulnDatabase")
        .def_static("load", &vulndb::VulnDatabase::load, py::arg("path"))
        .def_static("from_json",
                    [](const std::string& text) {
                        return vulndb::VulnDatabase::from_json_text(text);
                    })
        .def_property_readonly("entry_count",
                               [](const vulndb::VulnDatabase& db) {
                                   return db.entries().size();
                               })
        .def_property_readonly("malformed_count",
                               &vulndb::VulnDatabase::malformed_count)
        .def(
            "match",
            [](const vulndb::VulnDatabase& db, const std::string& library,
               const std::string& version_text, bool include_unversioned) {
                vulndb::MatchOptions opts;
                opts.include_unversioned = include_unversioned;
                return vulndb::match(library, parse_or_throw(version_text), db,
                                     opts);
            },
            py::arg("library"), py::arg("version"),
            py::arg("include_unversioned") = false);

    m.def(
        "shannon_entropy",
        [](const py::bytes& window) {
            return unpack::shannon_entropy(as_bytes(window));
        },
        py::arg("window"), "Shannon entropy in bits/byte, in [0, 8].");

    m.def(
        "classify_encryption",
        [](const py::bytes& blob) {
            return unpack::classify_encryption(as_bytes(blob));
        },
        py::arg("blob"));

    m.def(
        "scan_signatures",
        [](const py::bytes& blob) {
            py::list out;
            for (const auto& hit : unpack::scan_signatures(as_bytes(blob))) {
                out.append(py::make_tuple(
                    hit.offset, std::string(unpack::format_name(hit.format)),
                    hit.magic_len));
            }
            return out;
        },
        py::arg("blob"), "Magic matches as (offset, format, magic_len).");

    m.def(
        "extract",
        [](const py::bytes& blob, const std::filesystem::path& workdir,
           int max_depth) {
            const auto tree =
                unpack::extract(as_bytes(blob), workdir, max_depth);
            py::list files;
            for (const auto& f : tree.files) {
                files.append(py::make_tuple(f.rel_path, f.size, f.depth));
            }
            py::dict out;
            out["root"] = tree.root.string();
            out["files"] = files;
            out["max_depth_reached"] = tree.max_depth_reached;
            return out;
        },
        py::arg("blob"), py::arg("workdir"),
        py::arg("max_depth") = unpack::kDefaultMaxDepth);

    m.def(
        "extract_strings",
        [](const py::bytes& data, std::size_t region_limit,
           std::size_t min_len) {
            return version::extract_strings(as_bytes(data), region_limit,
                                            min_len);
        },
        py::arg("data"), py::arg("region_limit") = version::kDefaultRegionLimit,
        py::arg("min_len") = version::kDefaultMinLength);

    m.def(
        "parse_version",
        [](const std::string& text) -> py::object {
            auto v = version::parse_version(text);
            return v ? py::cast(*v) : py::object(py::none());
        },
        py::arg("text"), "First version token in the text, or None.");

    m.def(
        "extract_library_version",
        [](const py::bytes& data, const std::string& term,
           std::size_t region_limit) -> py::object {
            const auto evidence = version::extract_library_version(
                as_bytes(data), term, region_limit);
            if (!evidence) {
                return py::none();
            }
            py::dict out;
            out["version"] = evidence->version.normalized();
            out["source_string"] = evidence->source_string;
            out["byte_offset"] = evidence->byte_offset;
            return out;
        },
        py::arg("data"), py::arg("term") = std::string{},
        py::arg("region_limit") = version::kDefaultRegionLimit);

    m.def(
        "compare",
        [](const std::string& a, const std::string& b) {
            switch (version::compare(parse_or_throw(a), parse_or_throw(b))) {
            case version::Ordering::less: return -1;
            case version::Ordering::greater: return 1;
            default: return 0;
            }
        },
        py::arg("a"), py::arg("b"),
        "-1, 0 or 1 under the version total order.");

    m.def(
        "satisfies",
        [](const std::string& v, const std::string& op,
           const std::string& bound) {
            return version::satisfies(
                parse_or_throw(v),
                {op_from_string(op), parse_or_throw(bound)});
        },
        py::arg("version"), py::arg("op"), py::arg("bound"));

    m.def("parse_cpe",
          [](const std::string& s) { return vulndb::parse_cpe(s); },
          py::arg("text"));
}
