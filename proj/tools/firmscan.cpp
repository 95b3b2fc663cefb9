// firmscan: firmware software-composition scanner.
//
// Subcommands cover the pipeline stages individually (corpus, unpack, libs,
// version, vuln, analyze) plus `run`, which chains them over a manifest and
// emits a machine-readable report.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "firmscan/analytics.hpp"
#include "firmscan/corpus.hpp"
#include "firmscan/error.hpp"
#include "firmscan/libid.hpp"
#include "firmscan/pipeline.hpp"
#include "firmscan/unpack.hpp"
#include "firmscan/version.hpp"
#include "firmscan/vulndb.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw firmscan::IoError("cannot read " + path.string());
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

int cmd_corpus(const fs::path& manifest, const fs::path& cache,
               bool list_rejected) {
    using namespace firmscan;
    auto loaded = corpus::load_manifest(manifest);
    std::vector<corpus::CorpusFilterDecision> rejected = loaded.dropped;
    auto records = corpus::dedup(loaded.records, rejected);
    std::vector<corpus::FirmwareRecord> kept;
    for (auto& decision : corpus::filter_unqualified(records)) {
        if (decision.kept) {
            kept.push_back(decision.record);
        } else {
            rejected.push_back(decision);
        }
    }
    std::size_t fetched = 0;
    std::size_t failed = 0;
    for (const auto& rec : kept) {
        try {
            corpus::fetch(rec, cache);
            ++fetched;
        } catch (const Error& e) {
            ++failed;
            std::cerr << "fetch failed: " << rec.firmware_name << ": "
                      << e.what() << "\n";
        }
    }
    std::cout << "records: " << loaded.records.size() + loaded.dropped.size()
              << ", kept: " << kept.size() << ", fetched: " << fetched
              << ", failed: " << failed << ", rejected: " << rejected.size()
              << "\n";
    if (list_rejected) {
        for (const auto& d : rejected) {
            std::cout << "rejected " << corpus::to_string(d.reason) << ": "
                      << (d.record.firmware_name.empty() ? d.record.url
                                                         : d.record.firmware_name)
                      << "\n";
        }
    }
    return failed == 0 ? 0 : 2;
}

int cmd_unpack(const fs::path& image, const fs::path& out_dir, int max_depth,
               bool entropy_report) {
    using namespace firmscan;
    const auto blob = read_file_bytes(image);
    if (entropy_report) {
        const auto verdict = unpack::classify_encryption(blob);
        json j;
        j["encrypted"] = verdict.encrypted;
        j["mean_entropy"] = verdict.mean_entropy;
        j["entropy_stddev"] = verdict.entropy_stddev;
        j["windows_sampled"] = verdict.windows_sampled;
        std::cout << j.dump(2) << "\n";
    }
    const auto tree = unpack::extract(blob, out_dir, max_depth);
    for (const auto& f : tree.files) {
        std::cout << f.rel_path << " (" << f.size << " bytes, depth "
                  << f.depth << ")\n";
    }
    for (const auto& entry : tree.extraction_log) {
        std::cerr << entry.action << " " << entry.locus << ": "
                  << entry.outcome << "\n";
    }
    if (tree.max_depth_reached) {
        std::cerr << "note: max extraction depth reached\n";
    }
    return 0;
}

int cmd_libs(const fs::path& tree_dir, const fs::path& dict_path) {
    using namespace firmscan;
    const auto dict = libid::TermDictionary::load(dict_path);
    const auto tree = unpack::tree_from_directory(tree_dir);
    json out = json::array();
    for (const auto& occ : libid::find_libraries(tree, dict, "")) {
        json j;
        j["canonical"] = occ.canonical;
        j["category"] = std::string(libid::to_string(occ.category));
        j["file_path"] = occ.file_path;
        j["matched_alias"] = occ.matched_alias;
        out.push_back(std::move(j));
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_version(const fs::path& file, const std::string& term,
                bool full_file) {
    using namespace firmscan;
    const auto bytes = read_file_bytes(file);
    const std::size_t limit =
        full_file ? bytes.size() : version::kDefaultRegionLimit;
    const auto evidence = version::extract_library_version(bytes, term, limit);
    if (!evidence) {
        std::cout << "no version string found\n";
        return 1;
    }
    json j;
    j["version"] = evidence->version.normalized();
    j["raw"] = evidence->version.raw;
    j["source_string"] = evidence->source_string;
    j["byte_offset"] = evidence->byte_offset;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_vuln(const fs::path& feed, const std::string& lib,
             const std::string& version_text, bool match_unversioned) {
    using namespace firmscan;
    const auto db = vulndb::VulnDatabase::load(feed);
    const auto v = version::parse_version(version_text);
    if (!v) {
        std::cerr << "not a parseable version: " << version_text << "\n";
        return 1;
    }
    vulndb::MatchOptions opts;
    opts.include_unversioned = match_unversioned;
    json out = json::array();
    for (const auto& f : vulndb::match(lib, *v, db, opts)) {
        json j;
        j["cve_id"] = f.cve_id;
        j["cvss_base"] = f.cvss_base;
        j["cwe_ids"] = f.cwe_ids;
        j["published"] = dates::format_date(f.cve_published);
        j["low_confidence"] = f.low_confidence;
        out.push_back(std::move(j));
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_analyze(const fs::path& findings, const fs::path& releases_path,
                const std::optional<fs::path>& exposure_path,
                const std::optional<fs::path>& out_path) {
    using namespace firmscan;
    std::ifstream in(findings);
    if (!in) {
        throw IoError("cannot read report: " + findings.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    auto report = pipeline::report_from_json_text(text);
    const auto releases = analytics::ReleaseIndex::load(releases_path);
    std::optional<analytics::FixtureExposureProvider> provider;
    if (exposure_path) {
        provider = analytics::FixtureExposureProvider::load(*exposure_path);
    }
    pipeline::recompute_corpus_analytics(report, releases,
                                         provider ? &*provider : nullptr);
    const std::string out_text = pipeline::report_to_json_text(report);
    if (out_path) {
        std::ofstream out(*out_path, std::ios::binary);
        out << out_text;
        if (!out) {
            throw IoError("cannot write " + out_path->string());
        }
    } else {
        std::cout << out_text;
    }
    return 0;
}

int cmd_run(firmscan::pipeline::PipelineConfig config) {
    using namespace firmscan;
    const auto report = pipeline::run_pipeline(config);
    if (config.output_path) {
        pipeline::emit_report(report, *config.output_path,
                              config.output_format);
    } else {
        std::cout << pipeline::report_to_json_text(report);
    }
    std::cerr << "firmware: " << report.totals.firmware_count
              << ", findings: " << report.totals.finding_count
              << ", distinct CVEs: " << report.totals.distinct_cve_count
              << ", quarantined: " << report.quarantined.size() << "\n";
    return report.quarantined.empty() ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"firmware software-composition scanner"};
    app.require_subcommand(1);

    // corpus
    auto* corpus_cmd =
        app.add_subcommand("corpus", "load, filter and fetch a manifest");
    fs::path manifest_path;
    fs::path cache_dir;
    bool list_rejected = false;
    corpus_cmd->add_option("--manifest", manifest_path, "manifest JSON")
        ->required();
    corpus_cmd->add_option("--cache", cache_dir, "image cache directory")
        ->required();
    corpus_cmd->add_flag("--list-rejected", list_rejected,
                         "print every rejected record");

    // unpack
    auto* unpack_cmd =
        app.add_subcommand("unpack", "extract a firmware image");
    fs::path image_path;
    fs::path out_dir;
    int max_depth = firmscan::unpack::kDefaultMaxDepth;
    bool entropy_report = false;
    unpack_cmd->add_option("image", image_path, "firmware image")->required();
    unpack_cmd->add_option("--out", out_dir, "extraction directory")
        ->required();
    unpack_cmd->add_option("--max-depth", max_depth, "max recursion depth");
    unpack_cmd->add_flag("--entropy-report", entropy_report,
                         "print the encryption verdict");

    // libs
    auto* libs_cmd =
        app.add_subcommand("libs", "identify libraries in an extracted tree");
    fs::path tree_dir;
    fs::path dict_path;
    libs_cmd->add_option("tree", tree_dir, "extracted filesystem root")
        ->required();
    libs_cmd->add_option("--dict", dict_path, "term dictionary JSON")
        ->required();

    // version
    auto* version_cmd =
        app.add_subcommand("version", "extract a version string from a binary");
    fs::path version_file;
    std::string term;
    bool full_file = false;
    version_cmd->add_option("file", version_file, "binary file")->required();
    version_cmd->add_option("--term", term, "library name to prefer");
    version_cmd->add_flag("--full-file", full_file,
                          "scan the whole file, not just the header region");

    // vuln
    auto* vuln_cmd =
        app.add_subcommand("vuln", "match a (library, version) against a feed");
    fs::path feed_path;
    std::string vuln_lib;
    std::string vuln_version;
    bool match_unversioned = false;
    vuln_cmd->add_option("--feed", feed_path, "vulnerability feed JSON")
        ->required();
    vuln_cmd->add_option("--lib", vuln_lib, "canonical library name")
        ->required();
    vuln_cmd->add_option("--version", vuln_version, "version text")
        ->required();
    vuln_cmd->add_flag("--match-unversioned", match_unversioned,
                       "also match CVEs without version information");

    // analyze
    auto* analyze_cmd =
        app.add_subcommand("analyze", "recompute analytics over a report");
    fs::path findings_path;
    fs::path releases_path;
    std::string exposure_opt;
    std::string analyze_out;
    analyze_cmd->add_option("--findings", findings_path, "report JSON from run")
        ->required();
    analyze_cmd->add_option("--releases", releases_path, "release index JSON")
        ->required();
    analyze_cmd->add_option("--exposure", exposure_opt, "exposure map JSON");
    analyze_cmd->add_option("--out", analyze_out, "output path (default stdout)");

    // run
    auto* run_cmd = app.add_subcommand("run", "full pipeline over a manifest");
    firmscan::pipeline::PipelineConfig config;
    std::string run_cache;
    std::string run_exposure;
    std::string run_out;
    std::string run_format = "json";
    run_cmd->add_option("--manifest", config.manifest_path, "manifest JSON")
        ->required();
    run_cmd->add_option("--cache", run_cache, "image cache directory");
    run_cmd->add_option("--dict", config.dict_path, "term dictionary JSON")
        ->required();
    run_cmd->add_option("--feed", config.feed_path, "vulnerability feed JSON")
        ->required();
    run_cmd->add_option("--releases", config.releases_path,
                        "release index JSON")
        ->required();
    run_cmd->add_option("--exposure", run_exposure, "exposure map JSON");
    run_cmd->add_option("--jobs", config.jobs, "worker count (0 = auto)");
    run_cmd->add_option("--max-depth", config.max_depth,
                        "max extraction depth");
    run_cmd->add_option("--region-limit", config.region_limit,
                        "header region byte budget for version scans");
    run_cmd->add_option("--out", run_out, "report output path");
    run_cmd->add_option("--format", run_format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    run_cmd->add_flag("--match-unversioned", config.match_unversioned,
                      "also match CVEs without version information");

    CLI11_PARSE(app, argc, argv);

    try {
        if (corpus_cmd->parsed()) {
            return cmd_corpus(manifest_path, cache_dir, list_rejected);
        }
        if (unpack_cmd->parsed()) {
            return cmd_unpack(image_path, out_dir, max_depth, entropy_report);
        }
        if (libs_cmd->parsed()) {
            return cmd_libs(tree_dir, dict_path);
        }
        if (version_cmd->parsed()) {
            return cmd_version(version_file, term, full_file);
        }
        if (vuln_cmd->parsed()) {
            return cmd_vuln(feed_path, vuln_lib, vuln_version,
                            match_unversioned);
        }
        if (analyze_cmd->parsed()) {
            return cmd_analyze(
                findings_path, releases_path,
                exposure_opt.empty() ? std::nullopt
                                     : std::optional<fs::path>(exposure_opt),
                analyze_out.empty() ? std::nullopt
                                    : std::optional<fs::path>(analyze_out));
        }
        if (run_cmd->parsed()) {
            // FIRMSCAN_CACHE overrides --cache.
            const char* env_cache = std::getenv("FIRMSCAN_CACHE");
            if (env_cache != nullptr && env_cache[0] != '\0') {
                config.cache_dir = env_cache;
            } else if (!run_cache.empty()) {
                config.cache_dir = run_cache;
            } else {
                std::cerr << "config error: --cache or FIRMSCAN_CACHE required\n";
                return 1;
            }
            if (!run_exposure.empty()) {
                config.exposure_path = run_exposure;
            }
            if (!run_out.empty()) {
                config.output_path = run_out;
            }
            config.output_format = run_format == "csv"
                                       ? firmscan::pipeline::OutputFormat::csv
                                       : firmscan::pipeline::OutputFormat::json;
            return cmd_run(std::move(config));
        }
    } catch (const firmscan::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const firmscan::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
