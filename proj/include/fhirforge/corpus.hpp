// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fhirforge/common.hpp"
#include "fhirforge/fhir/io.hpp"
#include "fhirforge/fhir/validate.hpp"

namespace fhirforge::corpus {

struct CorpusDocument {
    std::string id;
    std::string text;            // UTF-8 clinical letter, non-empty
    std::string language = "de"; // BCP-47 tag
    std::optional<std::string> baseline_path;
    std::optional<fhir::Bundle> baseline;  // parsed + validated eagerly
};

namespace detail {

inline Result<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return make_error("io", "cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Load and validate one baseline bundle; errors name the file and the
/// first validation issue.
inline Result<fhir::Bundle> load_baseline(const std::string& path) {
    auto text = read_file(path);
    if (!text.ok()) return text.error();
    auto parsed = fhir::parse_bundle(std::string_view(text.value()));
    if (!parsed.ok())
        return make_error(parsed.error().kind, path + ": " + parsed.error().message);
    const auto issues = fhir::validate(parsed.value().value);
    if (fhir::has_errors(issues)) {
        for (const auto& issue : issues)
            if (issue.severity == fhir::Severity::error)
                return make_error("invalid-baseline",
                                  path + ": " + fhir::render_issue(issue));
    }
    return std::move(parsed.value().value);
}

/// Minimal manifest reader: `[doc-id]` section headers followed by
/// `key = value` lines (text, baseline, language); `#` comments ignored.
struct ManifestEntry {
    std::string text_file;
    std::string baseline_file;
    std::string language;
};

inline Result<std::map<std::string, ManifestEntry>> parse_manifest(const std::string& content,
                                                                   const std::string& origin) {
    std::map<std::string, ManifestEntry> entries;
    std::istringstream in(content);
    std::string line;
    std::string current;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = strings::trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[' && s.back() == ']') {
            current = strings::trim(s.substr(1, s.size() - 2));
            if (current.empty())
                return make_error("bad-format",
                                  origin + ":" + std::to_string(lineno) + ": empty section id");
            entries[current];
            continue;
        }
        const size_t eq = s.find('=');
        if (eq == std::string::npos || current.empty())
            return make_error("bad-format", origin + ":" + std::to_string(lineno) +
                                                ": expected `key = value` inside a [section]");
        const std::string key = strings::trim(s.substr(0, eq));
        std::string value = strings::trim(s.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        if (key == "text")
            entries[current].text_file = value;
        else if (key == "baseline")
            entries[current].baseline_file = value;
        else if (key == "language")
            entries[current].language = value;
        else
            return make_error("bad-format", origin + ":" + std::to_string(lineno) +
                                                ": unknown manifest key '" + key + "'");
    }
    return entries;
}

}  // namespace detail

/// Load every document in a corpus directory. With a `corpus.toml`
/// manifest present, the manifest is authoritative; otherwise every
/// `*.txt` file becomes a document and `<id>.baseline.json` siblings are
/// picked up automatically. Documents come back sorted by id; baselines
/// are validated eagerly.
inline Result<std::vector<CorpusDocument>> load_corpus(const std::string& directory) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(directory, ec))
        return make_error("io", "corpus directory not found: " + directory);

    std::vector<CorpusDocument> docs;
    const fs::path root(directory);
    const fs::path manifest_path = root / "corpus.toml";

    if (fs::exists(manifest_path, ec)) {
        auto content = detail::read_file(manifest_path.string());
        if (!content.ok()) return content.error();
        auto manifest = detail::parse_manifest(content.value(), manifest_path.string());
        if (!manifest.ok()) return manifest.error();
        for (const auto& [id, entry] : manifest.value()) {
            CorpusDocument doc;
            doc.id = id;
            if (entry.text_file.empty())
                return make_error("bad-format",
                                  manifest_path.string() + ": [" + id + "] has no text file");
            auto text = detail::read_file((root / entry.text_file).string());
            if (!text.ok()) return text.error();
            doc.text = std::move(text.value());
            if (!entry.language.empty()) doc.language = entry.language;
            if (!entry.baseline_file.empty()) {
                const std::string bp = (root / entry.baseline_file).string();
                auto baseline = detail::load_baseline(bp);
                if (!baseline.ok()) return baseline.error();
                doc.baseline_path = bp;
                doc.baseline = std::move(baseline.value());
            }
            if (strings::trim(doc.text).empty())
                return make_error("bad-format", "document '" + id + "' has empty text");
            docs.push_back(std::move(doc));
        }
    } else {
        for (const auto& entry : fs::directory_iterator(root)) {
            if (!entry.is_regular_file()) continue;
            const fs::path p = entry.path();
            if (p.extension() != ".txt") continue;
            CorpusDocument doc;
            doc.id = p.stem().string();
            auto text = detail::read_file(p.string());
            if (!text.ok()) return text.error();
            doc.text = std::move(text.value());
            if (strings::trim(doc.text).empty())
                return make_error("bad-format", "document '" + doc.id + "' has empty text");
            const fs::path baseline = root / (doc.id + ".baseline.json");
            if (fs::exists(baseline, ec)) {
                auto b = detail::load_baseline(baseline.string());
                if (!b.ok()) return b.error();
                doc.baseline_path = baseline.string();
                doc.baseline = std::move(b.value());
            }
            docs.push_back(std::move(doc));
        }
    }

    std::sort(docs.begin(), docs.end(),
              [](const CorpusDocument& a, const CorpusDocument& b) { return a.id < b.id; });
    return docs;
}

inline std::optional<CorpusDocument> find_document(const std::vector<CorpusDocument>& docs,
                                                   std::string_view id) {
    for (const auto& d : docs)
        if (d.id == id) return d;
    return std::nullopt;
}

}  // namespace fhirforge::corpus
