// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "httplib.h"

#include "fhirforge/common.hpp"

namespace fhirforge::term {

struct ValueSetRef {
    std::string url;          // canonical URI, unique within the configured set
    std::string name;         // short label, e.g. "severity"
    std::string description;  // one-line usage hint shown in the agent prompt
    bool operator==(const ValueSetRef&) const = default;
};

struct TermQuery {
    std::string text;
    ValueSetRef valueset;
    int limit = 10;
};

struct ConceptMatch {
    std::string system;
    std::string code;
    std::string display;
    double score = 0.0;
    bool operator==(const ConceptMatch&) const = default;
};

struct Concept {
    std::string system;
    std::string code;
    std::string display;
    bool operator==(const Concept&) const = default;
};

struct LocalIndex {
    std::vector<Concept> rows;
};

/// Reason the query violates its invariants, or nullopt if well-formed.
inline std::optional<std::string> term_query_problem(const TermQuery& q) {
    if (strings::trim(q.text).empty()) return "query text is empty";
    if (q.limit < 1) return "limit must be positive";
    if (q.limit > 50) return "limit must be at most 50";
    return std::nullopt;
}

// ---- lexical scoring ------------------------------------------------------
// score = 0.7 * (query-token coverage in the display)
//       + 0.2 * (character-trigram Dice coefficient)
//       + 0.1 * (display-starts-with-query bonus)
// over lowercased, diacritic-folded text. Deterministic and dependency-free.

/// Lowercase + fold common Latin diacritics to ASCII; any other non-ASCII
/// byte becomes a space (acts as a token separator). Runs of separator
/// characters collapse to single spaces; result is trimmed.
inline std::string normalize_term(std::string_view in) {
    std::string folded;
    folded.reserve(in.size());
    for (size_t i = 0; i < in.size(); ++i) {
        const unsigned char c = static_cast<unsigned char>(in[i]);
        if (c < 0x80) {
            if (c >= 'A' && c <= 'Z')
                folded.push_back(static_cast<char>(c - 'A' + 'a'));
            else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'))
                folded.push_back(static_cast<char>(c));
            else
                folded.push_back(' ');
            continue;
        }
        if (c == 0xC3 && i + 1 < in.size()) {
            const unsigned char d = static_cast<unsigned char>(in[++i]);
            const unsigned char low = static_cast<unsigned char>(d >= 0xA0 ? d - 0x20 : d);
            switch (low) {
                case 0x80: case 0x81: case 0x82: case 0x83: case 0x84: case 0x85:
                    folded.push_back('a'); break;
                case 0x86: folded += "ae"; break;
                case 0x87: folded.push_back('c'); break;
                case 0x88: case 0x89: case 0x8A: case 0x8B: folded.push_back('e'); break;
                case 0x8C: case 0x8D: case 0x8E: case 0x8F: folded.push_back('i'); break;
                case 0x90: folded.push_back('d'); break;
                case 0x91: folded.push_back('n'); break;
                case 0x92: case 0x93: case 0x94: case 0x95: case 0x96: case 0x98:
                    folded.push_back('o'); break;
                case 0x99: case 0x9A: case 0x9B: case 0x9C: folded.push_back('u'); break;
                case 0x9D: folded.push_back('y'); break;
                default:
                    if (d == 0x9F) folded += "ss";    // ß (no uppercase pair at 0x7F offset)
                    else if (d == 0xBF) folded.push_back('y');  // ÿ
                    else folded.push_back(' ');
                    break;
            }
            continue;
        }
        // Other multibyte sequences: skip continuation bytes, emit separator.
        folded.push_back(' ');
        while (i + 1 < in.size() && (static_cast<unsigned char>(in[i + 1]) & 0xC0) == 0x80) ++i;
    }
    // Collapse separator runs and trim.
    std::string out;
    out.reserve(folded.size());
    for (char ch : folded) {
        if (ch == ' ') {
            if (!out.empty() && out.back() != ' ') out.push_back(' ');
        } else {
            out.push_back(ch);
        }
    }
    if (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

inline std::vector<std::string> term_tokens(std::string_view in) {
    return strings::split(normalize_term(in), ' ');
}

/// Set of byte trigrams of the normalized string; a string shorter than
/// three bytes contributes itself as a single gram.
inline std::set<std::string> term_trigrams(const std::string& normalized) {
    std::set<std::string> grams;
    if (normalized.empty()) return grams;
    if (normalized.size() < 3) {
        grams.insert(normalized);
        return grams;
    }
    for (size_t i = 0; i + 3 <= normalized.size(); ++i) grams.insert(normalized.substr(i, 3));
    return grams;
}

inline double trigram_dice(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() || b.empty()) return 0.0;
    size_t common = 0;
    for (const auto& g : a)
        if (b.contains(g)) ++common;
    return 2.0 * static_cast<double>(common) / static_cast<double>(a.size() + b.size());
}

inline double term_score(std::string_view query, std::string_view display) {
    const std::string nq = normalize_term(query);
    const std::string nd = normalize_term(display);
    if (nq.empty() || nd.empty()) return 0.0;

    const auto q_tokens = strings::split(nq, ' ');
    const auto d_tokens = strings::split(nd, ' ');
    size_t covered = 0;
    for (const auto& qt : q_tokens)
        if (std::find(d_tokens.begin(), d_tokens.end(), qt) != d_tokens.end()) ++covered;
    const double coverage =
        q_tokens.empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(q_tokens.size());

    const double dice = trigram_dice(term_trigrams(nq), term_trigrams(nd));
    const double prefix = strings::starts_with(nd, nq) ? 1.0 : 0.0;
    return 0.7 * coverage + 0.2 * dice + 0.1 * prefix;
}

/// Rank the whole index by term_score; zero-score rows are dropped, order
/// is score-descending with ties broken by ascending code, truncated to
/// query.limit.
inline std::vector<ConceptMatch> search_local(const TermQuery& q, const LocalIndex& index,
                                              std::vector<std::string>* warnings = nullptr) {
    std::vector<ConceptMatch> hits;
    if (index.rows.empty()) {
        if (warnings) warnings->push_back("local terminology index is empty");
        return hits;
    }
    for (const auto& row : index.rows) {
        const double s = term_score(q.text, row.display);
        if (s > 0.0) hits.push_back(ConceptMatch{row.system, row.code, row.display, s});
    }
    std::sort(hits.begin(), hits.end(), [](const ConceptMatch& a, const ConceptMatch& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.code < b.code;
    });
    if (hits.size() > static_cast<size_t>(q.limit)) hits.resize(static_cast<size_t>(q.limit));
    return hits;
}

// ---- concept snapshot files ----------------------------------------------
// UTF-8 TSV, columns system<TAB>code<TAB>display, one concept per line;
// lines starting with '#' and blank lines are ignored.

inline Result<LocalIndex> load_concepts_tsv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return make_error("io", "cannot open concept snapshot: " + path);
    LocalIndex idx;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto cols = strings::split(line, '\t');
        if (cols.size() != 3)
            return make_error("bad-format", path + ":" + std::to_string(lineno) +
                                                ": expected 3 tab-separated columns, got " +
                                                std::to_string(cols.size()));
        if (cols[1].empty())
            return make_error("bad-format",
                              path + ":" + std::to_string(lineno) + ": empty code column");
        idx.rows.push_back(Concept{cols[0], cols[1], cols[2]});
    }
    return idx;
}

// ---- remote expansion ------------------------------------------------------

/// GET {base}/ValueSet/$expand?url={vs}&filter={text}&count={limit}; maps
/// expansion.contains[] to matches scored 1.0 - rank/limit in server order.
inline Result<std::vector<ConceptMatch>> expand_remote(const TermQuery& q,
                                                       const std::string& server_base,
                                                       int timeout_ms = 10000) {
    httplib::Client cli(server_base);
    cli.set_connection_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    cli.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    cli.set_follow_location(true);

    httplib::Params params{{"url", q.valueset.url},
                           {"filter", q.text},
                           {"count", std::to_string(q.limit)}};
    auto res = cli.Get("/ValueSet/$expand", params, httplib::Headers{});
    if (!res)
        return make_error("transport", "terminology server unreachable (" +
                                           httplib::to_string(res.error()) + ") at " + server_base);
    if (res->status == 404)
        return make_error("not-found", "ValueSet not found on server: " + q.valueset.url);
    if (res->status < 200 || res->status >= 300) {
        std::string snippet = res->body.substr(0, 200);
        return make_error("transport", "terminology server returned HTTP " +
                                           std::to_string(res->status) + ": " + snippet);
    }

    Json body;
    try {
        body = Json::parse(res->body);
    } catch (const Json::parse_error& e) {
        return make_error("transport", std::string("malformed expansion JSON: ") + e.what());
    }
    std::vector<ConceptMatch> out;
    if (body.contains("expansion") && body["expansion"].is_object() &&
        body["expansion"].contains("contains") && body["expansion"]["contains"].is_array()) {
        size_t rank = 0;
        for (const auto& item : body["expansion"]["contains"]) {
            if (out.size() >= static_cast<size_t>(q.limit)) break;
            ConceptMatch m;
            if (item.contains("system") && item["system"].is_string())
                m.system = item["system"].get<std::string>();
            if (item.contains("code") && item["code"].is_string())
                m.code = item["code"].get<std::string>();
            if (item.contains("display") && item["display"].is_string())
                m.display = item["display"].get<std::string>();
            m.score = 1.0 - static_cast<double>(rank) / static_cast<double>(q.limit);
            ++rank;
            out.push_back(std::move(m));
        }
    }
    return out;
}

// ---- dispatch ---------------------------------------------------------------

enum class Backend { local, remote, remote_with_fallback };

inline std::string_view to_string(Backend b) {
    switch (b) {
        case Backend::local: return "local";
        case Backend::remote: return "remote";
        case Backend::remote_with_fallback: return "remote-with-fallback";
    }
    return "local";
}

inline std::optional<Backend> backend_from_string(std::string_view s) {
    if (s == "local") return Backend::local;
    if (s == "remote") return Backend::remote;
    if (s == "remote-with-fallback") return Backend::remote_with_fallback;
    return std::nullopt;
}

struct SearchOutcome {
    std::vector<ConceptMatch> matches;
    std::string backend;  // which backend actually served the query
    std::vector<std::string> warnings;
};

/// The Code Search tool: a ValueSet roster plus per-ValueSet local
/// snapshots and an optional remote server, behind one search() call.
/// Read-only after construction; safe to share across threads.
class TerminologyService {
  public:
    TerminologyService() = default;
    TerminologyService(std::vector<ValueSetRef> roster, Backend backend,
                       std::string server_base = "", int timeout_ms = 10000)
        : roster_(std::move(roster)),
          backend_(backend),
          server_base_(std::move(server_base)),
          timeout_ms_(timeout_ms) {}

    void add_snapshot(const std::string& valueset_url, LocalIndex index) {
        snapshots_[valueset_url] = std::move(index);
    }

    const std::vector<ValueSetRef>& roster() const { return roster_; }
    Backend backend() const { return backend_; }
    const std::string& server_base() const { return server_base_; }
    int timeout_ms() const { return timeout_ms_; }

    /// Resolve a ValueSet by short name or canonical URL.
    std::optional<ValueSetRef> find_valueset(std::string_view name_or_url) const {
        for (const auto& vs : roster_)
            if (vs.name == name_or_url || vs.url == name_or_url) return vs;
        return std::nullopt;
    }

    Result<SearchOutcome> search(const TermQuery& q) const {
        if (auto problem = term_query_problem(q))
            return make_error("bad-query", *problem);
        switch (backend_) {
            case Backend::local:
                return local_outcome(q);
            case Backend::remote: {
                auto r = expand_remote(q, server_base_, timeout_ms_);
                if (!r.ok())
                    return make_error(r.error().kind,
                                      "terminology unavailable: " + r.error().message);
                return SearchOutcome{std::move(r.value()), "remote", {}};
            }
            case Backend::remote_with_fallback: {
                auto r = expand_remote(q, server_base_, timeout_ms_);
                if (r.ok()) return SearchOutcome{std::move(r.value()), "remote", {}};
                auto it = snapshots_.find(q.valueset.url);
                if (it == snapshots_.end())
                    return make_error("unavailable",
                                      "terminology unavailable: " + r.error().message +
                                          "; no local snapshot for " + q.valueset.url);
                SearchOutcome out = local_outcome_from(q, it->second);
                out.warnings.push_back("remote terminology failed (" + r.error().message +
                                       "); served from local snapshot");
                return out;
            }
        }
        return make_error("bad-config", "unknown terminology backend");
    }

  private:
    Result<SearchOutcome> local_outcome(const TermQuery& q) const {
        auto it = snapshots_.find(q.valueset.url);
        if (it == snapshots_.end())
            return make_error("unavailable",
                              "terminology unavailable: no local snapshot for " + q.valueset.url);
        return local_outcome_from(q, it->second);
    }

    SearchOutcome local_outcome_from(const TermQuery& q, const LocalIndex& idx) const {
        SearchOutcome out;
        out.backend = "local";
        out.matches = search_local(q, idx, &out.warnings);
        return out;
    }

    std::vector<ValueSetRef> roster_;
    Backend backend_ = Backend::local;
    std::string server_base_;
    int timeout_ms_ = 10000;
    std::map<std::string, LocalIndex> snapshots_;
};

/// ValueSets shipped by default; snapshot files live under data/valuesets/.
inline std::vector<ValueSetRef> default_valuesets() {
    return {
        {"http://hl7.org/fhir/ValueSet/condition-code", "condition-code",
         "clinical findings / diagnoses for Condition.code"},
        {"http://hl7.org/fhir/ValueSet/body-site", "body-site",
         "anatomical structures for Condition.bodySite"},
        {"http://hl7.org/fhir/ValueSet/condition-severity", "condition-severity",
         "severity qualifiers for Condition.severity"},
        {"http://hl7.org/fhir/ValueSet/medication-codes", "medication-codes",
         "drug / substance codes for MedicationStatement.medicationCodeableConcept"},
        {"http://hl7.org/fhir/ValueSet/route-codes", "route-codes",
         "administration routes for dosage descriptions"},
    };
}

}  // namespace fhirforge::term
