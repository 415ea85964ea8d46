// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fhirforge/common.hpp"
#include "fhirforge/fhir/model.hpp"

namespace fhirforge::fhir {

enum class Severity { error, warning };

enum class IssueKind {
    missing_required,
    unknown_field,
    bad_binding,
    bad_format,
    dangling_reference,
    wrong_type,
};

inline std::string_view to_string(Severity s) {
    return s == Severity::error ? "error" : "warning";
}

inline std::string_view to_string(IssueKind k) {
    switch (k) {
        case IssueKind::missing_required: return "missing-required";
        case IssueKind::unknown_field: return "unknown-field";
        case IssueKind::bad_binding: return "bad-binding";
        case IssueKind::bad_format: return "bad-format";
        case IssueKind::dangling_reference: return "dangling-reference";
        case IssueKind::wrong_type: return "wrong-type";
    }
    return "bad-format";
}

struct ValidationIssue {
    Severity severity = Severity::error;
    std::string path;  // dotted element path, e.g. Condition.clinicalStatus.coding[0].code
    IssueKind kind = IssueKind::bad_format;
    std::string message;
    bool operator==(const ValidationIssue&) const = default;
};

/// One-line rendering used in CLI output and agent observations.
inline std::string render_issue(const ValidationIssue& i) {
    std::string out;
    out += to_string(i.severity);
    out += " ";
    out += i.path;
    out += " [";
    out += to_string(i.kind);
    out += "] ";
    out += i.message;
    return out;
}

inline std::string render_issues(const std::vector<ValidationIssue>& issues) {
    std::string out;
    for (const auto& i : issues) {
        out += render_issue(i);
        out += "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

inline bool has_errors(const std::vector<ValidationIssue>& issues) {
    return std::any_of(issues.begin(), issues.end(),
                       [](const auto& i) { return i.severity == Severity::error; });
}

namespace detail {

inline void add(std::vector<ValidationIssue>& out, Severity sev, std::string path, IssueKind kind,
                std::string message) {
    out.push_back(ValidationIssue{sev, std::move(path), kind, std::move(message)});
}

inline bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline bool valid_ymd(int y, int m, int d) {
    if (m < 1 || m > 12) return false;
    static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int max_d = days[m - 1];
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    if (m == 2 && leap) max_d = 29;
    return d >= 1 && d <= max_d;
}

/// FHIR date: YYYY | YYYY-MM | YYYY-MM-DD, calendar-checked.
inline bool valid_date(std::string_view s) {
    if (s.size() == 4) return all_digits(s);
    if (s.size() == 7) {
        if (!all_digits(s.substr(0, 4)) || s[4] != '-' || !all_digits(s.substr(5, 2))) return false;
        const int m = (s[5] - '0') * 10 + (s[6] - '0');
        return m >= 1 && m <= 12;
    }
    if (s.size() == 10) {
        if (!all_digits(s.substr(0, 4)) || s[4] != '-' || !all_digits(s.substr(5, 2)) ||
            s[7] != '-' || !all_digits(s.substr(8, 2)))
            return false;
        const int y = std::stoi(std::string(s.substr(0, 4)));
        const int m = (s[5] - '0') * 10 + (s[6] - '0');
        const int d = (s[8] - '0') * 10 + (s[9] - '0');
        return valid_ymd(y, m, d);
    }
    return false;
}

/// FHIR dateTime: a date, optionally followed by THH:MM:SS[.fff] and a
/// mandatory timezone (Z or +/-HH:MM).
inline bool valid_datetime(std::string_view s) {
    const size_t t = s.find('T');
    if (t == std::string_view::npos) return valid_date(s);
    if (!valid_date(s.substr(0, t)) || t != 10) return false;  // time requires a full date
    std::string_view rest = s.substr(t + 1);
    if (rest.size() < 8) return false;
    auto two = [&](size_t i) { return all_digits(rest.substr(i, 2)); };
    if (!two(0) || rest[2] != ':' || !two(3) || rest[5] != ':' || !two(6)) return false;
    const int hh = (rest[0] - '0') * 10 + (rest[1] - '0');
    const int mi = (rest[3] - '0') * 10 + (rest[4] - '0');
    const int ss = (rest[6] - '0') * 10 + (rest[7] - '0');
    if (hh > 23 || mi > 59 || ss > 60) return false;
    size_t i = 8;
    if (i < rest.size() && rest[i] == '.') {
        size_t j = i + 1;
        while (j < rest.size() && rest[j] >= '0' && rest[j] <= '9') ++j;
        if (j == i + 1) return false;
        i = j;
    }
    if (i >= rest.size()) return false;  // timezone required
    if (rest[i] == 'Z') return i + 1 == rest.size();
    if (rest[i] != '+' && rest[i] != '-') return false;
    std::string_view tz = rest.substr(i + 1);
    return tz.size() == 5 && all_digits(tz.substr(0, 2)) && tz[2] == ':' &&
           all_digits(tz.substr(3, 2)) && (tz[0] - '0') * 10 + (tz[1] - '0') <= 14 &&
           (tz[3] - '0') * 10 + (tz[4] - '0') <= 59;
}

inline bool valid_local_ref(std::string_view ref) {
    const size_t slash = ref.find('/');
    if (slash == std::string_view::npos || slash == 0 || slash + 1 >= ref.size()) return false;
    return is_supported_type(ref.substr(0, slash));
}

template <typename Range>
bool in_set(const Range& range, std::string_view v) {
    for (auto s : range)
        if (s == v) return true;
    return false;
}

template <typename Range>
std::string legal_list(const Range& range) {
    std::string out;
    for (auto s : range) {
        if (!out.empty()) out += ", ";
        out += s;
    }
    return out;
}

inline void check_coding(const Coding& c, const std::string& path,
                         std::vector<ValidationIssue>& out) {
    if (c.code.empty())
        add(out, Severity::error, path + ".code", IssueKind::missing_required,
            "coding requires a non-empty code");
    else if (c.system.empty())
        add(out, Severity::error, path + ".system", IssueKind::missing_required,
            "coding with a code requires a system");
}

inline void check_codeable_concept(const CodeableConcept& cc, const std::string& path,
                                   std::vector<ValidationIssue>& out) {
    if (cc.coding.empty() && !cc.text.has_value())
        add(out, Severity::error, path, IssueKind::missing_required,
            "CodeableConcept requires at least one of coding or text");
    for (size_t i = 0; i < cc.coding.size(); ++i)
        check_coding(cc.coding[i], path + ".coding[" + std::to_string(i) + "]", out);
}

inline void check_reference_format(const Reference& ref, const std::string& path, bool required,
                                   std::vector<ValidationIssue>& out) {
    if (ref.reference.empty()) {
        if (required)
            add(out, Severity::error, path, IssueKind::missing_required,
                "required reference is missing");
        return;
    }
    if (!valid_local_ref(ref.reference))
        add(out, Severity::error, path + ".reference", IssueKind::bad_format,
            "reference '" + ref.reference + "' must be <ResourceType>/<id> with a supported type");
}

inline void check_required_binding(const CodeableConcept& cc, const std::string& path,
                                   std::span<const std::string_view> legal,
                                   std::vector<ValidationIssue>& out) {
    for (size_t i = 0; i < cc.coding.size(); ++i) {
        const auto& c = cc.coding[i];
        if (!c.code.empty() && !in_set(legal, c.code))
            add(out, Severity::error, path + ".coding[" + std::to_string(i) + "].code",
                IssueKind::bad_binding,
                "code '" + c.code + "' violates the required binding (legal codes: " +
                    legal_list(legal) + ")");
    }
}

inline void validate_into(const Patient& p, const std::string& root,
                          std::vector<ValidationIssue>& out) {
    for (size_t i = 0; i < p.name.size(); ++i) {
        (void)i;  // HumanName has no invariants beyond shape
    }
    if (p.birth_date && !valid_date(*p.birth_date))
        add(out, Severity::error, root + ".birthDate", IssueKind::bad_format,
            "'" + *p.birth_date + "' is not a valid date (YYYY, YYYY-MM or YYYY-MM-DD)");
    if (p.gender && !in_set(kGenderCodes, *p.gender))
        add(out, Severity::error, root + ".gender", IssueKind::bad_binding,
            "gender '" + *p.gender + "' violates the required binding (legal codes: " +
                legal_list(kGenderCodes) + ")");
}

inline void validate_into(const Condition& c, const std::string& root,
                          std::vector<ValidationIssue>& out) {
    check_reference_format(c.subject, root + ".subject", /*required=*/true, out);
    if (c.code) check_codeable_concept(*c.code, root + ".code", out);
    if (c.clinical_status) {
        check_codeable_concept(*c.clinical_status, root + ".clinicalStatus", out);
        check_required_binding(*c.clinical_status, root + ".clinicalStatus",
                               kClinicalStatusCodes, out);
    }
    if (c.verification_status)
        check_codeable_concept(*c.verification_status, root + ".verificationStatus", out);
    if (c.severity) check_codeable_concept(*c.severity, root + ".severity", out);
    for (size_t i = 0; i < c.body_site.size(); ++i)
        check_codeable_concept(c.body_site[i], root + ".bodySite[" + std::to_string(i) + "]", out);
    for (size_t i = 0; i < c.category.size(); ++i)
        check_codeable_concept(c.category[i], root + ".category[" + std::to_string(i) + "]", out);
    if (c.onset_date_time && !valid_datetime(*c.onset_date_time))
        add(out, Severity::error, root + ".onsetDateTime", IssueKind::bad_format,
            "'" + *c.onset_date_time + "' is not a valid dateTime");
}

inline void validate_into(const MedicationStatement& m, const std::string& root,
                          std::vector<ValidationIssue>& out) {
    check_reference_format(m.subject, root + ".subject", /*required=*/true, out);
    if (m.status.empty())
        add(out, Severity::error, root + ".status", IssueKind::missing_required,
            "status is required");
    else if (!in_set(kMedicationStatusCodes, m.status))
        add(out, Severity::error, root + ".status", IssueKind::bad_binding,
            "status '" + m.status + "' violates the required binding (legal codes: " +
                legal_list(kMedicationStatusCodes) + ")");
    if (m.medication.coding.empty() && !m.medication.text.has_value())
        add(out, Severity::error, root + ".medicationCodeableConcept", IssueKind::missing_required,
            "medication requires coding or text");
    else
        check_codeable_concept(m.medication, root + ".medicationCodeableConcept", out);
    for (size_t i = 0; i < m.dosage.size(); ++i) {
        const auto& d = m.dosage[i];
        const std::string dp = root + ".dosage[" + std::to_string(i) + "]";
        for (size_t j = 0; j < d.dose_and_rate.size(); ++j) {
            const auto& dr = d.dose_and_rate[j];
            const std::string drp = dp + ".doseAndRate[" + std::to_string(j) + "]";
            if (dr.type) check_codeable_concept(*dr.type, drp + ".type", out);
            if (dr.dose_quantity && dr.dose_quantity->unit.empty())
                add(out, Severity::error, drp + ".doseQuantity.unit", IssueKind::missing_required,
                    "doseQuantity requires a unit");
        }
        if (d.timing && d.timing->code) check_codeable_concept(*d.timing->code, dp + ".timing.code", out);
    }
}

}  // namespace detail

inline void sort_issues(std::vector<ValidationIssue>& issues) {
    std::stable_sort(issues.begin(), issues.end(), [](const auto& a, const auto& b) {
        if (a.path != b.path) return strings::natural_less(a.path, b.path);
        return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    });
}

/// Deterministic issue list, ordered by path; empty iff the resource
/// satisfies every invariant of its type.
inline std::vector<ValidationIssue> validate(const Resource& r) {
    std::vector<ValidationIssue> out;
    std::visit([&](const auto& v) { detail::validate_into(v, std::string(resource_type(r)), out); },
               r);
    sort_issues(out);
    return out;
}

/// References gathered from one resource, with their element paths.
inline std::vector<std::pair<std::string, const Reference*>> references_of(const Resource& r,
                                                                           const std::string& root) {
    std::vector<std::pair<std::string, const Reference*>> refs;
    if (const auto* c = std::get_if<Condition>(&r)) {
        if (!c->subject.reference.empty()) refs.emplace_back(root + ".subject", &c->subject);
    } else if (const auto* m = std::get_if<MedicationStatement>(&r)) {
        if (!m->subject.reference.empty()) refs.emplace_back(root + ".subject", &m->subject);
    }
    return refs;
}

namespace detail {

inline void check_bundle_references(const Bundle& b, std::vector<ValidationIssue>& out) {
    std::set<std::string> targets;
    for (const auto& r : b.entries)
        if (!resource_id(r).empty()) targets.insert(local_ref(r));
    for (size_t i = 0; i < b.entries.size(); ++i) {
        const std::string root = "Bundle.entry[" + std::to_string(i) + "]." +
                                 std::string(resource_type(b.entries[i]));
        for (const auto& [path, ref] : references_of(b.entries[i], root)) {
            if (valid_local_ref(ref->reference) && !targets.contains(ref->reference))
                add(out, Severity::error, path, IssueKind::dangling_reference,
                    "reference '" + ref->reference + "' does not resolve within the bundle");
        }
    }
}

}  // namespace detail

inline std::vector<ValidationIssue> validate(const Bundle& b) {
    std::vector<ValidationIssue> out;
    if (b.type != "collection")
        detail::add(out, Severity::error, "Bundle.type", IssueKind::bad_binding,
                    "bundle type '" + b.type + "' is not supported (legal codes: collection)");
    for (size_t i = 0; i < b.entries.size(); ++i) {
        const std::string root = "Bundle.entry[" + std::to_string(i) + "]." +
                                 std::string(resource_type(b.entries[i]));
        std::visit([&](const auto& v) { detail::validate_into(v, root, out); }, b.entries[i]);
    }
    detail::check_bundle_references(b, out);
    sort_issues(out);
    return out;
}

/// Collection Bundle over the given resources, in input order. The issue
/// list carries one dangling-reference error per unresolvable Reference;
/// an empty input is a legal empty collection.
inline std::pair<Bundle, std::vector<ValidationIssue>> make_bundle(std::vector<Resource> resources) {
    Bundle b;
    b.type = "collection";
    b.entries = std::move(resources);
    std::vector<ValidationIssue> issues;
    detail::check_bundle_references(b, issues);
    sort_issues(issues);
    return {std::move(b), std::move(issues)};
}

}  // namespace fhirforge::fhir
