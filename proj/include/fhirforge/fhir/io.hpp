// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fhirforge/common.hpp"
#include "fhirforge/fhir/model.hpp"
#include "fhirforge/fhir/validate.hpp"
#include "fhirforge/sha256.hpp"

namespace fhirforge::fhir {

/// Typed value plus the non-fatal unknown-field warnings collected while
/// reading it. Unrecognized fields are reported, never silently dropped.
template <typename T>
struct Parsed {
    T value;
    std::vector<ValidationIssue> warnings;
};

using Document = std::variant<Resource, Bundle>;

namespace detail {

struct ParseFailure {
    Error err;
};

[[noreturn]] inline void fail(std::string kind, std::string message) {
    throw ParseFailure{make_error(std::move(kind), std::move(message))};
}

inline void expect_object(const Json& j, const std::string& path) {
    if (!j.is_object()) fail("bad-format", path + " must be a JSON object");
}

inline void expect_array(const Json& j, const std::string& path) {
    if (!j.is_array()) fail("bad-format", path + " must be a JSON array");
}

inline std::string read_string(const Json& j, const std::string& path) {
    if (!j.is_string()) fail("bad-format", path + " must be a JSON string");
    return j.get<std::string>();
}

inline double read_number(const Json& j, const std::string& path) {
    if (!j.is_number()) fail("bad-format", path + " must be a JSON number");
    return j.get<double>();
}

/// Warn about any key of `j` not in `known`, recording the dotted path.
inline void warn_unknown(const Json& j, std::initializer_list<std::string_view> known,
                         const std::string& path, std::vector<ValidationIssue>& warnings) {
    for (const auto& [key, _] : j.items()) {
        bool found = false;
        for (auto k : known)
            if (k == key) {
                found = true;
                break;
            }
        if (!found)
            warnings.push_back(ValidationIssue{Severity::warning, path + "." + key,
                                               IssueKind::unknown_field,
                                               "field '" + key + "' is not modeled"});
    }
}

inline Coding parse_coding(const Json& j, const std::string& path,
                           std::vector<ValidationIssue>& warnings) {
    expect_object(j, path);
    warn_unknown(j, {"system", "code", "display"}, path, warnings);
    Coding c;
    if (j.contains("system")) c.system = read_string(j["system"], path + ".system");
    if (j.contains("code")) c.code = read_string(j["code"], path + ".code");
    if (j.contains("display")) c.display = read_string(j["display"], path + ".display");
    return c;
}

inline CodeableConcept parse_codeable_concept(const Json& j, const std::string& path,
                                              std::vector<ValidationIssue>& warnings) {
    expect_object(j, path);
    warn_unknown(j, {"coding", "text"}, path, warnings);
    CodeableConcept cc;
    if (j.contains("coding")) {
        expect_array(j["coding"], path + ".coding");
        size_t i = 0;
        for (const auto& item : j["coding"])
            cc.coding.push_back(
                parse_coding(item, path + ".coding[" + std::to_string(i++) + "]", warnings));
    }
    if (j.contains("text")) cc.text = read_string(j["text"], path + ".text");
    return cc;
}

inline Reference parse_reference(const Json& j, const std::string& path,
                                 std::vector<ValidationIssue>& warnings) {
    expect_object(j, path);
    warn_unknown(j, {"reference", "display"}, path, warnings);
    Reference r;
    if (j.contains("reference")) r.reference = read_string(j["reference"], path + ".reference");
    if (j.contains("display")) r.display = read_string(j["display"], path + ".display");
    return r;
}

inline HumanName parse_human_name(const Json& j, const std::string& path,
                                  std::vector<ValidationIssue>& warnings) {
    expect_object(j, path);
    warn_unknown(j, {"use", "family", "given"}, path, warnings);
    HumanName n;
    if (j.contains("use")) n.use = read_string(j["use"], path + ".use");
    if (j.contains("family")) n.family = read_string(j["family"], path + ".family");
    if (j.contains("given")) {
        expect_array(j["given"], path + ".given");
        size_t i = 0;
        for (const auto& item : j["given"])
            n.given.push_back(read_string(item, path + ".given[" + std::to_string(i++) + "]"));
    }
    return n;
}

inline Address parse_address(const Json& j, const std::string& path,
                             std::vector<ValidationIssue>& warnings) {
    expect_object(j, path);
    warn_unknown(j, {"line", "city", "postalCode", "country"}, path, warnings);
    Address a;
    if (j.contains("line")) {
        // FHIR wires Address.line as an array; accept a bare string as well.
        if (j["line"].is_array()) {
            std::vector<std::string> parts;
            size_t i = 0;
            for (const auto& item : j["line"])
                parts.push_back(read_string(item, path + ".line[" + std::to_string(i++) + "]"));
            if (!parts.empty()) a.line = strings::join(parts, ", ");
        } else {
            a.line = read_string(j["line"], path + ".line");
        }
    }
    if (j.contains("city")) a.city = read_string(j["city"], path + ".city");
    if (j.contains("postalCode")) a.postal_code = read_string(j["postalCode"], path + ".postalCode");
    if (j.contains("country")) a.country = read_string(j["country"], path + ".country");
    return a;
}

inline Patient parse_patient(const Json& j, const std::string& path,
                             std::vector<ValidationIssue>& warnings) {
    warn_unknown(j, {"resourceType", "id", "name", "birthDate", "gender", "address"}, path,
                 warnings);
    Patient p;
    if (j.contains("id")) p.id = read_string(j["id"], path + ".id");
    if (j.contains("name")) {
        expect_array(j["name"], path + ".name");
        size_t i = 0;
        for (const auto& item : j["name"])
            p.name.push_back(
                parse_human_name(item, path + ".name[" + std::to_string(i++) + "]", warnings));
    }
    if (j.contains("birthDate")) p.birth_date = read_string(j["birthDate"], path + ".birthDate");
    if (j.contains("gender")) p.gender = read_string(j["gender"], path + ".gender");
    if (j.contains("address")) {
        expect_array(j["address"], path + ".address");
        size_t i = 0;
        for (const auto& item : j["address"])
            p.address.push_back(
                parse_address(item, path + ".address[" + std::to_string(i++) + "]", warnings));
    }
    return p;
}

inline Condition parse_condition(const Json& j, const std::string& path,
                                 std::vector<ValidationIssue>& warnings) {
    warn_unknown(j,
                 {"resourceType", "id", "subject", "code", "clinicalStatus", "verificationStatus",
                  "severity", "bodySite", "category", "onsetDateTime"},
                 path, warnings);
    Condition c;
    if (j.contains("id")) c.id = read_string(j["id"], path + ".id");
    if (j.contains("subject")) c.subject = parse_reference(j["subject"], path + ".subject", warnings);
    if (j.contains("code")) c.code = parse_codeable_concept(j["code"], path + ".code", warnings);
    if (j.contains("clinicalStatus"))
        c.clinical_status =
            parse_codeable_concept(j["clinicalStatus"], path + ".clinicalStatus", warnings);
    if (j.contains("verificationStatus"))
        c.verification_status =
            parse_codeable_concept(j["verificationStatus"], path + ".verificationStatus", warnings);
    if (j.contains("severity"))
        c.severity = parse_codeable_concept(j["severity"], path + ".severity", warnings);
    if (j.contains("bodySite")) {
        expect_array(j["bodySite"], path + ".bodySite");
        size_t i = 0;
        for (const auto& item : j["bodySite"])
            c.body_site.push_back(parse_codeable_concept(
                item, path + ".bodySite[" + std::to_string(i++) + "]", warnings));
    }
    if (j.contains("category")) {
        expect_array(j["category"], path + ".category");
        size_t i = 0;
        for (const auto& item : j["category"])
            c.category.push_back(parse_codeable_concept(
                item, path + ".category[" + std::to_string(i++) + "]", warnings));
    }
    if (j.contains("onsetDateTime"))
        c.onset_date_time = read_string(j["onsetDateTime"], path + ".onsetDateTime");
    return c;
}

inline DoseQuantity parse_dose_quantity(const Json& j, const std::string& path,
                                        std::vector<ValidationIssue>& warnings) {
    expect_object(j, path);
    warn_unknown(j, {"value", "unit", "system", "code"}, path, warnings);
    DoseQuantity q;
    if (j.contains("value")) q.value = read_number(j["value"], path + ".value");
    if (j.contains("unit")) q.unit = read_string(j["unit"], path + ".unit");
    if (j.contains("system")) q.system = read_string(j["system"], path + ".system");
    if (j.contains("code")) q.code = read_string(j["code"], path + ".code");
    return q;
}

inline Dosage parse_dosage(const Json& j, const std::string& path,
                           std::vector<ValidationIssue>& warnings) {
    expect_object(j, path);
    warn_unknown(j, {"text", "doseAndRate", "timing"}, path, warnings);
    Dosage d;
    if (j.contains("text")) d.text = read_string(j["text"], path + ".text");
    if (j.contains("doseAndRate")) {
        expect_array(j["doseAndRate"], path + ".doseAndRate");
        size_t i = 0;
        for (const auto& item : j["doseAndRate"]) {
            const std::string ip = path + ".doseAndRate[" + std::to_string(i++) + "]";
            expect_object(item, ip);
            warn_unknown(item, {"type", "doseQuantity"}, ip, warnings);
            DoseAndRate dr;
            if (item.contains("type"))
                dr.type = parse_codeable_concept(item["type"], ip + ".type", warnings);
            if (item.contains("doseQuantity"))
                dr.dose_quantity =
                    parse_dose_quantity(item["doseQuantity"], ip + ".doseQuantity", warnings);
            d.dose_and_rate.push_back(std::move(dr));
        }
    }
    if (j.contains("timing")) {
        const std::string tp = path + ".timing";
        Timing t;
        if (j["timing"].is_string()) {
            // Free-text timing: keep it as the concept text.
            CodeableConcept cc;
            cc.text = j["timing"].get<std::string>();
            t.code = std::move(cc);
        } else {
            expect_object(j["timing"], tp);
            warn_unknown(j["timing"], {"code"}, tp, warnings);
            if (j["timing"].contains("code"))
                t.code = parse_codeable_concept(j["timing"]["code"], tp + ".code", warnings);
        }
        d.timing = std::move(t);
    }
    return d;
}

inline MedicationStatement parse_medication_statement(const Json& j, const std::string& path,
                                                      std::vector<ValidationIssue>& warnings) {
    warn_unknown(j, {"resourceType", "id", "subject", "status", "medicationCodeableConcept",
                     "dosage"},
                 path, warnings);
    MedicationStatement m;
    if (j.contains("id")) m.id = read_string(j["id"], path + ".id");
    if (j.contains("subject")) m.subject = parse_reference(j["subject"], path + ".subject", warnings);
    if (j.contains("status")) m.status = read_string(j["status"], path + ".status");
    if (j.contains("medicationCodeableConcept"))
        m.medication = parse_codeable_concept(j["medicationCodeableConcept"],
                                              path + ".medicationCodeableConcept", warnings);
    if (j.contains("dosage")) {
        expect_array(j["dosage"], path + ".dosage");
        size_t i = 0;
        for (const auto& item : j["dosage"])
            m.dosage.push_back(
                parse_dosage(item, path + ".dosage[" + std::to_string(i++) + "]", warnings));
    }
    return m;
}

inline Resource parse_resource_json(const Json& j, const std::string& path,
                                    std::vector<ValidationIssue>& warnings) {
    expect_object(j, path);
    if (!j.contains("resourceType")) fail("bad-format", path + " is missing resourceType");
    const std::string type = read_string(j["resourceType"], path + ".resourceType");
    if (type == "Patient") return parse_patient(j, path, warnings);
    if (type == "Condition") return parse_condition(j, path, warnings);
    if (type == "MedicationStatement") return parse_medication_statement(j, path, warnings);
    fail("wrong-type", type + " not in supported set (Patient, Condition, MedicationStatement)");
}

inline Bundle parse_bundle_json(const Json& j, const std::string& path,
                                std::vector<ValidationIssue>& warnings) {
    expect_object(j, path);
    if (!j.contains("resourceType")) fail("bad-format", path + " is missing resourceType");
    const std::string type = read_string(j["resourceType"], path + ".resourceType");
    if (type != "Bundle") fail("wrong-type", type + " is not a Bundle");
    warn_unknown(j, {"resourceType", "type", "entry"}, path, warnings);
    Bundle b;
    b.type = j.contains("type") ? read_string(j["type"], path + ".type") : "";
    if (j.contains("entry")) {
        expect_array(j["entry"], path + ".entry");
        size_t i = 0;
        for (const auto& item : j["entry"]) {
            const std::string ep = path + ".entry[" + std::to_string(i++) + "]";
            expect_object(item, ep);
            warn_unknown(item, {"resource"}, ep, warnings);
            if (!item.contains("resource")) fail("bad-format", ep + " is missing resource");
            b.entries.push_back(parse_resource_json(item["resource"], ep + ".resource", warnings));
        }
    }
    return b;
}

inline Json parse_text(std::string_view text) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        fail("syntax", "JSON syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

}  // namespace detail

/// Parse one resource document. Syntax errors report the byte offset;
/// an unsupported resourceType is a wrong-type failure naming the type.
inline Result<Parsed<Resource>> parse_resource(std::string_view text) {
    try {
        const Json j = detail::parse_text(text);
        Parsed<Resource> out{Patient{}, {}};
        const std::string root =
            j.is_object() && j.contains("resourceType") && j["resourceType"].is_string()
                ? j["resourceType"].get<std::string>()
                : std::string("$");
        out.value = detail::parse_resource_json(j, root, out.warnings);
        return out;
    } catch (const detail::ParseFailure& f) {
        return f.err;
    }
}

inline Result<Parsed<Resource>> parse_resource(const Json& j) {
    try {
        Parsed<Resource> out{Patient{}, {}};
        const std::string root = j.is_object() && j.contains("resourceType") &&
                                         j["resourceType"].is_string()
                                     ? j["resourceType"].get<std::string>()
                                     : std::string("$");
        out.value = detail::parse_resource_json(j, root, out.warnings);
        return out;
    } catch (const detail::ParseFailure& f) {
        return f.err;
    }
}

inline Result<Parsed<Bundle>> parse_bundle(std::string_view text) {
    try {
        const Json j = detail::parse_text(text);
        Parsed<Bundle> out;
        out.value = detail::parse_bundle_json(j, "Bundle", out.warnings);
        return out;
    } catch (const detail::ParseFailure& f) {
        return f.err;
    }
}

inline Result<Parsed<Bundle>> parse_bundle(const Json& j) {
    try {
        Parsed<Bundle> out;
        out.value = detail::parse_bundle_json(j, "Bundle", out.warnings);
        return out;
    } catch (const detail::ParseFailure& f) {
        return f.err;
    }
}

// std::string converts to both string_view and Json; exact-match
// overloads keep call sites unambiguous.
inline Result<Parsed<Resource>> parse_resource(const std::string& text) {
    return parse_resource(std::string_view(text));
}
inline Result<Parsed<Bundle>> parse_bundle(const std::string& text) {
    return parse_bundle(std::string_view(text));
}

/// Parse a document that may be a single resource or a Bundle.
inline Result<Parsed<Document>> parse_any(std::string_view text) {
    try {
        const Json j = detail::parse_text(text);
        detail::expect_object(j, "$");
        if (!j.contains("resourceType")) detail::fail("bad-format", "$ is missing resourceType");
        const std::string type = detail::read_string(j["resourceType"], "$.resourceType");
        Parsed<Document> out{Document{Bundle{}}, {}};
        if (type == "Bundle")
            out.value = detail::parse_bundle_json(j, "Bundle", out.warnings);
        else
            out.value = detail::parse_resource_json(j, type, out.warnings);
        return out;
    } catch (const detail::ParseFailure& f) {
        return f.err;
    }
}

// ---- canonical serialization -------------------------------------------
// Key order is fixed: resourceType, id, then the remaining fields in
// declaration order. Compact form (no whitespace) is the canonical byte
// stream used for hashing and replay comparison; pretty form is two-space
// indented with a trailing newline for files.

namespace detail {

inline Json coding_json(const Coding& c) {
    Json j = Json::object();
    j["system"] = c.system;
    j["code"] = c.code;
    if (c.display) j["display"] = *c.display;
    return j;
}

inline Json codeable_concept_json(const CodeableConcept& cc) {
    Json j = Json::object();
    if (!cc.coding.empty()) {
        Json arr = Json::array();
        for (const auto& c : cc.coding) arr.push_back(coding_json(c));
        j["coding"] = std::move(arr);
    }
    if (cc.text) j["text"] = *cc.text;
    return j;
}

inline Json reference_json(const Reference& r) {
    Json j = Json::object();
    j["reference"] = r.reference;
    if (r.display) j["display"] = *r.display;
    return j;
}

}  // namespace detail

inline Json to_json(const Patient& p) {
    Json j = Json::object();
    j["resourceType"] = "Patient";
    if (!p.id.empty()) j["id"] = p.id;
    if (!p.name.empty()) {
        Json arr = Json::array();
        for (const auto& n : p.name) {
            Json nj = Json::object();
            if (n.use) nj["use"] = *n.use;
            if (n.family) nj["family"] = *n.family;
            if (!n.given.empty()) nj["given"] = n.given;
            arr.push_back(std::move(nj));
        }
        j["name"] = std::move(arr);
    }
    if (p.birth_date) j["birthDate"] = *p.birth_date;
    if (p.gender) j["gender"] = *p.gender;
    if (!p.address.empty()) {
        Json arr = Json::array();
        for (const auto& a : p.address) {
            Json aj = Json::object();
            if (a.line) aj["line"] = Json::array({*a.line});
            if (a.city) aj["city"] = *a.city;
            if (a.postal_code) aj["postalCode"] = *a.postal_code;
            if (a.country) aj["country"] = *a.country;
            arr.push_back(std::move(aj));
        }
        j["address"] = std::move(arr);
    }
    return j;
}

inline Json to_json(const Condition& c) {
    Json j = Json::object();
    j["resourceType"] = "Condition";
    if (!c.id.empty()) j["id"] = c.id;
    if (!c.subject.reference.empty()) j["subject"] = detail::reference_json(c.subject);
    if (c.code) j["code"] = detail::codeable_concept_json(*c.code);
    if (c.clinical_status) j["clinicalStatus"] = detail::codeable_concept_json(*c.clinical_status);
    if (c.verification_status)
        j["verificationStatus"] = detail::codeable_concept_json(*c.verification_status);
    if (c.severity) j["severity"] = detail::codeable_concept_json(*c.severity);
    if (!c.body_site.empty()) {
        Json arr = Json::array();
        for (const auto& b : c.body_site) arr.push_back(detail::codeable_concept_json(b));
        j["bodySite"] = std::move(arr);
    }
    if (!c.category.empty()) {
        Json arr = Json::array();
        for (const auto& cat : c.category) arr.push_back(detail::codeable_concept_json(cat));
        j["category"] = std::move(arr);
    }
    if (c.onset_date_time) j["onsetDateTime"] = *c.onset_date_time;
    return j;
}

inline Json to_json(const MedicationStatement& m) {
    Json j = Json::object();
    j["resourceType"] = "MedicationStatement";
    if (!m.id.empty()) j["id"] = m.id;
    if (!m.subject.reference.empty()) j["subject"] = detail::reference_json(m.subject);
    if (!m.status.empty()) j["status"] = m.status;
    j["medicationCodeableConcept"] = detail::codeable_concept_json(m.medication);
    if (!m.dosage.empty()) {
        Json arr = Json::array();
        for (const auto& d : m.dosage) {
            Json dj = Json::object();
            if (d.text) dj["text"] = *d.text;
            if (!d.dose_and_rate.empty()) {
                Json drs = Json::array();
                for (const auto& dr : d.dose_and_rate) {
                    Json drj = Json::object();
                    if (dr.type) drj["type"] = detail::codeable_concept_json(*dr.type);
                    if (dr.dose_quantity) {
                        Json qj = Json::object();
                        qj["value"] = dr.dose_quantity->value;
                        qj["unit"] = dr.dose_quantity->unit;
                        if (dr.dose_quantity->system) qj["system"] = *dr.dose_quantity->system;
                        if (dr.dose_quantity->code) qj["code"] = *dr.dose_quantity->code;
                        drj["doseQuantity"] = std::move(qj);
                    }
                    drs.push_back(std::move(drj));
                }
                dj["doseAndRate"] = std::move(drs);
            }
            if (d.timing) {
                Json tj = Json::object();
                if (d.timing->code) tj["code"] = detail::codeable_concept_json(*d.timing->code);
                dj["timing"] = std::move(tj);
            }
            arr.push_back(std::move(dj));
        }
        j["dosage"] = std::move(arr);
    }
    return j;
}

inline Json to_json(const Resource& r) {
    return std::visit([](const auto& v) { return to_json(v); }, r);
}

inline Json to_json(const Bundle& b) {
    Json j = Json::object();
    j["resourceType"] = "Bundle";
    j["type"] = b.type;
    Json arr = Json::array();
    for (const auto& r : b.entries) {
        Json e = Json::object();
        e["resource"] = to_json(r);
        arr.push_back(std::move(e));
    }
    j["entry"] = std::move(arr);
    return j;
}

inline std::string compact(const Json& j) { return j.dump(); }
inline std::string pretty(const Json& j) { return j.dump(2) + "\n"; }

/// Canonical compact text; refuses resources that fail validation,
/// citing the first issue.
inline Result<std::string> serialize(const Resource& r) {
    const auto issues = validate(r);
    if (has_errors(issues))
        return make_error("invalid-resource",
                          "refusing to serialize invalid resource: " + render_issue(issues.front()));
    return compact(to_json(r));
}

inline Result<std::string> serialize(const Bundle& b) {
    const auto issues = validate(b);
    if (has_errors(issues))
        return make_error("invalid-resource",
                          "refusing to serialize invalid bundle: " + render_issue(issues.front()));
    return compact(to_json(b));
}

/// SHA-256 of the canonical compact serialization; the identity used for
/// replay verification. Computed over the raw structure without a
/// validity check so that it exists even for in-progress bundles.
inline std::string bundle_sha256(const Bundle& b) { return sha256_hex(compact(to_json(b))); }

}  // namespace fhirforge::fhir
