// SPDX-License-Identifier: Apache-2.0
// Core layer: string helpers, SHA-256, model helpers, JSON round-trips,
// canonical serialization, validation rules.

#include <catch2/catch_amalgamated.hpp>

#include "fhirforge/common.hpp"
#include "fhirforge/fhir/io.hpp"
#include "fhirforge/fhir/model.hpp"
#include "fhirforge/fhir/validate.hpp"
#include "fhirforge/sha256.hpp"

#include "../generators.hpp"
#include "support.hpp"

using namespace fhirforge;
using namespace fhirforge::fhir;

TEST_CASE("string helpers") {
    CHECK(strings::trim("  a b \t\n") == "a b");
    CHECK(strings::trim("") == "");
    CHECK(strings::trim(" \t ") == "");
    CHECK(strings::to_lower("MiXeD-42") == "mixed-42");
    CHECK(strings::starts_with("foobar", "foo"));
    CHECK_FALSE(strings::starts_with("fo", "foo"));
    CHECK(strings::contains("haystack", "sta"));
    CHECK_FALSE(strings::contains("haystack", "xyz"));
    CHECK(strings::split("a,b,,c", ',') == std::vector<std::string>{"a", "b", "", "c"});
    CHECK(strings::split("", ',') == std::vector<std::string>{""});
    CHECK(strings::join({"a", "b", "c"}, ", ") == "a, b, c");
    CHECK(strings::join({}, ", ").empty());
    CHECK(strings::replace_all("a-b-c", "-", "+") == "a+b+c");
    CHECK(strings::replace_all("aaa", "a", "aa") == "aaaaaa");

    // numeric runs compare by magnitude, not lexicographically
    CHECK(strings::natural_less("entry[2]", "entry[10]"));
    CHECK_FALSE(strings::natural_less("entry[10]", "entry[2]"));
    CHECK(strings::natural_less("a2b", "a2c"));
    CHECK(strings::natural_less("a02", "a3"));
    CHECK_FALSE(strings::natural_less("a3", "a3"));
    CHECK(strings::natural_less("a", "a1"));
}

TEST_CASE("utc timestamp shape") {
    const std::string ts = utc_timestamp_now();
    // YYYY-MM-DDTHH:MM:SS.mmmZ
    REQUIRE(ts.size() == 24);
    CHECK(ts[4] == '-');
    CHECK(ts[10] == 'T');
    CHECK(ts[19] == '.');
    CHECK(ts.back() == 'Z');
}

TEST_CASE("sha256 against external oracle") {
    // values computed independently with coreutils sha256sum
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("The quick brown fox jumps over the lazy dog") ==
          "d7a8fbb307d7809469ca9abcb0082e4f8d5651e46d3cdb762d02d0bf37c9e592");
    CHECK(sha256_hex(std::string(1000, 'a')) ==
          "41edece42d63e8d9bf515a9ba6932e1c20cbc9f5a5d134645adb5db1b9737ea3");
    CHECK(sha256_hex("Übelkeit") ==
          "4feb594d371aa3e6ef36b3954d218ec217af5cd472f46cb290abf7bbc8a13348");
    // padding boundaries: 55 (fits one block), 56 (spills), 64 (exact block)
    CHECK(sha256_hex(std::string(55, 'x')) ==
          "d5e285683cd4efc02d021a5c62014694958901005d6f71e89e0989fac77e4072");
    CHECK(sha256_hex(std::string(56, 'x')) ==
          "04c26261370ee7541549d16dee320c723e3fd14671e66a099afe0a377c16888e");
    CHECK(sha256_hex(std::string(64, 'x')) ==
          "7ce100971f64e7001e8fe5a51973ecdfe1ced42befe7ee8d5fd6219506b5393c");
}

TEST_CASE("model helpers") {
    Patient p;
    p.id = "p1";
    Resource r = p;
    CHECK(resource_type(r) == "Patient");
    CHECK(resource_id(r) == "p1");
    CHECK(local_ref(r) == "Patient/p1");
    set_resource_id(r, "p2");
    CHECK(resource_id(r) == "p2");

    CHECK(is_supported_type("Patient"));
    CHECK(is_supported_type("Condition"));
    CHECK(is_supported_type("MedicationStatement"));
    CHECK_FALSE(is_supported_type("Observation"));
    CHECK_FALSE(is_supported_type("patient"));
}

TEST_CASE("parse_resource reads a lenient document") {
    const char* text = R"({
        "resourceType": "Patient",
        "id": "p1",
        "name": [{"family": "Müller", "given": ["Anna", "Marie"]}],
        "address": [{"line": ["Hauptstraße 1", "Hinterhaus"], "city": "Köln"}],
        "birthDate": "1958",
        "gender": "female"
    })";
    auto res = parse_resource(std::string_view(text));
    REQUIRE(res.ok());
    CHECK(res.value().warnings.empty());
    const auto& p = std::get<Patient>(res.value().value);
    CHECK(p.id == "p1");
    REQUIRE(p.name.size() == 1);
    CHECK(p.name[0].family == "Müller");
    CHECK(p.name[0].given == std::vector<std::string>{"Anna", "Marie"});
    REQUIRE(p.address.size() == 1);
    // multi-element line arrays collapse into one joined line
    CHECK(p.address[0].line == "Hauptstraße 1, Hinterhaus");
    CHECK(p.birth_date == "1958");
    CHECK(p.gender == "female");
}

TEST_CASE("parse collects unknown-field warnings in document order") {
    const char* text = R"({
        "resourceType": "Patient",
        "id": "p1",
        "telecom": [],
        "name": [{"family": "X", "prefix": ["Dr."]}]
    })";
    auto res = parse_resource(std::string_view(text));
    REQUIRE(res.ok());
    REQUIRE(res.value().warnings.size() == 2);
    CHECK(res.value().warnings[0].path == "Patient.telecom");
    CHECK(res.value().warnings[0].message == "field 'telecom' is not modeled");
    CHECK(res.value().warnings[0].severity == Severity::warning);
    CHECK(res.value().warnings[0].kind == IssueKind::unknown_field);
    CHECK(res.value().warnings[1].path == "Patient.name[0].prefix");
}

TEST_CASE("parse failure modes") {
    SECTION("syntax error reports byte offset") {
        auto res = parse_resource(std::string_view("{\"a\": }"));
        REQUIRE_FALSE(res.ok());
        CHECK(res.error().kind == "syntax");
        CHECK(strings::starts_with(res.error().message, "JSON syntax error at byte 7"));
    }
    SECTION("missing resourceType") {
        auto res = parse_resource(std::string_view("{}"));
        REQUIRE_FALSE(res.ok());
        CHECK(res.error().kind == "bad-format");
        CHECK(res.error().message == "$ is missing resourceType");
    }
    SECTION("unsupported type") {
        auto res = parse_resource(std::string_view(R"({"resourceType": "Observation"})"));
        REQUIRE_FALSE(res.ok());
        CHECK(res.error().kind == "wrong-type");
        CHECK(res.error().message ==
              "Observation not in supported set (Patient, Condition, MedicationStatement)");
    }
    SECTION("field with the wrong JSON type") {
        auto res = parse_resource(std::string_view(R"({"resourceType": "Patient", "id": 3})"));
        REQUIRE_FALSE(res.ok());
        CHECK(res.error().kind == "bad-format");
        CHECK(res.error().message == "Patient.id must be a JSON string");
    }
    SECTION("bundle entry without resource") {
        auto res = parse_bundle(
            std::string_view(R"({"resourceType": "Bundle", "type": "collection", "entry": [{}]})"));
        REQUIRE_FALSE(res.ok());
        CHECK(res.error().message == "Bundle.entry[0] is missing resource");
    }
    SECTION("non-bundle passed to parse_bundle") {
        auto res = parse_bundle(std::string_view(R"({"resourceType": "Patient"})"));
        REQUIRE_FALSE(res.ok());
        CHECK(res.error().kind == "wrong-type");
        CHECK(res.error().message == "Patient is not a Bundle");
    }
}

TEST_CASE("parse_any accepts both shapes") {
    auto single = parse_any(R"({"resourceType": "Condition", "subject": {"reference": "Patient/p"}})");
    REQUIRE(single.ok());
    CHECK(std::holds_alternative<Resource>(single.value().value));

    auto bundle = parse_any(R"({"resourceType": "Bundle", "type": "collection", "entry": []})");
    REQUIRE(bundle.ok());
    CHECK(std::holds_alternative<Bundle>(bundle.value().value));

    auto bad = parse_any("[]");
    REQUIRE_FALSE(bad.ok());
    CHECK(bad.error().message == "$ must be a JSON object");
}

TEST_CASE("free-text timing becomes concept text with no loss") {
    const char* text = R"({
        "resourceType": "MedicationStatement",
        "subject": {"reference": "Patient/p1"},
        "status": "active",
        "medicationCodeableConcept": {"text": "ASS 100"},
        "dosage": [{"timing": "morgens"}]
    })";
    auto res = parse_resource(std::string_view(text));
    REQUIRE(res.ok());
    const auto& m = std::get<MedicationStatement>(res.value().value);
    REQUIRE(m.dosage.size() == 1);
    REQUIRE(m.dosage[0].timing.has_value());
    REQUIRE(m.dosage[0].timing->code.has_value());
    CHECK(m.dosage[0].timing->code->text == "morgens");
}

TEST_CASE("round-trip property: serialize then parse is identity") {
    testgen::Rng rng(20260819);
    for (int i = 0; i < 250; ++i) {
        const Resource r = testgen::random_resource(rng);
        // generator invariant: every generated resource is valid
        const auto issues = validate(r);
        INFO("resource: " << pretty(to_json(r)));
        INFO("issues: " << render_issues(issues));
        REQUIRE(issues.empty());

        auto bytes = serialize(r);
        REQUIRE(bytes.ok());
        auto back = parse_resource(bytes.value());
        REQUIRE(back.ok());
        CHECK(back.value().warnings.empty());
        CHECK(back.value().value == r);

        // canonical bytes are stable across a round-trip
        CHECK(serialize(back.value().value).value() == bytes.value());
    }
}

TEST_CASE("bundle round-trip keeps entry order and bytes") {
    testgen::Rng rng(424242);
    const Bundle b = testgen::random_valid_bundle(rng, 4);
    REQUIRE_FALSE(has_errors(validate(b)));
    const std::string bytes = serialize(b).value();
    auto back = parse_bundle(bytes);
    REQUIRE(back.ok());
    CHECK(back.value().value == b);
    CHECK(serialize(back.value().value).value() == bytes);
    CHECK(bundle_sha256(back.value().value) == bundle_sha256(b));
}

TEST_CASE("golden bundle: canonical bytes pinned") {
    const std::string text = testsupport::read_file(testsupport::fixture_path("golden_bundle.json"));
    REQUIRE_FALSE(text.empty());
    auto res = parse_bundle(text);
    REQUIRE(res.ok());
    CHECK(res.value().warnings.empty());
    const Bundle& b = res.value().value;
    REQUIRE(b.entries.size() == 3);
    CHECK(validate(b).empty());

    // pretty form reproduces the fixture byte for byte
    CHECK(pretty(to_json(b)) == text);
    // compact form is the canonical hash input; value cross-checked with
    // python json+hashlib
    CHECK(bundle_sha256(b) == "a1e8c3ca300c96dba29fceb1ea6b727aa8d3ee9687f3c6efb81276c4c23940bd");
    CHECK(pretty(to_json(b)).back() == '\n');
}

TEST_CASE("validate: binding violations") {
    SECTION("condition clinicalStatus") {
        Condition c;
        c.subject.reference = "Patient/p1";
        c.clinical_status = testgen::binding_cc("cured", "http://terminology.hl7.org/CodeSystem/condition-clinical");
        auto issues = validate(Resource{c});
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].path == "Condition.clinicalStatus.coding[0].code");
        CHECK(issues[0].kind == IssueKind::bad_binding);
        CHECK(issues[0].message ==
              "code 'cured' violates the required binding (legal codes: active, recurrence, "
              "relapse, inactive, remission, resolved)");
        CHECK(render_issue(issues[0]) ==
              "error Condition.clinicalStatus.coding[0].code [bad-binding] code 'cured' violates "
              "the required binding (legal codes: active, recurrence, relapse, inactive, "
              "remission, resolved)");
    }
    SECTION("every legal clinicalStatus code passes") {
        for (auto code : kClinicalStatusCodes) {
            Condition c;
            c.subject.reference = "Patient/p1";
            c.clinical_status = testgen::binding_cc(
                std::string(code), "http://terminology.hl7.org/CodeSystem/condition-clinical");
            CHECK(validate(Resource{c}).empty());
        }
    }
    SECTION("patient gender") {
        Patient p;
        p.gender = "M";
        auto issues = validate(Resource{p});
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].path == "Patient.gender");
        CHECK(issues[0].message ==
              "gender 'M' violates the required binding (legal codes: male, female, other, "
              "unknown)");
    }
    SECTION("medication status") {
        MedicationStatement m;
        m.subject.reference = "Patient/p1";
        m.medication.text = "X";
        m.status = "paused";
        auto issues = validate(Resource{m});
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].path == "MedicationStatement.status");
        CHECK(issues[0].message ==
              "status 'paused' violates the required binding (legal codes: active, completed, "
              "entered-in-error, intended, stopped, on-hold, unknown, not-taken)");
        for (auto code : kMedicationStatusCodes) {
            m.status = std::string(code);
            CHECK(validate(Resource{m}).empty());
        }
    }
}

TEST_CASE("validate: required pieces") {
    SECTION("medication status required") {
        MedicationStatement m;
        m.subject.reference = "Patient/p1";
        m.medication.text = "X";
        m.status = "";
        auto issues = validate(Resource{m});
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].kind == IssueKind::missing_required);
        CHECK(issues[0].message == "status is required");
    }
    SECTION("medication concept must not be empty") {
        MedicationStatement m;
        m.subject.reference = "Patient/p1";
        m.status = "active";
        auto issues = validate(Resource{m});
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].path == "MedicationStatement.medicationCodeableConcept");
        CHECK(issues[0].message == "medication requires coding or text");
    }
    SECTION("condition subject required") {
        Condition c;
        auto issues = validate(Resource{c});
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].path == "Condition.subject");
        CHECK(issues[0].kind == IssueKind::missing_required);
        CHECK(issues[0].message == "required reference is missing");
    }
    SECTION("reference format") {
        Condition c;
        c.subject.reference = "patient/p1";
        auto issues = validate(Resource{c});
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].path == "Condition.subject.reference");
        CHECK(issues[0].message ==
              "reference 'patient/p1' must be <ResourceType>/<id> with a supported type");
    }
    SECTION("coding needs code, code needs system") {
        Condition c;
        c.subject.reference = "Patient/p1";
        CodeableConcept cc;
        cc.coding.push_back(Coding{"", "", std::nullopt});
        c.code = cc;
        auto issues = validate(Resource{c});
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].message == "coding requires a non-empty code");

        cc.coding[0].code = "123";
        c.code = cc;
        issues = validate(Resource{c});
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].message == "coding with a code requires a system");
    }
    SECTION("empty codeable concept") {
        Condition c;
        c.subject.reference = "Patient/p1";
        c.code = CodeableConcept{};
        auto issues = validate(Resource{c});
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].message == "CodeableConcept requires at least one of coding or text");
    }
    SECTION("dose quantity needs a unit") {
        MedicationStatement m;
        m.subject.reference = "Patient/p1";
        m.status = "active";
        m.medication.text = "X";
        Dosage d;
        DoseAndRate dar;
        dar.dose_quantity = DoseQuantity{100.0, "", std::nullopt, std::nullopt};
        d.dose_and_rate.push_back(dar);
        m.dosage.push_back(d);
        auto issues = validate(Resource{m});
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].path == "MedicationStatement.dosage[0].doseAndRate[0].doseQuantity.unit");
        CHECK(issues[0].message == "doseQuantity requires a unit");
    }
}

TEST_CASE("validate: date and dateTime formats") {
    auto patient_with_date = [](const std::string& d) {
        Patient p;
        p.birth_date = d;
        return validate(Resource{p});
    };
    CHECK(patient_with_date("1958").empty());
    CHECK(patient_with_date("1970-04").empty());
    CHECK(patient_with_date("1975-02-10").empty());
    CHECK(patient_with_date("1996-02-29").empty());   // leap year
    CHECK_FALSE(patient_with_date("1995-02-29").empty());  // not a leap year
    CHECK_FALSE(patient_with_date("1900-02-29").empty());  // century rule
    CHECK(patient_with_date("2000-02-29").empty());   // 400-year rule
    CHECK_FALSE(patient_with_date("1958-13").empty());
    CHECK_FALSE(patient_with_date("1958-00").empty());
    CHECK_FALSE(patient_with_date("1958-04-31").empty());
    CHECK_FALSE(patient_with_date("19580410").empty());
    CHECK_FALSE(patient_with_date("10.02.1975").empty());
    {
        auto issues = patient_with_date("next week");
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].message == "'next week' is not a valid date (YYYY, YYYY-MM or YYYY-MM-DD)");
    }

    auto condition_with_onset = [](const std::string& d) {
        Condition c;
        c.subject.reference = "Patient/p1";
        c.onset_date_time = d;
        return validate(Resource{c});
    };
    CHECK(condition_with_onset("2021-03-04T10:15:00Z").empty());
    CHECK(condition_with_onset("2019-07-01T08:00:00+02:00").empty());
    CHECK(condition_with_onset("2020-02-29T23:59:59.123Z").empty());
    CHECK(condition_with_onset("1999-12-31").empty());  // bare date is a legal dateTime
    CHECK(condition_with_onset("1999").empty());
    CHECK_FALSE(condition_with_onset("2021-03-04T10:15:00").empty());    // missing timezone
    CHECK_FALSE(condition_with_onset("2021-03T10:15:00Z").empty());      // time needs full date
    CHECK_FALSE(condition_with_onset("2021-03-04T25:00:00Z").empty());   // bad hour
    CHECK_FALSE(condition_with_onset("2021-03-04T10:15:00+15:00").empty());  // offset > 14h
    {
        auto issues = condition_with_onset("yesterday");
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].message == "'yesterday' is not a valid dateTime");
    }
}

TEST_CASE("validate bundle: cross-entry references") {
    Patient p;
    p.id = "patient-1";
    Condition c;
    c.id = "condition-1";
    c.subject.reference = "Patient/patient-1";

    SECTION("resolving reference is clean") {
        auto [b, issues] = make_bundle({p, c});
        CHECK(issues.empty());
        CHECK(b.type == "collection");
        REQUIRE(b.entries.size() == 2);
        CHECK(validate(b).empty());
    }
    SECTION("dangling reference is an error") {
        auto [b, issues] = make_bundle({c});
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].kind == IssueKind::dangling_reference);
        CHECK(issues[0].path == "Bundle.entry[0].Condition.subject");
        CHECK(issues[0].message ==
              "reference 'Patient/patient-1' does not resolve within the bundle");
    }
    SECTION("bundle type binding") {
        Bundle b;
        b.type = "searchset";
        auto issues = validate(b);
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].path == "Bundle.type");
        CHECK(issues[0].message ==
              "bundle type 'searchset' is not supported (legal codes: collection)");
    }
    SECTION("empty collection is legal") {
        auto [b, issues] = make_bundle({});
        CHECK(issues.empty());
        CHECK(validate(b).empty());
    }
}

TEST_CASE("issues come out sorted by path, naturally") {
    Bundle b;
    b.type = "collection";
    for (int i = 0; i < 11; ++i) {
        Condition c;  // missing subject -> one error each
        b.entries.push_back(c);
    }
    auto issues = validate(b);
    REQUIRE(issues.size() == 11);
    CHECK(issues[1].path == "Bundle.entry[1].Condition.subject");
    CHECK(issues[9].path == "Bundle.entry[9].Condition.subject");
    CHECK(issues[10].path == "Bundle.entry[10].Condition.subject");  // after [9], not after [1]
}

TEST_CASE("render_issues lists one line per issue, no trailing newline") {
    Patient p;
    p.gender = "robot";
    p.birth_date = "tomorrow";
    auto issues = validate(Resource{p});
    REQUIRE(issues.size() == 2);
    const std::string text = render_issues(issues);
    CHECK(text ==
          "error Patient.birthDate [bad-format] 'tomorrow' is not a valid date (YYYY, YYYY-MM or "
          "YYYY-MM-DD)\n"
          "error Patient.gender [bad-binding] gender 'robot' violates the required binding (legal "
          "codes: male, female, other, unknown)");
}
