// SPDX-License-Identifier: Apache-2.0
// Evaluation layer: itemization, prediff alignment, annotation invariants,
// matrix aggregation, rendering, persistence — plus the document corpus.

#include <catch2/catch_amalgamated.hpp>

#include "fhirforge/corpus.hpp"
#include "fhirforge/eval.hpp"
#include "fhirforge/fhir/io.hpp"

#include "support.hpp"

using namespace fhirforge;
using namespace fhirforge::eval;
using fhirforge::fhir::Bundle;
using fhirforge::fhir::CodeableConcept;
using fhirforge::fhir::Coding;
using fhirforge::fhir::Condition;
using fhirforge::fhir::MedicationStatement;
using fhirforge::fhir::Patient;

namespace {

CodeableConcept cc_coded(const std::string& code, const std::string& display) {
    CodeableConcept cc;
    cc.coding.push_back(Coding{"http://snomed.info/sct", code, display});
    return cc;
}

CodeableConcept cc_text(const std::string& text) {
    CodeableConcept cc;
    cc.text = text;
    return cc;
}

Patient sample_patient() {
    Patient p;
    p.id = "patient-1";
    fhir::HumanName n;
    n.family = "Jäger";
    n.given = {"Uwe"};
    p.name.push_back(n);
    p.birth_date = "1975-02-10";
    p.gender = "male";
    return p;
}

Condition sample_condition() {
    Condition c;
    c.id = "condition-1";
    c.subject.reference = "Patient/patient-1";
    c.code = cc_coded("422400008", "Vomiting");
    c.severity = cc_coded("255604002", "Mild");
    c.body_site.push_back(cc_coded("52795006", "Forehead structure"));
    return c;
}

MedicationStatement sample_ms() {
    MedicationStatement m;
    m.id = "ms-1";
    m.subject.reference = "Patient/patient-1";
    m.status = "active";
    m.medication = cc_coded("387207008", "Ibuprofen");
    fhir::Dosage d;
    d.text = "400 mg morgens";
    fhir::DoseAndRate dar;
    dar.type = cc_text("ordered");
    dar.dose_quantity = fhir::DoseQuantity{400.0, "mg", std::nullopt, std::nullopt};
    d.dose_and_rate.push_back(dar);
    fhir::Timing t;
    t.code = cc_text("morgens");
    d.timing = t;
    m.dosage.push_back(d);
    return m;
}

Bundle sample_bundle() {
    Bundle b;
    b.type = "collection";
    b.entries = {sample_patient(), sample_condition(), sample_ms()};
    return b;
}

AnnotatedItem make_item(const std::string& tag, bool with_pd, bool with_hb,
                        const std::string& preference = "", const std::string& cruciality = "",
                        const std::string& owner = "Condition#1") {
    AnnotatedItem a;
    a.tag = tag;
    a.preference = preference;
    a.cruciality = cruciality;
    const size_t hash = owner.rfind('#');
    Item side;
    side.path = "Condition.code";
    side.value = Json{{"text", "x"}};
    side.owner_type = owner.substr(0, hash);
    side.owner_ordinal = std::stoi(owner.substr(hash + 1));
    if (with_pd) a.pd = side;
    if (with_hb) {
        // '==' requires byte-equal sides; others get a differing value
        if (tag != "==" && with_pd) side.value = Json{{"text", "y"}};
        a.hb = side;
    }
    return a;
}

}  // namespace

TEST_CASE("itemize walks entries in order; id and subject are not items") {
    auto items = itemize(sample_bundle());
    std::vector<std::string> paths;
    for (const auto& i : items) paths.push_back(i.path);
    CHECK(paths == std::vector<std::string>{
                       "Patient.name[0]",
                       "Patient.birthDate",
                       "Patient.gender",
                       "Condition.code",
                       "Condition.severity",
                       "Condition.bodySite[0]",
                       "MedicationStatement.status",
                       "MedicationStatement.medicationCodeableConcept",
                       "MedicationStatement.dosage[0].text",
                       "MedicationStatement.dosage[0].doseAndRate[0].type",
                       "MedicationStatement.dosage[0].doseAndRate[0].doseQuantity",
                       "MedicationStatement.dosage[0].timing",
                   });
    // ordinals are 1-based bundle positions; owner keys combine type+ordinal
    CHECK(items[0].owner_ordinal == 1);
    CHECK(items[3].owner_ordinal == 2);
    CHECK(items[6].owner_ordinal == 3);
    CHECK(owner_key(items[3]) == "Condition#2");
    // coded sub-objects are monolithic values
    CHECK(items[3].value == Json{{"coding", Json::array({Json{{"system", "http://snomed.info/sct"},
                                                              {"code", "422400008"},
                                                              {"display", "Vomiting"}}})}});
    CHECK(items[1].value == Json("1975-02-10"));
}

TEST_CASE("effective cruciality precedence") {
    AnnotationSet set;
    set.fallback_cruciality = "!";
    set.object_defaults["Condition#1"] = "?";

    SECTION("item override wins") {
        auto a = make_item("==", true, true, "", "!");
        auto r = effective_cruciality(set, a);
        CHECK(r.mark == "!");
        CHECK(r.source == "item-override");
    }
    SECTION("object default applies when no override") {
        auto a = make_item("==", true, true);
        auto r = effective_cruciality(set, a);
        CHECK(r.mark == "?");
        CHECK(r.source == "object-default");
    }
    SECTION("fallback when object unknown") {
        auto a = make_item("==", true, true, "", "", "Patient#9");
        auto r = effective_cruciality(set, a);
        CHECK(r.mark == "!");
        CHECK(r.source == "object-default");
    }
    SECTION("hb-only items resolve through the hb owner") {
        auto a = make_item("-", false, true);
        auto r = effective_cruciality(set, a);
        CHECK(r.mark == "?");
    }
}

TEST_CASE("judgment mapping") {
    CHECK(judge(make_item("==", true, true)) == Judgment::neutral);
    CHECK(judge(make_item("+-", true, true, "|")) == Judgment::worse);
    CHECK(judge(make_item("+-", true, true, "/")) == Judgment::better);
    CHECK(judge(make_item("+", true, false)) == Judgment::neutral);
    // X is always Worse, even with a stray preference mark
    CHECK(judge(make_item("X", true, false, "/")) == Judgment::worse);
}

TEST_CASE("annotation invariants are enforced") {
    auto problem = [](const AnnotatedItem& a) { return annotation_problem(a); };

    CHECK(problem(make_item("~", true, true)) == "unknown tag '~'");
    CHECK(problem(make_item("+", true, true)) == "tag '+' requires the baseline side to be absent");
    CHECK(problem(make_item("+", false, false)) == "annotation has neither side");
    CHECK(problem(make_item("-", true, true)) == "tag '-' requires the prediction side to be absent");
    CHECK(problem(make_item("-", false, true)) == std::nullopt);
    CHECK(problem(make_item("X", false, true)) ==
          "tag 'X' marks a prediction defect; prediction side missing");
    CHECK(problem(make_item("=", true, false)) == "tag '=' requires both sides");
    CHECK(problem(make_item("+-", false, true)) == "tag '+-' requires both sides");
    {
        auto a = make_item("==", true, true);
        a.hb->value = Json{{"text", "different"}};
        CHECK(problem(a) == "tag '==' requires byte-equal values after canonical serialization");
    }
    {
        auto a = make_item("==", true, true);
        a.preference = "better";
        CHECK(problem(a) == "unknown preference 'better'");
    }
    {
        auto a = make_item("==", true, true);
        a.cruciality = "!!";
        CHECK(problem(a) == "unknown cruciality '!!'");
    }
    CHECK(problem(make_item("==", true, true)) == std::nullopt);
    CHECK(problem(make_item("X", true, false)) == std::nullopt);
}

TEST_CASE("aggregate fills the matrix; totals and rate by hand-check") {
    AnnotationSet set;
    set.fallback_cruciality = "!";
    set.object_defaults["Condition#1"] = "?";

    // hand-built: 2x '==' (neutral: one '!', one '?'), 1x '+-|' worse '?',
    // 1x '+/' better '!', 1x '-' neutral '?', 1x 'X' worse '!'
    set.items.push_back(make_item("==", true, true, "", "!"));
    set.items.push_back(make_item("==", true, true));            // object default '?'
    set.items.push_back(make_item("+-", true, true, "|"));       // worse, '?'
    set.items.push_back(make_item("+", true, false, "/", "!"));  // better, '!'
    set.items.push_back(make_item("-", false, true));            // neutral, '?'
    set.items.push_back(make_item("X", true, false, "", "!"));   // worse, '!'

    auto res = aggregate(set);
    REQUIRE(res.ok());
    const EvalMatrix& m = res.value();

    // rows follow kTags = {=, ==, +, -, +-, X}; columns W! W? N! N? B! B?
    CHECK(m.cells[1] == std::array<long, 6>{0, 0, 1, 1, 0, 0});  // ==
    CHECK(m.cells[2] == std::array<long, 6>{0, 0, 0, 0, 1, 0});  // +
    CHECK(m.cells[3] == std::array<long, 6>{0, 0, 0, 1, 0, 0});  // -
    CHECK(m.cells[4] == std::array<long, 6>{0, 1, 0, 0, 0, 0});  // +-
    CHECK(m.cells[5] == std::array<long, 6>{1, 0, 0, 0, 0, 0});  // X
    CHECK(m.totals == std::array<long, 3>{2, 3, 1});
    CHECK(m.total_items == 6);
    CHECK(m.hallucinated_items == 1);
    CHECK(m.hallucination_rate == Catch::Approx(1.0 / 6.0));
}

TEST_CASE("aggregate rejects invalid annotations, naming the path") {
    AnnotationSet set;
    set.items.push_back(make_item("+", true, true));
    auto res = aggregate(set);
    REQUIRE_FALSE(res.ok());
    CHECK(res.error().kind == "bad-annotation");
    CHECK(res.error().message ==
          "Condition.code: tag '+' requires the baseline side to be absent");
}

TEST_CASE("render_matrix pins the exact table format") {
    AnnotationSet set;
    set.items.push_back(make_item("==", true, true, "", "!"));
    set.items.push_back(make_item("X", true, false, "", "?"));
    auto res = aggregate(set);
    REQUIRE(res.ok());
    CHECK(render_matrix(res.value()) ==
          "       | Worse than HB | Neutral       | Better than HB\n"
          "  tag  |    !      ?   |    !      ?   |    !      ?\n"
          "  -----+---------------+---------------+---------------\n"
          "  =    |    0      0  |    0      0  |    0      0\n"
          "  ==   |    0      0  |    1      0  |    0      0\n"
          "  +    |    0      0  |    0      0  |    0      0\n"
          "  -    |    0      0  |    0      0  |    0      0\n"
          "  +-   |    0      0  |    0      0  |    0      0\n"
          "  X    |    0      1  |    0      0  |    0      0\n"
          "  -----+---------------+---------------+---------------\n"
          "  total|           1   |           1   |           0\n"
          "  hallucination rate: 50.00% (1/2)\n");
}

TEST_CASE("matrix_to_csv emits tag-major rows") {
    AnnotationSet set;
    set.items.push_back(make_item("X", true, false, "", "?"));
    auto res = aggregate(set);
    REQUIRE(res.ok());
    const std::string csv = matrix_to_csv(res.value());
    const auto lines = strings::split(csv, '\n');
    REQUIRE(lines.size() == 38);  // header + 36 cells + trailing empty
    CHECK(lines[0] == "tag,cruciality,judgment,count");
    CHECK(lines[1] == "=,!,Worse,0");
    CHECK(lines[2] == "=,?,Worse,0");
    CHECK(lines[3] == "=,!,Neutral,0");
    CHECK(lines[31] == "X,!,Worse,0");
    CHECK(lines[32] == "X,?,Worse,1");
    CHECK(lines[36] == "X,?,Better,0");
}

TEST_CASE("annotation JSONL round-trip") {
    AnnotationSet set;
    set.fallback_cruciality = "?";
    set.object_defaults["Condition#2"] = "!";
    auto a = make_item("+-", true, true, "|", "?");
    a.ambiguous = true;
    a.note = "näher am Text";
    set.items.push_back(a);
    set.items.push_back(make_item("-", false, true));

    const std::string text = annotations_to_jsonl(set);
    const auto lines = strings::split(text, '\n');
    REQUIRE(lines.size() == 4);  // header + 2 items + trailing empty
    const Json header = Json::parse(lines[0]);
    CHECK(header["version"] == 1);
    CHECK(header["fallback_cruciality"] == "?");
    CHECK(header["object_defaults"]["Condition#2"] == "!");
    const Json item0 = Json::parse(lines[1]);
    CHECK(item0["tag"] == "+-");
    CHECK(item0["alignment"] == "ambiguous");
    CHECK(item0["note"] == "näher am Text");
    CHECK(item0["pd"]["owner"] == "Condition#1");
    CHECK(item0["pd"]["path"] == "Condition.code");
    const Json item1 = Json::parse(lines[2]);
    CHECK(item1["pd"].is_null());

    auto back = annotations_from_jsonl(text, "mem");
    REQUIRE(back.ok());
    CHECK(back.value().fallback_cruciality == "?");
    CHECK(back.value().object_defaults == set.object_defaults);
    REQUIRE(back.value().items.size() == 2);
    CHECK(back.value().items[0].tag == "+-");
    CHECK(back.value().items[0].preference == "|");
    CHECK(back.value().items[0].cruciality == "?");
    CHECK(back.value().items[0].ambiguous);
    CHECK(back.value().items[0].note == "näher am Text");
    REQUIRE(back.value().items[0].pd.has_value());
    CHECK(back.value().items[0].pd->path == "Condition.code");
    CHECK(back.value().items[0].pd->owner_type == "Condition");
    CHECK(back.value().items[0].pd->owner_ordinal == 1);
    CHECK(back.value().items[0].pd->value == Json{{"text", "x"}});
    CHECK_FALSE(back.value().items[1].pd.has_value());
    REQUIRE(back.value().items[1].hb.has_value());

    SECTION("file round-trip") {
        testsupport::TempDir tmp;
        const std::string path = tmp.file("ann.jsonl");
        REQUIRE(save_annotations(set, path).ok());
        auto loaded = load_annotations(path);
        REQUIRE(loaded.ok());
        CHECK(annotations_to_jsonl(loaded.value()) == text);
    }
}

TEST_CASE("annotation JSONL rejects broken input") {
    SECTION("no header") {
        auto r = annotations_from_jsonl("{\"tag\": \"==\"}\n", "f.jsonl");
        REQUIRE_FALSE(r.ok());
        CHECK(r.error().message == "f.jsonl: first line must be a header");
    }
    SECTION("empty file") {
        auto r = annotations_from_jsonl("", "f.jsonl");
        REQUIRE_FALSE(r.ok());
        CHECK(r.error().message == "f.jsonl: empty annotation file");
    }
    SECTION("json error names the line") {
        auto r = annotations_from_jsonl("{\"version\":1}\n{broken\n", "f.jsonl");
        REQUIRE_FALSE(r.ok());
        CHECK(strings::starts_with(r.error().message, "f.jsonl:2: "));
    }
    SECTION("item needing a path names the line") {
        auto r = annotations_from_jsonl("{\"version\":1}\n{\"tag\":\"+\",\"pd\":{}}\n", "f.jsonl");
        REQUIRE_FALSE(r.ok());
        CHECK(r.error().message == "f.jsonl:2: item side needs a path");
    }
    SECTION("missing annotation file") {
        auto r = load_annotations("/nonexistent/ann.jsonl");
        REQUIRE_FALSE(r.ok());
        CHECK(r.error().kind == "io");
    }
}

TEST_CASE("prediff: identical bundles are all '=='") {
    const Bundle b = sample_bundle();
    auto items = prediff(b, b);
    REQUIRE(items.size() == itemize(b).size());
    for (const auto& a : items) {
        CHECK(a.tag == "==");
        CHECK_FALSE(a.ambiguous);
        REQUIRE(a.pd.has_value());
        REQUIRE(a.hb.has_value());
        CHECK(a.pd->path == a.hb->path);
        CHECK(a.pd->value == a.hb->value);
    }
}

TEST_CASE("prediff: value changes, one-sided fields, one-sided resources") {
    Bundle pd = sample_bundle();
    Bundle hb = sample_bundle();

    // change a value -> '+-'
    std::get<Condition>(pd.entries[1]).code = cc_coded("422587007", "Nausea (finding)");
    // drop a field from hb -> '+' on pd side
    std::get<Condition>(hb.entries[1]).severity.reset();
    // add a field only in hb -> '-'
    std::get<Condition>(hb.entries[1]).onset_date_time = "2021-01-01";
    // an entire resource only in pd -> all its items '+'
    Condition extra;
    extra.id = "condition-9";
    extra.subject.reference = "Patient/patient-1";
    extra.code = cc_text("Fieber");
    pd.entries.push_back(extra);

    auto items = prediff(pd, hb);
    std::map<std::string, std::string> tag_by_path;  // pd-or-hb path -> tag
    int plus_minus = 0, plus = 0, minus = 0, equal = 0;
    for (const auto& a : items) {
        const std::string path = a.pd ? a.pd->path : a.hb->path;
        if (a.tag == "+-") {
            ++plus_minus;
            CHECK(path == "Condition.code");
        } else if (a.tag == "+") {
            ++plus;
        } else if (a.tag == "-") {
            ++minus;
            CHECK(path == "Condition.onsetDateTime");
        } else if (a.tag == "==") {
            ++equal;
        }
    }
    CHECK(plus_minus == 1);
    CHECK(minus == 1);
    // '+': severity present only in pd, plus the extra condition's one item
    CHECK(plus == 2);
    CHECK(equal == static_cast<int>(items.size()) - 4);
}

TEST_CASE("prediff: single same-type pair aligns without ambiguity") {
    Bundle pd, hb;
    pd.type = hb.type = "collection";
    Condition a;
    a.subject.reference = "Patient/p";
    a.code = cc_text("völlig anderes");
    Condition b;
    b.subject.reference = "Patient/p";
    b.code = cc_text("etwas unabhängiges");
    pd.entries = {a};
    hb.entries = {b};
    auto items = prediff(pd, hb);
    REQUIRE(items.size() == 1);
    CHECK(items[0].tag == "+-");
    CHECK_FALSE(items[0].ambiguous);  // 1x1 needs no lexical key
}

TEST_CASE("prediff: indistinguishable candidates are flagged ambiguous") {
    Bundle pd, hb;
    pd.type = hb.type = "collection";
    Condition same1;
    same1.subject.reference = "Patient/p";
    same1.code = cc_text("Husten");
    Condition same2 = same1;
    pd.entries = {same1, same2};
    hb.entries = {same1, same2};
    auto items = prediff(pd, hb);
    REQUIRE(items.size() == 2);
    for (const auto& a : items) {
        CHECK(a.tag == "==");
        CHECK(a.ambiguous);
    }
}

TEST_CASE("prediff: distinct lexical keys pair up unambiguously") {
    Bundle pd, hb;
    pd.type = hb.type = "collection";
    Condition cough;
    cough.subject.reference = "Patient/p";
    cough.code = cc_coded("49727002", "Cough");
    Condition fever;
    fever.subject.reference = "Patient/p";
    fever.code = cc_coded("386661006", "Fever");
    Condition fever_variant = fever;
    fever_variant.severity = cc_coded("255604002", "Mild");
    // reversed order in hb: pairing must go by content, not position
    pd.entries = {cough, fever_variant};
    hb.entries = {fever, cough};
    auto items = prediff(pd, hb);
    int severity_plus = 0;
    for (const auto& a : items) {
        if (a.pd && a.pd->path == "Condition.severity") {
            CHECK(a.tag == "+");
            ++severity_plus;
        } else {
            CHECK(a.tag == "==");
        }
        CHECK_FALSE(a.ambiguous);
    }
    CHECK(severity_plus == 1);
}

// ---- corpus -----------------------------------------------------------------

TEST_CASE("manifest parsing") {
    SECTION("sections, quoting, comments") {
        auto m = corpus::detail::parse_manifest(
            "# comment\n"
            "[brief-01]\n"
            "text = brief-01.txt\n"
            "baseline = \"brief-01.baseline.json\"\n"
            "language = de\n"
            "\n"
            "[brief-02]\n"
            "text = brief-02.txt\n",
            "corpus.toml");
        REQUIRE(m.ok());
        REQUIRE(m.value().size() == 2);
        CHECK(m.value().at("brief-01").text_file == "brief-01.txt");
        CHECK(m.value().at("brief-01").baseline_file == "brief-01.baseline.json");
        CHECK(m.value().at("brief-01").language == "de");
        CHECK(m.value().at("brief-02").baseline_file.empty());
    }
    SECTION("empty section id") {
        auto m = corpus::detail::parse_manifest("[]\n", "corpus.toml");
        REQUIRE_FALSE(m.ok());
        CHECK(m.error().message == "corpus.toml:1: empty section id");
    }
    SECTION("key outside a section") {
        auto m = corpus::detail::parse_manifest("text = x.txt\n", "corpus.toml");
        REQUIRE_FALSE(m.ok());
        CHECK(m.error().message == "corpus.toml:1: expected `key = value` inside a [section]");
    }
    SECTION("unknown key") {
        auto m = corpus::detail::parse_manifest("[a]\nauthor = me\n", "corpus.toml");
        REQUIRE_FALSE(m.ok());
        CHECK(m.error().message == "corpus.toml:2: unknown manifest key 'author'");
    }
}

TEST_CASE("load_corpus with a manifest") {
    testsupport::TempDir tmp;
    testsupport::write_file(tmp.file("corpus.toml"),
                            "[letter-b]\ntext = b.txt\nlanguage = en\n"
                            "[letter-a]\ntext = a.txt\nbaseline = a.baseline.json\n");
    testsupport::write_file(tmp.file("a.txt"), "Uwe Jäger, geboren am 10. Februar 1975.\n");
    testsupport::write_file(tmp.file("b.txt"), "An English letter.\n");
    fhir::Bundle baseline;
    baseline.type = "collection";
    baseline.entries.push_back(sample_patient());
    testsupport::write_file(tmp.file("a.baseline.json"), fhir::pretty(fhir::to_json(baseline)));

    auto docs = corpus::load_corpus(tmp.path.string());
    REQUIRE(docs.ok());
    REQUIRE(docs.value().size() == 2);
    // sorted by id regardless of manifest order
    CHECK(docs.value()[0].id == "letter-a");
    CHECK(docs.value()[1].id == "letter-b");
    CHECK(docs.value()[0].language == "de");  // default
    CHECK(docs.value()[1].language == "en");
    CHECK(strings::contains(docs.value()[0].text, "Uwe Jäger"));
    REQUIRE(docs.value()[0].baseline.has_value());
    CHECK(docs.value()[0].baseline->entries.size() == 1);
    CHECK_FALSE(docs.value()[1].baseline.has_value());

    CHECK(corpus::find_document(docs.value(), "letter-b").has_value());
    CHECK_FALSE(corpus::find_document(docs.value(), "letter-z").has_value());
}

TEST_CASE("load_corpus fallback scan without a manifest") {
    testsupport::TempDir tmp;
    testsupport::write_file(tmp.file("z-letter.txt"), "Befund: unauffällig.\n");
    testsupport::write_file(tmp.file("a-letter.txt"), "Anamnese: Kopfschmerz.\n");
    testsupport::write_file(tmp.file("notes.md"), "ignored\n");
    fhir::Bundle baseline;
    baseline.type = "collection";
    baseline.entries.push_back(sample_patient());
    testsupport::write_file(tmp.file("a-letter.baseline.json"),
                            fhir::pretty(fhir::to_json(baseline)));

    auto docs = corpus::load_corpus(tmp.path.string());
    REQUIRE(docs.ok());
    REQUIRE(docs.value().size() == 2);
    CHECK(docs.value()[0].id == "a-letter");
    CHECK(docs.value()[1].id == "z-letter");
    CHECK(docs.value()[0].baseline.has_value());
    CHECK_FALSE(docs.value()[1].baseline.has_value());
}

TEST_CASE("load_corpus failure modes") {
    testsupport::TempDir tmp;
    SECTION("missing directory") {
        auto docs = corpus::load_corpus(tmp.file("absent"));
        REQUIRE_FALSE(docs.ok());
        CHECK(docs.error().kind == "io");
        CHECK(strings::starts_with(docs.error().message, "corpus directory not found: "));
    }
    SECTION("empty text") {
        testsupport::write_file(tmp.file("empty.txt"), "  \n");
        auto docs = corpus::load_corpus(tmp.path.string());
        REQUIRE_FALSE(docs.ok());
        CHECK(docs.error().message == "document 'empty' has empty text");
    }
    SECTION("invalid baseline names the file and first issue") {
        testsupport::write_file(tmp.file("doc.txt"), "Text.\n");
        testsupport::write_file(tmp.file("doc.baseline.json"),
                                R"({"resourceType": "Bundle", "type": "collection", "entry": [
                                    {"resource": {"resourceType": "Patient", "gender": "robot"}}]})");
        auto docs = corpus::load_corpus(tmp.path.string());
        REQUIRE_FALSE(docs.ok());
        CHECK(docs.error().kind == "invalid-baseline");
        CHECK(strings::contains(docs.error().message, "doc.baseline.json: "));
        CHECK(strings::contains(docs.error().message,
                                "error Bundle.entry[0].Patient.gender [bad-binding]"));
    }
    SECTION("manifest naming a missing text file") {
        testsupport::write_file(tmp.file("corpus.toml"), "[a]\ntext = gone.txt\n");
        auto docs = corpus::load_corpus(tmp.path.string());
        REQUIRE_FALSE(docs.ok());
        CHECK(docs.error().kind == "io");
    }
    SECTION("manifest section without text") {
        testsupport::write_file(tmp.file("corpus.toml"), "[a]\nlanguage = de\n");
        auto docs = corpus::load_corpus(tmp.path.string());
        REQUIRE_FALSE(docs.ok());
        CHECK(strings::contains(docs.error().message, "[a] has no text file"));
    }
}

TEST_CASE("shipped corpus loads with validated baselines") {
    auto docs = corpus::load_corpus(testsupport::data_path("corpus"));
    REQUIRE(docs.ok());
    REQUIRE(docs.value().size() >= 3);
    for (const auto& d : docs.value()) {
        CHECK_FALSE(strings::trim(d.text).empty());
        CHECK(d.language == "de");
        REQUIRE(d.baseline.has_value());
        CHECK(fhir::validate(*d.baseline).empty());
    }
}
