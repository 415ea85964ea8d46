// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fhirforge/common.hpp"
#include "fhirforge/terminology.hpp"

namespace fhirforge::agent {

struct AgentConfig {
    int max_steps = 12;
    std::vector<std::string> resource_types = {"Patient", "Condition", "MedicationStatement"};
    std::vector<term::ValueSetRef> valuesets = term::default_valuesets();
    double temperature = 0.0;
    std::string model = "default";
    std::string language_hint;  // e.g. "de"; empty = unspecified
};

inline std::optional<std::string> agent_config_problem(const AgentConfig& c) {
    if (c.max_steps < 2) return "max_steps must be at least 2 (one action plus final answer)";
    if (c.resource_types.empty()) return "at least one resource type must be allowed";
    for (const auto& t : c.resource_types)
        if (t != "Patient" && t != "Condition" && t != "MedicationStatement")
            return "unsupported resource type '" + t + "'";
    return std::nullopt;
}

inline Json agent_config_to_json(const AgentConfig& c) {
    Json j = Json::object();
    j["max_steps"] = c.max_steps;
    j["resource_types"] = c.resource_types;
    Json vs = Json::array();
    for (const auto& v : c.valuesets) {
        Json vj = Json::object();
        vj["url"] = v.url;
        vj["name"] = v.name;
        vj["description"] = v.description;
        vs.push_back(std::move(vj));
    }
    j["valuesets"] = std::move(vs);
    j["temperature"] = c.temperature;
    j["model"] = c.model;
    j["language_hint"] = c.language_hint;
    return j;
}

inline Result<AgentConfig> agent_config_from_json(const Json& j) {
    AgentConfig c;
    if (!j.is_object()) return make_error("bad-format", "agent config must be an object");
    if (j.contains("max_steps") && j["max_steps"].is_number_integer())
        c.max_steps = j["max_steps"].get<int>();
    if (j.contains("resource_types") && j["resource_types"].is_array()) {
        c.resource_types.clear();
        for (const auto& t : j["resource_types"])
            if (t.is_string()) c.resource_types.push_back(t.get<std::string>());
    }
    if (j.contains("valuesets") && j["valuesets"].is_array()) {
        c.valuesets.clear();
        for (const auto& v : j["valuesets"]) {
            term::ValueSetRef ref;
            if (v.contains("url") && v["url"].is_string()) ref.url = v["url"].get<std::string>();
            if (v.contains("name") && v["name"].is_string())
                ref.name = v["name"].get<std::string>();
            if (v.contains("description") && v["description"].is_string())
                ref.description = v["description"].get<std::string>();
            c.valuesets.push_back(std::move(ref));
        }
    }
    if (j.contains("temperature") && j["temperature"].is_number())
        c.temperature = j["temperature"].get<double>();
    if (j.contains("model") && j["model"].is_string()) c.model = j["model"].get<std::string>();
    if (j.contains("language_hint") && j["language_hint"].is_string())
        c.language_hint = j["language_hint"].get<std::string>();
    if (auto problem = agent_config_problem(c)) return make_error("bad-config", *problem);
    return c;
}

/// Crude size estimate used to keep prompts inside a budget: one token
/// per four characters, rounded up.
inline size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

namespace detail {

inline bool type_allowed(const AgentConfig& c, std::string_view type) {
    for (const auto& t : c.resource_types)
        if (t == type) return true;
    return false;
}

/// Worked add_resource payloads restricted to the allowed types, so the
/// prompt never names a type the run has excluded.
inline std::vector<std::string> worked_examples(const AgentConfig& c) {
    const bool patient = type_allowed(c, "Patient");
    std::vector<std::string> out;
    if (patient)
        out.push_back(
            "a patient:\n"
            "<<<action {\"action\": \"add_resource\", \"resource\": {\"resourceType\": "
            "\"Patient\", \"name\": [{\"family\": \"Muster\", \"given\": [\"Anna\"]}], "
            "\"birthDate\": \"1970-04-12\", \"gender\": \"female\"}} >>>");
    if (type_allowed(c, "Condition") && patient && out.size() < 2)
        out.push_back(
            "a coded condition referencing the patient:\n"
            "<<<action {\"action\": \"add_resource\", \"resource\": {\"resourceType\": "
            "\"Condition\", \"subject\": {\"reference\": \"Patient/patient-1\"}, \"code\": "
            "{\"coding\": [{\"system\": \"http://snomed.info/sct\", \"code\": \"422587007\", "
            "\"display\": \"Nausea (finding)\"}], \"text\": \"Nausea\"}, \"clinicalStatus\": "
            "{\"coding\": [{\"system\": "
            "\"http://terminology.hl7.org/CodeSystem/condition-clinical\", \"code\": "
            "\"active\"}]}}} >>>");
    if (type_allowed(c, "MedicationStatement") && patient && out.size() < 2)
        out.push_back(
            "a medication statement:\n"
            "<<<action {\"action\": \"add_resource\", \"resource\": {\"resourceType\": "
            "\"MedicationStatement\", \"subject\": {\"reference\": \"Patient/patient-1\"}, "
            "\"status\": \"active\", \"medicationCodeableConcept\": {\"text\": "
            "\"Ibuprofen 400mg\"}, \"dosage\": [{\"text\": \"400 mg twice daily\"}]}} >>>");
    if (patient && out.size() < 2)
        out.push_back(
            "a minimal patient when only the name is known:\n"
            "<<<action {\"action\": \"add_resource\", \"resource\": {\"resourceType\": "
            "\"Patient\", \"name\": [{\"family\": \"Muster\"}]}} >>>");
    return out;
}

/// A valueset hint is shown only when its usage text does not name an
/// excluded resource type.
inline bool valueset_mentions_excluded_type(const AgentConfig& c, const term::ValueSetRef& vs) {
    static constexpr std::string_view kAll[] = {"Patient", "Condition", "MedicationStatement"};
    for (auto type : kAll)
        if (!type_allowed(c, type) &&
            (strings::contains(vs.description, type) || strings::contains(vs.name, type)))
            return true;
    return false;
}

}  // namespace detail

/// System prompt, in fixed section order: task statement, resource-type
/// whitelist, ValueSet roster with usage hints, two worked add_resource
/// examples, behavioral constraints.
inline std::string build_system_prompt(const AgentConfig& config) {
    std::string p;
    // 1. task statement
    p += "You convert one clinical document into structured FHIR R4 resources.\n";
    p += "Work in steps. Each reply must contain a short thought followed by exactly one "
         "action block of the form <<<action {\"action\": \"...\"} >>>.\n";
    p += "Available actions:\n";
    p += "  <<<action {\"action\": \"search\", \"text\": \"<term>\", \"valueset\": \"<name>\", "
         "\"limit\": 10} >>> - look up codes for a term\n";
    p += "  <<<action {\"action\": \"add_resource\", \"resource\": { ... }} >>> - store one "
         "validated resource (add \"replace\": <ordinal> to supersede an earlier one)\n";
    p += "  <<<action {\"action\": \"final_answer\"} >>> - finish; all stored resources are "
         "aggregated into one Bundle\n\n";

    // 2. resource-type whitelist
    p += "You may create ONLY these resource types:\n";
    for (const auto& t : config.resource_types) p += "  - " + t + "\n";
    p += "Any resource type not listed above is forbidden; do not emit it.\n\n";

    // 3. ValueSet roster with usage hints
    p += "Code systems are reached through the search action. Supported valuesets:\n";
    for (const auto& vs : config.valuesets)
        if (!detail::valueset_mentions_excluded_type(config, vs))
            p += "  - " + vs.name + ": " + vs.description + "\n";
    p += "\n";

    // 4. two worked examples of add_resource payloads
    {
        const auto examples = detail::worked_examples(config);
        size_t n = 0;
        for (const auto& ex : examples) p += "Example " + std::to_string(++n) + " - " + ex + "\n";
        if (!examples.empty()) p += "\n";
    }

    // 5. behavioral constraints
    p += "Rules:\n";
    p += "  - Use search BEFORE coding any concept; never invent codes or displays.\n";
    p += "  - Prefer codes returned by search; if nothing fits, use plain text instead of a "
         "made-up code.\n";
    {
        std::vector<std::string> subject_types;
        for (const auto& t : config.resource_types)
            if (t != "Patient") subject_types.push_back(t);
        if (!subject_types.empty() && detail::type_allowed(config, "Patient"))
            p += "  - Reference the patient from every " + strings::join(subject_types, " and ") +
                 " (subject = Patient/<id>; ids are assigned when a resource is stored).\n";
    }
    p += "  - Fix any validation errors reported in the observation and re-add the resource "
         "with \"replace\".\n";
    p += "  - When every relevant fact is stored, emit final_answer to aggregate everything "
         "into one Bundle.\n";
    if (!config.language_hint.empty())
        p += "  - The document language is '" + config.language_hint +
             "'; keep original spellings in text fields but search in English when the "
             "terminology is English.\n";
    return p;
}

inline std::string build_user_prompt(const std::string& document, const AgentConfig& config) {
    std::string p = "Document";
    if (!config.language_hint.empty()) p += " (language=" + config.language_hint + ")";
    p += ":\n---\n" + document + "\n---\n";
    p += "Begin. Reply with a thought and one action block.";
    return p;
}

}  // namespace fhirforge::agent
