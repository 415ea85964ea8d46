// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fhirforge::fhir {

// Typed subset of FHIR R4: Patient, Condition, MedicationStatement, Bundle.
// All types are immutable value types in practice; nothing here mutates
// shared state, so parse/validate/serialize are safe from any thread.

struct Coding {
    std::string system;
    std::string code;
    std::optional<std::string> display;
    bool operator==(const Coding&) const = default;
};

struct CodeableConcept {
    std::vector<Coding> coding;
    std::optional<std::string> text;
    bool operator==(const CodeableConcept&) const = default;
};

/// Local reference in "<ResourceType>/<id>" form.
struct Reference {
    std::string reference;
    std::optional<std::string> display;
    bool operator==(const Reference&) const = default;
};

struct HumanName {
    std::optional<std::string> use;
    std::optional<std::string> family;
    std::vector<std::string> given;
    bool operator==(const HumanName&) const = default;
};

struct Address {
    std::optional<std::string> line;
    std::optional<std::string> city;
    std::optional<std::string> postal_code;
    std::optional<std::string> country;
    bool operator==(const Address&) const = default;
};

struct Patient {
    std::string id;
    std::vector<HumanName> name;
    std::optional<std::string> birth_date;  // FHIR date: YYYY[-MM[-DD]]
    std::optional<std::string> gender;
    std::vector<Address> address;
    bool operator==(const Patient&) const = default;
};

struct Condition {
    std::string id;
    Reference subject;
    std::optional<CodeableConcept> code;
    std::optional<CodeableConcept> clinical_status;
    std::optional<CodeableConcept> verification_status;
    std::optional<CodeableConcept> severity;
    std::vector<CodeableConcept> body_site;
    std::vector<CodeableConcept> category;
    std::optional<std::string> onset_date_time;  // FHIR dateTime
    bool operator==(const Condition&) const = default;
};

struct DoseQuantity {
    double value = 0.0;
    std::string unit;
    std::optional<std::string> system;
    std::optional<std::string> code;
    bool operator==(const DoseQuantity&) const = default;
};

struct DoseAndRate {
    std::optional<CodeableConcept> type;
    std::optional<DoseQuantity> dose_quantity;
    bool operator==(const DoseAndRate&) const = default;
};

/// R4 Timing restricted to its coded/free-text core: Timing.code.
struct Timing {
    std::optional<CodeableConcept> code;
    bool operator==(const Timing&) const = default;
};

struct Dosage {
    std::optional<std::string> text;
    std::vector<DoseAndRate> dose_and_rate;
    std::optional<Timing> timing;
    bool operator==(const Dosage&) const = default;
};

struct MedicationStatement {
    std::string id;
    Reference subject;
    std::string status;
    CodeableConcept medication;  // wire key: medicationCodeableConcept
    std::vector<Dosage> dosage;
    bool operator==(const MedicationStatement&) const = default;
};

using Resource = std::variant<Patient, Condition, MedicationStatement>;

struct Bundle {
    std::string type = "collection";
    std::vector<Resource> entries;
    bool operator==(const Bundle&) const = default;
};

inline constexpr std::array<std::string_view, 3> kSupportedResourceTypes = {
    "Patient", "Condition", "MedicationStatement"};

inline constexpr std::array<std::string_view, 6> kClinicalStatusCodes = {
    "active", "recurrence", "relapse", "inactive", "remission", "resolved"};

inline constexpr std::array<std::string_view, 8> kMedicationStatusCodes = {
    "active",  "completed", "entered-in-error", "intended",
    "stopped", "on-hold",   "unknown",          "not-taken"};

inline constexpr std::array<std::string_view, 4> kGenderCodes = {"male", "female", "other",
                                                                 "unknown"};

inline std::string_view resource_type(const Resource& r) {
    return std::visit(
        [](const auto& v) -> std::string_view {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Patient>) return "Patient";
            if constexpr (std::is_same_v<T, Condition>) return "Condition";
            if constexpr (std::is_same_v<T, MedicationStatement>) return "MedicationStatement";
        },
        r);
}

inline const std::string& resource_id(const Resource& r) {
    return std::visit([](const auto& v) -> const std::string& { return v.id; }, r);
}

inline void set_resource_id(Resource& r, std::string id) {
    std::visit([&](auto& v) { v.id = std::move(id); }, r);
}

/// "<Type>/<id>" key of a resource, used for reference resolution.
inline std::string local_ref(const Resource& r) {
    return std::string(resource_type(r)) + "/" + resource_id(r);
}

inline bool is_supported_type(std::string_view type) {
    for (auto t : kSupportedResourceTypes)
        if (t == type) return true;
    return false;
}

}  // namespace fhirforge::fhir
