// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "fhirforge/common.hpp"

namespace fhirforge::agent {

// Model output carries at most one fenced action block:
//   <<<action {"action": "search", "text": "mild", "valueset": "condition-severity"} >>>
// Everything before the first block is the thought. The grammar knows
// three verbs: search, add_resource (optional 1-based "replace" ordinal),
// final_answer. Anything else is Malformed — never fatal, it just costs
// a step and earns a corrective observation.

struct ToolCall {
    std::string name;
    Json arguments;  // the action object minus its "action" key
    bool operator==(const ToolCall&) const = default;
};

struct AddResource {
    Json resource;                // resource document as emitted by the model
    std::optional<int> replace;   // 1-based working-set ordinal to supersede
    bool operator==(const AddResource&) const = default;
};

struct FinalAnswer {
    bool operator==(const FinalAnswer&) const = default;
};

struct Malformed {
    std::string raw;
    std::string reason;
    bool operator==(const Malformed&) const = default;
};

using Action = std::variant<ToolCall, AddResource, FinalAnswer, Malformed>;

inline constexpr std::string_view kActionOpen = "<<<action";
inline constexpr std::string_view kActionClose = ">>>";

namespace detail {

inline Action action_from_object(const Json& j, const std::string& raw) {
    if (!j.is_object() || !j.contains("action") || !j["action"].is_string())
        return Malformed{raw, "action block must be a JSON object with an \"action\" string"};
    const std::string name = j["action"].get<std::string>();
    if (name == "final_answer") return FinalAnswer{};
    if (name == "add_resource") {
        if (!j.contains("resource") || !j["resource"].is_object())
            return Malformed{raw, "add_resource requires a \"resource\" object"};
        AddResource add;
        add.resource = j["resource"];
        if (j.contains("replace")) {
            if (!j["replace"].is_number_integer() || j["replace"].get<int>() < 1)
                return Malformed{raw, "replace must be a positive integer ordinal"};
            add.replace = j["replace"].get<int>();
        }
        return add;
    }
    if (name == "search") {
        ToolCall call;
        call.name = name;
        call.arguments = Json::object();
        for (const auto& [key, value] : j.items())
            if (key != "action") call.arguments[key] = value;
        return call;
    }
    return Malformed{raw, "unknown action '" + name + "'"};
}

}  // namespace detail

/// Split model output into (thought, action) at the first action block.
inline std::pair<std::string, Action> parse_action(const std::string& output) {
    const size_t open = output.find(kActionOpen);
    if (open == std::string::npos)
        return {strings::trim(output),
                Malformed{output, "no action block found (expected <<<action {...} >>>)"}};
    const std::string thought = strings::trim(output.substr(0, open));
    const size_t body_start = open + kActionOpen.size();
    const size_t close = output.find(kActionClose, body_start);
    if (close == std::string::npos)
        return {thought, Malformed{output, "unterminated action block (missing >>>)"}};
    const std::string raw = strings::trim(output.substr(body_start, close - body_start));
    Json j;
    try {
        j = Json::parse(raw);
    } catch (const Json::parse_error&) {
        return {thought, Malformed{raw, "invalid JSON in action block"}};
    }
    return {thought, detail::action_from_object(j, raw)};
}

// ---- trace encoding --------------------------------------------------------

inline Json action_to_json(const Action& a) {
    Json j = Json::object();
    if (const auto* t = std::get_if<ToolCall>(&a)) {
        j["type"] = "tool_call";
        j["name"] = t->name;
        j["arguments"] = t->arguments;
    } else if (const auto* r = std::get_if<AddResource>(&a)) {
        j["type"] = "add_resource";
        j["resource"] = r->resource;
        if (r->replace) j["replace"] = *r->replace;
    } else if (std::holds_alternative<FinalAnswer>(a)) {
        j["type"] = "final_answer";
    } else if (const auto* m = std::get_if<Malformed>(&a)) {
        j["type"] = "malformed";
        j["raw"] = m->raw;
        j["reason"] = m->reason;
    }
    return j;
}

inline Result<Action> action_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        return make_error("bad-format", "action record must be an object with a type");
    const std::string type = j["type"].get<std::string>();
    if (type == "tool_call") {
        ToolCall t;
        if (j.contains("name") && j["name"].is_string()) t.name = j["name"].get<std::string>();
        t.arguments = j.contains("arguments") ? j["arguments"] : Json::object();
        return Action{std::move(t)};
    }
    if (type == "add_resource") {
        AddResource r;
        if (!j.contains("resource"))
            return make_error("bad-format", "add_resource record missing resource");
        r.resource = j["resource"];
        if (j.contains("replace") && j["replace"].is_number_integer())
            r.replace = j["replace"].get<int>();
        return Action{std::move(r)};
    }
    if (type == "final_answer") return Action{FinalAnswer{}};
    if (type == "malformed") {
        Malformed m;
        if (j.contains("raw") && j["raw"].is_string()) m.raw = j["raw"].get<std::string>();
        if (j.contains("reason") && j["reason"].is_string())
            m.reason = j["reason"].get<std::string>();
        return Action{std::move(m)};
    }
    return make_error("bad-format", "unknown action record type '" + type + "'");
}

}  // namespace fhirforge::agent
