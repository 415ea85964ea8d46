// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fhirforge/agent/action.hpp"
#include "fhirforge/common.hpp"

namespace fhirforge::agent {

struct AgentStep {
    int index = 0;             // 1-based, strictly increasing
    std::string timestamp;     // UTC instant
    std::string model_output;  // raw assistant text, verbatim (replay needs it)
    std::string thought;
    Action action;
    std::string observation;   // non-empty for every executed action
};

/// On disk: JSON Lines. First line is the header
/// {"version":1,"document_sha256":...,"config":...}; every further line
/// is one AgentStep.
struct SessionTrace {
    int version = 1;
    std::string document_sha256;
    Json config = Json::object();
    std::vector<AgentStep> steps;
};

inline Json step_to_json(const AgentStep& s) {
    Json j = Json::object();
    j["index"] = s.index;
    j["timestamp"] = s.timestamp;
    j["model_output"] = s.model_output;
    j["thought"] = s.thought;
    j["action"] = action_to_json(s.action);
    j["observation"] = s.observation;
    return j;
}

inline Result<AgentStep> step_from_json(const Json& j) {
    if (!j.is_object()) return make_error("bad-format", "step line must be a JSON object");
    AgentStep s;
    if (!j.contains("index") || !j["index"].is_number_integer())
        return make_error("bad-format", "step line missing integer index");
    s.index = j["index"].get<int>();
    if (j.contains("timestamp") && j["timestamp"].is_string())
        s.timestamp = j["timestamp"].get<std::string>();
    if (!j.contains("model_output") || !j["model_output"].is_string())
        return make_error("bad-format", "step line missing model_output");
    s.model_output = j["model_output"].get<std::string>();
    if (j.contains("thought") && j["thought"].is_string())
        s.thought = j["thought"].get<std::string>();
    if (!j.contains("action")) return make_error("bad-format", "step line missing action");
    auto action = action_from_json(j["action"]);
    if (!action.ok()) return action.error();
    s.action = std::move(action.value());
    if (!j.contains("observation") || !j["observation"].is_string())
        return make_error("bad-format", "step line missing observation");
    s.observation = j["observation"].get<std::string>();
    return s;
}

inline std::string trace_to_jsonl(const SessionTrace& t) {
    Json header = Json::object();
    header["version"] = t.version;
    header["document_sha256"] = t.document_sha256;
    header["config"] = t.config;
    std::string out = header.dump();
    out += "\n";
    for (const auto& s : t.steps) {
        out += step_to_json(s).dump();
        out += "\n";
    }
    return out;
}

inline Result<SessionTrace> trace_from_jsonl(const std::string& text, const std::string& origin) {
    SessionTrace t;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (strings::trim(line).empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            return make_error("bad-format", origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!have_header) {
            if (!j.is_object() || !j.contains("version") || !j["version"].is_number_integer())
                return make_error("bad-format", origin + ": first line must be a trace header");
            t.version = j["version"].get<int>();
            if (t.version != 1)
                return make_error("bad-format", origin + ": unsupported trace version " +
                                                    std::to_string(t.version));
            if (j.contains("document_sha256") && j["document_sha256"].is_string())
                t.document_sha256 = j["document_sha256"].get<std::string>();
            if (j.contains("config")) t.config = j["config"];
            have_header = true;
            continue;
        }
        auto step = step_from_json(j);
        if (!step.ok())
            return make_error(step.error().kind,
                              origin + ":" + std::to_string(lineno) + ": " + step.error().message);
        t.steps.push_back(std::move(step.value()));
    }
    if (!have_header) return make_error("bad-format", origin + ": empty trace file");
    return t;
}

inline Result<SessionTrace> load_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return make_error("io", "cannot open trace file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return trace_from_jsonl(ss.str(), path);
}

inline Result<bool> save_trace(const SessionTrace& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) return make_error("io", "cannot write trace file: " + path);
    out << trace_to_jsonl(t);
    out.close();
    if (!out) return make_error("io", "failed writing trace file: " + path);
    return true;
}

/// Field-by-field step comparison ignoring timestamps; returns the first
/// difference as human-readable text, or nullopt when equivalent.
inline std::optional<std::string> step_divergence(const AgentStep& recorded,
                                                  const AgentStep& replayed) {
    if (recorded.index != replayed.index)
        return "index " + std::to_string(recorded.index) + " vs " + std::to_string(replayed.index);
    const std::string at = "step " + std::to_string(recorded.index) + ": ";
    if (recorded.model_output != replayed.model_output) return at + "model_output differs";
    if (recorded.thought != replayed.thought) return at + "thought differs";
    if (action_to_json(recorded.action) != action_to_json(replayed.action))
        return at + "action differs";
    if (recorded.observation != replayed.observation) return at + "observation differs";
    return std::nullopt;
}

}  // namespace fhirforge::agent
