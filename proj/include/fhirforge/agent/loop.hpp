// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fhirforge/agent/action.hpp"
#include "fhirforge/agent/prompt.hpp"
#include "fhirforge/agent/trace.hpp"
#include "fhirforge/common.hpp"
#include "fhirforge/fhir/io.hpp"
#include "fhirforge/fhir/model.hpp"
#include "fhirforge/fhir/validate.hpp"
#include "fhirforge/llm.hpp"
#include "fhirforge/sha256.hpp"
#include "fhirforge/terminology.hpp"

namespace fhirforge::agent {

enum class RunStatus { success, budget_exhausted, provider_failure };

inline std::string_view to_string(RunStatus s) {
    switch (s) {
        case RunStatus::success: return "success";
        case RunStatus::budget_exhausted: return "budget-exhausted";
        case RunStatus::provider_failure: return "provider-failure";
    }
    return "provider-failure";
}

struct AgentOutcome {
    RunStatus status = RunStatus::provider_failure;
    std::optional<fhir::Bundle> bundle;  // present iff status == success
    SessionTrace trace;
    std::vector<fhir::Resource> working_set;  // partial set on budget exhaustion
    std::optional<Error> provider_error;
};

struct LoopHooks {
    /// Replay support: when set and returning a value, a search step's
    /// observation is served from here instead of hitting the tool (a
    /// remote terminology answer cannot be faithfully recomputed).
    std::function<std::optional<std::string>(int step_index, const ToolCall&)> search_override;
    /// Called after each step is appended to the trace (live progress).
    std::function<void(const AgentStep&)> on_step;
};

namespace detail {

inline std::string format_score(double s) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", s);
    return buf;
}

inline std::string lowercase_id_prefix(std::string_view type) {
    return strings::to_lower(std::string(type));
}

}  // namespace detail

/// Mutable state of one agent run: the validated working set plus the
/// final bundle once a final answer is accepted. Strictly sequential.
class AgentSession {
  public:
    AgentSession(AgentConfig config, const term::TerminologyService* terminology)
        : config_(std::move(config)), terminology_(terminology) {}

    struct StepResult {
        std::string observation;
        bool finished = false;
    };

    StepResult execute(const Action& action, int step_index, const LoopHooks& hooks = {}) {
        if (const auto* call = std::get_if<ToolCall>(&action))
            return {run_tool(*call, step_index, hooks), false};
        if (const auto* add = std::get_if<AddResource>(&action))
            return {add_resource(*add), false};
        if (std::holds_alternative<FinalAnswer>(action)) return final_answer();
        const auto& m = std::get<Malformed>(action);
        return {"malformed action: " + m.reason +
                    ". Reply again with exactly one <<<action {\"action\": ...} >>> block.",
                false};
    }

    const std::vector<fhir::Resource>& working_set() const { return resources_; }
    const std::optional<fhir::Bundle>& final_bundle() const { return bundle_; }

  private:
    std::string run_tool(const ToolCall& call, int step_index, const LoopHooks& hooks) {
        if (hooks.search_override) {
            if (auto recorded = hooks.search_override(step_index, call)) return *recorded;
        }
        if (call.name != "search") return "TOOL ERROR: unknown tool '" + call.name + "'";
        if (!terminology_) return "TOOL ERROR: terminology unavailable: no service configured";

        const auto& args = call.arguments;
        if (!args.contains("text") || !args["text"].is_string())
            return "TOOL ERROR: search requires a \"text\" string";
        if (!args.contains("valueset") || !args["valueset"].is_string())
            return "TOOL ERROR: search requires a \"valueset\" name";
        const std::string vs_name = args["valueset"].get<std::string>();
        auto vs = terminology_->find_valueset(vs_name);
        if (!vs) {
            std::vector<std::string> names;
            for (const auto& v : terminology_->roster()) names.push_back(v.name);
            return "TOOL ERROR: unknown valueset '" + vs_name +
                   "' (known: " + strings::join(names, ", ") + ")";
        }
        term::TermQuery query;
        query.text = args["text"].get<std::string>();
        query.valueset = *vs;
        if (args.contains("limit")) {
            if (!args["limit"].is_number_integer())
                return "TOOL ERROR: limit must be an integer";
            query.limit = args["limit"].get<int>();
        }
        if (auto problem = term::term_query_problem(query)) return "TOOL ERROR: " + *problem;

        auto outcome = terminology_->search(query);
        if (!outcome.ok()) return "TOOL ERROR: " + outcome.error().message;

        const auto& hits = outcome.value();
        std::string obs = "search '" + query.text + "' in " + vs->name +
                          " (backend=" + hits.backend + "): " + std::to_string(hits.matches.size()) +
                          (hits.matches.size() == 1 ? " match" : " matches");
        for (const auto& m : hits.matches)
            obs += "\n" + m.code + " | " + m.display + " | " + detail::format_score(m.score);
        for (const auto& w : hits.warnings) obs += "\nwarning: " + w;
        return obs;
    }

    std::string add_resource(const AddResource& add) {
        auto parsed = fhir::parse_resource(add.resource);
        if (!parsed.ok()) return "cannot add resource: " + parsed.error().message;
        fhir::Resource resource = std::move(parsed.value().value);
        const auto& warnings = parsed.value().warnings;

        const std::string type(fhir::resource_type(resource));
        bool allowed = false;
        for (const auto& t : config_.resource_types) allowed = allowed || (t == type);
        if (!allowed)
            return "cannot add resource: " + type +
                   " is not allowed in this run (allowed: " + strings::join(config_.resource_types, ", ") +
                   ")";

        size_t replace_slot = 0;  // 1-based when replacing
        if (add.replace) {
            if (*add.replace < 1 || static_cast<size_t>(*add.replace) > resources_.size())
                return "cannot add resource: replace ordinal " + std::to_string(*add.replace) +
                       " is out of range (working set has " + std::to_string(resources_.size()) +
                       (resources_.size() == 1 ? " resource)" : " resources)");
            replace_slot = static_cast<size_t>(*add.replace);
        }

        // Assign an id before validation so the stored form is final:
        // supplied ids are kept, a replacement without one inherits the
        // id it supersedes, otherwise ids are generated per type.
        if (fhir::resource_id(resource).empty()) {
            if (replace_slot > 0)
                fhir::set_resource_id(resource,
                                      fhir::resource_id(resources_[replace_slot - 1]));
            if (fhir::resource_id(resource).empty())
                fhir::set_resource_id(resource, generate_id(type));
        } else if (replace_slot == 0 && id_taken(type, fhir::resource_id(resource))) {
            return "cannot add resource: id '" + fhir::resource_id(resource) +
                   "' is already used by another " + type + "; use \"replace\" to supersede it";
        }

        const auto issues = fhir::validate(resource);
        if (fhir::has_errors(issues)) {
            std::string obs = "resource rejected, fix these issues:\n" + fhir::render_issues(issues);
            for (const auto& w : warnings) obs += "\n" + fhir::render_issue(w);
            return obs;
        }

        std::string obs;
        if (replace_slot > 0) {
            resources_[replace_slot - 1] = std::move(resource);
            obs = "replaced " + type + " #" + std::to_string(replace_slot) + " (id=" +
                  fhir::resource_id(resources_[replace_slot - 1]) + ")";
        } else {
            resources_.push_back(std::move(resource));
            obs = "added " + type + " #" + std::to_string(resources_.size()) + " (id=" +
                  fhir::resource_id(resources_.back()) + ")";
        }
        for (const auto& w : warnings) obs += "\n" + fhir::render_issue(w);
        return obs;
    }

    StepResult final_answer() {
        if (resources_.empty())
            return {"final answer rejected: the working set is empty; add at least one resource "
                    "first",
                    false};
        auto [bundle, dangling] = fhir::make_bundle(resources_);
        const auto issues = fhir::validate(bundle);
        (void)dangling;  // subsumed by the full bundle validation
        if (fhir::has_errors(issues))
            return {"final answer rejected, fix these issues:\n" + fhir::render_issues(issues),
                    false};
        bundle_ = std::move(bundle);
        return {"final answer: Bundle with " + std::to_string(bundle_->entries.size()) +
                    (bundle_->entries.size() == 1 ? " entry" : " entries") +
                    " (sha256=" + fhir::bundle_sha256(*bundle_) + ")",
                true};
    }

    bool id_taken(const std::string& type, const std::string& id) const {
        for (const auto& r : resources_)
            if (fhir::resource_type(r) == type && fhir::resource_id(r) == id) return true;
        return false;
    }

    std::string generate_id(const std::string& type) {
        size_t count = 0;
        for (const auto& r : resources_)
            if (fhir::resource_type(r) == type) ++count;
        const std::string prefix = detail::lowercase_id_prefix(type);
        size_t n = count + 1;
        std::string candidate = prefix + "-" + std::to_string(n);
        while (id_taken(type, candidate)) candidate = prefix + "-" + std::to_string(++n);
        return candidate;
    }

    AgentConfig config_;
    const term::TerminologyService* terminology_;
    std::vector<fhir::Resource> resources_;
    std::optional<fhir::Bundle> bundle_;
};

/// The Thought-Action-Observation loop. Iterates until an accepted final
/// answer or the step budget runs out; the full trace is always returned.
inline AgentOutcome run_agent(const std::string& document, const AgentConfig& config,
                              llm::Provider& provider, const term::TerminologyService& terminology,
                              const LoopHooks& hooks = {}) {
    AgentOutcome out;
    out.trace.document_sha256 = sha256_hex(document);
    out.trace.config = agent_config_to_json(config);

    if (auto problem = agent_config_problem(config)) {
        out.status = RunStatus::provider_failure;
        out.provider_error = make_error("bad-config", *problem);
        return out;
    }

    std::vector<llm::ChatMessage> messages;
    messages.push_back({"system", build_system_prompt(config)});
    messages.push_back({"user", build_user_prompt(document, config)});

    AgentSession session(config, &terminology);
    for (int index = 1; index <= config.max_steps; ++index) {
        auto completion = provider.complete(messages);
        if (!completion.ok()) {
            out.status = RunStatus::provider_failure;
            out.provider_error = completion.error();
            out.working_set = session.working_set();
            return out;
        }
        const std::string raw = completion.value();
        auto [thought, action] = parse_action(raw);
        const auto result = session.execute(action, index, hooks);

        AgentStep step;
        step.index = index;
        step.timestamp = utc_timestamp_now();
        step.model_output = raw;
        step.thought = thought;
        step.action = action;
        step.observation = result.observation;
        out.trace.steps.push_back(std::move(step));
        if (hooks.on_step) hooks.on_step(out.trace.steps.back());

        messages.push_back({"assistant", raw});
        messages.push_back({"user", "Observation:\n" + result.observation});

        if (result.finished) {
            out.status = RunStatus::success;
            out.bundle = session.final_bundle();
            out.working_set = session.working_set();
            return out;
        }
    }
    out.status = RunStatus::budget_exhausted;
    out.working_set = session.working_set();
    return out;
}

}  // namespace fhirforge::agent
