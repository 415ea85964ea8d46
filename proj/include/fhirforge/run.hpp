// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "fhirforge/agent/loop.hpp"
#include "fhirforge/common.hpp"
#include "fhirforge/fhir/io.hpp"
#include "fhirforge/llm.hpp"
#include "fhirforge/terminology.hpp"

namespace fhirforge::run {

/// Everything one translation run needs; the CLI and the HTTP service
/// build this identically so their artifacts match byte for byte.
struct RunConfig {
    agent::AgentConfig agent;
    llm::ProviderConfig provider;
    term::Backend term_backend = term::Backend::local;
    std::string term_server;
    int term_timeout_ms = 10000;
    std::string valueset_dir = "data/valuesets";
    bool privacy_mode = false;  // hash document text in persisted logs
    std::string out_dir = "out";
};

struct RunRecord {
    std::string run_id;
    std::string document_id;
    agent::AgentOutcome outcome;
    std::string trace_path;
    std::string bundle_path;         // compact canonical; empty unless success
    std::string bundle_pretty_path;  // two-space pretty variant
    std::string manifest_path;
    std::string sidecar_path;
    double duration_s = 0.0;
    Json manifest;
};

inline std::string make_uuid() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uniform_int_distribution<uint64_t> dist;
    const uint64_t a = dist(rng), b = dist(rng);
    char buf[37];
    std::snprintf(buf, sizeof(buf), "%08x-%04x-4%03x-%04x-%012llx",
                  static_cast<unsigned>(a >> 32), static_cast<unsigned>((a >> 16) & 0xFFFF),
                  static_cast<unsigned>(a & 0x0FFF),
                  static_cast<unsigned>(((b >> 48) & 0x3FFF) | 0x8000),
                  static_cast<unsigned long long>(b & 0xFFFFFFFFFFFFULL));
    return buf;
}

/// Build the terminology service for a run: roster from the agent config,
/// snapshots from `<valueset_dir>/<name>.tsv` where present.
inline Result<term::TerminologyService> build_terminology(const RunConfig& cfg) {
    term::TerminologyService service(cfg.agent.valuesets, cfg.term_backend, cfg.term_server,
                                     cfg.term_timeout_ms);
    namespace fs = std::filesystem;
    for (const auto& vs : cfg.agent.valuesets) {
        const fs::path path = fs::path(cfg.valueset_dir) / (vs.name + ".tsv");
        std::error_code ec;
        if (!fs::exists(path, ec)) continue;
        auto index = term::load_concepts_tsv(path.string());
        if (!index.ok()) return index.error();
        service.add_snapshot(vs.url, std::move(index.value()));
    }
    return service;
}

inline Json terminology_config_json(const RunConfig& cfg) {
    Json j = Json::object();
    j["backend"] = std::string(term::to_string(cfg.term_backend));
    j["server_base"] = cfg.term_server;
    j["valueset_dir"] = cfg.valueset_dir;
    return j;
}

inline Json provider_config_json(const llm::ProviderConfig& p) {
    Json j = Json::object();
    j["kind"] = std::string(llm::to_string(p.kind));
    j["model"] = p.model;
    if (p.kind == llm::ProviderKind::http) {
        j["base_url"] = p.base_url;
        j["api_key_env"] = p.api_key_env;  // the env var NAME, never its value
        j["timeout_s"] = p.timeout_s;
        j["retry_count"] = p.retry_count;
    }
    if (p.kind == llm::ProviderKind::scripted) j["script_path"] = p.script_path;
    if (p.kind == llm::ProviderKind::replay) j["trace_path"] = p.trace_path;
    return j;
}

namespace detail {

inline Result<bool> write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) return make_error("io", "cannot write file: " + path);
    out << content;
    out.close();
    if (!out) return make_error("io", "failed writing file: " + path);
    return true;
}

}  // namespace detail

/// Execute one translation run and persist its artifacts under
/// `<out_dir>`: trace.jsonl, manifest.json, exchanges.jsonl, and on
/// success bundle.json (compact canonical) plus bundle.pretty.json.
/// Every run, successful or not, leaves a trace and a manifest.
inline Result<RunRecord> execute_run(const std::string& document_text,
                                     const std::string& document_id, const RunConfig& cfg,
                                     std::ostream* live = nullptr,
                                     const std::string& preassigned_run_id = "") {
    if (auto problem = llm::provider_config_problem(cfg.provider))
        return make_error("bad-config", *problem);
    if (auto problem = agent::agent_config_problem(cfg.agent))
        return make_error("bad-config", *problem);

    auto provider = llm::make_provider(cfg.provider);
    if (!provider.ok()) return provider.error();
    auto terminology = build_terminology(cfg);
    if (!terminology.ok()) return terminology.error();

    llm::ExchangeLog exchanges;
    provider.value()->set_exchange_log(&exchanges);

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) return make_error("io", "cannot create output directory: " + cfg.out_dir);

    RunRecord rec;
    rec.run_id = preassigned_run_id.empty() ? make_uuid() : preassigned_run_id;
    rec.document_id = document_id;

    agent::LoopHooks hooks;
    if (live)
        hooks.on_step = [live](const agent::AgentStep& step) {
            *live << "step " << step.index << ": "
                  << agent::action_to_json(step.action)["type"].get<std::string>() << " -> "
                  << strings::split(step.observation, '\n').front() << std::endl;
        };

    const auto t0 = std::chrono::steady_clock::now();
    rec.outcome =
        agent::run_agent(document_text, cfg.agent, *provider.value(), terminology.value(), hooks);
    rec.duration_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // Enrich the trace header so a replay can rebuild the environment.
    rec.outcome.trace.config["terminology"] = terminology_config_json(cfg);
    rec.outcome.trace.config["provider"] = provider_config_json(cfg.provider);
    rec.outcome.trace.config["document_id"] = document_id;
    if (cfg.privacy_mode) rec.outcome.trace.config["privacy"] = true;

    const fs::path out(cfg.out_dir);
    rec.trace_path = (out / "trace.jsonl").string();
    if (auto w = detail::write_file(rec.trace_path, agent::trace_to_jsonl(rec.outcome.trace));
        !w.ok())
        return w.error();

    rec.sidecar_path = (out / "exchanges.jsonl").string();
    {
        llm::RedactOptions ropt;
        ropt.hash_documents = cfg.privacy_mode;
        std::string lines;
        for (const auto& e : exchanges) {
            lines += llm::redact(e, ropt).dump();
            lines += "\n";
        }
        if (auto w = detail::write_file(rec.sidecar_path, lines); !w.ok()) return w.error();
    }

    if (rec.outcome.status == agent::RunStatus::success && rec.outcome.bundle) {
        rec.bundle_path = (out / "bundle.json").string();
        rec.bundle_pretty_path = (out / "bundle.pretty.json").string();
        const Json bj = fhir::to_json(*rec.outcome.bundle);
        if (auto w = detail::write_file(rec.bundle_path, fhir::compact(bj)); !w.ok())
            return w.error();
        if (auto w = detail::write_file(rec.bundle_pretty_path, fhir::pretty(bj)); !w.ok())
            return w.error();
    }

    rec.manifest = Json::object();
    rec.manifest["run_id"] = rec.run_id;
    rec.manifest["document_id"] = document_id;
    rec.manifest["config"] = rec.outcome.trace.config;
    rec.manifest["status"] = std::string(agent::to_string(rec.outcome.status));
    rec.manifest["steps"] = rec.outcome.trace.steps.size();
    rec.manifest["trace_path"] = rec.trace_path;
    rec.manifest["bundle_path"] =
        rec.bundle_path.empty() ? Json(nullptr) : Json(rec.bundle_path);
    rec.manifest["duration_s"] = rec.duration_s;
    if (rec.outcome.provider_error) {
        Json err = Json::object();
        err["kind"] = rec.outcome.provider_error->kind;
        err["message"] = rec.outcome.provider_error->message;
        rec.manifest["provider_error"] = std::move(err);
    }
    rec.manifest_path = (out / "manifest.json").string();
    if (auto w = detail::write_file(rec.manifest_path, rec.manifest.dump(2) + "\n"); !w.ok())
        return w.error();

    return rec;
}

// ---- replay -------------------------------------------------------------------

struct ReplayOutcome {
    int exit_code = 0;  // 0 match, 4 divergence, 5 truncated trace
    std::string message;
};

namespace detail {

/// Millisecond offset of a trace timestamp within its day; good enough
/// for pacing inter-step delays.
inline std::optional<long> timestamp_ms(const std::string& ts) {
    // YYYY-MM-DDTHH:MM:SS.mmmZ
    if (ts.size() < 24 || ts[10] != 'T') return std::nullopt;
    auto num = [&](size_t pos, size_t len) -> long {
        long v = 0;
        for (size_t i = pos; i < pos + len; ++i) {
            if (ts[i] < '0' || ts[i] > '9') return -1;
            v = v * 10 + (ts[i] - '0');
        }
        return v;
    };
    const long h = num(11, 2), m = num(14, 2), s = num(17, 2), ms = num(20, 3);
    if (h < 0 || m < 0 || s < 0 || ms < 0) return std::nullopt;
    return ((h * 60 + m) * 60 + s) * 1000 + ms;
}

inline std::string action_summary(const agent::Action& a) {
    return agent::action_to_json(a)["type"].get<std::string>();
}

inline std::optional<std::string> recorded_bundle_sha(const agent::SessionTrace& t) {
    if (t.steps.empty()) return std::nullopt;
    const std::string& obs = t.steps.back().observation;
    const std::string marker = "sha256=";
    const size_t pos = obs.find(marker);
    if (pos == std::string::npos) return std::nullopt;
    const std::string hex = obs.substr(pos + marker.size(), 64);
    if (hex.size() != 64) return std::nullopt;
    for (char c : hex)
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return std::nullopt;
    return hex;
}

}  // namespace detail

/// Re-render a recorded trace (inter-step delays scaled by `speed`;
/// 0 = instant), then re-execute it through the replay provider and
/// verify every step and the final bundle hash.
inline ReplayOutcome replay_trace(const agent::SessionTrace& recorded, double speed,
                                  const RunConfig& cfg, std::ostream* out) {
    // 1. render
    if (out) {
        std::optional<long> prev;
        for (const auto& step : recorded.steps) {
            if (speed > 0.0 && prev) {
                if (auto now = detail::timestamp_ms(step.timestamp)) {
                    long delta = *now - *prev;
                    if (delta < 0) delta = 0;
                    const long ms = static_cast<long>(static_cast<double>(delta) * speed);
                    std::this_thread::sleep_for(
                        std::chrono::milliseconds(std::min<long>(ms, 30000)));
                }
            }
            prev = detail::timestamp_ms(step.timestamp);
            *out << "step " << step.index << "/" << recorded.steps.size() << "  ["
                 << detail::action_summary(step.action) << "]\n";
            if (!step.thought.empty()) *out << "  thought: " << step.thought << "\n";
            for (const auto& line : strings::split(step.observation, '\n'))
                *out << "  observation: " << line << "\n";
        }
    }

    // 2. rebuild the environment from the header snapshot
    auto agent_cfg = agent::agent_config_from_json(recorded.config);
    if (!agent_cfg.ok()) return {4, "trace config unusable: " + agent_cfg.error().message};

    std::string term_backend = "local";
    if (recorded.config.contains("terminology") &&
        recorded.config["terminology"].is_object() &&
        recorded.config["terminology"].contains("backend") &&
        recorded.config["terminology"]["backend"].is_string())
        term_backend = recorded.config["terminology"]["backend"].get<std::string>();

    RunConfig replay_cfg = cfg;
    replay_cfg.agent = agent_cfg.value();
    replay_cfg.term_backend = term::Backend::local;
    auto terminology = build_terminology(replay_cfg);
    if (!terminology.ok()) return {4, "terminology rebuild failed: " + terminology.error().message};

    std::vector<std::string> outputs;
    outputs.reserve(recorded.steps.size());
    for (const auto& s : recorded.steps) outputs.push_back(s.model_output);
    llm::ReplayProvider provider(std::move(outputs));

    agent::LoopHooks hooks;
    if (term_backend != "local") {
        // A remote terminology answer cannot be recomputed faithfully;
        // serve the recorded observation for search steps verbatim.
        const auto* steps = &recorded.steps;
        hooks.search_override = [steps](int index,
                                        const agent::ToolCall&) -> std::optional<std::string> {
            if (index >= 1 && static_cast<size_t>(index) <= steps->size()) {
                const auto& rec = (*steps)[static_cast<size_t>(index) - 1];
                if (std::holds_alternative<agent::ToolCall>(rec.action)) return rec.observation;
            }
            return std::nullopt;
        };
    }

    auto outcome =
        agent::run_agent("", replay_cfg.agent, provider, terminology.value(), hooks);

    if (outcome.status == agent::RunStatus::provider_failure) {
        if (outcome.provider_error && outcome.provider_error->kind == "replay-underrun")
            return {5, "truncated trace: " + outcome.provider_error->message};
        return {4, "replay failed: " +
                       (outcome.provider_error ? outcome.provider_error->message
                                               : std::string("unknown provider failure"))};
    }

    // 3. step-by-step comparison (timestamps excluded)
    const size_t n = std::min(recorded.steps.size(), outcome.trace.steps.size());
    for (size_t i = 0; i < n; ++i)
        if (auto diff = agent::step_divergence(recorded.steps[i], outcome.trace.steps[i]))
            return {4, "replay divergence: " + *diff};
    if (recorded.steps.size() != outcome.trace.steps.size())
        return {4, "replay divergence: step count " + std::to_string(outcome.trace.steps.size()) +
                       " vs recorded " + std::to_string(recorded.steps.size())};

    // 4. bundle hash verification
    const auto recorded_sha = detail::recorded_bundle_sha(recorded);
    if (recorded_sha) {
        if (outcome.status != agent::RunStatus::success || !outcome.bundle)
            return {4, "replay divergence: recorded run finished with a bundle, replay did not"};
        const std::string replayed_sha = fhir::bundle_sha256(*outcome.bundle);
        if (replayed_sha != *recorded_sha)
            return {4, "replay divergence: bundle sha256 " + replayed_sha + " vs recorded " +
                           *recorded_sha};
        return {0, "replay OK: " + std::to_string(recorded.steps.size()) +
                       " steps, bundle sha256 verified (" + *recorded_sha + ")"};
    }
    if (outcome.status == agent::RunStatus::success)
        return {4, "replay divergence: replay produced a bundle, recorded run did not"};
    return {0, "replay OK: " + std::to_string(recorded.steps.size()) +
                   " steps, no final bundle (" +
                   std::string(agent::to_string(outcome.status)) + ")"};
}

inline ReplayOutcome replay_file(const std::string& trace_path, double speed,
                                 const RunConfig& cfg, std::ostream* out) {
    auto trace = agent::load_trace(trace_path);
    if (!trace.ok()) return {1, trace.error().message};
    return replay_trace(trace.value(), speed, cfg, out);
}

}  // namespace fhirforge::run
