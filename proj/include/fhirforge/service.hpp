// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fhirforge/common.hpp"
#include "fhirforge/fhir/io.hpp"
#include "fhirforge/fhir/validate.hpp"
#include "fhirforge/run.hpp"
#include "fhirforge/terminology.hpp"
#include "httplib.h"

namespace fhirforge::service {

struct ServiceConfig {
    run::RunConfig base;      // template for every run; out_dir is the parent directory
    int max_concurrent = 4;   // concurrent translate runs beyond this get 429
    int retry_after_s = 2;
};

namespace detail {

inline void json_reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline void json_error(httplib::Response& res, int status, const std::string& kind,
                       const std::string& message) {
    Json body = Json::object();
    body["kind"] = kind;
    body["message"] = message;
    json_reply(res, status, body);
}

inline Json issue_json(const fhir::ValidationIssue& issue) {
    Json j = Json::object();
    j["severity"] = std::string(fhir::to_string(issue.severity));
    j["path"] = issue.path;
    j["kind"] = std::string(fhir::to_string(issue.kind));
    j["message"] = issue.message;
    return j;
}

inline std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace detail

/// HTTP twin of the CLI. Translate runs are asynchronous: POST returns
/// 202 + run_id immediately and the worker thread persists artifacts
/// through the same execute_run the CLI uses, so both produce identical
/// bundles and traces for identical inputs.
class Service {
  public:
    explicit Service(ServiceConfig cfg)
        : cfg_(std::move(cfg)), terminology_(make_terminology(cfg_)) {
        register_routes();
    }

    ~Service() {
        server_.stop();
        join_workers();
    }

    httplib::Server& server() { return server_; }

    /// Blocking listen; use server().bind_to_any_port + listen_after_bind
    /// from a background thread in tests.
    bool listen(const std::string& host, int port) { return server_.listen(host, port); }

    void stop() { server_.stop(); }

    void join_workers() {
        std::vector<std::thread> workers;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            workers.swap(workers_);
        }
        for (auto& w : workers)
            if (w.joinable()) w.join();
    }

  private:
    static term::TerminologyService make_terminology(const ServiceConfig& cfg) {
        auto built = run::build_terminology(cfg.base);
        if (built.ok()) return std::move(built.value());
        // Snapshot files unreadable: serve with an empty local index so
        // validate/translate endpoints still work; searches will report it.
        return term::TerminologyService(cfg.base.agent.valuesets, cfg.base.term_backend,
                                        cfg.base.term_server, cfg.base.term_timeout_ms);
    }

    struct RunEntry {
        std::string run_id;
        std::string document_id;
        std::string status;  // running | success | budget-exhausted | provider-failure | error
        std::string out_dir;
        std::string trace_path;
        std::string bundle_compact;  // canonical bytes, set on success
        Json manifest;
        std::string error_kind, error_message;
        double duration_s = 0.0;
    };

    void register_routes() {
        server_.Post("/v1/translate",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         handle_translate(req, res);
                     });
        server_.Get("/v1/runs/:id", [this](const httplib::Request& req, httplib::Response& res) {
            handle_run_status(req, res);
        });
        server_.Get("/v1/runs/:id/trace",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        handle_run_trace(req, res);
                    });
        server_.Post("/v1/validate", [this](const httplib::Request& req, httplib::Response& res) {
            handle_validate(req, res);
        });
        server_.Get("/v1/search", [this](const httplib::Request& req, httplib::Response& res) {
            handle_search(req, res);
        });
    }

    void handle_translate(const httplib::Request& req, httplib::Response& res) {
        Json body;
        try {
            body = Json::parse(req.body);
        } catch (const Json::parse_error& e) {
            return detail::json_error(res, 400, "syntax", e.what());
        }
        if (!body.is_object() || !body.contains("text") || !body["text"].is_string())
            return detail::json_error(res, 400, "bad-request",
                                      "body must be a JSON object with a \"text\" string");

        run::RunConfig rcfg = cfg_.base;
        if (auto problem = apply_overrides(body, rcfg))
            return detail::json_error(res, 400, "bad-config", *problem);

        const std::string document_id =
            body.contains("document_id") && body["document_id"].is_string()
                ? body["document_id"].get<std::string>()
                : "adhoc";
        const std::string text = body["text"].get<std::string>();
        const std::string run_id = run::make_uuid();

        {
            std::lock_guard<std::mutex> lock(mutex_);
            int running = 0;
            for (const auto& [id, entry] : runs_)
                if (entry.status == "running") ++running;
            if (running >= cfg_.max_concurrent) {
                res.set_header("Retry-After", std::to_string(cfg_.retry_after_s));
                return detail::json_error(res, 429, "capacity",
                                          "concurrent run cap reached (" +
                                              std::to_string(cfg_.max_concurrent) +
                                              "); retry later");
            }
            RunEntry entry;
            entry.run_id = run_id;
            entry.document_id = document_id;
            entry.status = "running";
            entry.out_dir =
                (std::filesystem::path(cfg_.base.out_dir) / run_id).string();
            rcfg.out_dir = entry.out_dir;
            runs_[run_id] = entry;
            workers_.emplace_back([this, text, document_id, rcfg, run_id] {
                worker(text, document_id, rcfg, run_id);
            });
        }

        Json reply = Json::object();
        reply["run_id"] = run_id;
        reply["status"] = "running";
        detail::json_reply(res, 202, reply);
    }

    void worker(const std::string& text, const std::string& document_id,
                const run::RunConfig& rcfg, const std::string& run_id) {
        auto record = run::execute_run(text, document_id, rcfg, nullptr, run_id);
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = runs_.find(run_id);
        if (it == runs_.end()) return;
        if (!record.ok()) {
            it->second.status = "error";
            it->second.error_kind = record.error().kind;
            it->second.error_message = record.error().message;
            return;
        }
        const auto& rec = record.value();
        it->second.status = std::string(agent::to_string(rec.outcome.status));
        it->second.trace_path = rec.trace_path;
        it->second.manifest = rec.manifest;
        it->second.duration_s = rec.duration_s;
        if (rec.outcome.status == agent::RunStatus::success && rec.outcome.bundle)
            it->second.bundle_compact = fhir::compact(fhir::to_json(*rec.outcome.bundle));
        if (rec.outcome.provider_error) {
            it->second.error_kind = rec.outcome.provider_error->kind;
            it->second.error_message = rec.outcome.provider_error->message;
        }
    }

    static std::optional<std::string> apply_overrides(const Json& body, run::RunConfig& rcfg) {
        if (body.contains("max_steps")) {
            if (!body["max_steps"].is_number_integer()) return "max_steps must be an integer";
            rcfg.agent.max_steps = body["max_steps"].get<int>();
        }
        if (body.contains("temperature")) {
            if (!body["temperature"].is_number()) return "temperature must be a number";
            rcfg.agent.temperature = body["temperature"].get<double>();
            rcfg.provider.temperature = rcfg.agent.temperature;
        }
        if (body.contains("model")) {
            if (!body["model"].is_string()) return "model must be a string";
            rcfg.agent.model = body["model"].get<std::string>();
            rcfg.provider.model = rcfg.agent.model;
        }
        if (body.contains("language")) {
            if (!body["language"].is_string()) return "language must be a string";
            rcfg.agent.language_hint = body["language"].get<std::string>();
        }
        if (body.contains("resource_types")) {
            if (!body["resource_types"].is_array()) return "resource_types must be an array";
            std::vector<std::string> types;
            for (const auto& t : body["resource_types"]) {
                if (!t.is_string()) return "resource_types must be an array of strings";
                types.push_back(t.get<std::string>());
            }
            rcfg.agent.resource_types = std::move(types);
        }
        return std::nullopt;
    }

    void handle_run_status(const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.path_params.at("id");
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = runs_.find(id);
        if (it == runs_.end())
            return detail::json_error(res, 404, "not-found", "no run with id " + id);
        const auto& e = it->second;
        Json body = Json::object();
        body["run_id"] = e.run_id;
        body["document_id"] = e.document_id;
        body["status"] = e.status;
        if (e.status == "running") {
            detail::json_reply(res, 200, body);
            return;
        }
        body["duration_s"] = e.duration_s;
        if (!e.bundle_compact.empty())
            body["bundle"] = Json::parse(e.bundle_compact);
        else
            body["bundle"] = nullptr;
        if (!e.error_kind.empty()) {
            Json err = Json::object();
            err["kind"] = e.error_kind;
            err["message"] = e.error_message;
            body["error"] = std::move(err);
        }
        if (!e.manifest.is_null()) body["manifest"] = e.manifest;
        detail::json_reply(res, 200, body);
    }

    void handle_run_trace(const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.path_params.at("id");
        std::string trace_path, status;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = runs_.find(id);
            if (it == runs_.end())
                return detail::json_error(res, 404, "not-found", "no run with id " + id);
            status = it->second.status;
            trace_path = it->second.trace_path;
        }
        if (status == "running")
            return detail::json_error(res, 409, "pending", "run " + id + " is still executing");
        if (trace_path.empty())
            return detail::json_error(res, 404, "no-trace",
                                      "run " + id + " failed before a trace was written");
        auto content = detail::read_file(trace_path);
        if (!content)
            return detail::json_error(res, 500, "io", "trace file unreadable: " + trace_path);
        res.status = 200;
        res.set_content(*content, "application/x-ndjson");
    }

    void handle_validate(const httplib::Request& req, httplib::Response& res) {
        auto parsed = fhir::parse_any(req.body);
        if (!parsed.ok()) {
            const auto& err = parsed.error();
            return detail::json_error(res, 400, err.kind, err.message);
        }
        std::vector<fhir::ValidationIssue> issues = parsed.value().warnings;
        if (std::holds_alternative<fhir::Bundle>(parsed.value().value)) {
            auto more = fhir::validate(std::get<fhir::Bundle>(parsed.value().value));
            issues.insert(issues.end(), more.begin(), more.end());
        } else {
            auto more = fhir::validate(std::get<fhir::Resource>(parsed.value().value));
            issues.insert(issues.end(), more.begin(), more.end());
        }
        fhir::sort_issues(issues);
        Json body = Json::object();
        body["valid"] = !fhir::has_errors(issues);
        Json arr = Json::array();
        for (const auto& issue : issues) arr.push_back(detail::issue_json(issue));
        body["issues"] = std::move(arr);
        detail::json_reply(res, 200, body);
    }

    void handle_search(const httplib::Request& req, httplib::Response& res) {
        term::TermQuery query;
        if (!req.has_param("text") || !req.has_param("valueset"))
            return detail::json_error(res, 400, "bad-query",
                                      "query parameters text and valueset are required");
        query.text = req.get_param_value("text");
        const std::string vs_name = req.get_param_value("valueset");
        auto vs = terminology_.find_valueset(vs_name);
        if (!vs) {
            std::vector<std::string> names;
            for (const auto& v : terminology_.roster()) names.push_back(v.name);
            return detail::json_error(res, 404, "not-found",
                                      "unknown valueset '" + vs_name +
                                          "' (known: " + strings::join(names, ", ") + ")");
        }
        query.valueset = *vs;
        if (req.has_param("limit")) {
            try {
                query.limit = std::stoi(req.get_param_value("limit"));
            } catch (...) {
                return detail::json_error(res, 400, "bad-query", "limit must be an integer");
            }
        }
        auto outcome = terminology_.search(query);
        if (!outcome.ok()) {
            const auto& err = outcome.error();
            int status = 502;
            if (err.kind == "bad-query") status = 400;
            if (err.kind == "not-found") status = 404;
            return detail::json_error(res, status, err.kind, err.message);
        }
        Json body = Json::object();
        body["backend"] = outcome.value().backend;
        Json arr = Json::array();
        for (const auto& m : outcome.value().matches) {
            Json row = Json::object();
            row["system"] = m.system;
            row["code"] = m.code;
            row["display"] = m.display;
            row["score"] = m.score;
            arr.push_back(std::move(row));
        }
        body["matches"] = std::move(arr);
        if (!outcome.value().warnings.empty()) body["warnings"] = outcome.value().warnings;
        detail::json_reply(res, 200, body);
    }

    ServiceConfig cfg_;
    term::TerminologyService terminology_;
    httplib::Server server_;
    std::mutex mutex_;
    std::map<std::string, RunEntry> runs_;
    std::vector<std::thread> workers_;
};

}  // namespace fhirforge::service
