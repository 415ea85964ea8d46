// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fhirforge/corpus.hpp"
#include "fhirforge/eval.hpp"
#include "fhirforge/fhir/io.hpp"
#include "fhirforge/fhir/validate.hpp"
#include "fhirforge/run.hpp"
#include "fhirforge/service.hpp"

namespace fhirforge::cli {

struct CliState {
    // provider
    std::string provider_kind = "http";
    std::string base_url;
    std::string model = "default";
    std::string api_key_env = "FHIRFORGE_API_KEY";
    std::string script;
    int timeout_s = 60;
    int retries = 2;
    int backoff_ms = 1000;
    double temperature = 0.0;
    // agent
    int max_steps = 12;
    std::string language;
    std::vector<std::string> types;
    // terminology
    std::string term_backend = "local";
    std::string term_server;
    std::string valueset_dir = "data/valuesets";
    int term_timeout_ms = 10000;
    // artifacts
    std::string out_dir = "out";
    bool privacy = false;
};

namespace detail {

inline std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void add_provider_flags(CLI::App* cmd, CliState& st) {
    cmd->add_option("--provider", st.provider_kind, "LLM provider: http | scripted")
        ->envname("FHIRFORGE_PROVIDER");
    cmd->add_option("--base-url", st.base_url, "chat-completions base URL (http provider)")
        ->envname("FHIRFORGE_BASE_URL");
    cmd->add_option("--model", st.model, "model name sent to the provider")
        ->envname("FHIRFORGE_MODEL");
    cmd->add_option("--api-key-env", st.api_key_env,
                    "environment variable holding the API key");
    cmd->add_option("--script", st.script, "reply script file (scripted provider)");
    cmd->add_option("--timeout", st.timeout_s, "provider request timeout, seconds");
    cmd->add_option("--retries", st.retries, "retries on 429/5xx responses");
    cmd->add_option("--backoff-ms", st.backoff_ms, "base backoff between retries, ms");
    cmd->add_option("--temperature", st.temperature, "sampling temperature");
}

inline void add_term_flags(CLI::App* cmd, CliState& st) {
    cmd->add_option("--term-backend", st.term_backend,
                    "terminology backend: local | remote | remote-with-fallback")
        ->envname("FHIRFORGE_TERM_BACKEND");
    cmd->add_option("--term-server", st.term_server, "terminology server base URL")
        ->envname("FHIRFORGE_TERM_SERVER");
    cmd->add_option("--valueset-dir", st.valueset_dir,
                    "directory of <valueset>.tsv snapshot files")
        ->envname("FHIRFORGE_VALUESET_DIR");
    cmd->add_option("--term-timeout-ms", st.term_timeout_ms, "terminology timeout, ms");
}

inline Result<run::RunConfig> make_run_config(const CliState& st) {
    run::RunConfig cfg;
    auto kind = llm::provider_kind_from_string(st.provider_kind);
    if (!kind) return make_error("bad-config", "unknown provider '" + st.provider_kind + "'");
    cfg.provider.kind = *kind;
    // Each provider kind owns exactly its own fields; stray env fallbacks
    // for another kind must not poison the config.
    if (cfg.provider.kind == llm::ProviderKind::http) cfg.provider.base_url = st.base_url;
    if (cfg.provider.kind == llm::ProviderKind::scripted) cfg.provider.script_path = st.script;
    cfg.provider.model = st.model;
    cfg.provider.api_key_env = st.api_key_env;
    cfg.provider.timeout_s = st.timeout_s;
    cfg.provider.retry_count = st.retries;
    cfg.provider.base_backoff_ms = st.backoff_ms;
    cfg.provider.temperature = st.temperature;

    cfg.agent.max_steps = st.max_steps;
    cfg.agent.temperature = st.temperature;
    cfg.agent.model = st.model;
    cfg.agent.language_hint = st.language;
    if (!st.types.empty()) cfg.agent.resource_types = st.types;

    auto backend = term::backend_from_string(st.term_backend);
    if (!backend)
        return make_error("bad-config", "unknown terminology backend '" + st.term_backend + "'");
    cfg.term_backend = *backend;
    cfg.term_server = st.term_server;
    cfg.term_timeout_ms = st.term_timeout_ms;
    cfg.valueset_dir = st.valueset_dir;
    cfg.privacy_mode = st.privacy;
    cfg.out_dir = st.out_dir;
    return cfg;
}

}  // namespace detail

inline int cmd_translate(const CliState& st, const std::string& doc_path,
                         const std::string& corpus_dir, const std::string& corpus_doc,
                         std::ostream& out, std::ostream& err) {
    std::string text, document_id, language = st.language;
    if (!corpus_dir.empty()) {
        auto corpus = corpus::load_corpus(corpus_dir);
        if (!corpus.ok()) {
            err << "error: " << corpus.error().message << "\n";
            return 1;
        }
        auto doc = corpus::find_document(corpus.value(), corpus_doc);
        if (!doc) {
            err << "error: no document '" << corpus_doc << "' in corpus " << corpus_dir << "\n";
            return 1;
        }
        text = doc->text;
        document_id = doc->id;
        if (language.empty()) language = doc->language;
    } else {
        auto content = detail::read_file(doc_path);
        if (!content) {
            err << "error: cannot read document: " << doc_path << "\n";
            return 1;
        }
        text = *content;
        document_id = std::filesystem::path(doc_path).stem().string();
    }
    if (strings::trim(text).empty()) {
        err << "error: document is empty: " << (doc_path.empty() ? corpus_doc : doc_path) << "\n";
        return 1;
    }

    auto cfg = detail::make_run_config(st);
    if (!cfg.ok()) {
        err << "error: " << cfg.error().message << "\n";
        return 1;
    }
    cfg.value().agent.language_hint = language;

    auto record = run::execute_run(text, document_id, cfg.value(), &out);
    if (!record.ok()) {
        err << "error: " << record.error().message << "\n";
        return 1;
    }
    const auto& rec = record.value();
    out << "run " << rec.run_id << ": " << agent::to_string(rec.outcome.status) << " in "
        << rec.outcome.trace.steps.size() << " steps\n";
    out << "trace: " << rec.trace_path << "\n";
    switch (rec.outcome.status) {
        case agent::RunStatus::success:
            out << "bundle: " << rec.bundle_path << "\n";
            return 0;
        case agent::RunStatus::budget_exhausted:
            err << "error: step budget exhausted after " << rec.outcome.trace.steps.size()
                << " steps\n";
            return 2;
        case agent::RunStatus::provider_failure:
            err << "error: provider failure";
            if (rec.outcome.provider_error)
                err << " (" << rec.outcome.provider_error->kind
                    << "): " << rec.outcome.provider_error->message;
            err << "\n";
            return 3;
    }
    return 1;
}

inline int cmd_replay(const CliState& st, const std::string& trace_path, double speed,
                      std::ostream& out, std::ostream& err) {
    auto cfg = detail::make_run_config(st);
    if (!cfg.ok()) {
        err << "error: " << cfg.error().message << "\n";
        return 1;
    }
    const auto outcome = run::replay_file(trace_path, speed, cfg.value(), &out);
    if (outcome.exit_code == 0)
        out << outcome.message << "\n";
    else
        err << "error: " << outcome.message << "\n";
    return outcome.exit_code;
}

inline int cmd_validate(const std::string& json_path, std::ostream& out, std::ostream& err) {
    auto content = detail::read_file(json_path);
    if (!content) {
        err << "error: cannot read file: " << json_path << "\n";
        return 1;
    }
    auto parsed = fhir::parse_any(*content);
    if (!parsed.ok()) {
        err << "error: " << parsed.error().message << "\n";
        return 1;
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
    if (issues.empty()) {
        out << "no issues\n";
        return 0;
    }
    out << fhir::render_issues(issues) << "\n";
    return fhir::has_errors(issues) ? 1 : 0;
}

inline int cmd_search(const CliState& st, const std::string& text, const std::string& vs_name,
                      int limit, std::ostream& out, std::ostream& err) {
    auto cfg = detail::make_run_config(st);
    if (!cfg.ok()) {
        err << "error: " << cfg.error().message << "\n";
        return 1;
    }
    auto service = run::build_terminology(cfg.value());
    if (!service.ok()) {
        err << "error: " << service.error().message << "\n";
        return 1;
    }
    auto vs = service.value().find_valueset(vs_name);
    if (!vs) {
        std::vector<std::string> names;
        for (const auto& v : service.value().roster()) names.push_back(v.name);
        err << "error: unknown valueset '" << vs_name
            << "' (known: " << strings::join(names, ", ") << ")\n";
        return 1;
    }
    term::TermQuery query;
    query.text = text;
    query.valueset = *vs;
    query.limit = limit;
    auto outcome = service.value().search(query);
    if (!outcome.ok()) {
        err << "error: " << outcome.error().message << "\n";
        return 1;
    }
    for (const auto& w : outcome.value().warnings) err << "warning: " << w << "\n";
    char score[32];
    for (const auto& m : outcome.value().matches) {
        std::snprintf(score, sizeof(score), "%.4f", m.score);
        out << m.code << "\t" << m.display << "\t" << score << "\n";
    }
    return 0;
}

inline int cmd_evaluate(const std::string& pred_path, const std::string& baseline_path,
                        const std::string& annotations_path, const std::string& out_path,
                        const std::string& csv_path, std::ostream& out, std::ostream& err) {
    auto load_bundle = [&](const std::string& path) -> Result<fhir::Bundle> {
        auto content = detail::read_file(path);
        if (!content) return make_error("io", "cannot read file: " + path);
        auto parsed = fhir::parse_bundle(*content);
        if (!parsed.ok()) return make_error(parsed.error().kind, path + ": " + parsed.error().message);
        auto issues = fhir::validate(parsed.value().value);
        if (fhir::has_errors(issues))
            return make_error("invalid-bundle", path + ": " + fhir::render_issue(issues.front()));
        return parsed.value().value;
    };

    auto pred = load_bundle(pred_path);
    if (!pred.ok()) {
        err << "error: " << pred.error().message << "\n";
        return 1;
    }
    auto baseline = load_bundle(baseline_path);
    if (!baseline.ok()) {
        err << "error: " << baseline.error().message << "\n";
        return 1;
    }

    if (annotations_path.empty()) {
        eval::AnnotationSet provisional;
        provisional.items = eval::prediff(pred.value(), baseline.value());
        auto saved = eval::save_annotations(provisional, out_path);
        if (!saved.ok()) {
            err << "error: " << saved.error().message << "\n";
            return 1;
        }
        size_t ambiguous = 0;
        for (const auto& item : provisional.items)
            if (item.ambiguous) ++ambiguous;
        out << "wrote " << provisional.items.size() << " provisional annotations to " << out_path
            << "\n";
        if (ambiguous > 0)
            out << ambiguous << " item(s) flagged ambiguous; review alignment before scoring\n";
        out << "fill in '=' / 'X' tags and preferences, then re-run with --annotations\n";
        return 0;
    }

    auto annotations = eval::load_annotations(annotations_path);
    if (!annotations.ok()) {
        err << "error: " << annotations.error().message << "\n";
        return 1;
    }
    // The JSONL header is line 1; item i (0-based) sits on line i + 2.
    for (size_t i = 0; i < annotations.value().items.size(); ++i) {
        if (auto problem = eval::annotation_problem(annotations.value().items[i])) {
            err << "error: " << annotations_path << ":" << (i + 2) << ": " << *problem << "\n";
            return 1;
        }
    }
    auto matrix = eval::aggregate(annotations.value());
    if (!matrix.ok()) {
        err << "error: " << matrix.error().message << "\n";
        return 1;
    }
    out << eval::render_matrix(matrix.value());
    if (!csv_path.empty()) {
        std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
        if (!csv) {
            err << "error: cannot write CSV: " << csv_path << "\n";
            return 1;
        }
        csv << eval::matrix_to_csv(matrix.value());
    }
    return 0;
}

inline int cmd_serve(const CliState& st, const std::string& host, int port, int cap,
                     std::ostream& out, std::ostream& err) {
    auto cfg = detail::make_run_config(st);
    if (!cfg.ok()) {
        err << "error: " << cfg.error().message << "\n";
        return 1;
    }
    service::ServiceConfig scfg;
    scfg.base = cfg.value();
    scfg.max_concurrent = cap;
    service::Service service(scfg);
    out << "listening on " << host << ":" << port << "\n";
    if (!service.listen(host, port)) {
        err << "error: cannot listen on " << host << ":" << port << "\n";
        return 1;
    }
    return 0;
}

/// Full argv-level entry point; returns the process exit code. Kept
/// header-only and stream-parameterized so tests drive it in-process.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CliState st;
    CLI::App app{"clinical text to FHIR R4 translation agent"};
    app.require_subcommand(1);

    // translate
    auto* translate = app.add_subcommand("translate", "translate a document to a FHIR Bundle");
    std::string doc_path, corpus_dir, corpus_doc;
    translate->add_option("document", doc_path, "path to a clinical text file");
    translate->add_option("--corpus", corpus_dir, "corpus directory (with corpus.toml)");
    translate->add_option("--doc", corpus_doc, "document id within --corpus");
    translate->add_option("--out", st.out_dir, "artifact output directory")
        ->envname("FHIRFORGE_OUT_DIR");
    translate->add_option("--max-steps", st.max_steps, "agent step budget");
    translate->add_option("--language", st.language, "document language hint (e.g. de)");
    translate->add_option("--type", st.types, "allowed resource type (repeatable)");
    translate->add_flag("--privacy", st.privacy, "hash document text in persisted logs");
    detail::add_provider_flags(translate, st);
    detail::add_term_flags(translate, st);

    // replay
    auto* replay = app.add_subcommand("replay", "re-render and verify a recorded trace");
    std::string trace_path;
    double speed = 1.0;
    replay->add_option("trace", trace_path, "path to trace.jsonl")->required();
    replay->add_option("--speed", speed, "delay scale factor (0 = instant)");
    detail::add_term_flags(replay, st);

    // validate
    auto* validate = app.add_subcommand("validate", "validate a FHIR resource or bundle file");
    std::string json_path;
    validate->add_option("file", json_path, "path to a FHIR JSON file")->required();

    // search
    auto* search = app.add_subcommand("search", "query a terminology valueset");
    std::string search_text, search_vs;
    int search_limit = 10;
    search->add_option("term", search_text, "query text")->required();
    search->add_option("--valueset", search_vs, "valueset short name or URL")->required();
    search->add_option("--limit", search_limit, "maximum matches");
    detail::add_term_flags(search, st);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "compare a predicted bundle to a baseline");
    std::string pred_path, baseline_path, annotations_path, ann_out = "annotations.jsonl",
                                                            csv_path;
    evaluate->add_option("--pred", pred_path, "predicted bundle JSON")->required();
    evaluate->add_option("--baseline", baseline_path, "human baseline bundle JSON")->required();
    evaluate->add_option("--annotations", annotations_path, "completed annotation JSONL");
    evaluate->add_option("--out", ann_out, "provisional annotation output path");
    evaluate->add_option("--csv", csv_path, "also write the matrix as CSV");

    // serve
    auto* serve = app.add_subcommand("serve", "run the HTTP service");
    std::string host = "127.0.0.1";
    int port = 8080, cap = 4;
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "bind port");
    serve->add_option("--cap", cap, "max concurrent translate runs");
    serve->add_option("--out", st.out_dir, "artifact output directory")
        ->envname("FHIRFORGE_OUT_DIR");
    serve->add_option("--max-steps", st.max_steps, "agent step budget");
    detail::add_provider_flags(serve, st);
    detail::add_term_flags(serve, st);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    if (translate->parsed()) {
        if (doc_path.empty() && (corpus_dir.empty() || corpus_doc.empty())) {
            err << "error: give a document path, or --corpus and --doc\n";
            return 1;
        }
        return cmd_translate(st, doc_path, corpus_dir, corpus_doc, out, err);
    }
    if (replay->parsed()) return cmd_replay(st, trace_path, speed, out, err);
    if (validate->parsed()) return cmd_validate(json_path, out, err);
    if (search->parsed()) return cmd_search(st, search_text, search_vs, search_limit, out, err);
    if (evaluate->parsed())
        return cmd_evaluate(pred_path, baseline_path, annotations_path, ann_out, csv_path, out,
                            err);
    if (serve->parsed()) return cmd_serve(st, host, port, cap, out, err);
    err << "error: no subcommand\n";
    return 1;
}

}  // namespace fhirforge::cli
