// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"

#include "fhirforge/common.hpp"
#include "fhirforge/sha256.hpp"

namespace fhirforge::llm {

struct ChatMessage {
    std::string role;  // system | user | assistant | tool
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

enum class ProviderKind { http, scripted, replay };

inline std::string_view to_string(ProviderKind k) {
    switch (k) {
        case ProviderKind::http: return "http";
        case ProviderKind::scripted: return "scripted";
        case ProviderKind::replay: return "replay";
    }
    return "scripted";
}

inline std::optional<ProviderKind> provider_kind_from_string(std::string_view s) {
    if (s == "http") return ProviderKind::http;
    if (s == "scripted") return ProviderKind::scripted;
    if (s == "replay") return ProviderKind::replay;
    return std::nullopt;
}

struct ProviderConfig {
    ProviderKind kind = ProviderKind::scripted;
    // http fields
    std::string base_url;
    std::string model = "default";
    std::string api_key_env = "FHIRFORGE_API_KEY";  // env var NAME, never the key itself
    int timeout_s = 60;
    int retry_count = 2;
    int base_backoff_ms = 1000;  // exponential, factor 2, jitter +/-20%
    double temperature = 0.0;
    // scripted fields
    std::string script_path;
    // replay fields
    std::string trace_path;
};

/// Reason the config violates its kind's field requirements, or nullopt.
inline std::optional<std::string> provider_config_problem(const ProviderConfig& c) {
    switch (c.kind) {
        case ProviderKind::http:
            if (c.base_url.empty()) return "http provider requires a base URL";
            if (c.api_key_env.empty()) return "http provider requires an API key env var name";
            if (!c.script_path.empty() || !c.trace_path.empty())
                return "http provider must not set script or trace paths";
            if (c.timeout_s < 1) return "timeout must be at least 1 second";
            if (c.retry_count < 0) return "retry count must be non-negative";
            return std::nullopt;
        case ProviderKind::scripted:
            if (c.script_path.empty()) return "scripted provider requires a script path";
            if (!c.base_url.empty() || !c.trace_path.empty())
                return "scripted provider must not set base URL or trace path";
            return std::nullopt;
        case ProviderKind::replay:
            if (c.trace_path.empty()) return "replay provider requires a trace path";
            if (!c.base_url.empty() || !c.script_path.empty())
                return "replay provider must not set base URL or script path";
            return std::nullopt;
    }
    return "unknown provider kind";
}

/// One request/response exchange captured for the trace sidecar. Secrets
/// are redacted before anything lands here.
using ExchangeLog = std::vector<Json>;

class Provider {
  public:
    virtual ~Provider() = default;
    virtual Result<std::string> complete(const std::vector<ChatMessage>& messages) = 0;
    virtual std::string_view kind() const = 0;
    void set_exchange_log(ExchangeLog* log) { log_ = log; }

  protected:
    void record(Json line) const {
        if (log_) log_->push_back(std::move(line));
    }
    ExchangeLog* log_ = nullptr;
};

// ---- redaction -------------------------------------------------------------

struct RedactOptions {
    std::vector<std::string> secrets;  // literal values to scrub
    bool hash_documents = false;       // privacy mode: document text -> its SHA-256
};

namespace detail {

inline bool secret_key_name(std::string_view key) {
    const std::string k = strings::to_lower(std::string(key));
    return k == "authorization" || k == "api_key" || k == "apikey" ||
           strings::contains(k, "secret") || strings::contains(k, "token") ||
           (k.size() >= 4 && k.substr(k.size() - 4) == "_key");
}

inline bool document_key_name(std::string_view key) {
    return key == "document" || key == "text";
}

}  // namespace detail

/// Sanitized copy of a log record: values under secret-ish keys and any
/// string containing a known secret become `***`; in privacy mode, values
/// under document-carrying keys become their SHA-256 hex.
inline Json redact(const Json& record, const RedactOptions& opt) {
    if (record.is_object()) {
        Json out = Json::object();
        for (const auto& [key, value] : record.items()) {
            if (detail::secret_key_name(key) && value.is_string()) {
                out[key] = "***";
            } else if (opt.hash_documents && detail::document_key_name(key) && value.is_string()) {
                out[key] = sha256_hex(value.get<std::string>());
            } else {
                out[key] = redact(value, opt);
            }
        }
        return out;
    }
    if (record.is_array()) {
        Json out = Json::array();
        for (const auto& v : record) out.push_back(redact(v, opt));
        return out;
    }
    if (record.is_string()) {
        const auto s = record.get<std::string>();
        for (const auto& secret : opt.secrets)
            if (!secret.empty() && strings::contains(s, secret)) return "***";
        return record;
    }
    return record;
}

// ---- providers --------------------------------------------------------------

/// OpenAI-style chat-completions client: POST {base}/v1/chat/completions,
/// reads choices[0].message.content. Retries only 429/5xx, exactly
/// retry_count extra attempts; 4xx and network errors fail fast.
class HttpProvider : public Provider {
  public:
    HttpProvider(ProviderConfig config, std::string api_key)
        : config_(std::move(config)), api_key_(std::move(api_key)) {}

    std::string_view kind() const override { return "http"; }

    Result<std::string> complete(const std::vector<ChatMessage>& messages) override {
        Json req = Json::object();
        req["model"] = config_.model;
        req["temperature"] = config_.temperature;
        Json msgs = Json::array();
        for (const auto& m : messages) {
            Json mj = Json::object();
            mj["role"] = m.role;
            mj["content"] = m.content;
            msgs.push_back(std::move(mj));
        }
        req["messages"] = std::move(msgs);
        const std::string body = req.dump();

        int last_status = 0;
        std::string last_body;
        for (int attempt = 0; attempt <= config_.retry_count; ++attempt) {
            if (attempt > 0) backoff_sleep(attempt - 1);
            httplib::Client cli(config_.base_url);
            cli.set_connection_timeout(config_.timeout_s, 0);
            cli.set_read_timeout(config_.timeout_s, 0);
            httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
            auto res = cli.Post("/v1/chat/completions", headers, body, "application/json");
            if (!res) {
                const auto err = res.error();
                const bool timeout = err == httplib::Error::ConnectionTimeout ||
                                     err == httplib::Error::Read || err == httplib::Error::Write;
                Error e = make_error(timeout ? "deadline" : "transport",
                                     std::string("provider request failed: ") +
                                         httplib::to_string(err) + " (" + config_.base_url + ")");
                record_exchange(req, Json{{"error", e.message}});
                return e;  // network errors are not retried
            }
            last_status = res->status;
            last_body = res->body;
            if (res->status >= 200 && res->status < 300) {
                auto parsed = parse_completion(res->body);
                record_exchange(req, Json{{"status", res->status},
                                          {"content", parsed.ok() ? Json(parsed.value())
                                                                  : Json(nullptr)}});
                return parsed;
            }
            const bool retryable = res->status == 429 || res->status >= 500;
            if (!retryable) {
                record_exchange(req, Json{{"status", res->status}, {"body", snippet(res->body)}});
                return make_error("provider",
                                  "provider returned HTTP " + std::to_string(res->status) + ": " +
                                      snippet(res->body));
            }
        }
        record_exchange(req, Json{{"status", last_status}, {"body", snippet(last_body)}});
        return make_error("provider", "provider returned HTTP " + std::to_string(last_status) +
                                          " after " + std::to_string(config_.retry_count + 1) +
                                          " attempts: " + snippet(last_body));
    }

  private:
    static std::string snippet(const std::string& s) { return s.substr(0, 200); }

    Result<std::string> parse_completion(const std::string& body) const {
        Json j;
        try {
            j = Json::parse(body);
        } catch (const Json::parse_error& e) {
            return make_error("provider", std::string("malformed completion JSON: ") + e.what());
        }
        if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
            return make_error("provider", "completion response has no choices");
        const auto& first = j["choices"][0];
        if (!first.contains("message") || !first["message"].contains("content") ||
            !first["message"]["content"].is_string())
            return make_error("provider", "completion response has no message content");
        return first["message"]["content"].get<std::string>();
    }

    void backoff_sleep(int prior_failures) const {
        double ms = static_cast<double>(config_.base_backoff_ms);
        for (int i = 0; i < prior_failures; ++i) ms *= 2.0;
        thread_local std::mt19937 rng{std::random_device{}()};
        std::uniform_real_distribution<double> jitter(0.8, 1.2);
        ms *= jitter(rng);
        std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(ms)));
    }

    void record_exchange(const Json& req, Json response) const {
        RedactOptions opt;
        opt.secrets.push_back(api_key_);
        Json line = Json::object();
        line["kind"] = "http";
        line["request"] = redact(req, opt);
        line["response"] = redact(response, opt);
        record(std::move(line));
    }

    ProviderConfig config_;
    std::string api_key_;
};

/// Serves a fixed list of assistant replies in order; deterministic.
class ScriptedProvider : public Provider {
  public:
    explicit ScriptedProvider(std::vector<std::string> replies)
        : replies_(std::move(replies)) {}

    std::string_view kind() const override { return "scripted"; }

    Result<std::string> complete(const std::vector<ChatMessage>&) override {
        if (cursor_ >= replies_.size())
            return make_error("script-underrun", "scripted provider exhausted after " +
                                                     std::to_string(replies_.size()) + " replies");
        record(Json{{"kind", "scripted"}, {"index", cursor_}});
        return replies_[cursor_++];
    }

    size_t remaining() const { return replies_.size() - cursor_; }

  private:
    std::vector<std::string> replies_;
    size_t cursor_ = 0;
};

/// Serves the assistant texts recorded in a session trace, in order,
/// independent of the incoming messages.
class ReplayProvider : public Provider {
  public:
    explicit ReplayProvider(std::vector<std::string> outputs) : outputs_(std::move(outputs)) {}

    std::string_view kind() const override { return "replay"; }

    Result<std::string> complete(const std::vector<ChatMessage>&) override {
        if (cursor_ >= outputs_.size())
            return make_error("replay-underrun", "recorded trace exhausted after " +
                                                     std::to_string(outputs_.size()) + " steps");
        record(Json{{"kind", "replay"}, {"index", cursor_}});
        return outputs_[cursor_++];
    }

  private:
    std::vector<std::string> outputs_;
    size_t cursor_ = 0;
};

// ---- factory ----------------------------------------------------------------

inline Result<std::vector<std::string>> load_script_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return make_error("io", "cannot open script file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    Json j;
    try {
        j = Json::parse(ss.str());
    } catch (const Json::parse_error& e) {
        return make_error("bad-format", path + ": " + e.what());
    }
    if (!j.is_array()) return make_error("bad-format", path + ": script must be a JSON array");
    std::vector<std::string> replies;
    for (const auto& item : j) {
        if (!item.is_string())
            return make_error("bad-format", path + ": script entries must be strings");
        replies.push_back(item.get<std::string>());
    }
    return replies;
}

/// Pull the raw assistant outputs back out of a trace file (JSON Lines;
/// header line first, then one step per line with a model_output field).
inline Result<std::vector<std::string>> load_trace_outputs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return make_error("io", "cannot open trace file: " + path);
    std::vector<std::string> outputs;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (strings::trim(line).empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            return make_error("bad-format",
                              path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (lineno == 1) continue;  // header line
        if (!j.contains("model_output") || !j["model_output"].is_string())
            return make_error("bad-format", path + ":" + std::to_string(lineno) +
                                                ": step line has no model_output");
        outputs.push_back(j["model_output"].get<std::string>());
    }
    return outputs;
}

inline Result<std::unique_ptr<Provider>> make_provider(const ProviderConfig& config) {
    if (auto problem = provider_config_problem(config))
        return make_error("bad-config", *problem);
    switch (config.kind) {
        case ProviderKind::http: {
            const char* key = std::getenv(config.api_key_env.c_str());
            if (!key || !*key)
                return make_error("bad-config",
                                  "API key env var " + config.api_key_env + " is not set");
            return std::unique_ptr<Provider>(new HttpProvider(config, key));
        }
        case ProviderKind::scripted: {
            auto replies = load_script_file(config.script_path);
            if (!replies.ok()) return replies.error();
            return std::unique_ptr<Provider>(new ScriptedProvider(std::move(replies.value())));
        }
        case ProviderKind::replay: {
            auto outputs = load_trace_outputs(config.trace_path);
            if (!outputs.ok()) return outputs.error();
            return std::unique_ptr<Provider>(new ReplayProvider(std::move(outputs.value())));
        }
    }
    return make_error("bad-config", "unknown provider kind");
}

}  // namespace fhirforge::llm
