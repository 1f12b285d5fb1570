#pragma once

#include "synergy/config.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace synergy::backend {

struct GenerationRequest {
    std::string prompt;
    std::uint32_t max_new_tokens = 64;
    double temperature = 0.0; // 0 = deterministic

    void validate() const;
};

struct GenerationResult {
    std::string text;
    double confidence = 0.0; // in [0,1]
    double latency_s = 0.0;
};

// Text-generation backend. generate_batch must invoke the underlying
// engine once for the whole batch; the default implementation loops for
// backends with no batch form of their own.
class TextBackend {
public:
    virtual ~TextBackend() = default;

    virtual GenerationResult generate(const GenerationRequest& req) = 0;

    virtual std::vector<GenerationResult> generate_batch(
        const std::vector<GenerationRequest>& reqs);

    virtual const char* name() const = 0;
};

// Prompt layout understood by the mock backend for prompt enhancement.
// The caller appends candidate context snippets after the concise text:
//
//   <concise text>
//   [context]
//   <fact 1>
//   ...
//   [limit <max facts>]
//
// Without a [context] block the mock acts as a plain responder.
std::string compose_enhancement_prompt(const std::string& concise,
                                       const std::vector<std::string>& facts,
                                       std::uint32_t max_facts);

// Whitespace/punctuation-split lowercase tokens, stopwords removed.
std::vector<std::string> keyword_tokens(const std::string& text);

// Deterministic template engine. With a [context] block it selects the
// facts that best overlap the concise text's keywords, appends them plus an
// intent-expansion clause, and reports the keyword coverage as confidence.
// temperature > 0 varies only the canned phrasing, driven by the seed.
class MockBackend : public TextBackend {
public:
    explicit MockBackend(std::uint64_t seed = 0) : seed_(seed) {}

    GenerationResult generate(const GenerationRequest& req) override;
    const char* name() const override { return "mock"; }

private:
    std::uint64_t seed_;
};

// Serves completions recorded in a corpus file keyed by normalized prompt.
// File format: one record per line, "<normalized prompt>\t<completion>".
class ReplayBackend : public TextBackend {
public:
    static ReplayBackend from_file(const std::string& path);
    explicit ReplayBackend(std::map<std::string, std::string> corpus)
        : corpus_(std::move(corpus)) {}

    GenerationResult generate(const GenerationRequest& req) override; // throws NotFound on miss
    const char* name() const override { return "replay"; }

    std::size_t size() const { return corpus_.size(); }

private:
    std::map<std::string, std::string> corpus_;
    std::map<std::string, double> confidence_;
};

struct HttpBackendConfig {
    std::string endpoint;        // http://host:port/path
    double timeout_s = 5.0;
    std::uint32_t max_in_flight = 8;
    // Request body template; {{prompt}}, {{max_new_tokens}} and
    // {{temperature}} are substituted. Must produce valid JSON.
    std::string request_template =
        R"({"prompt": "{{prompt}}", "max_new_tokens": {{max_new_tokens}}, "temperature": {{temperature}}})";
    std::string response_text_path = "/text";        // JSON pointer
    std::string response_confidence_path;            // optional JSON pointer
};

// Client for a completion-style HTTP endpoint. Transport failures raise
// Error{Transport}; in-flight requests are bounded by max_in_flight.
class HttpBackend : public TextBackend {
public:
    explicit HttpBackend(HttpBackendConfig cfg);
    ~HttpBackend() override;

    GenerationResult generate(const GenerationRequest& req) override;
    const char* name() const override { return "http"; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Factory keyed by the config's backend selector ("mock", "replay", "http").
std::unique_ptr<TextBackend> make_backend(const Config& cfg, const std::string& kind);

} // namespace synergy::backend
