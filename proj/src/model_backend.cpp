#include "synergy/model_backend.hpp"

#include "synergy/error.hpp"
#include "synergy/protocol.hpp"
#include "synergy/rng.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstring>
#include <fstream>
#include <semaphore>
#include <set>
#include <sstream>

namespace synergy::backend {

namespace {

constexpr const char* kContextMarker = "\n[context]\n";

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {
        "the", "a",  "an",    "and",  "or",    "of",   "in",   "on",   "at",   "to",
        "for", "is", "are",   "with", "near",  "me",   "my",   "i",    "we",   "please",
        "about", "what", "where", "how", "can", "you", "do",  "want", "know", "need",
        "tell", "show", "find", "give", "around", "here", "this", "that", "it",
    };
    return words;
}

// Light plural folding so "libraries" matches "library".
std::string stem(const std::string& word) {
    if (word.size() > 3 && word.ends_with("ies")) {
        return word.substr(0, word.size() - 3) + "y";
    }
    if (word.size() > 2 && word.ends_with("s") && !word.ends_with("ss")) {
        return word.substr(0, word.size() - 1);
    }
    return word;
}

const char* const kResponseTemplates[] = {
    "Here is what I can share: %s",
    "Based on the request, %s",
    "To address this: %s",
};

const char* const kIntentClauses[] = {
    "I would like to know about",
    "Please give me details on",
    "I am interested in",
};

} // namespace

void GenerationRequest::validate() const {
    if (prompt.empty()) {
        throw_error(ErrorCode::InvalidArgument, "generation request: prompt must be nonempty");
    }
    if (max_new_tokens < 1) {
        throw_error(ErrorCode::InvalidArgument, "generation request: max_new_tokens must be >= 1");
    }
    if (temperature < 0) {
        throw_error(ErrorCode::InvalidArgument, "generation request: temperature must be >= 0");
    }
}

std::vector<GenerationResult> TextBackend::generate_batch(
    const std::vector<GenerationRequest>& reqs) {
    std::vector<GenerationResult> out;
    out.reserve(reqs.size());
    for (const auto& r : reqs) out.push_back(generate(r));
    return out;
}

std::string compose_enhancement_prompt(const std::string& concise,
                                       const std::vector<std::string>& facts,
                                       std::uint32_t max_facts) {
    std::string prompt = concise;
    prompt += kContextMarker;
    for (const auto& f : facts) {
        prompt += f;
        prompt += '\n';
    }
    prompt += "[limit " + std::to_string(max_facts) + "]";
    return prompt;
}

std::vector<std::string> keyword_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    std::string word;
    const auto flush = [&] {
        if (word.size() > 2 && !stopwords().contains(word)) {
            if (seen.insert(stem(word)).second) out.push_back(word);
        }
        word.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            word += static_cast<char>(std::tolower(c));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

GenerationResult MockBackend::generate(const GenerationRequest& req) {
    req.validate();
    // Variation under temperature > 0 is driven by (seed, prompt) so two
    // backends with the same seed agree on the same prompt.
    std::uint64_t pick = 0;
    if (req.temperature > 0) {
        SeededRng rng(seed_ ^ fnv1a64(req.prompt.data(), req.prompt.size()));
        pick = rng.next();
    }

    GenerationResult res;
    const std::size_t marker = req.prompt.find(kContextMarker);
    if (marker == std::string::npos) {
        // Responder mode: canned completion around the prompt.
        std::string text(kResponseTemplates[pick % 3]);
        const std::size_t at = text.find("%s");
        text.replace(at, 2, req.prompt);
        res.text = text;
        res.confidence = 1.0;
        return res;
    }

    // Enhancement mode.
    const std::string concise = req.prompt.substr(0, marker);
    std::vector<std::string> facts;
    std::uint32_t limit = 0;
    {
        std::istringstream rest(req.prompt.substr(marker + std::strlen(kContextMarker)));
        std::string line;
        while (std::getline(rest, line)) {
            if (line.rfind("[limit ", 0) == 0 && line.back() == ']') {
                limit = static_cast<std::uint32_t>(
                    std::strtoul(line.c_str() + 7, nullptr, 10));
            } else if (!line.empty()) {
                facts.push_back(line);
            }
        }
    }

    const std::vector<std::string> keywords = keyword_tokens(concise);
    std::set<std::string> keyword_stems;
    for (const auto& k : keywords) keyword_stems.insert(stem(k));

    struct Scored {
        std::size_t index;
        std::size_t overlap;
    };
    std::vector<Scored> scored;
    std::vector<std::set<std::string>> fact_stems(facts.size());
    for (std::size_t i = 0; i < facts.size(); ++i) {
        for (const auto& t : keyword_tokens(facts[i])) fact_stems[i].insert(stem(t));
        std::size_t overlap = 0;
        for (const auto& k : keyword_stems) overlap += fact_stems[i].count(k);
        if (overlap > 0) scored.push_back(Scored{i, overlap});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        return a.overlap > b.overlap;
    });
    if (scored.size() > limit) scored.resize(limit);
    std::sort(scored.begin(), scored.end(),
              [](const Scored& a, const Scored& b) { return a.index < b.index; });

    std::set<std::string> covered;
    std::string text = concise;
    for (const auto& s : scored) {
        text += ' ';
        text += facts[s.index];
        for (const auto& k : keyword_stems) {
            if (fact_stems[s.index].contains(k)) covered.insert(k);
        }
    }
    text += ' ';
    text += kIntentClauses[pick % 3];
    for (const auto& k : keywords) {
        text += ' ';
        text += k;
    }
    if (keywords.empty()) text += " this request";
    text += '.';

    res.text = text;
    res.confidence = keyword_stems.empty()
                         ? 0.0
                         : static_cast<double>(covered.size()) /
                               static_cast<double>(keyword_stems.size());
    return res;
}

ReplayBackend ReplayBackend::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw_error(ErrorCode::Data, "cannot open replay corpus '" + path + "'");
    }
    std::map<std::string, std::string> corpus;
    std::string line;
    int lineno = 0;
    ReplayBackend backend({});
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw_error(ErrorCode::Data, path + ":" + std::to_string(lineno) +
                                             ": expected <prompt>\\t<completion>");
        }
        const std::string key = proto::normalize_for_dedup(line.substr(0, tab));
        std::string rest = line.substr(tab + 1);
        // The last field is a confidence only when it parses as a number;
        // otherwise it belongs to the completion text.
        double confidence = 1.0;
        const std::size_t tab2 = rest.rfind('\t');
        if (tab2 != std::string::npos && tab2 + 1 < rest.size()) {
            char* end = nullptr;
            const double parsed = std::strtod(rest.c_str() + tab2 + 1, &end);
            if (end != rest.c_str() + tab2 + 1 && *end == '\0') {
                confidence = parsed;
                rest = rest.substr(0, tab2);
            }
        }
        backend.corpus_[key] = rest;
        backend.confidence_[key] = confidence;
    }
    return backend;
}

GenerationResult ReplayBackend::generate(const GenerationRequest& req) {
    req.validate();
    const std::string key = proto::normalize_for_dedup(req.prompt);
    const auto it = corpus_.find(key);
    if (it == corpus_.end()) {
        throw_error(ErrorCode::NotFound, "replay corpus has no entry for prompt");
    }
    GenerationResult res;
    res.text = it->second;
    const auto conf = confidence_.find(key);
    res.confidence = conf == confidence_.end() ? 1.0 : conf->second;
    return res;
}

struct HttpBackend::Impl {
    HttpBackendConfig cfg;
    std::string host;
    int port = 80;
    std::string path;
    std::counting_semaphore<256> in_flight;

    explicit Impl(HttpBackendConfig c)
        : cfg(std::move(c)),
          in_flight(std::min<std::uint32_t>(cfg.max_in_flight, 256)) {
        std::string rest = cfg.endpoint;
        const std::string scheme = "http://";
        if (rest.rfind(scheme, 0) != 0) {
            throw_error(ErrorCode::Config,
                        "http backend endpoint must start with http://, got '" + cfg.endpoint + "'");
        }
        rest = rest.substr(scheme.size());
        const std::size_t slash = rest.find('/');
        path = slash == std::string::npos ? "/" : rest.substr(slash);
        std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
        const std::size_t colon = hostport.find(':');
        if (colon != std::string::npos) {
            host = hostport.substr(0, colon);
            port = std::atoi(hostport.c_str() + colon + 1);
        } else {
            host = hostport;
        }
    }
};

HttpBackend::HttpBackend(HttpBackendConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
HttpBackend::~HttpBackend() = default;

GenerationResult HttpBackend::generate(const GenerationRequest& req) {
    req.validate();
    struct Slot {
        std::counting_semaphore<256>& sem;
        explicit Slot(std::counting_semaphore<256>& s) : sem(s) { sem.acquire(); }
        ~Slot() { sem.release(); }
    } slot(impl_->in_flight);

    // {{prompt}} expands to the JSON-escaped string content (no quotes).
    std::string escaped = nlohmann::json(req.prompt).dump();
    escaped = escaped.substr(1, escaped.size() - 2);
    std::string body = impl_->cfg.request_template;
    const auto substitute = [&body](const std::string& tag, const std::string& value) {
        for (std::size_t at = body.find(tag); at != std::string::npos; at = body.find(tag)) {
            body.replace(at, tag.size(), value);
        }
    };
    substitute("{{prompt}}", escaped);
    substitute("{{max_new_tokens}}", std::to_string(req.max_new_tokens));
    char temp[32];
    std::snprintf(temp, sizeof(temp), "%g", req.temperature);
    substitute("{{temperature}}", temp);

    httplib::Client client(impl_->host, impl_->port);
    const auto timeout_ms = static_cast<time_t>(impl_->cfg.timeout_s * 1000);
    client.set_connection_timeout(0, timeout_ms * 1000);
    client.set_read_timeout(0, timeout_ms * 1000);

    const auto started = std::chrono::steady_clock::now();
    httplib::Result result = client.Post(impl_->path, body, "application/json");
    const auto elapsed = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - started).count();
    if (!result) {
        throw_error(ErrorCode::Transport,
                    "http backend: request to " + impl_->cfg.endpoint + " failed: " +
                        httplib::to_string(result.error()));
    }
    if (result->status < 200 || result->status >= 300) {
        throw_error(ErrorCode::Transport, "http backend: endpoint returned status " +
                                              std::to_string(result->status));
    }

    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(result->body);
    } catch (const nlohmann::json::exception& e) {
        throw_error(ErrorCode::Parse, std::string("http backend: bad JSON response: ") + e.what());
    }
    GenerationResult res;
    try {
        res.text = parsed.at(nlohmann::json::json_pointer(impl_->cfg.response_text_path))
                       .get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw_error(ErrorCode::Parse, "http backend: response has no text at pointer '" +
                                          impl_->cfg.response_text_path + "'");
    }
    if (!impl_->cfg.response_confidence_path.empty()) {
        try {
            res.confidence =
                parsed.at(nlohmann::json::json_pointer(impl_->cfg.response_confidence_path))
                    .get<double>();
            res.confidence = std::clamp(res.confidence, 0.0, 1.0);
        } catch (const nlohmann::json::exception&) {
            res.confidence = 1.0;
        }
    } else {
        res.confidence = 1.0;
    }
    res.latency_s = elapsed;
    return res;
}

std::unique_ptr<TextBackend> make_backend(const Config& cfg, const std::string& kind) {
    if (kind == "mock") {
        return std::make_unique<MockBackend>(cfg.get_uint_or("backend.mock.seed", 0));
    }
    if (kind == "replay") {
        return std::make_unique<ReplayBackend>(
            ReplayBackend::from_file(cfg.get_string("backend.replay.corpus")));
    }
    if (kind == "http") {
        HttpBackendConfig hc;
        hc.endpoint = cfg.get_string("backend.http.endpoint");
        hc.timeout_s = cfg.get_double_or("backend.http.timeout_s", 5.0);
        hc.max_in_flight =
            static_cast<std::uint32_t>(cfg.get_uint_or("backend.http.max_in_flight", 8));
        hc.request_template = cfg.get_string_or("backend.http.request_template", hc.request_template);
        hc.response_text_path =
            cfg.get_string_or("backend.http.response_text_path", hc.response_text_path);
        hc.response_confidence_path =
            cfg.get_string_or("backend.http.response_confidence_path", "");
        return std::make_unique<HttpBackend>(std::move(hc));
    }
    throw_error(ErrorCode::Config, "unknown backend kind '" + kind + "'");
}

} // namespace synergy::backend
