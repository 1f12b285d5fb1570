#include "synergy/protocol.hpp"

#include "synergy/error.hpp"
#include "synergy/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <map>
#include <set>
#include <sstream>

namespace synergy::proto {

namespace {

const char* const kFieldNames[] = {
    "request_id", "stage", "text", "origin_bs_id",
    "terminated_at_edge", "created_unix_ms", "dedup_key",
};
constexpr std::size_t kFieldCount = sizeof(kFieldNames) / sizeof(kFieldNames[0]);

std::string escape_value(const std::string& v) {
    std::string out;
    out.reserve(v.size());
    for (char c : v) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    return out;
}

bool unescape_value(const std::string& v, std::string& out) {
    out.clear();
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] != '\\') {
            out += v[i];
            continue;
        }
        if (i + 1 >= v.size()) return false;
        switch (v[++i]) {
            case '\\': out += '\\'; break;
            case 'n': out += '\n'; break;
            case 'r': out += '\r'; break;
            default: return false;
        }
    }
    return true;
}

bool is_punct_to_strip(char c) {
    return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?';
}

} // namespace

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Concise: return "concise";
        case Stage::Comprehensive: return "comprehensive";
        case Stage::Response: return "response";
    }
    return "unknown";
}

std::optional<Stage> stage_from_name(const std::string& name) {
    if (name == "concise") return Stage::Concise;
    if (name == "comprehensive") return Stage::Comprehensive;
    if (name == "response") return Stage::Response;
    return std::nullopt;
}

bool stage_transition_ok(Stage from, Stage to) {
    if (from == Stage::Concise) return to == Stage::Comprehensive || to == Stage::Response;
    if (from == Stage::Comprehensive) return to == Stage::Response;
    return false; // Response is terminal
}

std::string normalize_for_dedup(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(std::tolower(c));
    }
    while (!out.empty() && (is_punct_to_strip(out.back()) || out.back() == ' ')) {
        out.pop_back();
    }
    return out;
}

std::uint64_t dedup_key_for(const std::string& text) {
    const std::string norm = normalize_for_dedup(text);
    return fnv1a64(norm.data(), norm.size());
}

PromptEnvelope make_envelope(std::string request_id, Stage stage, std::string text,
                             std::string origin_bs_id, std::int64_t created_unix_ms) {
    PromptEnvelope env;
    env.request_id = std::move(request_id);
    env.stage = stage;
    env.text = std::move(text);
    env.origin_bs_id = std::move(origin_bs_id);
    env.created_unix_ms = created_unix_ms;
    env.dedup_key = dedup_key_for(env.text);
    return env;
}

std::string encode(const PromptEnvelope& env) {
    if (env.text.empty() && env.stage != Stage::Response) {
        throw_error(ErrorCode::InvalidArgument,
                    "encode: text must be nonempty for stage " + std::string(stage_name(env.stage)));
    }
    char keybuf[32];
    std::snprintf(keybuf, sizeof(keybuf), "%016llx",
                  static_cast<unsigned long long>(env.dedup_key));
    std::string body;
    body += "request_id=" + escape_value(env.request_id) + "\n";
    body += "stage=" + std::string(stage_name(env.stage)) + "\n";
    body += "text=" + escape_value(env.text) + "\n";
    body += "origin_bs_id=" + escape_value(env.origin_bs_id) + "\n";
    body += "terminated_at_edge=" + std::string(env.terminated_at_edge ? "1" : "0") + "\n";
    body += "created_unix_ms=" + std::to_string(env.created_unix_ms) + "\n";
    body += "dedup_key=" + std::string(keybuf) + "\n";
    if (body.size() > kMaxFrameBytes) {
        throw_error(ErrorCode::InvalidArgument, "encode: frame body exceeds 1 MiB cap");
    }
    const std::uint32_t len = static_cast<std::uint32_t>(body.size());
    std::string out;
    out.reserve(4 + body.size());
    out += static_cast<char>((len >> 24) & 0xff);
    out += static_cast<char>((len >> 16) & 0xff);
    out += static_cast<char>((len >> 8) & 0xff);
    out += static_cast<char>(len & 0xff);
    out += body;
    return out;
}

DecodeResult decode(const std::string& data) {
    DecodeResult res;
    if (data.size() < 4) {
        res.status = DecodeStatus::NeedMoreBytes;
        return res;
    }
    const auto* u = reinterpret_cast<const unsigned char*>(data.data());
    const std::size_t len = (static_cast<std::size_t>(u[0]) << 24) |
                            (static_cast<std::size_t>(u[1]) << 16) |
                            (static_cast<std::size_t>(u[2]) << 8) | static_cast<std::size_t>(u[3]);
    if (len > kMaxFrameBytes) {
        res.status = DecodeStatus::Malformed;
        res.error_offset = 0;
        res.error = "frame length " + std::to_string(len) + " exceeds 1 MiB cap";
        return res;
    }
    if (data.size() < 4 + len) {
        res.status = DecodeStatus::NeedMoreBytes;
        return res;
    }

    const auto fail = [&res](std::size_t offset, std::string what) -> DecodeResult& {
        res.status = DecodeStatus::Malformed;
        res.error_offset = offset;
        res.error = std::move(what) + " at byte offset " + std::to_string(offset);
        return res;
    };

    PromptEnvelope env;
    std::size_t pos = 0; // position within the body
    std::string values[kFieldCount];
    std::size_t offsets[kFieldCount] = {};
    for (std::size_t f = 0; f < kFieldCount; ++f) {
        if (pos >= len) return fail(4 + pos, "missing field '" + std::string(kFieldNames[f]) + "'");
        offsets[f] = 4 + pos;
        const char* body = data.data() + 4;
        const void* nl = std::memchr(body + pos, '\n', len - pos);
        if (nl == nullptr) return fail(4 + pos, "unterminated field line");
        const std::size_t line_end = static_cast<const char*>(nl) - body;
        const std::string line(body + pos, line_end - pos);
        const std::size_t eq = line.find('=');
        const std::string expect = kFieldNames[f];
        if (eq == std::string::npos || line.substr(0, eq) != expect) {
            return fail(4 + pos, "expected field '" + expect + "'");
        }
        values[f] = line.substr(eq + 1);
        pos = line_end + 1;
    }
    if (pos != len) return fail(4 + pos, "trailing bytes after last field");

    if (!unescape_value(values[0], env.request_id))
        return fail(offsets[0], "bad escape in request_id");
    const auto stage = stage_from_name(values[1]);
    if (!stage) return fail(offsets[1], "unknown stage '" + values[1] + "'");
    env.stage = *stage;
    if (!unescape_value(values[2], env.text)) return fail(offsets[2], "bad escape in text");
    if (!unescape_value(values[3], env.origin_bs_id))
        return fail(offsets[3], "bad escape in origin_bs_id");
    if (values[4] == "0") {
        env.terminated_at_edge = false;
    } else if (values[4] == "1") {
        env.terminated_at_edge = true;
    } else {
        return fail(offsets[4], "terminated_at_edge must be 0 or 1");
    }
    try {
        env.created_unix_ms = std::stoll(values[5]);
    } catch (const std::exception&) {
        return fail(offsets[5], "created_unix_ms is not an integer");
    }
    unsigned long long key = 0;
    bool key_ok = values[6].size() == 16;
    for (char c : values[6]) {
        key_ok = key_ok && std::isxdigit(static_cast<unsigned char>(c));
    }
    if (!key_ok || std::sscanf(values[6].c_str(), "%16llx", &key) != 1) {
        return fail(offsets[6], "dedup_key must be 16 hex digits");
    }
    env.dedup_key = key;
    if (env.text.empty() && env.stage != Stage::Response) {
        return fail(offsets[2], "text must be nonempty for stage " + std::string(stage_name(env.stage)));
    }
    if (env.dedup_key != dedup_key_for(env.text)) {
        return fail(offsets[6], "dedup_key does not match normalized text");
    }

    res.status = DecodeStatus::Ok;
    res.envelope = std::move(env);
    res.consumed = 4 + len;
    return res;
}

std::vector<PromptEnvelope> FrameReader::feed(const char* data, std::size_t size) {
    buffer_.append(data, size);
    std::vector<PromptEnvelope> out;
    for (;;) {
        DecodeResult r = decode(buffer_);
        if (r.status == DecodeStatus::NeedMoreBytes) break;
        if (r.status == DecodeStatus::Malformed) {
            throw_error(ErrorCode::Parse, "frame decode failed: " + r.error);
        }
        out.push_back(std::move(r.envelope));
        buffer_.erase(0, r.consumed);
    }
    return out;
}

std::vector<std::string> validate_workflow(const WorkflowGraph& g) {
    std::vector<std::string> violations;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (!index.emplace(g.nodes[i].name, i).second) {
            violations.push_back("duplicate node '" + g.nodes[i].name + "'");
        }
    }
    std::vector<std::vector<std::size_t>> adj(g.nodes.size());
    std::vector<std::size_t> indegree(g.nodes.size(), 0);
    for (const auto& [from, to] : g.edges) {
        const auto fi = index.find(from);
        const auto ti = index.find(to);
        if (fi == index.end()) {
            violations.push_back("edge references unknown node '" + from + "'");
            continue;
        }
        if (ti == index.end()) {
            violations.push_back("edge references unknown node '" + to + "'");
            continue;
        }
        adj[fi->second].push_back(ti->second);
        ++indegree[ti->second];
    }
    for (const auto& [name, budget] : g.qos_latency_budget_s) {
        if (index.find(name) == index.end()) {
            violations.push_back("qos budget for unknown node '" + name + "'");
        } else if (budget < 0) {
            violations.push_back("negative qos budget for node '" + name + "'");
        }
    }

    // Cycle detection via DFS coloring.
    enum { White, Grey, Black };
    std::vector<int> color(g.nodes.size(), White);
    bool cycle = false;
    const auto dfs = [&](auto&& self, std::size_t v) -> void {
        color[v] = Grey;
        for (std::size_t w : adj[v]) {
            if (color[w] == Grey) {
                cycle = true;
            } else if (color[w] == White) {
                self(self, w);
            }
        }
        color[v] = Black;
    };
    for (std::size_t v = 0; v < g.nodes.size(); ++v) {
        if (color[v] == White) dfs(dfs, v);
    }
    if (cycle) violations.push_back("cycle in workflow graph");

    // A cloud node must not be reachable from a source without an edge node
    // in between. Propagate "reachable through cloud-only prefix".
    std::vector<bool> cloud_prefix(g.nodes.size(), false);
    std::vector<std::size_t> work;
    for (std::size_t v = 0; v < g.nodes.size(); ++v) {
        if (indegree[v] == 0 && g.nodes[v].placement == Placement::Cloud) {
            cloud_prefix[v] = true;
            work.push_back(v);
        }
    }
    while (!work.empty()) {
        const std::size_t v = work.back();
        work.pop_back();
        for (std::size_t w : adj[v]) {
            if (g.nodes[w].placement == Placement::Cloud && !cloud_prefix[w]) {
                cloud_prefix[w] = true;
                work.push_back(w);
            }
        }
    }
    for (std::size_t v = 0; v < g.nodes.size(); ++v) {
        if (cloud_prefix[v]) {
            violations.push_back("cloud precedes edge: node '" + g.nodes[v].name +
                                 "' runs in the cloud before any edge processing");
        }
    }
    return violations;
}

WorkflowGraph workflow_from_config(const Config& cfg) {
    WorkflowGraph g;
    const auto node_keys = cfg.keys_with_prefix("workflow.node.");
    if (node_keys.empty()) {
        g.nodes = {{"enhance", Placement::Edge}, {"generate", Placement::Cloud}};
        g.edges = {{"enhance", "generate"}};
        return g;
    }
    for (const auto& key : node_keys) {
        WorkflowGraph::Node node;
        node.name = key.substr(std::strlen("workflow.node."));
        const std::string placement = cfg.get_string(key);
        if (placement == "edge") {
            node.placement = Placement::Edge;
        } else if (placement == "cloud") {
            node.placement = Placement::Cloud;
        } else {
            throw_error(ErrorCode::Config,
                        "config key '" + key + "': placement must be edge or cloud");
        }
        g.nodes.push_back(std::move(node));
    }
    for (const auto& key : cfg.keys_with_prefix("workflow.edge.")) {
        const std::string v = cfg.get_string(key);
        const std::size_t arrow = v.find("->");
        if (arrow == std::string::npos) {
            throw_error(ErrorCode::Config, "config key '" + key + "': expected <from>-><to>");
        }
        g.edges.emplace_back(v.substr(0, arrow), v.substr(arrow + 2));
    }
    for (const auto& key : cfg.keys_with_prefix("workflow.qos.")) {
        g.qos_latency_budget_s[key.substr(std::strlen("workflow.qos."))] = cfg.get_double(key);
    }
    return g;
}

} // namespace synergy::proto
