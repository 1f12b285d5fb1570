#pragma once

#include "synergy/config.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace synergy::proto {

constexpr std::size_t kMaxFrameBytes = 1 << 20; // 1 MiB body cap

enum class Stage { Concise, Comprehensive, Response };

const char* stage_name(Stage s);
std::optional<Stage> stage_from_name(const std::string& name);

// Allowed lifecycle transitions. Response is terminal.
bool stage_transition_ok(Stage from, Stage to);

// Lowercases ASCII, collapses whitespace runs to single spaces, trims, and
// strips trailing punctuation (.,;:!?). Idempotent.
std::string normalize_for_dedup(const std::string& text);

std::uint64_t dedup_key_for(const std::string& text);

struct PromptEnvelope {
    std::string request_id;
    Stage stage = Stage::Concise;
    std::string text;
    std::string origin_bs_id;
    bool terminated_at_edge = false;
    std::int64_t created_unix_ms = 0;
    std::uint64_t dedup_key = 0; // hash of the normalized text

    bool operator==(const PromptEnvelope&) const = default;
};

// Builds an envelope with the dedup key filled in from the text.
PromptEnvelope make_envelope(std::string request_id, Stage stage, std::string text,
                             std::string origin_bs_id, std::int64_t created_unix_ms = 0);

// Wire format: 4-byte big-endian body length, then a UTF-8 body of
// "name=value" lines with backslash escapes in values. Field names and
// order are frozen; see PROTOCOL.md.
std::string encode(const PromptEnvelope& env);

enum class DecodeStatus { Ok, NeedMoreBytes, Malformed };

struct DecodeResult {
    DecodeStatus status = DecodeStatus::Malformed;
    PromptEnvelope envelope;
    std::size_t consumed = 0;    // bytes consumed from the input on Ok
    std::size_t error_offset = 0; // byte offset of the fault on Malformed
    std::string error;
};

// Decodes one frame from the front of `data`.
DecodeResult decode(const std::string& data);

// Incremental decoder for a stream transport. Owns a partial-frame buffer;
// confine one instance to one connection.
class FrameReader {
public:
    // Appends bytes and returns every envelope completed by them.
    // Throws Error{Parse} on a malformed or oversize frame.
    std::vector<PromptEnvelope> feed(const char* data, std::size_t size);

    std::size_t buffered() const { return buffer_.size(); }

private:
    std::string buffer_;
};

// Logical workflow: named processing functions placed at the edge or the
// cloud, connected by directed dependencies.
enum class Placement { Edge, Cloud };

struct WorkflowGraph {
    struct Node {
        std::string name;
        Placement placement = Placement::Edge;
    };
    std::vector<Node> nodes;
    std::vector<std::pair<std::string, std::string>> edges; // from -> to
    std::map<std::string, double> qos_latency_budget_s;
};

// Violations are data, not failures: an empty list means the graph is valid.
// Checks acyclicity and that no cloud node is reachable without passing an
// edge node first.
std::vector<std::string> validate_workflow(const WorkflowGraph& g);

// Loads the [workflow] section: node.<name> = edge|cloud,
// edge.<n> = <from>-><to>, qos.<name> = <seconds>. Missing section yields
// the canonical enhance(edge) -> generate(cloud) chain.
WorkflowGraph workflow_from_config(const Config& cfg);

} // namespace synergy::proto
