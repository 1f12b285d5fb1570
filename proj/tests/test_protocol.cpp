#include "synergy/error.hpp"
#include "synergy/protocol.hpp"
#include "synergy/rng.hpp"

#include <doctest.h>

#include <string>
#include <vector>

using namespace synergy;
using namespace synergy::proto;

namespace {

// Random UTF-8-ish text: ASCII, whitespace, punctuation and some multi-byte
// codepoints, including characters the wire escaping must handle.
std::string random_text(SeededRng& rng, std::size_t max_len, bool allow_empty = false) {
    const std::size_t len = allow_empty ? rng.bounded(max_len) : 1 + rng.bounded(max_len);
    std::string out;
    for (std::size_t i = 0; i < len; ++i) {
        switch (rng.bounded(8)) {
            case 0: out += ' '; break;
            case 1: out += '\n'; break;
            case 2: out += '\\'; break;
            case 3: out += "\xc3\xa9"; break;     // e with acute
            case 4: out += "\xe6\x97\xa5"; break; // CJK
            case 5: out += static_cast<char>('!' + rng.bounded(14)); break;
            default: out += static_cast<char>('a' + rng.bounded(26));
        }
    }
    return out;
}

PromptEnvelope random_envelope(SeededRng& rng) {
    const Stage stage = static_cast<Stage>(rng.bounded(3));
    PromptEnvelope env = make_envelope(
        "req-" + std::to_string(rng.next() % 100000), stage,
        random_text(rng, 64, stage == Stage::Response),
        "bs-" + std::to_string(rng.bounded(10)),
        static_cast<std::int64_t>(rng.bounded(1'700'000'000'000ull)));
    env.terminated_at_edge = rng.bounded(2) == 1;
    return env;
}

} // namespace

TEST_CASE("encode/decode round-trips a simple envelope") {
    const PromptEnvelope env = make_envelope("r-1", Stage::Concise, "hi", "bs-0001", 1234);
    const std::string wire = encode(env);
    const DecodeResult res = decode(wire);
    REQUIRE(res.status == DecodeStatus::Ok);
    CHECK(res.envelope == env);
    CHECK(res.consumed == wire.size());
}

TEST_CASE("short input asks for more bytes") {
    CHECK(decode("").status == DecodeStatus::NeedMoreBytes);
    CHECK(decode("ab").status == DecodeStatus::NeedMoreBytes);
    CHECK(decode(std::string("\x00\x00\x00\x05", 4)).status == DecodeStatus::NeedMoreBytes);
}

TEST_CASE("oversize frames are rejected") {
    std::string huge;
    huge += static_cast<char>(0x7f);
    huge += static_cast<char>(0xff);
    huge += static_cast<char>(0xff);
    huge += static_cast<char>(0xff);
    const DecodeResult res = decode(huge);
    CHECK(res.status == DecodeStatus::Malformed);
    CHECK(res.error.find("1 MiB") != std::string::npos);
}

TEST_CASE("malformed bodies report a byte offset") {
    const PromptEnvelope env = make_envelope("r-1", Stage::Concise, "hi", "bs", 0);
    std::string wire = encode(env);
    // Corrupt the stage line ("stage=concise" begins after "request_id=r-1\n").
    const std::size_t at = wire.find("stage=concise");
    wire.replace(at, 13, "stage=unknown");
    const DecodeResult res = decode(wire);
    CHECK(res.status == DecodeStatus::Malformed);
    CHECK(res.error_offset == at);
    CHECK(res.error.find("byte offset") != std::string::npos);
}

TEST_CASE("randomized envelope round-trips") {
    SeededRng rng(2024);
    for (int i = 0; i < 10000; ++i) {
        const PromptEnvelope env = random_envelope(rng);
        const DecodeResult res = decode(encode(env));
        REQUIRE(res.status == DecodeStatus::Ok);
        REQUIRE(res.envelope == env);
    }
}

TEST_CASE("concatenated frames stream-decode to the original sequence") {
    SeededRng rng(99);
    std::vector<PromptEnvelope> sent;
    std::string wire;
    for (int i = 0; i < 200; ++i) {
        sent.push_back(random_envelope(rng));
        wire += encode(sent.back());
    }
    FrameReader reader;
    std::vector<PromptEnvelope> got;
    // Feed in ragged chunks to exercise partial-frame buffering.
    std::size_t pos = 0;
    while (pos < wire.size()) {
        const std::size_t chunk = std::min<std::size_t>(1 + rng.bounded(37), wire.size() - pos);
        for (auto& env : reader.feed(wire.data() + pos, chunk)) got.push_back(std::move(env));
        pos += chunk;
    }
    CHECK(reader.buffered() == 0);
    REQUIRE(got.size() == sent.size());
    for (std::size_t i = 0; i < sent.size(); ++i) CHECK(got[i] == sent[i]);
}

TEST_CASE("normalization applies the documented rules") {
    CHECK(normalize_for_dedup("  Best  LIBRARIES? ") == "best libraries");
    CHECK(normalize_for_dedup("") == "");
    CHECK(normalize_for_dedup("a ?!,") == "a");
    CHECK(normalize_for_dedup("Tabs\tand\nnewlines") == "tabs and newlines");
    CHECK(normalize_for_dedup("...") == "");
}

TEST_CASE("normalization is idempotent on random strings") {
    SeededRng rng(31337);
    for (int i = 0; i < 10000; ++i) {
        const std::string text = random_text(rng, 48, true);
        const std::string once = normalize_for_dedup(text);
        CHECK(normalize_for_dedup(once) == once);
    }
}

TEST_CASE("dedup keys agree exactly with normalized-text equality on a corpus") {
    SeededRng rng(5);
    std::vector<std::string> corpus;
    for (int i = 0; i < 500; ++i) corpus.push_back(random_text(rng, 24));
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        for (std::size_t j = i; j < corpus.size(); ++j) {
            const bool same_norm =
                normalize_for_dedup(corpus[i]) == normalize_for_dedup(corpus[j]);
            const bool same_key = dedup_key_for(corpus[i]) == dedup_key_for(corpus[j]);
            CHECK(same_norm == same_key);
        }
    }
}

TEST_CASE("stage machine forbids producing responses from responses") {
    CHECK(stage_transition_ok(Stage::Concise, Stage::Comprehensive));
    CHECK(stage_transition_ok(Stage::Concise, Stage::Response));
    CHECK(stage_transition_ok(Stage::Comprehensive, Stage::Response));
    CHECK_FALSE(stage_transition_ok(Stage::Response, Stage::Response));
    CHECK_FALSE(stage_transition_ok(Stage::Comprehensive, Stage::Concise));
    CHECK_FALSE(stage_transition_ok(Stage::Response, Stage::Concise));
}

TEST_CASE("encode rejects invalid envelopes") {
    PromptEnvelope env = make_envelope("r", Stage::Concise, "x", "bs", 0);
    env.text.clear();
    CHECK_THROWS_AS(encode(env), Error);
}

TEST_CASE("workflow validation accepts the canonical two-stage flow") {
    WorkflowGraph g;
    g.nodes = {{"enhance", Placement::Edge}, {"generate", Placement::Cloud}};
    g.edges = {{"enhance", "generate"}};
    CHECK(validate_workflow(g).empty());
}

TEST_CASE("workflow validation flags cycles") {
    WorkflowGraph g;
    g.nodes = {{"a", Placement::Edge}, {"b", Placement::Edge}};
    g.edges = {{"a", "b"}, {"b", "a"}};
    const auto violations = validate_workflow(g);
    REQUIRE(violations.size() >= 1);
    CHECK(violations.front().find("cycle") != std::string::npos);
}

TEST_CASE("workflow validation flags cloud work before edge work") {
    WorkflowGraph g;
    g.nodes = {{"generate", Placement::Cloud}, {"enhance", Placement::Edge}};
    g.edges = {{"generate", "enhance"}};
    const auto violations = validate_workflow(g);
    REQUIRE(violations.size() == 1);
    CHECK(violations.front().find("cloud precedes edge") != std::string::npos);
    CHECK(violations.front().find("generate") != std::string::npos);

    // A cloud node fed only through an edge node is fine even in a DAG.
    WorkflowGraph ok;
    ok.nodes = {{"filter", Placement::Edge},
                {"enhance", Placement::Edge},
                {"generate", Placement::Cloud}};
    ok.edges = {{"filter", "enhance"}, {"enhance", "generate"}, {"filter", "generate"}};
    CHECK(validate_workflow(ok).empty());
}

TEST_CASE("workflow loader falls back to the canonical chain") {
    const Config cfg = Config::from_string("");
    const WorkflowGraph g = workflow_from_config(cfg);
    REQUIRE(g.nodes.size() == 2);
    CHECK(validate_workflow(g).empty());

    const Config cfg2 = Config::from_string(
        "[workflow]\nnode.a = edge\nnode.b = cloud\nedge.0 = a->b\nqos.a = 0.5\n");
    const WorkflowGraph g2 = workflow_from_config(cfg2);
    CHECK(g2.qos_latency_budget_s.at("a") == 0.5);
    CHECK(validate_workflow(g2).empty());
}

// Golden frames: the byte-exact wire encoding is frozen in PROTOCOL.md.
TEST_CASE("golden frames are byte-stable") {
    const auto hex = [](const std::string& s) {
        static const char* digits = "0123456789abcdef";
        std::string out;
        for (unsigned char c : s) {
            out += digits[c >> 4];
            out += digits[c & 0xf];
        }
        return out;
    };

    const PromptEnvelope g1 = make_envelope("r-1", Stage::Concise, "best libraries", "bs-0001",
                                            1700000000000);
    CHECK(hex(encode(g1)) ==
          "00000094726571756573745f69643d722d310a73746167653d636f6e636973650a746578743d62"
          "657374206c69627261726965730a6f726967696e5f62735f69643d62732d303030310a7465726d"
          "696e617465645f61745f656467653d300a637265617465645f756e69785f6d733d313730303030"
          "303030303030300a64656475705f6b65793d663639626263346437653761613738340a");

    const PromptEnvelope g2 = make_envelope(
        "r-2", Stage::Comprehensive,
        "best libraries The city library holds rare collections. I would like to know about "
        "best libraries.",
        "bs-0001", 1700000000000);
    CHECK(hex(encode(g2)) ==
          "000000ee726571756573745f69643d722d320a73746167653d636f6d70726568656e736976650a74"
          "6578743d62657374206c6962726172696573205468652063697479206c69627261727920686f6c64"
          "73207261726520636f6c6c656374696f6e732e204920776f756c64206c696b6520746f206b6e6f77"
          "2061626f75742062657374206c69627261726965732e0a6f726967696e5f62735f69643d62732d30"
          "3030310a7465726d696e617465645f61745f656467653d300a637265617465645f756e69785f6d73"
          "3d313730303030303030303030300a64656475705f6b65793d393631663764663264346462313537"
          "370a");

    PromptEnvelope g3 = make_envelope("r-3", Stage::Response, "line one\nline two", "bs-0002",
                                      1700000000000);
    g3.terminated_at_edge = true;
    const std::string wire = encode(g3);
    CHECK(hex(wire) ==
          "00000099726571756573745f69643d722d330a73746167653d726573706f6e73650a746578743d6c"
          "696e65206f6e655c6e6c696e652074776f0a6f726967696e5f62735f69643d62732d303030320a74"
          "65726d696e617465645f61745f656467653d310a637265617465645f756e69785f6d733d31373030"
          "3030303030303030300a64656475705f6b65793d306562306333613065323730626263310a");
    const DecodeResult res = decode(wire);
    REQUIRE(res.status == DecodeStatus::Ok);
    CHECK(res.envelope == g3);
    CHECK(wire.find("line one\\nline two") != std::string::npos);
}
