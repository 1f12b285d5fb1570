#pragma once

#include "synergy/config.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace synergy::netmgmt {

// ---------------------------------------------------------------- popularity

struct ViewingRecord {
    std::int64_t timestamp = 0; // unix seconds
    std::string title;
};

// Binary per-title presence labels over fixed-length, half-open intervals
// anchored at the window start.
struct IntervalDataset {
    std::int64_t window_start = 0;
    std::int64_t interval_len_s = 21600;
    std::size_t first_interval = 0; // global index of row 0 (nonzero for test splits)
    std::vector<std::string> titles; // top-K by frequency, ties lexicographic
    std::vector<std::vector<std::uint8_t>> labels; // [interval][title] in {0,1}

    std::size_t n_intervals() const { return labels.size(); }
};

struct Window {
    std::int64_t start = 0;
    std::int64_t end = 0; // exclusive
};

// Window covering the last `days` ending just after the newest record.
Window last_days_window(const std::vector<ViewingRecord>& records, double days);

// label[i][m] = 1 iff title m appears in interval i. Intervals cover the
// window without gaps; records outside the window are ignored. Fails when
// the window holds fewer than top_k distinct titles.
IntervalDataset bucketize(const std::vector<ViewingRecord>& records,
                          std::int64_t interval_len_s, std::size_t top_k, Window window);

// One line per title: "In interval {i}, movie '{title}' appear :{0|1}",
// wrapped by the <|interval|> / <|end|> prompt tokens.
std::string render_template(const IntervalDataset& ds, std::size_t interval);

struct TemplateLine {
    std::size_t interval = 0;
    std::string title;
    int label = 0;

    bool operator==(const TemplateLine&) const = default;
};

TemplateLine parse_template_line(const std::string& line, std::size_t lineno = 1);
// Parses a full block, skipping wrapper tokens.
std::vector<TemplateLine> parse_template(const std::string& text);

// Chronological split: the first floor(ratio * n) intervals train, the rest
// test. Fails when either side would be empty.
std::pair<IntervalDataset, IntervalDataset> split_train_test(const IntervalDataset& ds,
                                                             double ratio);

enum class PredictMethod { Frequency, Markov1 };

PredictMethod predict_method_from_name(const std::string& name);

// frequency: predict 1 iff the title's training appearance rate > 0.5.
// markov1: per-title first-order transitions estimated on train; each test
// interval is predicted from the true previous interval's labels, falling
// back to the frequency rule for unseen states.
std::vector<std::vector<std::uint8_t>> predict_baseline(const IntervalDataset& train,
                                                        const IntervalDataset& test,
                                                        PredictMethod method);

struct PopularityScore {
    double accuracy = 0.0;                 // mean over (interval, title) cells
    std::vector<double> per_title_accuracy;
};

PopularityScore score(const std::vector<std::vector<std::uint8_t>>& pred,
                      const std::vector<std::vector<std::uint8_t>>& truth);

// CSV ingestion; column names configurable, header required.
std::vector<ViewingRecord> load_viewing_csv(const std::string& path,
                                            const std::string& timestamp_column = "timestamp",
                                            const std::string& title_column = "title");

std::vector<ViewingRecord> generate_viewing_records(std::size_t n_records, std::uint64_t seed,
                                                    std::size_t n_titles = 24,
                                                    double span_days = 183.0);
void write_viewing_csv(const std::vector<ViewingRecord>& records, const std::string& path);

// ------------------------------------------------------------------- intent

enum class Slot { Bandwidth, Src, Dst, Protection, Other };

const char* slot_name(Slot s);
std::optional<Slot> slot_from_name(const std::string& name);

struct SlotValue {
    Slot slot = Slot::Other;
    std::string value;

    auto operator<=>(const SlotValue&) const = default;
};

using KeywordSet = std::set<SlotValue>;

struct IntentSample {
    std::string utterance;
    KeywordSet keywords;
};

// Rule-based extractor: bandwidth expressions (number + bps/Kbps/Mbps/Gbps),
// "Access N" / "Cloud N" endpoints with from/to cues, protection phrases.
KeywordSet extract_intent_rules(const std::string& utterance);

struct IntentScore {
    double exact_match_rate = 0.0;
    double slot_f1 = 0.0; // micro-averaged over (slot, value) pairs
    std::size_t n_samples = 0;
};

IntentScore score_intents(const std::vector<KeywordSet>& predicted,
                          const std::vector<KeywordSet>& gold);

// Line format: "<utterance>\t<slot>:<value>[\t<slot>:<value>...]".
std::vector<IntentSample> load_intent_dataset(const std::string& path);
void write_intent_dataset(const std::vector<IntentSample>& samples, const std::string& path);

// Seeded utterance generator over slot-value grammars.
std::vector<IntentSample> generate_intent_dataset(std::size_t n_samples, std::uint64_t seed);

} // namespace synergy::netmgmt
