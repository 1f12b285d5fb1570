#include "synergy/netmgmt.hpp"

#include "synergy/error.hpp"
#include "synergy/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

namespace synergy::netmgmt {

namespace {

constexpr const char* kBlockOpen = "<|interval|>";
constexpr const char* kBlockClose = "<|end|>";

[[noreturn]] void data_error(const std::string& what) {
    throw_error(ErrorCode::Data, what);
}

} // namespace

Window last_days_window(const std::vector<ViewingRecord>& records, double days) {
    if (records.empty()) data_error("no viewing records");
    std::int64_t max_ts = records.front().timestamp;
    for (const auto& r : records) max_ts = std::max(max_ts, r.timestamp);
    const auto span = static_cast<std::int64_t>(days * 86400.0);
    return Window{max_ts + 1 - span, max_ts + 1};
}

IntervalDataset bucketize(const std::vector<ViewingRecord>& records,
                          std::int64_t interval_len_s, std::size_t top_k, Window window) {
    if (records.empty()) data_error("bucketize: no viewing records");
    if (interval_len_s <= 0) data_error("bucketize: interval length must be > 0");
    if (top_k == 0) data_error("bucketize: top_k must be > 0");
    if (window.end <= window.start) data_error("bucketize: empty window");

    std::map<std::string, std::size_t> counts;
    for (const auto& r : records) {
        if (r.title.empty()) data_error("bucketize: empty title");
        if (r.timestamp >= window.start && r.timestamp < window.end) ++counts[r.title];
    }
    if (counts.size() < top_k) {
        data_error("bucketize: need " + std::to_string(top_k) + " distinct titles, found " +
                   std::to_string(counts.size()) + " in window");
    }

    // Most frequent first; ties break lexicographically by title.
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    ranked.resize(top_k);

    IntervalDataset ds;
    ds.window_start = window.start;
    ds.interval_len_s = interval_len_s;
    const std::int64_t span = window.end - window.start;
    const std::size_t n_intervals =
        static_cast<std::size_t>((span + interval_len_s - 1) / interval_len_s);
    std::map<std::string, std::size_t> title_index;
    for (std::size_t m = 0; m < ranked.size(); ++m) {
        ds.titles.push_back(ranked[m].first);
        title_index[ranked[m].first] = m;
    }
    ds.labels.assign(n_intervals, std::vector<std::uint8_t>(top_k, 0));
    for (const auto& r : records) {
        if (r.timestamp < window.start || r.timestamp >= window.end) continue;
        const auto it = title_index.find(r.title);
        if (it == title_index.end()) continue;
        const auto interval = static_cast<std::size_t>((r.timestamp - window.start) / interval_len_s);
        ds.labels[interval][it->second] = 1;
    }
    return ds;
}

std::string render_template(const IntervalDataset& ds, std::size_t interval) {
    if (interval >= ds.n_intervals()) {
        throw_error(ErrorCode::InvalidArgument,
                    "render_template: interval " + std::to_string(interval) + " out of range");
    }
    std::ostringstream os;
    os << kBlockOpen << '\n';
    const std::size_t global = ds.first_interval + interval;
    for (std::size_t m = 0; m < ds.titles.size(); ++m) {
        os << "In interval " << global << ", movie '" << ds.titles[m]
           << "' appear :" << static_cast<int>(ds.labels[interval][m]) << '\n';
    }
    os << kBlockClose << '\n';
    return os.str();
}

TemplateLine parse_template_line(const std::string& line, std::size_t lineno) {
    const auto fail = [lineno](const std::string& what) -> TemplateLine {
        throw_error(ErrorCode::Parse,
                    "line " + std::to_string(lineno) + ": " + what +
                        " (expected \"In interval {i}, movie '{title}' appear :{0|1}\")");
    };
    const std::string prefix = "In interval ";
    if (line.rfind(prefix, 0) != 0) return fail("missing 'In interval' prefix");
    std::size_t pos = prefix.size();
    std::size_t digits = pos;
    while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
    if (digits == pos) return fail("missing interval number");
    TemplateLine out;
    out.interval = static_cast<std::size_t>(std::stoull(line.substr(pos, digits - pos)));
    const std::string mid = ", movie '";
    if (line.compare(digits, mid.size(), mid) != 0) return fail("missing movie quote");
    const std::size_t title_start = digits + mid.size();
    const std::string tail = "' appear :";
    const std::size_t tail_at = line.rfind(tail);
    if (tail_at == std::string::npos || tail_at < title_start) return fail("missing appear suffix");
    out.title = line.substr(title_start, tail_at - title_start);
    const std::string label = line.substr(tail_at + tail.size());
    if (label == "0") {
        out.label = 0;
    } else if (label == "1") {
        out.label = 1;
    } else {
        return fail("label must be 0 or 1");
    }
    return out;
}

std::vector<TemplateLine> parse_template(const std::string& text) {
    std::vector<TemplateLine> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == kBlockOpen || line == kBlockClose) continue;
        out.push_back(parse_template_line(line, lineno));
    }
    return out;
}

std::pair<IntervalDataset, IntervalDataset> split_train_test(const IntervalDataset& ds,
                                                             double ratio) {
    if (ratio <= 0.0 || ratio >= 1.0) {
        throw_error(ErrorCode::InvalidArgument, "split ratio must lie in (0,1)");
    }
    const std::size_t n = ds.n_intervals();
    const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n) {
        data_error("split: " + std::to_string(n) + " intervals at ratio " + std::to_string(ratio) +
                   " leaves an empty side");
    }
    IntervalDataset train = ds;
    IntervalDataset test = ds;
    train.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.labels.assign(ds.labels.begin() + static_cast<std::ptrdiff_t>(n_train), ds.labels.end());
    test.first_interval = ds.first_interval + n_train;
    return {std::move(train), std::move(test)};
}

PredictMethod predict_method_from_name(const std::string& name) {
    if (name == "frequency") return PredictMethod::Frequency;
    if (name == "markov1") return PredictMethod::Markov1;
    throw_error(ErrorCode::InvalidArgument, "unknown prediction method '" + name + "'");
}

std::vector<std::vector<std::uint8_t>> predict_baseline(const IntervalDataset& train,
                                                        const IntervalDataset& test,
                                                        PredictMethod method) {
    if (train.labels.empty()) data_error("predict: empty training set");
    const std::size_t k = train.titles.size();
    const std::size_t n_test = test.labels.size();
    std::vector<std::vector<std::uint8_t>> pred(n_test, std::vector<std::uint8_t>(k, 0));

    std::vector<double> rate(k, 0.0);
    for (const auto& row : train.labels) {
        for (std::size_t m = 0; m < k; ++m) rate[m] += row[m];
    }
    for (std::size_t m = 0; m < k; ++m) rate[m] /= static_cast<double>(train.labels.size());

    if (method == PredictMethod::Frequency) {
        for (auto& row : pred) {
            for (std::size_t m = 0; m < k; ++m) row[m] = rate[m] > 0.5 ? 1 : 0;
        }
        return pred;
    }

    // markov1: per-title transition counts from consecutive training rows.
    struct Transition {
        std::size_t seen[2] = {0, 0};
        std::size_t to_one[2] = {0, 0};
    };
    std::vector<Transition> trans(k);
    for (std::size_t i = 0; i + 1 < train.labels.size(); ++i) {
        for (std::size_t m = 0; m < k; ++m) {
            const int prev = train.labels[i][m];
            ++trans[m].seen[prev];
            trans[m].to_one[prev] += train.labels[i + 1][m];
        }
    }
    // The previous interval is the true one (the last training row for the
    // first test interval), not the chained prediction.
    const std::vector<std::uint8_t>* prev_row = &train.labels.back();
    for (std::size_t i = 0; i < n_test; ++i) {
        for (std::size_t m = 0; m < k; ++m) {
            const int prev = (*prev_row)[m];
            if (trans[m].seen[prev] == 0) {
                pred[i][m] = rate[m] > 0.5 ? 1 : 0;
            } else {
                const double p_one = static_cast<double>(trans[m].to_one[prev]) /
                                     static_cast<double>(trans[m].seen[prev]);
                pred[i][m] = p_one > 0.5 ? 1 : 0;
            }
        }
        prev_row = &test.labels[i];
    }
    return pred;
}

PopularityScore score(const std::vector<std::vector<std::uint8_t>>& pred,
                      const std::vector<std::vector<std::uint8_t>>& truth) {
    if (pred.size() != truth.size()) {
        throw_error(ErrorCode::InvalidArgument, "score: prediction/truth row mismatch");
    }
    PopularityScore s;
    if (pred.empty()) return s;
    const std::size_t k = truth.front().size();
    s.per_title_accuracy.assign(k, 0.0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].size() != k || truth[i].size() != k) {
            throw_error(ErrorCode::InvalidArgument, "score: ragged label matrix");
        }
        for (std::size_t m = 0; m < k; ++m) {
            const bool ok = pred[i][m] == truth[i][m];
            correct += ok;
            s.per_title_accuracy[m] += ok;
        }
    }
    for (auto& v : s.per_title_accuracy) v /= static_cast<double>(pred.size());
    s.accuracy = static_cast<double>(correct) / static_cast<double>(pred.size() * k);
    return s;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

} // namespace

std::vector<ViewingRecord> load_viewing_csv(const std::string& path,
                                            const std::string& timestamp_column,
                                            const std::string& title_column) {
    std::ifstream in(path, std::ios::binary);
    if (!in) data_error("cannot open viewing csv '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) data_error(path + ": empty file");
    const auto header = split_csv_line(line);
    std::ptrdiff_t ts_col = -1, title_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == timestamp_column) ts_col = static_cast<std::ptrdiff_t>(i);
        if (header[i] == title_column) title_col = static_cast<std::ptrdiff_t>(i);
    }
    if (ts_col < 0 || title_col < 0) {
        data_error(path + ": header must contain '" + timestamp_column + "' and '" +
                   title_column + "' columns");
    }
    std::vector<ViewingRecord> records;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() <= static_cast<std::size_t>(std::max(ts_col, title_col))) {
            data_error(path + ":" + std::to_string(lineno) + ": short row");
        }
        ViewingRecord r;
        try {
            r.timestamp = std::stoll(fields[static_cast<std::size_t>(ts_col)]);
        } catch (const std::exception&) {
            data_error(path + ":" + std::to_string(lineno) + ": bad timestamp '" +
                       fields[static_cast<std::size_t>(ts_col)] + "'");
        }
        r.title = fields[static_cast<std::size_t>(title_col)];
        if (r.title.empty()) data_error(path + ":" + std::to_string(lineno) + ": empty title");
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<ViewingRecord> generate_viewing_records(std::size_t n_records, std::uint64_t seed,
                                                    std::size_t n_titles, double span_days) {
    SeededRng rng(seed);
    const std::int64_t start = 1700000000; // fixed synthetic epoch
    const auto span_s = static_cast<std::int64_t>(span_days * 86400.0);
    std::vector<ViewingRecord> records;
    records.reserve(n_records);
    for (std::size_t i = 0; i < n_records; ++i) {
        // Zipf-ish popularity plus a diurnal preference so interval labels
        // carry temporal signal for the baselines.
        std::size_t title = 0;
        double u = rng.uniform01();
        double mass = 0.0;
        double norm = 0.0;
        for (std::size_t t = 0; t < n_titles; ++t) norm += 1.0 / static_cast<double>(t + 1);
        for (std::size_t t = 0; t < n_titles; ++t) {
            mass += 1.0 / (static_cast<double>(t + 1) * norm);
            if (u <= mass) {
                title = t;
                break;
            }
        }
        std::int64_t ts = start + static_cast<std::int64_t>(rng.bounded(
                                      static_cast<std::uint64_t>(span_s)));
        if (title % 3 == 0) {
            // Evening-heavy titles: push into the 18:00-24:00 slot.
            ts = ts - (ts % 86400) + 64800 +
                 static_cast<std::int64_t>(rng.bounded(21600));
        }
        char name[32];
        std::snprintf(name, sizeof(name), "movie-%02zu", title + 1);
        records.push_back(ViewingRecord{ts, name});
    }
    return records;
}

void write_viewing_csv(const std::vector<ViewingRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) data_error("cannot write viewing csv '" + path + "'");
    out << "timestamp,title\n";
    for (const auto& r : records) out << r.timestamp << ',' << r.title << '\n';
}

// ------------------------------------------------------------------- intent

const char* slot_name(Slot s) {
    switch (s) {
        case Slot::Bandwidth: return "bandwidth";
        case Slot::Src: return "src";
        case Slot::Dst: return "dst";
        case Slot::Protection: return "protection";
        case Slot::Other: return "other";
    }
    return "other";
}

std::optional<Slot> slot_from_name(const std::string& name) {
    if (name == "bandwidth") return Slot::Bandwidth;
    if (name == "src") return Slot::Src;
    if (name == "dst") return Slot::Dst;
    if (name == "protection") return Slot::Protection;
    if (name == "other") return Slot::Other;
    return std::nullopt;
}

namespace {

std::string canonical_unit(std::string unit) {
    for (auto& c : unit) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (unit == "bps") return "bps";
    if (unit == "kbps") return "Kbps";
    if (unit == "mbps") return "Mbps";
    return "Gbps";
}

std::string capitalize(std::string word) {
    for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!word.empty()) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
    return word;
}

} // namespace

KeywordSet extract_intent_rules(const std::string& utterance) {
    KeywordSet out;
    static const std::regex bandwidth_re(R"((\d+(?:\.\d+)?)\s*([KkMmGg]?bps))",
                                         std::regex::icase);
    static const std::regex endpoint_re(R"((access|cloud)\s+(\d+))", std::regex::icase);
    static const std::regex protect_re(R"(protect)", std::regex::icase);

    std::smatch m;
    if (std::regex_search(utterance, m, bandwidth_re)) {
        out.insert(SlotValue{Slot::Bandwidth, m[1].str() + " " + canonical_unit(m[2].str())});
    }

    // Endpoints in mention order; an immediately preceding "from"/"to"
    // pins the role, otherwise first mention is src, second dst.
    struct Mention {
        std::string value;
        std::string cue; // "from", "to", or empty
    };
    std::vector<Mention> mentions;
    auto begin = std::sregex_iterator(utterance.begin(), utterance.end(), endpoint_re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        Mention mention;
        mention.value = capitalize((*it)[1].str()) + " " + (*it)[2].str();
        const std::string before =
            utterance.substr(0, static_cast<std::size_t>(it->position(0)));
        static const std::regex cue_re(R"((from|to|into|toward|towards)\s*$)", std::regex::icase);
        std::smatch cue;
        if (std::regex_search(before, cue, cue_re)) {
            std::string c = cue[1].str();
            for (auto& ch : c) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            mention.cue = c == "from" ? "from" : "to";
        }
        mentions.push_back(std::move(mention));
    }
    std::string src, dst;
    for (const auto& mention : mentions) {
        if (mention.cue == "from" && src.empty()) {
            src = mention.value;
        } else if (mention.cue == "to" && dst.empty()) {
            dst = mention.value;
        }
    }
    for (const auto& mention : mentions) {
        if (!mention.cue.empty()) continue;
        if (src.empty() && mention.value != dst) {
            src = mention.value;
        } else if (dst.empty() && mention.value != src) {
            dst = mention.value;
        }
    }
    if (!src.empty()) out.insert(SlotValue{Slot::Src, src});
    if (!dst.empty()) out.insert(SlotValue{Slot::Dst, dst});

    if (std::regex_search(utterance, m, protect_re)) {
        out.insert(SlotValue{Slot::Protection, "yes"});
    }
    return out;
}

IntentScore score_intents(const std::vector<KeywordSet>& predicted,
                          const std::vector<KeywordSet>& gold) {
    if (predicted.size() != gold.size()) {
        throw_error(ErrorCode::InvalidArgument, "score_intents: size mismatch");
    }
    IntentScore s;
    s.n_samples = gold.size();
    if (gold.empty()) return s;
    std::size_t exact = 0;
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (predicted[i] == gold[i]) ++exact;
        for (const auto& kv : predicted[i]) {
            if (gold[i].contains(kv)) {
                ++tp;
            } else {
                ++fp;
            }
        }
        for (const auto& kv : gold[i]) {
            if (!predicted[i].contains(kv)) ++fn;
        }
    }
    s.exact_match_rate = static_cast<double>(exact) / static_cast<double>(gold.size());
    const double denom = static_cast<double>(2 * tp + fp + fn);
    s.slot_f1 = denom == 0.0 ? 1.0 : 2.0 * static_cast<double>(tp) / denom;
    return s;
}

std::vector<IntentSample> load_intent_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) data_error("cannot open intent dataset '" + path + "'");
    std::vector<IntentSample> samples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> parts;
        std::size_t start = 0;
        for (std::size_t tab = line.find('\t'); true; tab = line.find('\t', start)) {
            parts.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (parts.size() < 2) {
            data_error(path + ":" + std::to_string(lineno) +
                       ": expected utterance TAB slot:value pairs");
        }
        IntentSample sample;
        sample.utterance = parts[0];
        for (std::size_t i = 1; i < parts.size(); ++i) {
            const std::size_t colon = parts[i].find(':');
            if (colon == std::string::npos) {
                data_error(path + ":" + std::to_string(lineno) + ": bad pair '" + parts[i] + "'");
            }
            const auto slot = slot_from_name(parts[i].substr(0, colon));
            if (!slot) {
                data_error(path + ":" + std::to_string(lineno) + ": unknown slot '" +
                           parts[i].substr(0, colon) + "'");
            }
            sample.keywords.insert(SlotValue{*slot, parts[i].substr(colon + 1)});
        }
        if (sample.keywords.empty()) {
            data_error(path + ":" + std::to_string(lineno) + ": keywords must be nonempty");
        }
        samples.push_back(std::move(sample));
    }
    return samples;
}

void write_intent_dataset(const std::vector<IntentSample>& samples, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) data_error("cannot write intent dataset '" + path + "'");
    for (const auto& s : samples) {
        out << s.utterance;
        for (const auto& kv : s.keywords) {
            out << '\t' << slot_name(kv.slot) << ':' << kv.value;
        }
        out << '\n';
    }
}

std::vector<IntentSample> generate_intent_dataset(std::size_t n_samples, std::uint64_t seed) {
    SeededRng rng(seed);
    const char* const templates[] = {
        "Establish a %BW% connection from %SRC% to %DST% with traffic protection",
        "Please connect %SRC% and %DST% at %BW%, protected",
        "Set up a %BW% link from %SRC% to %DST%",
        "I need a protected path from %SRC% to %DST% at %BW%",
        "Provision %BW% between %SRC% and %DST%",
        "Create a connection from %SRC% to %DST% with protection",
        "Give me %BW% from %SRC% to %DST% as soon as possible",
        "Link %SRC% with %DST% at %BW% and enable protection",
    };
    const char* const units[] = {"bps", "Kbps", "Mbps", "Gbps"};
    std::vector<IntentSample> samples;
    samples.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const std::string tmpl = templates[rng.bounded(8)];
        const std::uint64_t value = 1 + rng.bounded(400);
        const std::string unit = units[rng.bounded(4)];
        const std::string bw = std::to_string(value) + " " + unit;
        const std::string src = "Access " + std::to_string(1 + rng.bounded(9));
        const std::string dst = "Cloud " + std::to_string(1 + rng.bounded(9));

        std::string text = tmpl;
        KeywordSet keywords;
        const auto substitute = [&text](const std::string& tag, const std::string& value_) {
            const std::size_t at = text.find(tag);
            if (at != std::string::npos) text.replace(at, tag.size(), value_);
        };
        if (text.find("%BW%") != std::string::npos) {
            keywords.insert(SlotValue{Slot::Bandwidth, bw});
            substitute("%BW%", bw);
        }
        substitute("%SRC%", src);
        substitute("%DST%", dst);
        keywords.insert(SlotValue{Slot::Src, src});
        keywords.insert(SlotValue{Slot::Dst, dst});
        if (text.find("protect") != std::string::npos ||
            text.find("Protect") != std::string::npos) {
            keywords.insert(SlotValue{Slot::Protection, "yes"});
        }
        samples.push_back(IntentSample{std::move(text), std::move(keywords)});
    }
    return samples;
}

} // namespace synergy::netmgmt
