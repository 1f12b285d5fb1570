#include "synergy/edge_node.hpp"

#include "synergy/error.hpp"
#include "synergy/rng.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace synergy::edge {

namespace {

struct RegionSeed {
    const char* bs_id;
    const char* region;
    std::vector<const char*> facts;
    std::vector<const char*> topics; // concise-prompt subjects covered by the facts
};

const std::vector<RegionSeed>& region_seeds() {
    static const std::vector<RegionSeed> seeds = {
        {"bs-0001",
         "riverton",
         {"The city library holds rare collections.",
          "Riverside park hosts open-air concerts in summer.",
          "Night buses run every twenty minutes downtown.",
          "The art museum shows modern sculpture.",
          "Old town cafes serve local pastries.",
          "The grand hotel sits by the central station."},
         {"libraries", "parks", "buses", "museums", "cafes", "hotels"}},
        {"bs-0002",
         "harborview",
         {"The fish market opens before sunrise.",
          "Harbor tours leave from the north pier.",
          "Seafood restaurants line the waterfront.",
          "The maritime museum displays old charts.",
          "Beaches stay guarded until early evening.",
          "Ferries cross the bay twice per hour."},
         {"markets", "tours", "restaurants", "museums", "beaches", "ferries"}},
        {"bs-0003",
         "hillcrest",
         {"Mountain trails start behind the old mill.",
          "The observatory opens on clear nights.",
          "Local farms sell cheese at the square.",
          "The valley hotel offers spa weekends.",
          "Cable cars climb to the summit hourly.",
          "The village library lends hiking maps."},
         {"trails", "farms", "hotels", "libraries", "cars", "nights"}},
        {"bs-0004",
         "midtown",
         {"The concert hall stages jazz on fridays.",
          "Food markets fill the main square on weekends.",
          "The tech campus runs public lab tours.",
          "Trains to the airport leave every ten minutes.",
          "The history museum waives fees on mondays.",
          "Rooftop bars open late in summer."},
         {"concerts", "markets", "tours", "trains", "museums", "bars"}},
        {"bs-0005",
         "lakeside",
         {"Rowing boats rent by the hour at the dock.",
          "The lakeside parks allow picnics all year.",
          "Cycling paths circle the whole lake.",
          "The spa hotel faces the west shore.",
          "Winter markets sell crafts by the pier.",
          "The aquarium feeds otters at noon."},
         {"boats", "parks", "paths", "hotels", "markets", "otters"}},
        {"bs-0006",
         "oldgate",
         {"The castle keeps guided tours till dusk.",
          "Antique shops cluster along king street.",
          "The cathedral bells ring at midday.",
          "Craft breweries open their cellars on saturdays.",
          "The stone bridge lights up after dark.",
          "City walls offer a full circuit walk."},
         {"tours", "shops", "bells", "breweries", "walls", "walks"}},
    };
    return seeds;
}

const char* const kAdjectives[] = {"best", "cheap", "good", "top",
                                   "quiet", "famous", "local", "popular"};

} // namespace

const std::vector<LocationProfile>& builtin_regions() {
    static const std::vector<LocationProfile> profiles = [] {
        std::vector<LocationProfile> out;
        for (const auto& seed : region_seeds()) {
            LocationProfile p;
            p.bs_id = seed.bs_id;
            p.region_name = seed.region;
            for (const char* f : seed.facts) p.facts.emplace_back(f);
            p.max_facts_per_prompt = 2;
            out.push_back(std::move(p));
        }
        return out;
    }();
    return profiles;
}

LocationProfile profile_from_config(const Config& cfg) {
    LocationProfile p;
    p.bs_id = cfg.get_string("profile.bs_id");
    p.region_name = cfg.get_string("profile.region_name");
    p.max_facts_per_prompt =
        static_cast<std::uint32_t>(cfg.get_uint_or("profile.max_facts_per_prompt", 2));
    for (const auto& key : cfg.keys_with_prefix("facts.")) {
        p.facts.push_back(cfg.get_string(key));
    }
    if (p.facts.empty()) {
        throw_error(ErrorCode::Config, "profile '" + p.bs_id + "': facts must be nonempty");
    }
    return p;
}

ProfileStore ProfileStore::from_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw_error(ErrorCode::Config, "profile directory '" + dir + "' does not exist");
    }
    ProfileStore store;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".conf") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        store.add(profile_from_config(Config::from_file(f.string())));
    }
    return store;
}

void ProfileStore::add(LocationProfile profile) {
    const std::string id = profile.bs_id;
    profiles_[id] = std::move(profile);
}

const LocationProfile* ProfileStore::find(const std::string& bs_id) const {
    const auto it = profiles_.find(bs_id);
    return it == profiles_.end() ? nullptr : &it->second;
}

DedupCache::DedupCache(double ttl_s, std::size_t capacity, Clock clock)
    : ttl_s_(ttl_s), capacity_(capacity), clock_(std::move(clock)) {
    if (capacity_ == 0) throw_error(ErrorCode::InvalidArgument, "dedup cache: capacity must be > 0");
}

void DedupCache::expire_and_evict() {
    const double now = clock_();
    // Expire completed entries past their ttl. Pending entries stay: their
    // waiters are answered through the original's response.
    for (auto it = insertion_order_.begin(); it != insertion_order_.end();) {
        auto e = entries_.find(*it);
        if (e != entries_.end() && e->second.response_text.has_value() &&
            now - e->second.created_at > ttl_s_) {
            entries_.erase(e);
            it = insertion_order_.erase(it);
        } else {
            ++it;
        }
    }
}

DedupDecision DedupCache::lookup(const proto::PromptEnvelope& env) {
    if (env.stage != proto::Stage::Concise) {
        throw_error(ErrorCode::InvalidArgument, "dedup lookup requires a concise-stage envelope");
    }
    expire_and_evict();
    auto it = entries_.find(env.dedup_key);
    if (it != entries_.end()) {
        if (it->second.response_text) {
            return CachedResponse{*it->second.response_text};
        }
        it->second.waiters.push_back(env.request_id);
        return DuplicateOf{it->second.first_request_id};
    }

    if (entries_.size() >= capacity_) {
        // Oldest completed entry goes first; with only pending entries the
        // request proceeds unregistered rather than growing the cache.
        bool evicted = false;
        for (auto oit = insertion_order_.begin(); oit != insertion_order_.end(); ++oit) {
            auto e = entries_.find(*oit);
            if (e != entries_.end() && e->second.response_text.has_value()) {
                entries_.erase(e);
                insertion_order_.erase(oit);
                evicted = true;
                break;
            }
        }
        if (!evicted) return Fresh{};
    }

    Entry entry;
    entry.first_request_id = env.request_id;
    entry.created_at = clock_();
    insertion_order_.push_back(env.dedup_key);
    entries_.emplace(env.dedup_key, std::move(entry));
    return Fresh{};
}

void DedupCache::store_response(std::uint64_t dedup_key, const std::string& response_text) {
    const auto it = entries_.find(dedup_key);
    if (it == entries_.end()) return; // entry was never registered
    it->second.response_text = response_text;
}

std::vector<std::string> DedupCache::take_waiters(std::uint64_t dedup_key) {
    const auto it = entries_.find(dedup_key);
    if (it == entries_.end()) return {};
    std::vector<std::string> out;
    out.swap(it->second.waiters);
    return out;
}

void DedupCache::drop(std::uint64_t dedup_key) {
    if (entries_.erase(dedup_key) > 0) {
        insertion_order_.remove(dedup_key);
    }
}

EnhanceResult enhance(const proto::PromptEnvelope& env, const LocationProfile& profile,
                      backend::TextBackend& completer) {
    if (env.stage != proto::Stage::Concise) {
        throw_error(ErrorCode::InvalidArgument, "enhance requires a concise-stage envelope");
    }
    EnhanceResult out;
    if (profile.facts.empty()) {
        // No personalization available: promote the stage, keep the text.
        out.envelope = proto::make_envelope(env.request_id, proto::Stage::Comprehensive, env.text,
                                            env.origin_bs_id, env.created_unix_ms);
        out.confidence = 0.0;
        return out;
    }

    backend::GenerationRequest req;
    req.prompt = backend::compose_enhancement_prompt(env.text, profile.facts,
                                                     profile.max_facts_per_prompt);
    req.max_new_tokens = 128;
    try {
        backend::GenerationResult res = completer.generate(req);
        std::string text = res.text;
        if (text.find(env.text) == std::string::npos) {
            // The concise text must survive verbatim whatever the backend did.
            text = env.text + " " + text;
        }
        out.envelope = proto::make_envelope(env.request_id, proto::Stage::Comprehensive, text,
                                            env.origin_bs_id, env.created_unix_ms);
        out.confidence = res.confidence;
    } catch (const Error&) {
        out.envelope = proto::make_envelope(env.request_id, proto::Stage::Comprehensive, env.text,
                                            env.origin_bs_id, env.created_unix_ms);
        out.confidence = 0.0;
        out.degraded = true;
    }
    return out;
}

LocalDecision maybe_terminate(const proto::PromptEnvelope& comprehensive, double confidence,
                              backend::TextBackend& completer, double threshold) {
    if (comprehensive.stage != proto::Stage::Comprehensive) {
        throw_error(ErrorCode::InvalidArgument, "maybe_terminate requires a comprehensive envelope");
    }
    LocalDecision decision;
    if (confidence < threshold) {
        return decision; // forward
    }
    try {
        backend::GenerationRequest req;
        req.prompt = comprehensive.text;
        const backend::GenerationResult res = completer.generate(req);
        decision.respond_locally = true;
        decision.response =
            proto::make_envelope(comprehensive.request_id, proto::Stage::Response, res.text,
                                 comprehensive.origin_bs_id, comprehensive.created_unix_ms);
        decision.response.terminated_at_edge = true;
    } catch (const Error&) {
        decision.respond_locally = false; // degrade to forwarding
    }
    return decision;
}

std::vector<ForwardBatch> batch_forward(const std::vector<TimedEnvelope>& pending,
                                        double window_s, std::size_t max_batch) {
    if (max_batch == 0) throw_error(ErrorCode::InvalidArgument, "batch_forward: max_batch must be > 0");
    for (std::size_t i = 1; i < pending.size(); ++i) {
        if (pending[i].time_s < pending[i - 1].time_s) {
            throw_error(ErrorCode::InvalidArgument, "batch_forward: envelopes must be time-ordered");
        }
    }
    std::vector<ForwardBatch> batches;
    std::size_t i = 0;
    while (i < pending.size()) {
        ForwardBatch b;
        const double deadline = pending[i].time_s + window_s;
        while (i < pending.size() && b.envelopes.size() < max_batch &&
               pending[i].time_s <= deadline) {
            b.envelopes.push_back(pending[i].envelope);
            ++i;
        }
        b.close_time_s = b.envelopes.size() == max_batch ? pending[i - 1].time_s : deadline;
        batches.push_back(std::move(b));
    }
    return batches;
}

std::vector<EdgeFineTuneSample> generate_finetune_corpus(std::size_t n_samples,
                                                         std::uint64_t seed) {
    SeededRng rng(seed);
    backend::MockBackend completer(seed);
    const auto& seeds = region_seeds();
    std::vector<EdgeFineTuneSample> corpus;
    corpus.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const RegionSeed& region = seeds[rng.bounded(seeds.size())];
        const char* topic = region.topics[rng.bounded(region.topics.size())];
        std::string concise;
        // Mostly qualified subjects; keeps the average close to a dozen
        // bytes.
        if (rng.uniform01() < 0.8) {
            concise = std::string(kAdjectives[rng.bounded(8)]) + " " + topic;
        } else {
            concise = topic;
        }
        backend::GenerationRequest req;
        req.prompt = backend::compose_enhancement_prompt(
            concise, [&region] {
                std::vector<std::string> fs;
                for (const char* f : region.facts) fs.emplace_back(f);
                return fs;
            }(), 2);
        EdgeFineTuneSample sample;
        sample.concise = concise;
        sample.intended = completer.generate(req).text;
        sample.bs_id = region.bs_id;
        corpus.push_back(std::move(sample));
    }
    return corpus;
}

void write_corpus_tsv(const std::vector<EdgeFineTuneSample>& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_error(ErrorCode::Data, "cannot write corpus file '" + path + "'");
    for (const auto& s : corpus) {
        out << s.bs_id << '\t' << s.concise << '\t' << s.intended << '\n';
    }
}

std::vector<EdgeFineTuneSample> read_corpus_tsv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_error(ErrorCode::Data, "cannot open corpus file '" + path + "'");
    std::vector<EdgeFineTuneSample> corpus;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::size_t t1 = line.find('\t');
        const std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) {
            throw_error(ErrorCode::Data,
                        path + ":" + std::to_string(lineno) + ": expected bs_id\\tconcise\\tintended");
        }
        EdgeFineTuneSample s;
        s.bs_id = line.substr(0, t1);
        s.concise = line.substr(t1 + 1, t2 - t1 - 1);
        s.intended = line.substr(t2 + 1);
        if (s.concise.empty() || s.intended.size() <= s.concise.size()) {
            throw_error(ErrorCode::Data, path + ":" + std::to_string(lineno) +
                                             ": intended must be strictly longer than concise");
        }
        corpus.push_back(std::move(s));
    }
    return corpus;
}

std::string EdgeMetrics::render() const {
    std::ostringstream os;
    os << "requests " << requests << '\n'
       << "dedup_hits " << dedup_hits << '\n'
       << "local_terminations " << local_terminations << '\n'
       << "forwarded_batches " << forwarded_batches << '\n'
       << "forwarded_requests " << forwarded_requests << '\n'
       << "degraded_enhancements " << degraded_enhancements << '\n'
       << "unknown_bs " << unknown_bs << '\n';
    return os.str();
}

} // namespace synergy::edge
