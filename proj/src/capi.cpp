#include "synergy/capi.h"

#include "synergy/cloud_node.hpp"
#include "synergy/config.hpp"
#include "synergy/cost_model.hpp"
#include "synergy/edge_node.hpp"
#include "synergy/error.hpp"
#include "synergy/latency_sim.hpp"
#include "synergy/model_backend.hpp"
#include "synergy/net.hpp"
#include "synergy/netmgmt.hpp"
#include "synergy/protocol.hpp"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <variant>

using namespace synergy;

namespace {

thread_local std::string g_last_error;

syn_status map_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::Ok: return SYN_OK;
        case ErrorCode::InvalidArgument: return SYN_ERR_INVALID_ARGUMENT;
        case ErrorCode::Config: return SYN_ERR_CONFIG;
        case ErrorCode::Transport: return SYN_ERR_TRANSPORT;
        case ErrorCode::Data: return SYN_ERR_DATA;
        case ErrorCode::Parse: return SYN_ERR_PARSE;
        case ErrorCode::NotFound: return SYN_ERR_NOT_FOUND;
        case ErrorCode::Internal: return SYN_ERR_INTERNAL;
    }
    return SYN_ERR_INTERNAL;
}

template <typename F>
syn_status wrap(F&& fn) noexcept {
    try {
        fn();
        return SYN_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return map_code(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SYN_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return SYN_ERR_INTERNAL;
    }
}

syn_status require(bool ok, const char* what) {
    if (!ok) {
        g_last_error = what;
        return SYN_ERR_INVALID_ARGUMENT;
    }
    return SYN_OK;
}

std::vector<cost::FrameworkKind> frameworks_for(const std::string& name) {
    if (name == "all") {
        return {cost::FrameworkKind::CloudOnly, cost::FrameworkKind::Offload,
                cost::FrameworkKind::Splitting, cost::FrameworkKind::Synergy};
    }
    return {cost::framework_from_name(name)};
}

} // namespace

struct syn_config {
    Config cfg;
};

struct syn_cost_report {
    std::vector<cost::CostReport> rows;
    double split_ratio = 0.0;
    std::string text;
    std::string kv;
};

struct syn_text {
    std::string value;
};

struct syn_sim_trace {
    sim::SimTrace trace;
    std::string event_log;
    std::string document;
    std::string summary_kv;
};

struct syn_server {
    std::unique_ptr<cloud::CloudService> cloud;
    std::unique_ptr<edge::EdgeService> edge;
};

struct syn_responses {
    struct Item {
        std::string text;
        bool terminated_at_edge = false;
    };
    std::vector<Item> items;
};

struct syn_report {
    std::string text;
    std::string kv;
    std::map<std::string, double> metrics;
};

extern "C" {

const char* syn_version(void) { return "0.1.0"; }

const char* syn_last_error(void) { return g_last_error.c_str(); }

/* ---------------------------------------------------------------- config */

syn_status syn_config_load(const char* path, syn_config** out) {
    if (auto s = require(path && out, "path and out must be non-null")) return s;
    return wrap([&] { *out = new syn_config{Config::from_file(path)}; });
}

syn_status syn_config_parse(const char* text, syn_config** out) {
    if (auto s = require(text && out, "text and out must be non-null")) return s;
    return wrap([&] { *out = new syn_config{Config::from_string(text)}; });
}

syn_status syn_config_set(syn_config* cfg, const char* key, const char* value) {
    if (auto s = require(cfg && key && value, "cfg, key and value must be non-null")) return s;
    return wrap([&] { cfg->cfg.set(key, value); });
}

syn_status syn_config_get(const syn_config* cfg, const char* key, char* buf, size_t cap) {
    if (auto s = require(cfg && key && buf && cap > 0, "cfg, key and buf must be non-null"))
        return s;
    if (!cfg->cfg.has(key)) {
        g_last_error = std::string("config key '") + key + "' not found";
        return SYN_ERR_NOT_FOUND;
    }
    return wrap([&] {
        const std::string v = cfg->cfg.get_string(key);
        std::strncpy(buf, v.c_str(), cap - 1);
        buf[cap - 1] = '\0';
    });
}

void syn_config_free(syn_config* cfg) { delete cfg; }

/* ------------------------------------------------------------- cost model */

syn_status syn_cost_run(const syn_config* cfg, const char* framework, syn_cost_report** out) {
    if (auto s = require(cfg && framework && out, "cfg, framework and out must be non-null"))
        return s;
    return wrap([&] {
        const cost::CostParams params = cost::cost_params_from_config(cfg->cfg);
        auto report = std::make_unique<syn_cost_report>();
        cost::DeploymentSpec reference;
        for (auto kind : frameworks_for(framework)) {
            const cost::DeploymentSpec spec = cost::deployment_spec_from_config(cfg->cfg, kind);
            reference = spec;
            report->rows.push_back(cost::framework_cost(spec, params));
        }
        const cost::ModelShape cloud_model =
            cost::model_shape_from_config(cfg->cfg, cfg->cfg.get_string("cost.cloud_model"));
        report->split_ratio = cost::split_ratio_D(cloud_model.hidden_dim, params.split_datum,
                                                  params.avg_input_bytes);
        report->text =
            cost::render_report_table(report->rows, params, reference, report->split_ratio);
        report->kv = cost::render_report_kv(report->rows, report->split_ratio);
        *out = report.release();
    });
}

size_t syn_cost_report_rows(const syn_cost_report* report) {
    return report ? report->rows.size() : 0;
}

const char* syn_cost_report_framework(const syn_cost_report* report, size_t row) {
    if (!report || row >= report->rows.size()) return nullptr;
    return cost::framework_name(report->rows[row].kind);
}

syn_status syn_cost_report_value(const syn_cost_report* report, size_t row,
                                 syn_cost_field field, double* out) {
    if (auto s = require(report && out && row < report->rows.size(), "bad report row")) return s;
    const cost::CostReport& r = report->rows[row];
    switch (field) {
        case SYN_COST_EDGE_STORAGE_BYTES: *out = r.edge_storage_bytes; return SYN_OK;
        case SYN_COST_EDGE_FINETUNE_VRAM_BYTES: *out = r.edge_finetune_vram_bytes; return SYN_OK;
        case SYN_COST_EDGE_INFERENCE_VRAM_BYTES: *out = r.edge_inference_vram_bytes; return SYN_OK;
        case SYN_COST_TRANSMISSION_LATENCY_S: *out = r.transmission_latency_s; return SYN_OK;
        case SYN_COST_BYTES_PER_REQUEST: *out = r.bytes_transferred_per_request; return SYN_OK;
    }
    g_last_error = "unknown cost field";
    return SYN_ERR_INVALID_ARGUMENT;
}

double syn_cost_report_split_ratio(const syn_cost_report* report) {
    return report ? report->split_ratio : 0.0;
}

const char* syn_cost_report_text(const syn_cost_report* report) {
    return report ? report->text.c_str() : nullptr;
}

const char* syn_cost_report_kv(const syn_cost_report* report) {
    return report ? report->kv.c_str() : nullptr;
}

void syn_cost_report_free(syn_cost_report* report) { delete report; }

syn_status syn_split_ratio_d(uint32_t hidden_dim, uint64_t datum_value, int datum_in_bits,
                             double avg_input_bytes, double* out) {
    if (auto s = require(out != nullptr, "out must be non-null")) return s;
    return wrap([&] {
        cost::DatumSize datum{datum_value,
                              datum_in_bits ? cost::DatumUnit::Bits : cost::DatumUnit::Bytes};
        *out = cost::split_ratio_D(hidden_dim, datum, avg_input_bytes);
    });
}

syn_status syn_transmission_latency(uint64_t n_requests, uint64_t payload_bytes,
                                    double rate_bits_per_s, double per_request_handshake_s,
                                    int shared_connection, double* out) {
    if (auto s = require(out != nullptr, "out must be non-null")) return s;
    return wrap([&] {
        cost::LinkSpec link{rate_bits_per_s, per_request_handshake_s};
        *out = cost::transmission_latency(n_requests, payload_bytes, link,
                                          shared_connection != 0);
    });
}

syn_status syn_lora_adapter_params(const syn_config* cfg, const char* model_name,
                                   uint32_t rank, uint64_t* out) {
    if (auto s = require(cfg && model_name && out, "cfg, model_name and out must be non-null"))
        return s;
    return wrap([&] {
        const cost::ModelShape shape = cost::model_shape_from_config(cfg->cfg, model_name);
        const cost::LoraConfig lora{rank, cfg->cfg.get_double_or("lora.scale_factor", 16.0)};
        *out = cost::lora_adapter_params(shape, lora);
    });
}

/* -------------------------------------------------------------- simulator */

const char* syn_text_str(const syn_text* text) { return text ? text->value.c_str() : nullptr; }
void syn_text_free(syn_text* text) { delete text; }

syn_status syn_simulate(const syn_config* cfg, const char* framework, syn_sim_trace** out) {
    if (auto s = require(cfg && framework && out, "cfg, framework and out must be non-null"))
        return s;
    return wrap([&] {
        const sim::SimParams params = sim::sim_params_from_config(cfg->cfg);
        auto handle = std::make_unique<syn_sim_trace>();
        handle->trace = sim::simulate(cost::framework_from_name(framework), params);
        handle->event_log = sim::serialize_events(handle->trace);
        handle->document = sim::serialize_trace(handle->trace);
        handle->summary_kv = sim::render_summary_kv(handle->trace);
        *out = handle.release();
    });
}

double syn_sim_trace_end_to_end_s(const syn_sim_trace* trace) {
    return trace ? trace->trace.end_to_end_s : 0.0;
}

size_t syn_sim_trace_events(const syn_sim_trace* trace) {
    return trace ? trace->trace.events.size() : 0;
}

const char* syn_sim_trace_event_log(const syn_sim_trace* trace) {
    return trace ? trace->event_log.c_str() : nullptr;
}

const char* syn_sim_trace_document(const syn_sim_trace* trace) {
    return trace ? trace->document.c_str() : nullptr;
}

const char* syn_sim_trace_summary_kv(const syn_sim_trace* trace) {
    return trace ? trace->summary_kv.c_str() : nullptr;
}

void syn_sim_trace_free(syn_sim_trace* trace) { delete trace; }

syn_status syn_sim_compare(const syn_config* cfg, syn_text** out) {
    if (auto s = require(cfg && out, "cfg and out must be non-null")) return s;
    return wrap([&] {
        const sim::SimParams params = sim::sim_params_from_config(cfg->cfg);
        *out = new syn_text{sim::render_comparison_table(sim::compare_frameworks(params))};
    });
}

/* --------------------------------------------------------------- services */

syn_status syn_cloud_server_start(const syn_config* cfg, syn_server** out) {
    if (auto s = require(cfg && out, "cfg and out must be non-null")) return s;
    return wrap([&] {
        auto backend_kind = cfg->cfg.get_string_or("cloud.backend", "mock");
        auto server = std::make_unique<syn_server>();
        server->cloud = std::make_unique<cloud::CloudService>(
            cloud::cloud_service_config_from(cfg->cfg),
            backend::make_backend(cfg->cfg, backend_kind));
        *out = server.release();
    });
}

syn_status syn_edge_server_start(const syn_config* cfg, syn_server** out) {
    if (auto s = require(cfg && out, "cfg and out must be non-null")) return s;
    return wrap([&] {
        auto backend_kind = cfg->cfg.get_string_or("edge.backend", "mock");
        const std::string profile_dir = cfg->cfg.get_string_or("edge.profile_dir", "builtin");
        edge::ProfileStore profiles;
        if (profile_dir == "builtin") {
            for (const auto& p : edge::builtin_regions()) profiles.add(p);
        } else {
            profiles = edge::ProfileStore::from_directory(profile_dir);
        }
        auto server = std::make_unique<syn_server>();
        server->edge = std::make_unique<edge::EdgeService>(
            edge::edge_service_config_from(cfg->cfg), std::move(profiles),
            backend::make_backend(cfg->cfg, backend_kind));
        *out = server.release();
    });
}

uint16_t syn_server_port(const syn_server* server) {
    if (!server) return 0;
    if (server->cloud) return server->cloud->port();
    if (server->edge) return server->edge->port();
    return 0;
}

uint16_t syn_server_metrics_port(const syn_server* server) {
    return server && server->edge ? server->edge->metrics_port() : 0;
}

syn_status syn_server_metrics(const syn_server* server, syn_text** out) {
    if (auto s = require(server && out, "server and out must be non-null")) return s;
    return wrap([&] {
        if (server->edge) {
            *out = new syn_text{server->edge->metrics().render()};
        } else if (server->cloud) {
            *out = new syn_text{server->cloud->metrics().render()};
        } else {
            throw_error(ErrorCode::InvalidArgument, "server not running");
        }
    });
}

void syn_server_stop(syn_server* server) {
    if (!server) return;
    if (server->cloud) server->cloud->stop();
    if (server->edge) server->edge->stop();
}

void syn_server_free(syn_server* server) { delete server; }

syn_status syn_client_send(const char* host, uint16_t port, const char* bs_id,
                           const char* const* prompts, size_t n_prompts, double timeout_s,
                           syn_responses** out) {
    if (auto s = require(host && out && (n_prompts == 0 || prompts != nullptr),
                         "host, prompts and out must be non-null"))
        return s;
    return wrap([&] {
        auto result = std::make_unique<syn_responses>();
        result->items.resize(n_prompts);
        if (n_prompts == 0) {
            *out = result.release();
            return;
        }
        net::Socket sock = net::connect_to(host, port, timeout_s);
        const std::int64_t now_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::system_clock::now().time_since_epoch()).count();
        std::string wire;
        std::map<std::string, std::size_t> slot_of;
        for (std::size_t i = 0; i < n_prompts; ++i) {
            const std::string rid = "r-" + std::to_string(i);
            slot_of[rid] = i;
            wire += proto::encode(proto::make_envelope(rid, proto::Stage::Concise, prompts[i],
                                                       bs_id ? bs_id : "", now_ms));
        }
        sock.send_all(wire);
        proto::FrameReader reader;
        char buf[16384];
        std::vector<bool> filled(n_prompts, false);
        std::size_t received = 0;
        while (received < n_prompts) {
            const std::size_t n = sock.recv_some(buf, sizeof(buf));
            if (n == 0) {
                throw_error(ErrorCode::Transport,
                            "connection closed after " + std::to_string(received) + " of " +
                                std::to_string(n_prompts) + " responses");
            }
            for (const auto& env : reader.feed(buf, n)) {
                const auto it = slot_of.find(env.request_id);
                if (it == slot_of.end() || filled[it->second]) continue;
                filled[it->second] = true;
                result->items[it->second] =
                    syn_responses::Item{env.text, env.terminated_at_edge};
                ++received;
            }
        }
        *out = result.release();
    });
}

size_t syn_responses_count(const syn_responses* responses) {
    return responses ? responses->items.size() : 0;
}

const char* syn_responses_text(const syn_responses* responses, size_t i) {
    if (!responses || i >= responses->items.size()) return nullptr;
    return responses->items[i].text.c_str();
}

int syn_responses_terminated_at_edge(const syn_responses* responses, size_t i) {
    if (!responses || i >= responses->items.size()) return 0;
    return responses->items[i].terminated_at_edge ? 1 : 0;
}

void syn_responses_free(syn_responses* responses) { delete responses; }

/* ---------------------------------------------------- network management */

syn_status syn_popularity_run(const syn_config* cfg, const char* csv_path, syn_report** out) {
    if (auto s = require(cfg && csv_path && out, "cfg, csv_path and out must be non-null"))
        return s;
    return wrap([&] {
        const Config& c = cfg->cfg;
        const double interval_hours = c.get_double_or("netmgmt.interval_hours", 6.0);
        const std::size_t top_k = c.get_uint_or("netmgmt.top_k", 20);
        const double ratio = c.get_double_or("netmgmt.split_ratio", 0.95);
        const double window_days = c.get_double_or("netmgmt.window_days", 182.0);
        const std::string ts_col = c.get_string_or("netmgmt.timestamp_column", "timestamp");
        const std::string title_col = c.get_string_or("netmgmt.title_column", "title");

        const auto records = netmgmt::load_viewing_csv(csv_path, ts_col, title_col);
        const auto window = netmgmt::last_days_window(records, window_days);
        const auto ds = netmgmt::bucketize(
            records, static_cast<std::int64_t>(interval_hours * 3600.0), top_k, window);
        const auto [train, test] = netmgmt::split_train_test(ds, ratio);

        auto report = std::make_unique<syn_report>();
        std::ostringstream text, kv;
        text << "popularity prediction over " << ds.n_intervals() << " intervals ("
             << train.n_intervals() << " train / " << test.n_intervals() << " test), top "
             << ds.titles.size() << " titles\n";
        kv << "intervals=" << ds.n_intervals() << "\ntrain_intervals=" << train.n_intervals()
           << "\ntest_intervals=" << test.n_intervals() << "\ntitles=" << ds.titles.size() << "\n";
        report->metrics["intervals"] = static_cast<double>(ds.n_intervals());
        report->metrics["train_intervals"] = static_cast<double>(train.n_intervals());
        report->metrics["test_intervals"] = static_cast<double>(test.n_intervals());

        const std::string method = c.get_string_or("netmgmt.method", "both");
        for (const char* name : {"frequency", "markov1"}) {
            if (method != "both" && method != name) continue;
            const auto pred = netmgmt::predict_baseline(
                train, test, netmgmt::predict_method_from_name(name));
            const auto sc = netmgmt::score(pred, test.labels);
            char line[96];
            std::snprintf(line, sizeof(line), "%-9s accuracy %.4f\n", name, sc.accuracy);
            text << line;
            kv << name << "_accuracy=" << sc.accuracy << "\n";
            report->metrics[std::string(name) + "_accuracy"] = sc.accuracy;
        }
        report->text = text.str();
        report->kv = kv.str();
        *out = report.release();
    });
}

syn_status syn_intent_run(const syn_config* cfg, const char* dataset_path,
                          const char* extractor, syn_report** out) {
    if (auto s = require(cfg && dataset_path && extractor && out,
                         "cfg, dataset_path, extractor and out must be non-null"))
        return s;
    return wrap([&] {
        const auto samples = netmgmt::load_intent_dataset(dataset_path);
        std::vector<netmgmt::KeywordSet> predicted, gold;
        predicted.reserve(samples.size());
        gold.reserve(samples.size());
        const std::string kind = extractor;
        std::unique_ptr<backend::TextBackend> llm;
        if (kind == "backend") {
            llm = backend::make_backend(cfg->cfg,
                                        cfg->cfg.get_string_or("netmgmt.intent_backend", "mock"));
        } else if (kind != "rules") {
            throw_error(ErrorCode::InvalidArgument,
                        "extractor must be 'rules' or 'backend', got '" + kind + "'");
        }
        for (const auto& sample : samples) {
            gold.push_back(sample.keywords);
            if (llm) {
                // The backend answers with tab- or newline-separated
                // slot:value pairs; anything unparseable scores as empty.
                netmgmt::KeywordSet set;
                try {
                    backend::GenerationRequest req;
                    req.prompt = sample.utterance;
                    const std::string reply = llm->generate(req).text;
                    std::string token;
                    std::istringstream toks(reply);
                    while (std::getline(toks, token, '\t')) {
                        std::istringstream lines(token);
                        std::string part;
                        while (std::getline(lines, part)) {
                            const std::size_t colon = part.find(':');
                            if (colon == std::string::npos) continue;
                            const auto slot = netmgmt::slot_from_name(part.substr(0, colon));
                            if (slot) set.insert({*slot, part.substr(colon + 1)});
                        }
                    }
                } catch (const Error&) {
                    set.clear();
                }
                predicted.push_back(std::move(set));
            } else {
                predicted.push_back(netmgmt::extract_intent_rules(sample.utterance));
            }
        }
        const auto sc = netmgmt::score_intents(predicted, gold);
        auto report = std::make_unique<syn_report>();
        std::ostringstream text, kv;
        char line[160];
        std::snprintf(line, sizeof(line),
                      "intent inference (%s extractor) on %zu samples\n"
                      "exact_match %.4f\nslot_f1 %.4f\n",
                      kind.c_str(), samples.size(), sc.exact_match_rate, sc.slot_f1);
        text << line;
        kv << "samples=" << sc.n_samples << "\nexact_match=" << sc.exact_match_rate
           << "\nslot_f1=" << sc.slot_f1 << "\n";
        report->metrics["samples"] = static_cast<double>(sc.n_samples);
        report->metrics["exact_match"] = sc.exact_match_rate;
        report->metrics["slot_f1"] = sc.slot_f1;
        report->text = text.str();
        report->kv = kv.str();
        *out = report.release();
    });
}

const char* syn_report_text(const syn_report* report) {
    return report ? report->text.c_str() : nullptr;
}

const char* syn_report_kv(const syn_report* report) {
    return report ? report->kv.c_str() : nullptr;
}

syn_status syn_report_metric(const syn_report* report, const char* key, double* out) {
    if (auto s = require(report && key && out, "report, key and out must be non-null")) return s;
    const auto it = report->metrics.find(key);
    if (it == report->metrics.end()) {
        g_last_error = std::string("no metric '") + key + "'";
        return SYN_ERR_NOT_FOUND;
    }
    *out = it->second;
    return SYN_OK;
}

void syn_report_free(syn_report* report) { delete report; }

/* ------------------------------------------------------------- generators */

syn_status syn_generate_viewing_csv(const char* path, uint64_t n_records, uint64_t seed) {
    if (auto s = require(path != nullptr, "path must be non-null")) return s;
    return wrap([&] {
        netmgmt::write_viewing_csv(netmgmt::generate_viewing_records(n_records, seed), path);
    });
}

syn_status syn_generate_intent_dataset(const char* path, uint64_t n_samples, uint64_t seed) {
    if (auto s = require(path != nullptr, "path must be non-null")) return s;
    return wrap([&] {
        netmgmt::write_intent_dataset(netmgmt::generate_intent_dataset(n_samples, seed), path);
    });
}

syn_status syn_generate_finetune_corpus(const char* path, uint64_t n_samples, uint64_t seed) {
    if (auto s = require(path != nullptr, "path must be non-null")) return s;
    return wrap([&] {
        edge::write_corpus_tsv(edge::generate_finetune_corpus(n_samples, seed), path);
    });
}

syn_status syn_write_profiles(const char* dir) {
    if (auto s = require(dir != nullptr, "dir must be non-null")) return s;
    return wrap([&] {
        std::filesystem::create_directories(dir);
        for (const auto& p : edge::builtin_regions()) {
            std::ofstream out(std::filesystem::path(dir) / (p.bs_id + ".conf"));
            if (!out) throw_error(ErrorCode::Data, "cannot write profile for " + p.bs_id);
            out << "[profile]\n"
                << "bs_id = " << p.bs_id << "\n"
                << "region_name = " << p.region_name << "\n"
                << "max_facts_per_prompt = " << p.max_facts_per_prompt << "\n\n[facts]\n";
            for (std::size_t i = 0; i < p.facts.size(); ++i) {
                char key[16];
                std::snprintf(key, sizeof(key), "f%02zu", i);
                out << key << " = " << p.facts[i] << "\n";
            }
        }
    });
}

} // extern "C"
