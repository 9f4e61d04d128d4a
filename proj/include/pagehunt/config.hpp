#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "pagehunt/harness.hpp"

namespace pagehunt::config {

using nlohmann::json;

inline json delay_to_json(const DelayParams& d) {
    return json{{"base_ms", d.base_ms},
                {"per_load_ms", d.per_load_ms},
                {"cap_ms", d.cap_ms},
                {"jitter_ms", d.jitter_ms}};
}

inline DelayParams delay_from_json(const json& j, DelayParams d) {
    d.base_ms = j.value("base_ms", d.base_ms);
    d.per_load_ms = j.value("per_load_ms", d.per_load_ms);
    d.cap_ms = j.value("cap_ms", d.cap_ms);
    d.jitter_ms = j.value("jitter_ms", d.jitter_ms);
    return d;
}

inline std::string access_type_to_string(AccessType t) { return access_type_name(t); }

inline AccessType access_type_from_string(const std::string& s) {
    if (s == "read") return AccessType::Read;
    if (s == "write") return AccessType::Write;
    if (s == "execute") return AccessType::Execute;
    throw std::invalid_argument("unknown access type: " + s);
}

inline json template_to_json(const TemplateParams& t) {
    return json{{"duration_ms", t.duration_ms},
                {"critical_window_us", t.critical_window_us},
                {"shared_pages", t.shared_pages},
                {"shared_exec", t.shared_exec},
                {"pre_use_pages", t.pre_use_pages},
                {"pre_use_exec", t.pre_use_exec},
                {"tail_pages", t.tail_pages},
                {"tail_exec", t.tail_exec},
                {"use_access", access_type_to_string(t.use_access)},
                {"session_duration_ms", t.session_duration_ms},
                {"two_page_secret", t.two_page_secret}};
}

inline TemplateParams template_from_json(const json& j, TemplateParams t) {
    t.duration_ms = j.value("duration_ms", t.duration_ms);
    t.critical_window_us = j.value("critical_window_us", t.critical_window_us);
    t.shared_pages = j.value("shared_pages", t.shared_pages);
    t.shared_exec = j.value("shared_exec", t.shared_exec);
    t.pre_use_pages = j.value("pre_use_pages", t.pre_use_pages);
    t.pre_use_exec = j.value("pre_use_exec", t.pre_use_exec);
    t.tail_pages = j.value("tail_pages", t.tail_pages);
    t.tail_exec = j.value("tail_exec", t.tail_exec);
    if (j.contains("use_access")) t.use_access = access_type_from_string(j.at("use_access"));
    t.session_duration_ms = j.value("session_duration_ms", t.session_duration_ms);
    t.two_page_secret = j.value("two_page_secret", t.two_page_secret);
    return t;
}

inline json config_to_json(const harness::SimConfig& c) {
    json j;
    j["memory"] = {{"num_pages", c.num_pages}};
    j["workload"] = {
        {"web_probability", {{"num", c.workload.web_probability.num}, {"den", c.workload.web_probability.den}}},
        {"ssh_probability", {{"num", c.workload.ssh_probability.num}, {"den", c.workload.ssh_probability.den}}},
        {"resource_count", c.workload.resource_count},
        {"ssh_session_ms", c.workload.ssh_session_ms},
        {"disk_flush_period_ms", c.workload.disk_flush_period_ms}};
    j["detection_delay_ms"] = {{"tls_nginx", delay_to_json(c.delays.nginx_ccs)},
                               {"tls_apache", delay_to_json(c.delays.apache_ccs)},
                               {"ssh", delay_to_json(c.delays.ssh_new_keys)},
                               {"disk", delay_to_json(c.delays.disk_write)}};
    j["templates"] = {
        {"tls_nginx", template_to_json(c.templates[0])},
        {"tls_apache", template_to_json(c.templates[1])},
        {"ssh", template_to_json(c.templates[2])},
        {"disk_write", template_to_json(c.templates[3])}};
    j["pools"] = {{"nginx", c.pools.nginx},
                  {"apache", c.pools.apache},
                  {"ssh", c.pools.ssh},
                  {"kernel", c.pools.kernel},
                  {"ssh_key_region", c.pools.ssh_key_region}};
    j["secrets"] = {{"tls_key_bits", c.secrets.tls_key_bits},
                    {"ssh_key_bits", c.secrets.ssh_key_bits},
                    {"fde_xts_split", c.secrets.fde_xts_split}};
    json search{{"filter_execute", c.search.filter_execute},
                {"filter_writes", c.search.filter_writes},
                {"prioritize_reads", c.search.prioritize_reads},
                {"extract_latency_ms",
                 {{"median", c.search.extract_latency.median_ms},
                  {"spread", c.search.extract_latency.spread_ms}}}};
    if (c.search.early_cutoff_ms)
        search["early_cutoff_ms"] = *c.search.early_cutoff_ms;
    else
        search["early_cutoff_ms"] = nullptr;
    j["search"] = search;
    j["analysis_latency_ms"] = {{"rsa", c.rsa_analysis_ms}, {"aes", c.aes_analysis_ms}};
    j["tracking_start_s"] = {{"min", c.tracking_start_min_s}, {"max", c.tracking_start_max_s}};
    return j;
}

// Overrides the calibrated defaults with whatever keys the file provides;
// a partial config is fine.
inline harness::SimConfig config_from_json(const json& j) {
    harness::SimConfig c;
    if (j.contains("memory")) c.num_pages = j["memory"].value("num_pages", c.num_pages);
    if (j.contains("workload")) {
        const json& w = j["workload"];
        if (w.contains("web_probability")) {
            c.workload.web_probability.num = w["web_probability"].value("num", c.workload.web_probability.num);
            c.workload.web_probability.den = w["web_probability"].value("den", c.workload.web_probability.den);
        }
        if (w.contains("ssh_probability")) {
            c.workload.ssh_probability.num = w["ssh_probability"].value("num", c.workload.ssh_probability.num);
            c.workload.ssh_probability.den = w["ssh_probability"].value("den", c.workload.ssh_probability.den);
        }
        c.workload.resource_count = w.value("resource_count", c.workload.resource_count);
        c.workload.ssh_session_ms = w.value("ssh_session_ms", c.workload.ssh_session_ms);
        c.workload.disk_flush_period_ms =
            w.value("disk_flush_period_ms", c.workload.disk_flush_period_ms);
    }
    if (j.contains("detection_delay_ms")) {
        const json& d = j["detection_delay_ms"];
        if (d.contains("tls_nginx")) c.delays.nginx_ccs = delay_from_json(d["tls_nginx"], c.delays.nginx_ccs);
        if (d.contains("tls_apache")) c.delays.apache_ccs = delay_from_json(d["tls_apache"], c.delays.apache_ccs);
        if (d.contains("ssh")) c.delays.ssh_new_keys = delay_from_json(d["ssh"], c.delays.ssh_new_keys);
        if (d.contains("disk")) c.delays.disk_write = delay_from_json(d["disk"], c.delays.disk_write);
    }
    if (j.contains("templates")) {
        const json& t = j["templates"];
        if (t.contains("tls_nginx")) c.templates[0] = template_from_json(t["tls_nginx"], c.templates[0]);
        if (t.contains("tls_apache")) c.templates[1] = template_from_json(t["tls_apache"], c.templates[1]);
        if (t.contains("ssh")) c.templates[2] = template_from_json(t["ssh"], c.templates[2]);
        if (t.contains("disk_write")) c.templates[3] = template_from_json(t["disk_write"], c.templates[3]);
    }
    if (j.contains("pools")) {
        const json& p = j["pools"];
        c.pools.nginx = p.value("nginx", c.pools.nginx);
        c.pools.apache = p.value("apache", c.pools.apache);
        c.pools.ssh = p.value("ssh", c.pools.ssh);
        c.pools.kernel = p.value("kernel", c.pools.kernel);
        c.pools.ssh_key_region = p.value("ssh_key_region", c.pools.ssh_key_region);
    }
    if (j.contains("secrets")) {
        const json& s = j["secrets"];
        c.secrets.tls_key_bits = s.value("tls_key_bits", c.secrets.tls_key_bits);
        c.secrets.ssh_key_bits = s.value("ssh_key_bits", c.secrets.ssh_key_bits);
        c.secrets.fde_xts_split = s.value("fde_xts_split", c.secrets.fde_xts_split);
    }
    if (j.contains("search")) {
        const json& s = j["search"];
        c.search.filter_execute = s.value("filter_execute", c.search.filter_execute);
        c.search.filter_writes = s.value("filter_writes", c.search.filter_writes);
        c.search.prioritize_reads = s.value("prioritize_reads", c.search.prioritize_reads);
        if (s.contains("early_cutoff_ms")) {
            if (s["early_cutoff_ms"].is_null())
                c.search.early_cutoff_ms.reset();
            else
                c.search.early_cutoff_ms = s["early_cutoff_ms"].get<double>();
        }
        if (s.contains("extract_latency_ms")) {
            c.search.extract_latency.median_ms =
                s["extract_latency_ms"].value("median", c.search.extract_latency.median_ms);
            c.search.extract_latency.spread_ms =
                s["extract_latency_ms"].value("spread", c.search.extract_latency.spread_ms);
        }
    }
    if (j.contains("analysis_latency_ms")) {
        c.rsa_analysis_ms = j["analysis_latency_ms"].value("rsa", c.rsa_analysis_ms);
        c.aes_analysis_ms = j["analysis_latency_ms"].value("aes", c.aes_analysis_ms);
    }
    if (j.contains("tracking_start_s")) {
        c.tracking_start_min_s = j["tracking_start_s"].value("min", c.tracking_start_min_s);
        c.tracking_start_max_s = j["tracking_start_s"].value("max", c.tracking_start_max_s);
    }
    return c;
}

inline harness::SimConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j = json::parse(in);
    return config_from_json(j);
}

}  // namespace pagehunt::config
