#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "pagehunt/analyzers.hpp"
#include "pagehunt/searcher.hpp"
#include "pagehunt/simulator.hpp"

namespace pagehunt::harness {

enum class Scenario { TlsNginx, TlsApache, Fde, Ssh };

inline const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::TlsNginx: return "tls-nginx";
        case Scenario::TlsApache: return "tls-apache";
        case Scenario::Fde: return "fde";
        case Scenario::Ssh: return "ssh";
    }
    return "?";
}

inline Scenario parse_scenario(const std::string& name) {
    if (name == "tls-nginx") return Scenario::TlsNginx;
    if (name == "tls-apache") return Scenario::TlsApache;
    if (name == "fde") return Scenario::Fde;
    if (name == "ssh") return Scenario::Ssh;
    throw std::invalid_argument("unknown scenario: " + name);
}

constexpr ActivityKind target_kind(Scenario s) {
    switch (s) {
        case Scenario::TlsNginx: return ActivityKind::TlsHandshakeNginx;
        case Scenario::TlsApache: return ActivityKind::TlsHandshakeApache;
        case Scenario::Fde: return ActivityKind::DiskWrite;
        case Scenario::Ssh: return ActivityKind::SshHandshake;
    }
    return ActivityKind::DiskWrite;
}

struct SecretsConfig {
    unsigned tls_key_bits = 4096;
    unsigned ssh_key_bits = 4096;
    bool fde_xts_split = false;  // two AES-128 schedules instead of one AES-256
};

// Full experiment configuration. Shipped defaults are calibrated so that
// per-scenario extracted-page counts, the execute-access share and the
// detection delays land in realistic bands; everything here can be
// overridden from a config file.
struct SimConfig {
    GpaPage num_pages = 524288;  // 2 GiB guest
    WorkloadConfig workload{};
    DelayModel delays{};
    std::array<TemplateParams, kActivityKindCount> templates = default_template_params();
    PoolSizes pools{};
    SecretsConfig secrets{};
    searcher::SearchConfig search{};
    double rsa_analysis_ms = 50.0;  // on-the-fly analysis latency per page
    double aes_analysis_ms = 2.0;
    double tracking_start_min_s = 30.0;
    double tracking_start_max_s = 90.0;

    static std::array<TemplateParams, kActivityKindCount> default_template_params() {
        std::array<TemplateParams, kActivityKindCount> t{};
        // nginx TLS handshake; key read once shortly before the final packet
        t[0].duration_ms = 30.0;
        t[0].critical_window_us = 10.0;
        t[0].shared_pages = 12;
        t[0].shared_exec = 4;
        t[0].pre_use_pages = 24;
        t[0].pre_use_exec = 6;
        t[0].tail_pages = 133;
        t[0].tail_exec = 28;
        t[0].use_access = AccessType::Read;
        // Apache TLS handshake; key placement straddles a page boundary
        t[1].duration_ms = 45.0;
        t[1].critical_window_us = 10.0;
        t[1].shared_pages = 10;
        t[1].shared_exec = 3;
        t[1].pre_use_pages = 25;
        t[1].pre_use_exec = 6;
        t[1].tail_pages = 160;
        t[1].tail_exec = 35;
        t[1].use_access = AccessType::Read;
        t[1].two_page_secret = true;
        // SSH handshake; short fresh tail, key written into the session child
        t[2].duration_ms = 200.0;
        t[2].critical_window_us = 1000.0;
        t[2].shared_pages = 10;
        t[2].shared_exec = 3;
        t[2].pre_use_pages = 25;
        t[2].pre_use_exec = 6;
        t[2].tail_pages = 7;
        t[2].tail_exec = 1;
        t[2].use_access = AccessType::Write;
        t[2].session_duration_ms = 120000.0;
        // kernel page-cache writeback using the FDE key schedule
        t[3].duration_ms = 50.0;
        t[3].critical_window_us = 500.0;
        t[3].shared_pages = 8;
        t[3].shared_exec = 2;
        t[3].pre_use_pages = 12;
        t[3].pre_use_exec = 3;
        t[3].tail_pages = 88;
        t[3].tail_exec = 19;
        t[3].use_access = AccessType::Read;
        return t;
    }
};

inline std::array<ActivityTemplate, kActivityKindCount> make_templates(const SimConfig& config) {
    std::array<TemplateParams, kActivityKindCount> params = config.templates;
    // the workload's session length governs the per-session key lifetime
    params[static_cast<std::size_t>(ActivityKind::SshHandshake)].session_duration_ms =
        config.workload.ssh_session_ms;
    std::array<ActivityTemplate, kActivityKindCount> out;
    for (int k = 0; k < kActivityKindCount; ++k)
        out[static_cast<std::size_t>(k)] =
            build_template(static_cast<ActivityKind>(k), params[static_cast<std::size_t>(k)]);
    return out;
}

// Scenario keys. Generated once per (seed, key sizes) and shared across
// iterations: the victim uses one long-lived key per service.
struct ScenarioSecrets {
    RsaKey nginx_key;
    RsaKey apache_key;
    RsaKey ssh_key;
    std::vector<std::uint8_t> fde_key;
    analyzers::AesProbe fde_probe;
    bool fde_xts_split = false;
};

inline std::shared_ptr<const ScenarioSecrets> make_scenario_secrets(const SecretsConfig& cfg,
                                                                    std::uint64_t master_seed) {
    auto s = std::make_shared<ScenarioSecrets>();
    s->nginx_key = generate_rsa_key(cfg.tls_key_bits, derive_seed(master_seed, 101));
    s->apache_key = generate_rsa_key(cfg.tls_key_bits, derive_seed(master_seed, 102));
    s->ssh_key = generate_rsa_key(cfg.ssh_key_bits, derive_seed(master_seed, 103));
    Rng rng(derive_seed(master_seed, 104));
    s->fde_key.resize(32);
    for (auto& b : s->fde_key) b = static_cast<std::uint8_t>(rng.next_u64());
    for (auto& b : s->fde_probe.plaintext) b = static_cast<std::uint8_t>(rng.next_u64());
    s->fde_xts_split = cfg.fde_xts_split;
    if (cfg.fde_xts_split) {
        s->fde_probe.ciphertext = aes::encrypt_block_with_key(
            std::span(s->fde_key).first(16), s->fde_probe.plaintext);
    } else {
        s->fde_probe.ciphertext = aes::encrypt_block_with_key(s->fde_key, s->fde_probe.plaintext);
    }
    return s;
}

// Process-wide cache: RSA key generation is the one expensive setup step.
inline std::shared_ptr<const ScenarioSecrets> scenario_secrets_cached(const SecretsConfig& cfg,
                                                                      std::uint64_t master_seed) {
    static std::mutex mutex;
    static std::map<std::tuple<std::uint64_t, unsigned, unsigned, bool>,
                    std::shared_ptr<const ScenarioSecrets>>
        cache;
    const auto key = std::make_tuple(master_seed, cfg.tls_key_bits, cfg.ssh_key_bits,
                                     cfg.fde_xts_split);
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto secrets = make_scenario_secrets(cfg, master_seed);
    cache.emplace(key, secrets);
    return secrets;
}

// Plants the long-lived service secrets and returns the per-kind page sets
// the activity traces reference.
inline SecretPlan plant_static_secrets(GuestMemory& memory, const MemoryLayout& layout,
                                       const ScenarioSecrets& secrets) {
    SecretPlan plan;

    SecretSpec nginx;
    nginx.kind = RsaFactorSecret{secrets.nginx_key.modulus, secrets.nginx_key.p,
                                 secrets.nginx_key.factor_bits, Endianness::Little};
    nginx.gpa_page = layout.nginx_key_page;
    nginx.byte_offset = layout.nginx_key_offset;
    plan.static_pages[static_cast<std::size_t>(ActivityKind::TlsHandshakeNginx)] =
        memory.place_secret(nginx).pages;

    SecretSpec apache;
    apache.kind = RsaFactorSecret{secrets.apache_key.modulus, secrets.apache_key.p,
                                  secrets.apache_key.factor_bits, Endianness::Little};
    apache.gpa_page = layout.apache_key_page;
    apache.byte_offset = layout.apache_key_offset;
    plan.static_pages[static_cast<std::size_t>(ActivityKind::TlsHandshakeApache)] =
        memory.place_secret(apache).pages;

    // FDE: the expanded schedule plus the synthetic kernel key record on
    // the same page.
    std::vector<GpaPage> fde_pages;
    if (secrets.fde_xts_split) {
        for (int half = 0; half < 2; ++half) {
            SecretSpec sched;
            sched.kind = AesKeySecret{aes::Variant::k128,
                                      {secrets.fde_key.begin() + half * 16,
                                       secrets.fde_key.begin() + half * 16 + 16},
                                      true};
            sched.gpa_page = layout.fde_page;
            sched.byte_offset = layout.fde_schedule_offset + static_cast<std::size_t>(half) * 176;
            for (GpaPage p : memory.place_secret(sched).pages) fde_pages.push_back(p);
        }
    } else {
        SecretSpec sched;
        sched.kind = AesKeySecret{aes::Variant::k256, secrets.fde_key, true};
        sched.gpa_page = layout.fde_page;
        sched.byte_offset = layout.fde_schedule_offset;
        fde_pages = memory.place_secret(sched).pages;
    }
    SecretSpec ctx;
    ctx.kind = KeyContextSecret{analyzers::kDefaultKeyContextLayout, secrets.fde_key};
    ctx.gpa_page = layout.fde_page;
    ctx.byte_offset = layout.fde_context_offset;
    for (GpaPage p : memory.place_secret(ctx).pages)
        if (std::find(fde_pages.begin(), fde_pages.end(), p) == fde_pages.end())
            fde_pages.push_back(p);
    plan.static_pages[static_cast<std::size_t>(ActivityKind::DiskWrite)] = std::move(fde_pages);

    plan.ssh_key = &secrets.ssh_key;
    plan.ssh_endian = Endianness::Little;
    return plan;
}

inline searcher::PageAnalyzer make_rsa_analyzer(const RsaKey* key) {
    searcher::PageAnalyzer analyzer;
    analyzer.footprint = (key->factor_bits + 7) / 8;
    analyzer.scan = [key](std::span<const std::uint8_t> bytes)
        -> std::optional<analyzers::KeyCandidate> {
        auto hits = analyzers::scan_rsa_factor(bytes, key->modulus, key->factor_bits,
                                               Endianness::Little);
        if (hits.empty()) return std::nullopt;
        return hits.front();
    };
    return analyzer;
}

inline searcher::PageAnalyzer make_fde_analyzer(const ScenarioSecrets* secrets) {
    const aes::Variant variant = secrets->fde_xts_split ? aes::Variant::k128 : aes::Variant::k256;
    searcher::PageAnalyzer analyzer;
    analyzer.footprint =
        std::max(aes::schedule_bytes(variant), analyzers::KeyContextLayout::kHeaderSize + 64);
    analyzer.scan = [secrets, variant](std::span<const std::uint8_t> bytes)
        -> std::optional<analyzers::KeyCandidate> {
        for (auto& hit : analyzers::scan_aes_schedules(bytes, variant, 0))
            if (analyzers::verify_key_candidate(hit, secrets->fde_probe)) return hit;
        for (auto& hit : analyzers::scan_key_context(bytes))
            if ((hit.material.size() == 16 || hit.material.size() == 32 ||
                 hit.material.size() == 64) &&
                analyzers::verify_key_candidate(hit, secrets->fde_probe))
                return hit;
        return std::nullopt;
    };
    return analyzer;
}

inline searcher::PageAnalyzer make_analyzer(Scenario scenario, const ScenarioSecrets* secrets) {
    switch (scenario) {
        case Scenario::TlsNginx: return make_rsa_analyzer(&secrets->nginx_key);
        case Scenario::TlsApache: return make_rsa_analyzer(&secrets->apache_key);
        case Scenario::Ssh: return make_rsa_analyzer(&secrets->ssh_key);
        case Scenario::Fde: return make_fde_analyzer(secrets);
    }
    throw std::invalid_argument("bad scenario");
}

// Per-iteration outcome, one row of the results CSV.
struct AttackReport {
    Scenario scenario = Scenario::TlsNginx;
    double load_level = 1.0;
    std::uint64_t iteration = 0;
    std::uint64_t seed = 0;
    bool success = false;
    double reaction_time_ms = 0.0;
    std::size_t tracked_pages = 0;
    std::size_t filtered_pages = 0;  // candidates remaining after preprocessing
    std::size_t extracted_pages = 0;
    double observation_ms = 0.0;
    double search_ms = 0.0;
    std::uint64_t requests_made = 0;
    searcher::SearchOutcome outcome = searcher::SearchOutcome::Exhausted;
};

// One randomized attack iteration: build the guest, plant the secrets,
// run the workload, start tracking at a uniformly random time, stop on the
// scenario's end event, then run the preprocessed backward search.
inline AttackReport run_iteration(const SimConfig& config, Scenario scenario, double load_level,
                                  std::uint64_t seed, const ScenarioSecrets& secrets) {
    SimConfig local = config;
    local.workload.load_level = load_level;

    const std::uint64_t mem_seed = derive_seed(seed, 1);
    const std::uint64_t sim_seed = derive_seed(seed, 2);
    const std::uint64_t tstart_seed = derive_seed(seed, 3);
    const std::uint64_t latency_seed = derive_seed(seed, 4);

    GuestMemory memory(local.num_pages);
    memory.fill_random(mem_seed);

    const auto templates = make_templates(local);
    const MemoryLayout layout =
        make_layout(templates, local.workload.resource_count, local.pools, local.num_pages);
    SecretPlan plan = plant_static_secrets(memory, layout, secrets);

    Simulation sim(memory, templates, layout, plan, local.workload, local.delays, sim_seed);

    Rng tstart_rng(tstart_seed);
    const TimeUs lo = ms_to_us(local.tracking_start_min_s * 1000.0);
    const TimeUs hi = ms_to_us(local.tracking_start_max_s * 1000.0);
    const TimeUs t_start = lo + (hi > lo ? static_cast<TimeUs>(tstart_rng.bounded(
                                               static_cast<std::uint64_t>(hi - lo)))
                                         : 0);

    const ActivityKind kind = target_kind(scenario);
    auto obs = sim.observe(t_start, kind, t_start + static_cast<TimeUs>(48) * 3600 * 1000 * 1000);
    if (!obs.stopped) throw std::runtime_error("no stop event within the simulation cap");

    searcher::SearchConfig search_cfg = local.search;
    search_cfg.analysis_latency_ms =
        scenario == Scenario::Fde ? local.aes_analysis_ms : local.rsa_analysis_ms;

    auto candidates =
        searcher::preprocess(obs.session.records(), obs.stop_time_us, search_cfg);
    auto analyzer = make_analyzer(scenario, &secrets);
    auto result = searcher::search(candidates, memory, analyzer, search_cfg, latency_seed,
                                   obs.stop_time_us);

    bool verified = false;
    if (result.outcome == searcher::SearchOutcome::Found) {
        if (scenario == Scenario::Fde) {
            verified = true;  // the FDE analyzer only reports probe-verified hits
        } else {
            const RsaKey& key = scenario == Scenario::TlsNginx    ? secrets.nginx_key
                                : scenario == Scenario::TlsApache ? secrets.apache_key
                                                                  : secrets.ssh_key;
            const Mpz value =
                Mpz::from_bytes(result.candidate->material, Endianness::Little);
            verified = value == key.p || value == key.q;
        }
    }

    AttackReport report;
    report.scenario = scenario;
    report.load_level = load_level;
    report.seed = seed;
    report.success = result.outcome == searcher::SearchOutcome::Found && verified;
    report.reaction_time_ms =
        obs.last_use_us >= 0 ? us_to_ms(obs.stop_time_us - obs.last_use_us) : 0.0;
    report.tracked_pages = obs.session.records().size();
    report.filtered_pages = candidates.entries.size();
    report.extracted_pages = result.extracted_pages;
    report.observation_ms = us_to_ms(obs.stop_time_us - t_start);
    report.search_ms = result.search_duration_ms;
    report.requests_made = result.requests_made;
    report.outcome = result.outcome;
    return report;
}

// Per-iteration seeds derive from the master seed by the documented
// splitting rule, so iterations are order-independent and parallelize
// freely; results are ordered by iteration index.
inline std::uint64_t iteration_seed(std::uint64_t master_seed, std::uint64_t iteration) {
    return derive_seed(master_seed, 0x17e70000ULL + iteration);
}

inline std::vector<AttackReport> run_matrix(const SimConfig& config, Scenario scenario,
                                            double load_level, std::size_t iterations,
                                            std::uint64_t master_seed, unsigned workers = 0) {
    const auto secrets = scenario_secrets_cached(config.secrets, master_seed);
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<AttackReport> reports(iterations);
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= iterations) return;
            try {
                AttackReport r = run_iteration(config, scenario, load_level,
                                               iteration_seed(master_seed, i), *secrets);
                r.iteration = i;
                reports[i] = std::move(r);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                cursor.store(iterations);
                return;
            }
        }
    };
    if (workers <= 1 || iterations <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return reports;
}

// --- statistics -------------------------------------------------------

inline double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

inline double median_absolute_deviation(const std::vector<double>& values) {
    const double med = median(values);
    std::vector<double> dev;
    dev.reserve(values.size());
    for (double v : values) dev.push_back(std::abs(v - med));
    return median(std::move(dev));
}

struct SummaryStats {
    double median_extracted = 0;
    double mad_extracted = 0;
    double median_observation_ms = 0;
    double median_search_ms = 0;
    double success_rate = 0;  // in [0, 1]
    struct HistBin {
        std::int64_t bin_ms;
        std::uint64_t count;
        double normalized;
    };
    std::vector<HistBin> reaction_histogram;  // 1 ms bins; max bin normalized to 1
};

// Reaction times are binned over the successful attacks, mirroring how
// the reaction distribution is measured.
inline SummaryStats summarize(std::span<const AttackReport> reports) {
    if (reports.empty()) throw std::invalid_argument("summarize: no reports");
    SummaryStats stats;
    std::vector<double> extracted, obs, search;
    std::map<std::int64_t, std::uint64_t> bins;
    std::size_t successes = 0;
    for (const auto& r : reports) {
        extracted.push_back(static_cast<double>(r.extracted_pages));
        obs.push_back(r.observation_ms);
        search.push_back(r.search_ms);
        if (r.success) {
            ++successes;
            bins[static_cast<std::int64_t>(std::floor(r.reaction_time_ms))]++;
        }
    }
    stats.median_extracted = median(extracted);
    stats.mad_extracted = median_absolute_deviation(extracted);
    stats.median_observation_ms = median(obs);
    stats.median_search_ms = median(search);
    stats.success_rate = static_cast<double>(successes) / static_cast<double>(reports.size());
    if (!bins.empty()) {
        std::uint64_t max_count = 0;
        for (auto& [bin, count] : bins) max_count = std::max(max_count, count);
        for (std::int64_t b = 0; b <= bins.rbegin()->first; ++b) {
            const std::uint64_t c = bins.count(b) ? bins.at(b) : 0;
            stats.reaction_histogram.push_back(
                {b, c, static_cast<double>(c) / static_cast<double>(max_count)});
        }
    }
    return stats;
}

// --- CSV emission -----------------------------------------------------

inline void write_reports_csv(std::ostream& out, std::span<const AttackReport> reports) {
    out << "scenario,load_level,iteration,seed,success,reaction_ms,tracked_pages,filtered_pages,"
           "extracted_pages,observation_s,search_s,requests\n";
    char buf[64];
    for (const auto& r : reports) {
        out << scenario_name(r.scenario) << ',' << r.load_level << ',' << r.iteration << ','
            << r.seed << ',' << (r.success ? 1 : 0) << ',';
        std::snprintf(buf, sizeof buf, "%.3f", r.reaction_time_ms);
        out << buf << ',' << r.tracked_pages << ',' << r.filtered_pages << ','
            << r.extracted_pages << ',';
        std::snprintf(buf, sizeof buf, "%.6f", r.observation_ms / 1000.0);
        out << buf << ',';
        std::snprintf(buf, sizeof buf, "%.6f", r.search_ms / 1000.0);
        out << buf << ',' << r.requests_made << '\n';
    }
}

inline void write_histogram_csv(std::ostream& out, const SummaryStats& stats) {
    out << "bin_ms,count,normalized\n";
    char buf[32];
    for (const auto& bin : stats.reaction_histogram) {
        std::snprintf(buf, sizeof buf, "%.6f", bin.normalized);
        out << bin.bin_ms << ',' << bin.count << ',' << buf << '\n';
    }
}

// --- streaming dump scanner (CLI backend) ------------------------------

struct ScanRequest {
    enum class Kind { Rsa, Aes, KeyContext } kind = Kind::Aes;
    // rsa
    Mpz modulus;
    unsigned factor_bits = 0;
    bool scan_little = true;
    bool scan_big = false;
    // aes
    aes::Variant variant = aes::Variant::k256;
    int tolerance = 0;
    std::size_t stride = 1;
};

// Streams a raw dump through the requested analyzer in page-sized blocks,
// carrying enough overlap that candidates straddling block boundaries are
// found exactly once. The callback receives absolute file offsets; the
// note distinguishes the byte order for dual-endian scans.
inline std::uint64_t scan_stream(
    std::istream& in, const ScanRequest& request,
    const std::function<void(std::uint64_t, const analyzers::KeyCandidate&, const char*)>& emit) {
    std::size_t footprint = 0;
    switch (request.kind) {
        case ScanRequest::Kind::Rsa:
            footprint = (request.factor_bits + 7) / 8;
            break;
        case ScanRequest::Kind::Aes:
            footprint = aes::schedule_bytes(request.variant);
            break;
        case ScanRequest::Kind::KeyContext:
            footprint = analyzers::KeyContextLayout::kHeaderSize + 64;
            break;
    }
    const std::size_t carry = footprint - 1;
    const std::size_t block = 256 * kPageSize;

    std::vector<std::uint8_t> buffer;
    std::uint64_t buffer_base = 0;  // absolute offset of buffer[0]
    std::uint64_t prev_end = 0;     // absolute end of the previous buffer
    std::uint64_t total = 0;

    auto candidate_footprint = [&](const analyzers::KeyCandidate& c) -> std::uint64_t {
        if (request.kind == ScanRequest::Kind::KeyContext)
            return analyzers::KeyContextLayout::kHeaderSize + c.material.size();
        return footprint;
    };
    auto process = [&](Endianness endian, const char* note) {
        std::vector<analyzers::KeyCandidate> hits;
        switch (request.kind) {
            case ScanRequest::Kind::Rsa:
                hits = analyzers::scan_rsa_factor(buffer, request.modulus, request.factor_bits,
                                                  endian, request.stride);
                break;
            case ScanRequest::Kind::Aes:
                hits = analyzers::scan_aes_schedules(buffer, request.variant, request.tolerance,
                                                     request.stride);
                break;
            case ScanRequest::Kind::KeyContext:
                hits = analyzers::scan_key_context(buffer);
                break;
        }
        for (const auto& c : hits) {
            const std::uint64_t abs = buffer_base + c.offset;
            if (abs + candidate_footprint(c) <= prev_end) continue;  // already reported
            emit(abs, c, note);
            ++total;
        }
    };

    while (in) {
        const std::size_t keep = buffer.size() > carry ? carry : buffer.size();
        if (keep > 0 && keep < buffer.size())
            buffer.erase(buffer.begin(), buffer.end() - static_cast<std::ptrdiff_t>(keep));
        buffer_base = prev_end - keep;
        buffer.resize(keep + block);
        in.read(reinterpret_cast<char*>(buffer.data() + keep), static_cast<std::streamsize>(block));
        const std::size_t got = static_cast<std::size_t>(in.gcount());
        buffer.resize(keep + got);
        if (got == 0) break;
        if (request.kind == ScanRequest::Kind::Rsa) {
            if (request.scan_little) process(Endianness::Little, "le");
            if (request.scan_big) process(Endianness::Big, "be");
        } else {
            process(Endianness::Little, "");
        }
        prev_end = buffer_base + buffer.size();
    }
    return total;
}

}  // namespace pagehunt::harness
