#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pagehunt/analyzers.hpp"
#include "pagehunt/guest_memory.hpp"
#include "pagehunt/prng.hpp"
#include "pagehunt/tracker.hpp"

namespace pagehunt::searcher {

// Triangular distribution for the per-page extraction latency. spread 0
// degenerates to a constant, which the arithmetic tests rely on.
struct LatencyDistribution {
    double median_ms = 123.0;
    double spread_ms = 30.0;
};

struct SearchConfig {
    bool filter_execute = true;
    bool filter_writes = false;
    bool prioritize_reads = false;
    // Records older than stop - cutoff are deprioritized to the list tail;
    // exhausting the recent region without a hit signals a restart.
    std::optional<double> early_cutoff_ms = 30.0;
    LatencyDistribution extract_latency{};
    double analysis_latency_ms = 50.0;
    std::unordered_set<GpaPage> exclude_pages;  // extracted in failed prior attempts
};

// Preprocessed extraction order: entries run backward in tracking time,
// after filtering, with `recent_count` marking the boundary of the
// pre-cutoff region.
struct CandidateList {
    std::vector<AccessRecord> entries;
    std::size_t recent_count = 0;
    TimeUs stop_time_us = 0;
};

// Filter accesses that cannot represent a use of the secret and prioritize
// the likely ones. Ordering stays backward-in-time within equal priority.
inline CandidateList preprocess(std::span<const AccessRecord> records, TimeUs stop_time_us,
                                const SearchConfig& config) {
    CandidateList out;
    out.stop_time_us = stop_time_us;
    out.entries.reserve(records.size());
    for (auto it = records.rbegin(); it != records.rend(); ++it) {
        if (config.filter_execute && it->access_type == AccessType::Execute) continue;
        if (config.filter_writes && it->access_type == AccessType::Write) continue;
        if (config.exclude_pages.contains(it->gpa_page)) continue;
        out.entries.push_back(*it);
    }

    const TimeUs cutoff_edge = config.early_cutoff_ms
                                   ? stop_time_us - ms_to_us(*config.early_cutoff_ms)
                                   : std::numeric_limits<TimeUs>::min();
    auto priority = [&](const AccessRecord& r) {
        const int old_region = r.time_us < cutoff_edge ? 1 : 0;
        const int non_read =
            config.prioritize_reads && r.access_type != AccessType::Read ? 1 : 0;
        return old_region * 2 + non_read;
    };
    std::stable_sort(out.entries.begin(), out.entries.end(),
                     [&](const AccessRecord& a, const AccessRecord& b) {
                         return priority(a) < priority(b);
                     });
    out.recent_count = static_cast<std::size_t>(
        std::count_if(out.entries.begin(), out.entries.end(),
                      [&](const AccessRecord& r) { return r.time_us >= cutoff_edge; }));
    return out;
}

// Latency-parameterized plaintext extraction oracle. Stands in for the
// repeated remap-and-request loop of the underlying extraction attack:
// returns the current plaintext of the page plus a sampled latency, and
// counts requests as the conspicuousness metric. Page content is captured
// at extraction completion time, so purges racing the search are honored.
class ExtractionOracle {
  public:
    ExtractionOracle(GuestMemory& memory, const LatencyDistribution& latency, std::uint64_t seed)
        : mem_(&memory), latency_(latency), rng_(seed) {}

    struct Extraction {
        std::vector<std::uint8_t> bytes;
        TimeUs latency_us = 0;
    };

    Extraction extract(GpaPage page, TimeUs now_us) {
        const TimeUs lat = sample_latency_us();
        mem_->advance_to(now_us + lat);
        ++requests_;
        return {mem_->read_page(page), lat};
    }

    TimeUs sample_latency_us() {
        double v = rng_.triangular(latency_.median_ms - latency_.spread_ms, latency_.median_ms,
                                   latency_.median_ms + latency_.spread_ms);
        if (v < 0) v = 0;
        return ms_to_us(v);
    }

    std::uint64_t requests() const { return requests_; }

  private:
    GuestMemory* mem_;
    LatencyDistribution latency_;
    Rng rng_;
    std::uint64_t requests_ = 0;
};

// Secret-specific on-the-fly analysis of one extracted buffer. The
// footprint is the candidate's byte span in memory; the searcher uses it
// to limit cross-page analysis to the boundary strip where a straddling
// candidate can actually start.
struct PageAnalyzer {
    std::function<std::optional<analyzers::KeyCandidate>(std::span<const std::uint8_t>)> scan;
    std::size_t footprint = 0;
};

enum class SearchOutcome { Found, Exhausted, CutOff };

inline const char* search_outcome_name(SearchOutcome o) {
    switch (o) {
        case SearchOutcome::Found: return "found";
        case SearchOutcome::Exhausted: return "exhausted";
        case SearchOutcome::CutOff: return "cut-off";
    }
    return "?";
}

struct SearchResult {
    SearchOutcome outcome = SearchOutcome::Exhausted;
    std::optional<analyzers::KeyCandidate> candidate;
    GpaPage found_page = 0;
    std::size_t position_from_end = 0;
    std::size_t extracted_pages = 0;
    std::uint64_t requests_made = 0;
    double search_duration_ms = 0.0;
    double observation_duration_ms = 0.0;  // filled in by the caller
    std::vector<GpaPage> extracted_page_list;
};

// Backward-order extraction with pipelined analysis: the most recently
// tracked pages are extracted first; analysis of chunk i overlaps the
// extraction of chunk i+1, so with analysis no slower than extraction the
// modeled duration is the latency sum plus one trailing analysis. A secret
// spanning two pages is recognized on the concatenation of a page with an
// already-extracted neighbor. Crossing into the deprioritized post-cutoff
// region without a hit returns CutOff: restart and exclude what was
// extracted.
inline SearchResult search(const CandidateList& candidates, GuestMemory& memory,
                           const PageAnalyzer& analyzer, const SearchConfig& config,
                           std::uint64_t latency_seed, TimeUs start_clock_us = 0) {
    SearchResult result;
    ExtractionOracle oracle(memory, config.extract_latency, latency_seed);
    const TimeUs analysis_us = ms_to_us(config.analysis_latency_ms);

    TimeUs extract_done = start_clock_us;
    TimeUs analysis_done = start_clock_us;
    std::unordered_map<GpaPage, std::vector<std::uint8_t>> extracted;

    // A candidate crossing a page boundary starts within footprint - 1
    // bytes of the edge, so joining the two boundary strips is enough.
    const std::size_t strip =
        analyzer.footprint >= 2 ? std::min(analyzer.footprint - 1, kPageSize) : 0;
    auto analyze = [&](GpaPage page,
                       const std::vector<std::uint8_t>& bytes) -> std::optional<analyzers::KeyCandidate> {
        if (auto hit = analyzer.scan(bytes)) return hit;
        if (strip == 0) return std::nullopt;
        std::vector<std::uint8_t> joined;
        joined.reserve(2 * strip);
        if (page > 0) {
            if (auto it = extracted.find(page - 1); it != extracted.end()) {
                joined.assign(it->second.end() - static_cast<std::ptrdiff_t>(strip),
                              it->second.end());
                joined.insert(joined.end(), bytes.begin(),
                              bytes.begin() + static_cast<std::ptrdiff_t>(strip));
                if (auto hit = analyzer.scan(joined)) return hit;
            }
        }
        if (auto it = extracted.find(page + 1); it != extracted.end()) {
            joined.assign(bytes.end() - static_cast<std::ptrdiff_t>(strip), bytes.end());
            joined.insert(joined.end(), it->second.begin(),
                          it->second.begin() + static_cast<std::ptrdiff_t>(strip));
            if (auto hit = analyzer.scan(joined)) return hit;
        }
        return std::nullopt;
    };

    for (std::size_t i = 0; i < candidates.entries.size(); ++i) {
        if (config.early_cutoff_ms && i >= candidates.recent_count) {
            result.outcome = SearchOutcome::CutOff;
            break;
        }
        const AccessRecord& rec = candidates.entries[i];
        auto ext = oracle.extract(rec.gpa_page, extract_done);
        extract_done += ext.latency_us;
        const TimeUs analysis_start = std::max(extract_done, analysis_done);
        analysis_done = analysis_start + analysis_us;

        ++result.extracted_pages;
        result.extracted_page_list.push_back(rec.gpa_page);
        auto hit = analyze(rec.gpa_page, ext.bytes);
        extracted.emplace(rec.gpa_page, std::move(ext.bytes));
        if (hit) {
            result.outcome = SearchOutcome::Found;
            result.candidate = std::move(hit);
            result.found_page = rec.gpa_page;
            result.position_from_end = i + 1;
            break;
        }
    }

    result.requests_made = oracle.requests();
    result.search_duration_ms =
        result.extracted_pages == 0 ? 0.0 : us_to_ms(analysis_done - start_clock_us);
    return result;
}

}  // namespace pagehunt::searcher
