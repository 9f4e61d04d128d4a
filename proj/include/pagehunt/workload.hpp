#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pagehunt/activity.hpp"
#include "pagehunt/prng.hpp"

namespace pagehunt {

struct Rational {
    std::uint64_t num = 0;
    std::uint64_t den = 1;
};

// Client load model: requests arrive as a Poisson process at load_level
// requests per second; each request is a web request with probability
// 300/301 (split equally between the two servers and uniformly over the
// deployed resources) and an SSH login with probability 1/301. Background
// disk writes run on their own jittered cadence, independent of load.
struct WorkloadConfig {
    double load_level = 1.0;  // requests per second
    Rational web_probability{300, 301};
    Rational ssh_probability{1, 301};
    std::uint32_t resource_count = 11;  // per web server
    double ssh_session_ms = 120000.0;
    double disk_flush_period_ms = 4400.0;

    void validate() const {
        if (load_level <= 0) throw std::invalid_argument("load_level must be > 0");
        if (web_probability.den != ssh_probability.den ||
            web_probability.num + ssh_probability.num != web_probability.den)
            throw std::invalid_argument("activity probabilities must sum to 1");
        if (resource_count == 0) throw std::invalid_argument("resource_count must be >= 1");
        if (disk_flush_period_ms <= 0) throw std::invalid_argument("disk cadence must be > 0");
    }
};

struct Arrival {
    TimeUs time_us = 0;
    ActivityKind kind = ActivityKind::TlsHandshakeNginx;
    std::uint32_t resource = 0;
};

// Lazy, deterministic arrival generator: the merged request and disk-write
// streams, in time order. A given (config, seed) always yields the same
// sequence regardless of how far it is consumed.
class ArrivalStream {
  public:
    ArrivalStream(const WorkloadConfig& config, std::uint64_t seed)
        : config_(config), rng_(seed) {
        config.validate();
        next_request_us_ = gap_us();
        next_disk_us_ = disk_gap_us();
    }

    Arrival next() {
        if (next_disk_us_ < next_request_us_) {
            Arrival a{next_disk_us_, ActivityKind::DiskWrite, 0};
            next_disk_us_ += disk_gap_us();
            return a;
        }
        Arrival a;
        a.time_us = next_request_us_;
        const std::uint64_t draw = rng_.bounded(config_.web_probability.den);
        if (draw < config_.ssh_probability.num) {
            a.kind = ActivityKind::SshHandshake;
        } else {
            a.kind = (rng_.next_u64() & 1) ? ActivityKind::TlsHandshakeApache
                                           : ActivityKind::TlsHandshakeNginx;
            a.resource = static_cast<std::uint32_t>(rng_.bounded(config_.resource_count));
        }
        next_request_us_ += gap_us();
        return a;
    }

  private:
    TimeUs gap_us() {
        const double mean_gap_ms = 1000.0 / config_.load_level;
        return std::max<TimeUs>(1, ms_to_us(rng_.exponential(mean_gap_ms)));
    }

    TimeUs disk_gap_us() {
        return std::max<TimeUs>(1, ms_to_us(config_.disk_flush_period_ms * rng_.uniform(0.5, 1.5)));
    }

    WorkloadConfig config_;
    Rng rng_;
    TimeUs next_request_us_ = 0;
    TimeUs next_disk_us_ = 0;
};

// Materialized arrivals up to the horizon; deterministic under the seed.
inline std::vector<Arrival> schedule_workload(const WorkloadConfig& config, double horizon_ms,
                                              std::uint64_t seed) {
    if (horizon_ms <= 0) throw std::invalid_argument("horizon must be > 0");
    const TimeUs horizon_us = ms_to_us(horizon_ms);
    std::vector<Arrival> out;
    ArrivalStream stream(config, seed);
    while (true) {
        Arrival a = stream.next();
        if (a.time_us >= horizon_us) break;
        out.push_back(a);
    }
    return out;
}

// One activity injected at a fixed time, independent of the workload
// process (an attacker-triggered login, for instance).
inline Arrival trigger_activity(ActivityKind kind, double at_ms, std::uint32_t resource = 0) {
    return Arrival{ms_to_us(at_ms), kind, resource};
}

}  // namespace pagehunt
