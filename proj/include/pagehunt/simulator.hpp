#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "pagehunt/activity.hpp"
#include "pagehunt/guest_memory.hpp"
#include "pagehunt/prng.hpp"
#include "pagehunt/tracker.hpp"
#include "pagehunt/workload.hpp"

namespace pagehunt {

// Attacker reaction model: the delay between an observable end event and
// the actual tracking stop. TLS packet capture reacts slower under load;
// disk write interception is effectively constant.
struct DelayParams {
    double base_ms = 1.0;
    double per_load_ms = 0.0;
    double cap_ms = 1.0;
    double jitter_ms = 0.0;

    double mode_for_load(double load) const {
        const double m = base_ms + per_load_ms * (load > 1.0 ? load - 1.0 : 0.0);
        return m < cap_ms ? m : cap_ms;
    }
};

struct DelayModel {
    DelayParams nginx_ccs{8.0, 0.5, 20.0, 4.0};
    DelayParams apache_ccs{8.0, 1.0 / 3.0, 16.0, 4.0};
    DelayParams ssh_new_keys{4.0, 0.0, 4.0, 1.0};
    DelayParams disk_write{1.0, 0.0, 1.0, 0.0};

    const DelayParams& for_kind(ActivityKind k) const {
        switch (k) {
            case ActivityKind::TlsHandshakeNginx: return nginx_ccs;
            case ActivityKind::TlsHandshakeApache: return apache_ccs;
            case ActivityKind::SshHandshake: return ssh_new_keys;
            case ActivityKind::DiskWrite: return disk_write;
        }
        return disk_write;
    }

    TimeUs sample_us(ActivityKind k, double load, Rng& rng) const {
        const DelayParams& p = for_kind(k);
        const double mode = p.mode_for_load(load);
        double v = rng.triangular(mode - p.jitter_ms, mode, mode + p.jitter_ms);
        if (v < 0) v = 0;
        return ms_to_us(v);
    }
};

// Guest-physical address-space plan: per-kind shared pages and recycled
// buffer pools, per-server resource pages, fixed secret placements, and a
// region for per-session SSH key copies. Pool recycling is what makes a
// service's fresh-page rate decay over a long observation: once the pool
// has wrapped, its pages have all been tracked once already.
struct MemoryLayout {
    struct KindRegion {
        GpaPage shared_base = 0;
        std::uint32_t shared_count = 0;
        GpaPage pool_base = 0;
        std::uint32_t pool_size = 0;
    };

    std::array<KindRegion, kActivityKindCount> regions{};
    std::array<GpaPage, 2> resource_base{};  // nginx, apache
    std::uint32_t resource_count = 11;

    GpaPage nginx_key_page = 0;
    std::size_t nginx_key_offset = 0;
    GpaPage apache_key_page = 0;
    std::size_t apache_key_offset = 0;
    GpaPage fde_page = 0;
    std::size_t fde_schedule_offset = 0;
    std::size_t fde_context_offset = 0;

    GpaPage ssh_region_base = 0;
    std::uint32_t ssh_region_size = 64;
    std::size_t ssh_key_offset = 800;

    GpaPage end_page = 0;
};

struct PoolSizes {
    std::uint32_t nginx = 1500;
    std::uint32_t apache = 1500;
    std::uint32_t ssh = 600;
    std::uint32_t kernel = 3000;
    std::uint32_t ssh_key_region = 64;
};

inline MemoryLayout make_layout(const std::array<ActivityTemplate, kActivityKindCount>& templates,
                                std::uint32_t resource_count, const PoolSizes& pools,
                                GpaPage num_pages) {
    MemoryLayout lay;
    lay.resource_count = resource_count;
    GpaPage next = 256;
    auto take = [&](GpaPage count) {
        const GpaPage base = next;
        next += count;
        return base;
    };

    const std::array<std::uint32_t, 4> pool_sizes{pools.nginx, pools.apache, pools.ssh, pools.kernel};
    for (int k = 0; k < kActivityKindCount; ++k) {
        auto& reg = lay.regions[static_cast<std::size_t>(k)];
        std::uint32_t shared = 0;
        for (const auto& e : templates[static_cast<std::size_t>(k)].trace)
            if (e.page.kind == PageRef::Kind::Shared && e.page.index + 1 > shared)
                shared = e.page.index + 1;
        reg.shared_count = shared;
        reg.shared_base = take(shared + 4);
        reg.pool_size = std::max<std::uint32_t>(1, pool_sizes[static_cast<std::size_t>(k)]);
        reg.pool_base = take(reg.pool_size);
    }
    lay.resource_base[0] = take(static_cast<GpaPage>(resource_count) * 3);
    lay.resource_base[1] = take(static_cast<GpaPage>(resource_count) * 3);

    lay.nginx_key_page = take(4);
    lay.nginx_key_offset = 1100;
    lay.apache_key_page = take(4);
    lay.apache_key_offset = 3900;  // a 256-byte factor here crosses into the next page
    lay.fde_page = take(4);
    lay.fde_schedule_offset = 512;
    lay.fde_context_offset = 2048;

    lay.ssh_region_size = std::max<std::uint32_t>(1, pools.ssh_key_region);
    lay.ssh_region_base = take(lay.ssh_region_size);
    lay.end_page = next;
    if (next > num_pages) throw std::invalid_argument("memory layout does not fit num_pages");
    return lay;
}

// Pages of the statically planted secrets, per activity kind. SSH key
// copies are planted per session instead; each sshd child holds its own
// copy and purges it when the session ends.
struct SecretPlan {
    std::array<std::vector<GpaPage>, kActivityKindCount> static_pages{};
    const RsaKey* ssh_key = nullptr;
    Endianness ssh_endian = Endianness::Little;
};

struct RunHooks {
    std::function<void(GpaPage, AccessType, TimeUs)> on_access;
    std::function<void(const ObservableEvent&)> on_event;
};

// Deterministic discrete-event engine. Merges concurrent activity traces
// in global (time, activity id, trace index) order, emits observable end
// events, applies pending secret purges before delivering later accesses,
// and feeds every page access to the tracker.
class Simulation {
  public:
    Simulation(GuestMemory& memory, std::array<ActivityTemplate, kActivityKindCount> templates,
               MemoryLayout layout, SecretPlan secrets, WorkloadConfig workload, DelayModel delays,
               std::uint64_t seed)
        : mem_(&memory),
          templates_(std::move(templates)),
          layout_(layout),
          secrets_(std::move(secrets)),
          workload_(workload),
          delays_(delays),
          delay_rng_(derive_seed(seed, 0xde1a)),
          workload_seed_(derive_seed(seed, 0x4a77)) {}

    // Processes the given arrivals until until_us, returning the
    // observable-event log. Every page access is offered to the hooks.
    std::vector<ObservableEvent> run(std::vector<Arrival> arrivals, TimeUs until_us,
                                     const RunHooks& hooks = {}) {
        std::sort(arrivals.begin(), arrivals.end(),
                  [](const Arrival& a, const Arrival& b) { return a.time_us < b.time_us; });
        Drive dc;
        dc.until = until_us;
        dc.hooks = &hooks;
        std::vector<ObservableEvent> log;
        dc.log = &log;
        Feed feed{&arrivals, 0, std::nullopt, std::nullopt};
        drive(feed, dc);
        return log;
    }

    struct ObserveResult {
        TrackingSession session;
        bool stopped = false;
        TimeUs stop_time_us = 0;
        TimeUs last_use_us = -1;  // last target-secret use delivered before the stop
        ObservableEvent stop_event{};
    };

    // Observation phase: the workload runs from t = 0; tracking starts at
    // start_us and stops one sampled detection delay after the first end
    // event of the target kind at or after start_us. Activities entirely
    // before start_us only advance pool cursors and secret plantings.
    ObserveResult observe(TimeUs start_us, ActivityKind target, TimeUs max_sim_us,
                          std::vector<Arrival> injected = {}) {
        std::sort(injected.begin(), injected.end(),
                  [](const Arrival& a, const Arrival& b) { return a.time_us < b.time_us; });
        ObserveResult result{TrackingSession::start(*mem_, start_us)};
        Drive dc;
        dc.until = max_sim_us;
        dc.session = &result.session;
        dc.target = target;
        dc.has_target = true;
        dc.items_from = start_us;
        Feed feed{injected.empty() ? nullptr : &injected, 0,
                  ArrivalStream(workload_, workload_seed_), std::nullopt};
        drive(feed, dc);
        result.session.close();
        result.stopped = dc.stop_scheduled;
        result.stop_time_us = dc.stop_time;
        result.last_use_us = dc.last_use;
        result.stop_event = dc.stop_event;
        return result;
    }

    const MemoryLayout& layout() const { return layout_; }
    const ActivityTemplate& activity_template(ActivityKind k) const {
        return templates_[static_cast<std::size_t>(k)];
    }

  private:
    struct Instance {
        std::uint64_t id = 0;
        ActivityKind kind = ActivityKind::TlsHandshakeNginx;
        TimeUs arrival_us = 0;
        std::uint32_t resource = 0;
        std::vector<GpaPage> instance_pages;
        std::vector<GpaPage> secret_pages;
    };

    // rank 0 = arrival, 1..n = trace entry (idx = rank - 1), n + 1 = end event
    struct Item {
        TimeUs t = 0;
        std::uint64_t activity_id = 0;
        std::uint32_t rank = 0;
        bool operator>(const Item& o) const {
            if (t != o.t) return t > o.t;
            if (activity_id != o.activity_id) return activity_id > o.activity_id;
            return rank > o.rank;
        }
    };

    // Two-way merge of an optional sorted arrival list and the lazy
    // workload stream.
    struct Feed {
        const std::vector<Arrival>* list = nullptr;
        std::size_t pos = 0;
        std::optional<ArrivalStream> stream;
        std::optional<Arrival> stream_next;

        std::optional<Arrival> next() {
            if (stream && !stream_next) stream_next = stream->next();
            const Arrival* from_list = list && pos < list->size() ? &(*list)[pos] : nullptr;
            if (from_list && (!stream_next || from_list->time_us <= stream_next->time_us)) {
                ++pos;
                return *from_list;
            }
            if (stream_next) {
                Arrival a = *stream_next;
                stream_next.reset();
                return a;
            }
            return std::nullopt;
        }
    };

    struct Drive {
        TimeUs until = std::numeric_limits<TimeUs>::max();
        TrackingSession* session = nullptr;
        ActivityKind target = ActivityKind::TlsHandshakeNginx;
        bool has_target = false;
        TimeUs items_from = 0;
        const RunHooks* hooks = nullptr;
        std::vector<ObservableEvent>* log = nullptr;

        bool stop_scheduled = false;
        TimeUs stop_time = 0;
        TimeUs last_use = -1;
        ObservableEvent stop_event{};
    };

    void drive(Feed& feed, Drive& dc) {
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        std::unordered_map<std::uint64_t, Arrival> pending;
        std::unordered_map<std::uint64_t, Instance> live;
        std::uint64_t next_id = 1;

        auto feed_one = [&] {
            if (auto a = feed.next()) {
                const std::uint64_t id = next_id++;
                pending.emplace(id, *a);
                heap.push(Item{a->time_us, id, 0});
            }
        };
        feed_one();

        while (!heap.empty()) {
            const Item it = heap.top();
            if (it.t > dc.until) break;
            if (dc.stop_scheduled && it.t > dc.stop_time) break;
            heap.pop();
            mem_->advance_to(it.t);

            if (it.rank == 0) {
                const Arrival a = pending.at(it.activity_id);
                pending.erase(it.activity_id);
                const auto& tmpl = templates_[static_cast<std::size_t>(a.kind)];
                Instance inst = spawn(a, it.activity_id);
                // activities that end before tracking starts leave no
                // observable items, only their side effects
                if (a.time_us + tmpl.end_event_offset >= dc.items_from) {
                    for (std::uint32_t i = 0; i < tmpl.trace.size(); ++i)
                        heap.push(Item{a.time_us + tmpl.trace[i].offset_us, it.activity_id, i + 1});
                    heap.push(Item{a.time_us + tmpl.end_event_offset, it.activity_id,
                                   static_cast<std::uint32_t>(tmpl.trace.size()) + 1});
                    live.emplace(it.activity_id, std::move(inst));
                }
                feed_one();
                continue;
            }

            Instance& inst = live.at(it.activity_id);
            const auto& tmpl = templates_[static_cast<std::size_t>(inst.kind)];
            if (it.rank <= tmpl.trace.size()) {
                const TraceEntry& entry = tmpl.trace[it.rank - 1];
                const GpaPage page = resolve(inst, entry.page);
                if (dc.session) dc.session->on_access(page, entry.type, it.t);
                if (dc.hooks && dc.hooks->on_access) dc.hooks->on_access(page, entry.type, it.t);
                if (entry.is_use && dc.has_target && inst.kind == dc.target && it.t > dc.last_use)
                    dc.last_use = it.t;
            } else {
                const ObservableEvent ev{it.t, tmpl.end_event, it.activity_id, inst.kind};
                if (dc.log) dc.log->push_back(ev);
                if (dc.hooks && dc.hooks->on_event) dc.hooks->on_event(ev);
                if (dc.session && dc.has_target && !dc.stop_scheduled && ev.kind == dc.target &&
                    ev.time_us >= dc.session->start_time_us()) {
                    const TimeUs delay =
                        delays_.sample_us(ev.kind, workload_.load_level, delay_rng_);
                    dc.stop_time = dc.session->schedule_stop(ev.time_us, delay);
                    dc.stop_scheduled = true;
                    dc.stop_event = ev;
                }
                live.erase(it.activity_id);
            }
        }
    }

    GpaPage resolve(const Instance& inst, const PageRef& ref) const {
        const auto& reg = layout_.regions[static_cast<std::size_t>(inst.kind)];
        switch (ref.kind) {
            case PageRef::Kind::Shared:
                return reg.shared_base + ref.index;
            case PageRef::Kind::Resource: {
                const std::size_t server = inst.kind == ActivityKind::TlsHandshakeApache ? 1 : 0;
                return layout_.resource_base[server] + inst.resource * 3 + ref.index;
            }
            case PageRef::Kind::Instance:
                return inst.instance_pages[ref.index];
            case PageRef::Kind::Secret:
                if (inst.secret_pages.empty()) return reg.shared_base;
                return inst.secret_pages[ref.index < inst.secret_pages.size()
                                             ? ref.index
                                             : inst.secret_pages.size() - 1];
        }
        return reg.shared_base;
    }

    Instance spawn(const Arrival& a, std::uint64_t id) {
        Instance inst;
        inst.id = id;
        inst.kind = a.kind;
        inst.arrival_us = a.time_us;
        inst.resource = a.resource % layout_.resource_count;
        const auto& tmpl = templates_[static_cast<std::size_t>(a.kind)];
        const auto& reg = layout_.regions[static_cast<std::size_t>(a.kind)];
        inst.instance_pages.reserve(tmpl.instance_page_count);
        auto& cursor = pool_cursor_[static_cast<std::size_t>(a.kind)];
        for (std::uint32_t i = 0; i < tmpl.instance_page_count; ++i)
            inst.instance_pages.push_back(reg.pool_base + (cursor + i) % reg.pool_size);
        cursor = (cursor + tmpl.instance_page_count) % reg.pool_size;

        if (a.kind == ActivityKind::SshHandshake && secrets_.ssh_key != nullptr) {
            const GpaPage page = layout_.ssh_region_base + (ssh_cursor_ % layout_.ssh_region_size);
            ssh_cursor_++;
            SecretSpec spec;
            spec.kind = RsaFactorSecret{secrets_.ssh_key->modulus, secrets_.ssh_key->p,
                                        secrets_.ssh_key->factor_bits, secrets_.ssh_endian};
            spec.gpa_page = page;
            spec.byte_offset = layout_.ssh_key_offset;
            spec.lifetime_us = tmpl.session_duration_us;
            mem_->place_secret(spec);
            inst.secret_pages = {page};
        } else {
            inst.secret_pages = secrets_.static_pages[static_cast<std::size_t>(a.kind)];
        }
        return inst;
    }

    GuestMemory* mem_;
    std::array<ActivityTemplate, kActivityKindCount> templates_;
    MemoryLayout layout_;
    SecretPlan secrets_;
    WorkloadConfig workload_;
    DelayModel delays_;
    Rng delay_rng_;
    std::uint64_t workload_seed_;
    std::array<std::uint64_t, kActivityKindCount> pool_cursor_{};
    std::uint64_t ssh_cursor_ = 0;
};

}  // namespace pagehunt
