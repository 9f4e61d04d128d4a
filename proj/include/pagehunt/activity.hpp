#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pagehunt/guest_memory.hpp"
#include "pagehunt/prng.hpp"

namespace pagehunt {

enum class ActivityKind : int { TlsHandshakeNginx = 0, TlsHandshakeApache = 1, SshHandshake = 2, DiskWrite = 3 };

constexpr int kActivityKindCount = 4;

inline const char* activity_kind_name(ActivityKind k) {
    switch (k) {
        case ActivityKind::TlsHandshakeNginx: return "tls-handshake-nginx";
        case ActivityKind::TlsHandshakeApache: return "tls-handshake-apache";
        case ActivityKind::SshHandshake: return "ssh-handshake";
        case ActivityKind::DiskWrite: return "disk-write";
    }
    return "?";
}

enum class EventTag : int { ChangeCipherSpec = 0, SshNewKeys = 1, DiskImageWrite = 2 };

inline const char* event_tag_name(EventTag t) {
    switch (t) {
        case EventTag::ChangeCipherSpec: return "change-cipher-spec";
        case EventTag::SshNewKeys: return "ssh-new-keys";
        case EventTag::DiskImageWrite: return "disk-image-write";
    }
    return "?";
}

// The hypervisor-observable event that concludes an activity. In a real
// deployment these map onto the handshake-final packet (matchable with a
// tcpdump filter) or an inotify write on the disk image file.
constexpr EventTag end_event_tag(ActivityKind k) {
    switch (k) {
        case ActivityKind::TlsHandshakeNginx:
        case ActivityKind::TlsHandshakeApache:
            return EventTag::ChangeCipherSpec;
        case ActivityKind::SshHandshake:
            return EventTag::SshNewKeys;
        case ActivityKind::DiskWrite:
            return EventTag::DiskImageWrite;
    }
    return EventTag::DiskImageWrite;
}

struct ObservableEvent {
    TimeUs time_us = 0;
    EventTag tag = EventTag::ChangeCipherSpec;
    std::uint64_t activity_id = 0;
    ActivityKind kind = ActivityKind::TlsHandshakeNginx;
};

// Symbolic page reference inside a template trace, resolved at activity
// instantiation: shared pages are fixed per kind, resource pages depend on
// the instance's chosen web resource, instance pages come from the kind's
// recycled buffer pool, and secret slots resolve to the planted secret's
// page set.
struct PageRef {
    enum class Kind : std::uint8_t { Shared, Resource, Instance, Secret } kind = Kind::Shared;
    std::uint32_t index = 0;
};

struct TraceEntry {
    TimeUs offset_us = 0;
    PageRef page;
    AccessType type = AccessType::Read;
    bool is_use = false;  // access to the targeted secret's page set
};

// A scripted activity: timed page accesses, the secret-use accesses, and
// the observable end event. Offsets are nondecreasing; the last use
// precedes the end event by the critical-window width.
struct ActivityTemplate {
    ActivityKind kind = ActivityKind::TlsHandshakeNginx;
    std::vector<TraceEntry> trace;
    std::vector<TimeUs> use_offsets;
    TimeUs end_event_offset = 0;
    EventTag end_event = EventTag::ChangeCipherSpec;
    std::optional<TimeUs> session_duration_us;  // SSH: key copy lifetime
    std::uint32_t instance_page_count = 0;      // distinct Instance slots
    std::uint32_t resource_page_count = 0;

    TimeUs critical_window_us() const {
        if (use_offsets.empty()) return 0;
        return end_event_offset - use_offsets.back();
    }
};

// Calibration block a template is generated from. These are data-level
// knobs (ship defaults, recalibrate via config file): page counts set the
// tracked-list shape, the execute counts set the preprocessing filter
// yield, and the critical window sets the failure probability.
struct TemplateParams {
    double duration_ms = 30.0;          // Activity_End offset
    double critical_window_us = 10.0;   // end offset minus last use offset
    int shared_pages = 12;
    int shared_exec = 4;
    int pre_use_pages = 24;
    int pre_use_exec = 6;
    int tail_pages = 133;               // fresh pages between use and end
    int tail_exec = 28;
    AccessType use_access = AccessType::Read;
    double session_duration_ms = 0.0;   // > 0 for SSH
    bool two_page_secret = false;
};

// Expands a parameter block into a concrete trace. Layout of one
// activity:  shared pages, then the web resource pages, then pre-use
// instance pages, the secret use(s), and the fresh tail that falls inside
// the critical window.
inline ActivityTemplate build_template(ActivityKind kind, const TemplateParams& p) {
    if (p.critical_window_us < 1.0) throw std::invalid_argument("critical window must be >= 1 us");
    if (p.duration_ms * 1000.0 <= p.critical_window_us)
        throw std::invalid_argument("duration must exceed the critical window");

    ActivityTemplate t;
    t.kind = kind;
    t.end_event = end_event_tag(kind);
    t.end_event_offset = ms_to_us(p.duration_ms);
    if (p.session_duration_ms > 0) t.session_duration_us = ms_to_us(p.session_duration_ms);

    const TimeUs use_off = t.end_event_offset - static_cast<TimeUs>(p.critical_window_us + 0.5);
    const bool web = kind == ActivityKind::TlsHandshakeNginx || kind == ActivityKind::TlsHandshakeApache;
    t.resource_page_count = web ? 3 : 0;

    auto push = [&](TimeUs off, PageRef ref, AccessType type, bool use = false) {
        t.trace.push_back({off, ref, type, use});
    };

    // Shared pages: server code and static data, front-loaded.
    const TimeUs shared_span = use_off / 5;
    for (int i = 0; i < p.shared_pages; ++i) {
        const TimeUs off = shared_span * (i + 1) / (p.shared_pages + 1);
        push(off, {PageRef::Kind::Shared, static_cast<std::uint32_t>(i)},
             i < p.shared_exec ? AccessType::Execute : AccessType::Read);
    }
    for (std::uint32_t i = 0; i < t.resource_page_count; ++i)
        push(shared_span + static_cast<TimeUs>(i) + 1, {PageRef::Kind::Resource, i}, AccessType::Read);

    // Per-instance working pages touched before the secret use.
    std::uint32_t instance_slot = 0;
    for (int i = 0; i < p.pre_use_pages; ++i) {
        const TimeUs off = shared_span + (use_off - shared_span) * (i + 1) / (p.pre_use_pages + 1);
        AccessType type = i < p.pre_use_exec ? AccessType::Execute
                                             : (i % 3 == 2 ? AccessType::Write : AccessType::Read);
        push(off, {PageRef::Kind::Instance, instance_slot++}, type);
    }

    // The secret use(s); a two-page secret is read in full.
    push(use_off, {PageRef::Kind::Secret, 0}, p.use_access, true);
    if (p.two_page_secret) push(use_off, {PageRef::Kind::Secret, 1}, p.use_access, true);
    t.use_offsets.push_back(use_off);

    // Fresh pages inside the critical window: tracked after the use, hence
    // extracted before it in the backward search.
    const TimeUs window = t.end_event_offset - use_off;
    for (int i = 0; i < p.tail_pages; ++i) {
        const TimeUs off = use_off + std::max<TimeUs>(1, window * (i + 1) / (p.tail_pages + 1));
        // spread execute accesses through the tail rather than bunching them
        const bool exec = p.tail_pages > 0 && p.tail_exec > 0 &&
                          (static_cast<std::int64_t>(i) * p.tail_exec) / p.tail_pages !=
                              (static_cast<std::int64_t>(i + 1) * p.tail_exec) / p.tail_pages;
        AccessType type = exec ? AccessType::Execute
                               : (i % 2 == 0 ? AccessType::Read : AccessType::Write);
        push(off, {PageRef::Kind::Instance, instance_slot++}, type);
    }

    t.instance_page_count = instance_slot;
    std::stable_sort(t.trace.begin(), t.trace.end(),
                     [](const TraceEntry& a, const TraceEntry& b) { return a.offset_us < b.offset_us; });
    return t;
}

}  // namespace pagehunt
