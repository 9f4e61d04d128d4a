#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pagehunt/guest_memory.hpp"
#include "pagehunt/prng.hpp"

namespace pagehunt {

// One tracked page access: at most one record per page per session, taken
// at the page's first access after Tracking_Start.
struct AccessRecord {
    GpaPage gpa_page = 0;
    TimeUs time_us = 0;
    AccessType access_type = AccessType::Read;
};

// Observation-phase page-access tracking. Starting a session invalidates
// every guest mapping (marks every translation entry tracked); each access
// to a still-tracked page produces a record and clears the flag, so a page
// is recorded exactly once. The session stops a configurable detection
// delay after the trigger event; accesses arriving in (event, stop] are
// still recorded.
class TrackingSession {
  public:
    static TrackingSession start(GuestMemory& memory, TimeUs at_us) {
        return TrackingSession(memory, at_us);
    }

    TrackingSession(TrackingSession&& o) noexcept
        : memory_(o.memory_),
          start_time_(o.start_time_),
          stop_time_(o.stop_time_),
          closed_(o.closed_),
          records_(std::move(o.records_)) {
        o.memory_ = nullptr;
        o.closed_ = true;
    }
    TrackingSession& operator=(TrackingSession&& o) noexcept {
        if (this != &o) {
            release();
            memory_ = o.memory_;
            start_time_ = o.start_time_;
            stop_time_ = o.stop_time_;
            closed_ = o.closed_;
            records_ = std::move(o.records_);
            o.memory_ = nullptr;
            o.closed_ = true;
        }
        return *this;
    }
    TrackingSession(const TrackingSession&) = delete;
    TrackingSession& operator=(const TrackingSession&) = delete;
    ~TrackingSession() { release(); }

    // Offer an access to the session. Returns the new record if the page
    // was still tracked, nothing otherwise.
    std::optional<AccessRecord> on_access(GpaPage gpa, AccessType type, TimeUs at_us) {
        if (closed_) throw std::logic_error("tracking session is closed");
        if (at_us < start_time_) return std::nullopt;
        if (stop_time_ && at_us > *stop_time_) return std::nullopt;
        if (!memory_->consume_tracked(gpa)) return std::nullopt;
        AccessRecord rec{gpa, at_us, type};
        records_.push_back(rec);
        return rec;
    }

    // Schedules the stop: stop_time = trigger time + detection delay.
    // Accesses up to and including stop_time keep being recorded until
    // close() is called.
    TimeUs schedule_stop(TimeUs event_time_us, TimeUs detection_delay_us) {
        if (closed_) throw std::logic_error("tracking session is closed");
        stop_time_ = event_time_us + detection_delay_us;
        return *stop_time_;
    }

    void close() {
        if (!stop_time_) stop_time_ = start_time_;
        if (!closed_) {
            closed_ = true;
            if (memory_) memory_->end_tracking_session();
        }
    }

    bool closed() const { return closed_; }
    TimeUs start_time_us() const { return start_time_; }
    std::optional<TimeUs> stop_time_us() const { return stop_time_; }
    const std::vector<AccessRecord>& records() const { return records_; }

  private:
    TrackingSession(GuestMemory& memory, TimeUs at_us) : memory_(&memory), start_time_(at_us) {
        memory.begin_tracking_session();
    }

    void release() {
        if (!closed_ && memory_) {
            memory_->end_tracking_session();
            closed_ = true;
        }
    }

    GuestMemory* memory_;
    TimeUs start_time_;
    std::optional<TimeUs> stop_time_;
    bool closed_ = false;
    std::vector<AccessRecord> records_;
};

}  // namespace pagehunt
