#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <variant>
#include <vector>

#include "pagehunt/aes.hpp"
#include "pagehunt/analyzers.hpp"
#include "pagehunt/bigint.hpp"
#include "pagehunt/prng.hpp"

namespace pagehunt {

constexpr std::size_t kPageSize = 4096;

using GpaPage = std::uint64_t;

enum class AccessType : std::uint8_t { Read, Write, Execute };

inline const char* access_type_name(AccessType t) {
    switch (t) {
        case AccessType::Read: return "read";
        case AccessType::Write: return "write";
        case AccessType::Execute: return "execute";
    }
    return "?";
}

struct SlatEntry {
    GpaPage host_page = 0;
    bool read = true;
    bool write = true;
    bool execute = true;
    bool tracked = false;
};

// --- planted secrets -------------------------------------------------

struct RsaFactorSecret {
    Mpz modulus;
    Mpz factor;
    unsigned factor_bits = 0;
    Endianness endian = Endianness::Little;
};

struct AesKeySecret {
    aes::Variant variant = aes::Variant::k256;
    std::vector<std::uint8_t> key;
    bool store_schedule = false;
};

struct KeyContextSecret {
    analyzers::KeyContextLayout layout;
    std::vector<std::uint8_t> key;
    std::uint64_t addr1 = 0xffff880000001000ULL;
    std::uint64_t addr2 = 0xffffc90000002000ULL;
};

struct SecretSpec {
    std::variant<RsaFactorSecret, AesKeySecret, KeyContextSecret> kind;
    GpaPage gpa_page = 0;
    std::size_t byte_offset = 0;
    std::optional<TimeUs> lifetime_us;  // purge delay from planting time
};

struct Placement {
    std::vector<GpaPage> pages;  // guest pages containing any secret byte
    GpaPage gpa_page = 0;
    std::size_t byte_offset = 0;
    std::size_t length = 0;
};

// Simulated guest-physical memory behind a second-level translation map.
//
// Page contents are defined lazily: a page reads as a deterministic
// pseudo-random stream keyed by (content seed, host page) until something
// writes to it, at which point the page is materialized in an overlay.
// This keeps multi-gigabyte guests cheap while preserving byte-exact,
// reproducible contents.
//
// Single-writer: one simulation mutates an instance at a time; read-only
// sharing across threads is fine after construction.
class GuestMemory {
  public:
    explicit GuestMemory(GpaPage num_pages) : num_pages_(num_pages) {
        tracked_.assign((num_pages + 63) / 64, 0);
    }

    GpaPage num_pages() const { return num_pages_; }
    static constexpr std::size_t page_size() { return kPageSize; }
    TimeUs now_us() const { return now_us_; }

    // Re-keys every page from a deterministic pseudo-random stream and
    // drops all prior writes. Same seed, same bytes.
    void fill_random(std::uint64_t seed) {
        content_seed_ = seed;
        randomized_ = true;
        overlay_.clear();
    }

    SlatEntry slat(GpaPage gpa) const {
        check_page(gpa);
        SlatEntry e;
        if (auto it = slat_overrides_.find(gpa); it != slat_overrides_.end())
            e = it->second;
        else
            e.host_page = gpa;
        e.tracked = tracked_bit(gpa);
        return e;
    }

    void remap(GpaPage gpa, GpaPage host_page) {
        check_page(gpa);
        if (host_page >= num_pages_) throw std::out_of_range("host page out of range");
        slat_entry(gpa).host_page = host_page;
    }

    void set_permissions(GpaPage gpa, bool r, bool w, bool x) {
        check_page(gpa);
        SlatEntry& e = slat_entry(gpa);
        e.read = r;
        e.write = w;
        e.execute = x;
    }

    // Tracking flags live in the translation map; the tracker drives them.
    // Only one tracking session may be active per memory.
    void begin_tracking_session() {
        if (tracking_session_active_) throw std::logic_error("tracking session already active");
        tracking_session_active_ = true;
        mark_all_tracked();
    }

    void end_tracking_session() { tracking_session_active_ = false; }

    bool tracking_session_active() const { return tracking_session_active_; }

    void mark_all_tracked() {
        std::fill(tracked_.begin(), tracked_.end(), ~std::uint64_t{0});
    }

    // Test-and-clear of the tracked flag; returns whether the page was
    // still tracked (first access since mark_all_tracked).
    bool consume_tracked(GpaPage gpa) {
        check_page(gpa);
        std::uint64_t& word = tracked_[gpa / 64];
        const std::uint64_t bit = std::uint64_t{1} << (gpa % 64);
        if ((word & bit) == 0) return false;
        word &= ~bit;
        return true;
    }

    std::vector<std::uint8_t> read_page(GpaPage gpa) const {
        check_page(gpa);
        const GpaPage host = slat(gpa).host_page;
        std::vector<std::uint8_t> out(kPageSize);
        if (auto it = overlay_.find(host); it != overlay_.end()) {
            std::memcpy(out.data(), it->second.data(), kPageSize);
        } else {
            generate_page(host, out.data());
        }
        return out;
    }

    void write_bytes(GpaPage gpa, std::size_t offset, std::span<const std::uint8_t> bytes) {
        if (offset >= kPageSize) throw std::out_of_range("offset beyond page");
        std::size_t pos = 0;
        GpaPage page = gpa;
        std::size_t in_page = offset;
        while (pos < bytes.size()) {
            check_page(page);
            const std::size_t take = std::min(bytes.size() - pos, kPageSize - in_page);
            std::uint8_t* dst = materialize(slat(page).host_page);
            std::memcpy(dst + in_page, bytes.data() + pos, take);
            pos += take;
            ++page;
            in_page = 0;
        }
    }

    // Writes the secret's byte image at its placement and returns the set
    // of guest pages it occupies. A secret may span at most two adjacent
    // pages. A SecretSpec lifetime schedules the placement to be zeroed at
    // now + lifetime.
    Placement place_secret(const SecretSpec& spec) {
        const std::vector<std::uint8_t> payload = secret_payload(spec);
        if (spec.gpa_page >= num_pages_) throw std::out_of_range("placement page out of range");
        if (spec.byte_offset >= kPageSize) throw std::out_of_range("placement offset beyond page");
        if (spec.byte_offset + payload.size() > 2 * kPageSize)
            throw std::invalid_argument("secret spans more than two pages");

        Placement rec;
        rec.gpa_page = spec.gpa_page;
        rec.byte_offset = spec.byte_offset;
        rec.length = payload.size();
        rec.pages.push_back(spec.gpa_page);
        if (spec.byte_offset + payload.size() > kPageSize) {
            if (spec.gpa_page + 1 >= num_pages_)
                throw std::out_of_range("secret crosses past last page");
            rec.pages.push_back(spec.gpa_page + 1);
        }
        write_bytes(spec.gpa_page, spec.byte_offset, payload);
        if (spec.lifetime_us) schedule_purge(rec, now_us_ + *spec.lifetime_us);
        return rec;
    }

    // Registers zeroing of a placement's byte range at the given simulated
    // time. Host pages are resolved now; a later remap does not move the
    // pending purge.
    void schedule_purge(const Placement& placement, TimeUs at_us) {
        PurgeEntry e;
        e.at_us = at_us;
        std::size_t remaining = placement.length;
        std::size_t in_page = placement.byte_offset;
        GpaPage page = placement.gpa_page;
        while (remaining > 0) {
            const std::size_t take = std::min(remaining, kPageSize - in_page);
            e.segments.push_back({slat(page).host_page, in_page, take});
            remaining -= take;
            ++page;
            in_page = 0;
        }
        purges_.push(std::move(e));
    }

    // Advances the simulated clock, applying any purge whose time has come.
    void advance_to(TimeUs t_us) {
        while (!purges_.empty() && purges_.top().at_us <= t_us) {
            const PurgeEntry e = purges_.top();
            purges_.pop();
            for (const auto& seg : e.segments) {
                std::uint8_t* dst = materialize(seg.host_page);
                std::memset(dst + seg.offset, 0, seg.length);
            }
        }
        if (t_us > now_us_) now_us_ = t_us;
    }

    // Raw dump: guest pages concatenated in ascending order, no header.
    void export_dump(std::ostream& out) const {
        for (GpaPage g = 0; g < num_pages_; ++g) {
            const auto page = read_page(g);
            out.write(reinterpret_cast<const char*>(page.data()),
                      static_cast<std::streamsize>(page.size()));
        }
    }

  private:
    struct PurgeSegment {
        GpaPage host_page;
        std::size_t offset;
        std::size_t length;
    };
    struct PurgeEntry {
        TimeUs at_us;
        std::vector<PurgeSegment> segments;
        bool operator>(const PurgeEntry& o) const { return at_us > o.at_us; }
    };

    void check_page(GpaPage gpa) const {
        if (gpa >= num_pages_) throw std::out_of_range("guest page out of range");
    }

    SlatEntry& slat_entry(GpaPage gpa) {
        auto [it, inserted] = slat_overrides_.try_emplace(gpa);
        if (inserted) it->second.host_page = gpa;
        return it->second;
    }

    bool tracked_bit(GpaPage gpa) const {
        return (tracked_[gpa / 64] >> (gpa % 64)) & 1;
    }

    void generate_page(GpaPage host, std::uint8_t* out) const {
        if (!randomized_) {
            std::memset(out, 0, kPageSize);
            return;
        }
        std::uint64_t state = mix64(content_seed_ ^ (host * 0x9e3779b97f4a7c15ULL + 0x1234567));
        for (std::size_t i = 0; i < kPageSize; i += 8) {
            const std::uint64_t word = splitmix64_next(state);
            std::memcpy(out + i, &word, 8);
        }
    }

    std::uint8_t* materialize(GpaPage host) {
        auto it = overlay_.find(host);
        if (it == overlay_.end()) {
            it = overlay_.emplace(host, std::vector<std::uint8_t>(kPageSize)).first;
            generate_page(host, it->second.data());
        }
        return it->second.data();
    }

    std::vector<std::uint8_t> secret_payload(const SecretSpec& spec) const {
        if (const auto* rsa = std::get_if<RsaFactorSecret>(&spec.kind)) {
            if (!(rsa->factor > 1UL) || !(rsa->factor < rsa->modulus) ||
                !rsa->modulus.divisible_by(rsa->factor))
                throw std::invalid_argument("factor does not divide modulus");
            const std::size_t len = (rsa->factor_bits + 7) / 8;
            return rsa->factor.to_bytes(len, rsa->endian);
        }
        if (const auto* key = std::get_if<AesKeySecret>(&spec.kind)) {
            if (key->key.size() != aes::key_bytes(key->variant))
                throw std::invalid_argument("AES key length does not match variant");
            if (key->store_schedule) return aes::expand_key(key->key, key->variant);
            return key->key;
        }
        const auto& ctx = std::get<KeyContextSecret>(spec.kind);
        if (!ctx.layout.length_allowed(static_cast<std::uint32_t>(ctx.key.size())))
            throw std::invalid_argument("key-context key length not permitted by layout");
        if (ctx.addr1 < ctx.layout.addr_min || ctx.addr1 > ctx.layout.addr_max ||
            ctx.addr2 < ctx.layout.addr_min || ctx.addr2 > ctx.layout.addr_max)
            throw std::invalid_argument("key-context addresses outside kernel range");
        std::vector<std::uint8_t> payload(analyzers::KeyContextLayout::kHeaderSize + ctx.key.size(), 0);
        std::memcpy(payload.data() + analyzers::KeyContextLayout::kAddr1Offset, &ctx.addr1, 8);
        std::memcpy(payload.data() + analyzers::KeyContextLayout::kAddr2Offset, &ctx.addr2, 8);
        const std::uint32_t len = static_cast<std::uint32_t>(ctx.key.size());
        std::memcpy(payload.data() + analyzers::KeyContextLayout::kLenOffset, &len, 4);
        std::copy(ctx.key.begin(), ctx.key.end(),
                  payload.begin() + analyzers::KeyContextLayout::kHeaderSize);
        return payload;
    }

    GpaPage num_pages_;
    std::uint64_t content_seed_ = 0;
    bool randomized_ = false;
    bool tracking_session_active_ = false;
    TimeUs now_us_ = 0;
    std::unordered_map<GpaPage, SlatEntry> slat_overrides_;
    std::unordered_map<GpaPage, std::vector<std::uint8_t>> overlay_;
    std::vector<std::uint64_t> tracked_;
    std::priority_queue<PurgeEntry, std::vector<PurgeEntry>, std::greater<>> purges_;
};

}  // namespace pagehunt
