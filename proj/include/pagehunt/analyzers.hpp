#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pagehunt/aes.hpp"
#include "pagehunt/bigint.hpp"

namespace pagehunt::analyzers {

enum class CandidateKind { RsaFactor, AesKey128, AesKey256, KeyContext };

// One scan hit. `material` holds the recovered bytes exactly as they
// appear in the chunk; `score` is the bit-error count for AES schedule
// matches and 0 for exact matches.
struct KeyCandidate {
    CandidateKind kind;
    std::size_t offset = 0;
    std::vector<std::uint8_t> material;
    int score = 0;
};

// Known-answer probe for candidate verification: a plaintext block and
// its encryption under the true key.
struct AesProbe {
    std::array<std::uint8_t, 16> plaintext{};
    std::array<std::uint8_t, 16> ciphertext{};
};

// Synthetic stand-in for the kernel's in-memory key record. The record is
// a 40-byte header followed by the key: two pointer fields that must fall
// into the canonical upper kernel address range, a key-length field
// restricted to {16, 32, 64}, four bytes of padding and sixteen reserved
// bytes, neither constrained. Real kernels lay this out differently; the
// layout here exists so the structure-gated scan has something concrete
// to match.
struct KeyContextLayout {
    std::uint64_t addr_min = 0xffff800000000000ULL;
    std::uint64_t addr_max = 0xffffffffffffffffULL;
    std::array<std::uint32_t, 3> allowed_key_lengths{16, 32, 64};

    static constexpr std::size_t kAddr1Offset = 0;
    static constexpr std::size_t kAddr2Offset = 8;
    static constexpr std::size_t kLenOffset = 16;
    static constexpr std::size_t kPadOffset = 20;
    static constexpr std::size_t kHeaderSize = 40;

    bool length_allowed(std::uint32_t len) const {
        for (auto v : allowed_key_lengths)
            if (v == len) return true;
        return false;
    }
};

inline constexpr KeyContextLayout kDefaultKeyContextLayout{};

namespace detail {

inline std::uint64_t load_u64le(const std::uint8_t* p) {
    std::uint64_t v;
    std::memcpy(&v, p, 8);
    return v;
}

inline std::uint32_t load_u32le(const std::uint8_t* p) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
}

// ---- small-prime residue sieve for the divisibility scan ----
//
// A window value v can only divide the modulus N if v shares no prime
// factor that N lacks. Residues of v modulo small primes are maintainable
// in O(1) per one-byte slide, which rejects most windows before the
// multi-limb division. Two tiers:
//   * byte-sum residues for {3, 5, 17} (256 == 1 mod each), used always;
//   * a rolling Montgomery residue modulo the product of the odd primes
//     3..47, used for wide windows where the division is expensive.

inline constexpr std::array<std::uint32_t, 14> kSievePrimes{3,  5,  7,  11, 13, 17, 19,
                                                            23, 29, 31, 37, 41, 43, 47};

constexpr std::uint64_t sieve_modulus() {
    std::uint64_t m = 1;
    for (auto p : kSievePrimes) m *= p;
    return m;
}

inline constexpr std::uint64_t kSieveM = sieve_modulus();
static_assert(kSieveM == 307444891294245705ULL);
static_assert(kSieveM < (1ULL << 63));

constexpr std::uint64_t mont_nprime() {
    // Newton iteration for -M^-1 mod 2^64.
    std::uint64_t x = 1;
    for (int i = 0; i < 6; ++i) x *= 2 - kSieveM * x;
    return ~x + 1;
}

inline constexpr std::uint64_t kMontNPrime = mont_nprime();
inline constexpr std::uint64_t kMontR =
    static_cast<std::uint64_t>((static_cast<unsigned __int128>(1) << 64) % kSieveM);
inline constexpr std::uint64_t kMontR2 = static_cast<std::uint64_t>(
    (static_cast<unsigned __int128>(kMontR) * kMontR) % kSieveM);

constexpr std::uint64_t montmul(std::uint64_t a, std::uint64_t b) {
    const unsigned __int128 t = static_cast<unsigned __int128>(a) * b;
    const std::uint64_t m = static_cast<std::uint64_t>(t) * kMontNPrime;
    const unsigned __int128 mm = static_cast<unsigned __int128>(m) * kSieveM;
    const std::uint64_t lo = static_cast<std::uint64_t>(t);
    const std::uint64_t hi = static_cast<std::uint64_t>(t >> 64);
    const std::uint64_t mmlo = static_cast<std::uint64_t>(mm);
    const std::uint64_t mmhi = static_cast<std::uint64_t>(mm >> 64);
    // low halves cancel exactly; they only contribute a carry
    const std::uint64_t carry = (lo | mmlo) != 0 ? 1 : 0;
    std::uint64_t r = hi + mmhi + carry;
    if (r >= kSieveM) r -= kSieveM;
    return r;
}

constexpr std::uint64_t montify(std::uint64_t a) { return montmul(a % kSieveM, kMontR2); }
constexpr std::uint64_t demont(std::uint64_t a) { return montmul(a, 1); }

constexpr std::array<std::uint64_t, 256> make_mont_byte_table() {
    std::array<std::uint64_t, 256> t{};
    for (int i = 0; i < 256; ++i) t[static_cast<std::size_t>(i)] = montify(static_cast<std::uint64_t>(i));
    return t;
}

inline constexpr std::array<std::uint64_t, 256> kMontByte = make_mont_byte_table();
inline constexpr std::uint64_t kMont256 = montify(256);

constexpr std::uint64_t inv_mod_sieve(std::uint64_t a) {
    __int128 t = 0, newt = 1;
    __int128 r = static_cast<__int128>(kSieveM), newr = static_cast<__int128>(a);
    while (newr != 0) {
        const __int128 q = r / newr;
        const __int128 t2 = t - q * newt;
        t = newt;
        newt = t2;
        const __int128 r2 = r - q * newr;
        r = newr;
        newr = r2;
    }
    if (t < 0) t += static_cast<__int128>(kSieveM);
    return static_cast<std::uint64_t>(t);
}

inline constexpr std::uint64_t kMontInv256 = montify(inv_mod_sieve(256));
static_assert(demont(montmul(kMontInv256, kMont256)) == 1);

constexpr std::uint64_t mont_pow256(std::size_t exp) {
    std::uint64_t result = montify(1);
    std::uint64_t base = kMont256;
    while (exp != 0) {
        if (exp & 1) result = montmul(result, base);
        base = montmul(base, base);
        exp >>= 1;
    }
    return result;
}

constexpr std::uint64_t mont_sub(std::uint64_t a, std::uint64_t b) {
    return a >= b ? a - b : a + kSieveM - b;
}

// Rolling residue of the current window modulo kSieveM, maintained in the
// Montgomery domain across one-byte slides in either byte order.
class RollingResidue {
  public:
    RollingResidue(const std::uint8_t* window, std::size_t len, Endianness endian)
        : endian_(endian), weight_top_(mont_pow256(len - 1)) {
        // Horner from the most significant byte
        std::uint64_t acc = 0;
        if (endian == Endianness::Little) {
            for (std::size_t i = len; i-- > 0;)
                acc = montmul(acc, kMont256), acc = add(acc, kMontByte[window[i]]);
        } else {
            for (std::size_t i = 0; i < len; ++i)
                acc = montmul(acc, kMont256), acc = add(acc, kMontByte[window[i]]);
        }
        state_ = acc;
    }

    void slide(std::uint8_t out_byte, std::uint8_t in_byte) {
        if (endian_ == Endianness::Little) {
            // v' = (v - out) / 256 + in * 256^(len-1)
            const std::uint64_t dropped = mont_sub(state_, kMontByte[out_byte]);
            state_ = add(montmul(dropped, kMontInv256), montmul(kMontByte[in_byte], weight_top_));
        } else {
            // v' = (v - out * 256^(len-1)) * 256 + in
            const std::uint64_t dropped =
                mont_sub(state_, montmul(kMontByte[out_byte], weight_top_));
            state_ = add(montmul(dropped, kMont256), kMontByte[in_byte]);
        }
    }

    std::uint64_t residue() const { return demont(state_); }

  private:
    static std::uint64_t add(std::uint64_t a, std::uint64_t b) {
        std::uint64_t r = a + b;
        if (r >= kSieveM) r -= kSieveM;
        return r;
    }

    Endianness endian_;
    std::uint64_t weight_top_;
    std::uint64_t state_ = 0;
};

// Loads window bytes into little-endian limbs and strips high zero limbs.
// Returns the significant limb count.
inline std::size_t load_window_limbs(const std::uint8_t* win, std::size_t len, Endianness endian,
                                     mp_limb_t* out) {
    static_assert(sizeof(mp_limb_t) == 8, "64-bit limbs expected");
    const std::size_t nlimbs = (len + 7) / 8;
    if (endian == Endianness::Little) {
        out[nlimbs - 1] = 0;
        std::memcpy(out, win, len);
    } else {
        std::size_t remaining = len;
        for (std::size_t k = 0; k < nlimbs; ++k) {
            // limb k covers bytes [len - 8(k+1), len - 8k) of the window
            std::uint64_t limb = 0;
            const std::size_t take = remaining >= 8 ? 8 : remaining;
            const std::uint8_t* src = win + remaining - take;
            for (std::size_t j = 0; j < take; ++j)
                limb |= static_cast<std::uint64_t>(src[j]) << (8 * (take - 1 - j));
            out[k] = limb;
            remaining -= take;
        }
    }
    std::size_t n = nlimbs;
    while (n > 0 && out[n - 1] == 0) --n;
    return n;
}

}  // namespace detail

// Sliding-window divisibility scan: every byte-aligned window of
// ceil(factor_bits / 8) bytes at `stride` steps is interpreted as an
// integer in the given byte order and reported when 1 < v < modulus and
// v divides the modulus exactly. Candidates come back in offset order.
inline std::vector<KeyCandidate> scan_rsa_factor(std::span<const std::uint8_t> chunk,
                                                 const Mpz& modulus, unsigned factor_bits,
                                                 Endianness endian = Endianness::Little,
                                                 std::size_t stride = 1) {
    if (!(modulus > 3UL)) throw std::invalid_argument("modulus must be > 3");
    if (factor_bits < 2) throw std::invalid_argument("factor_bits must be >= 2");
    if (stride == 0) throw std::invalid_argument("stride must be >= 1");

    std::vector<KeyCandidate> found;
    const std::size_t window = (factor_bits + 7) / 8;
    if (window > chunk.size()) return found;

    const std::vector<mp_limb_t> mod_limbs = modulus.limbs();
    const std::size_t nn = mod_limbs.size();

    const bool reject_even = modulus.is_odd();
    std::array<bool, detail::kSievePrimes.size()> prime_enabled{};
    for (std::size_t i = 0; i < detail::kSievePrimes.size(); ++i)
        prime_enabled[i] = modulus.mod_u32(detail::kSievePrimes[i]) != 0;

    // The rolling residue only pays for itself when the per-window
    // division is multi-microsecond territory.
    const bool use_rolling = window >= 96;

    std::uint32_t byte_sum = 0;
    for (std::size_t i = 0; i < window; ++i) byte_sum += chunk[i];
    std::optional<detail::RollingResidue> rolling;
    if (use_rolling) rolling.emplace(chunk.data(), window, endian);

    std::vector<mp_limb_t> wl((window + 7) / 8 + 1);

    const std::size_t last = chunk.size() - window;
    for (std::size_t off = 0;; ++off) {
        const bool evaluate = off % stride == 0;
        if (evaluate) {
            const std::uint8_t low_byte =
                endian == Endianness::Little ? chunk[off] : chunk[off + window - 1];
            bool viable = !(reject_even && (low_byte & 1) == 0);
            if (viable && !use_rolling) {
                if ((prime_enabled[0] && byte_sum % 3 == 0) ||
                    (prime_enabled[1] && byte_sum % 5 == 0) ||
                    (prime_enabled[5] && byte_sum % 17 == 0))
                    viable = false;
            }
            if (viable && use_rolling) {
                const std::uint64_t r = rolling->residue();
                for (std::size_t i = 0; i < detail::kSievePrimes.size(); ++i) {
                    if (prime_enabled[i] && r % detail::kSievePrimes[i] == 0) {
                        viable = false;
                        break;
                    }
                }
            }
            if (viable) {
                const std::size_t wn =
                    detail::load_window_limbs(chunk.data() + off, window, endian, wl.data());
                viable = wn > 0 && !(wn == 1 && wl[0] <= 1) && wn <= nn &&
                         !(wn == nn && mpn_cmp(wl.data(), mod_limbs.data(), static_cast<mp_size_t>(nn)) >= 0);
                if (viable) {
                    mpz_t value;
                    mpz_roinit_n(value, wl.data(), static_cast<mp_size_t>(wn));
                    if (mpz_divisible_p(modulus.raw(), value)) {
                        KeyCandidate cand;
                        cand.kind = CandidateKind::RsaFactor;
                        cand.offset = off;
                        cand.material.assign(chunk.begin() + static_cast<std::ptrdiff_t>(off),
                                             chunk.begin() + static_cast<std::ptrdiff_t>(off + window));
                        cand.score = 0;
                        found.push_back(std::move(cand));
                    }
                }
            }
        }
        if (off == last) break;
        byte_sum += chunk[off + window];
        byte_sum -= chunk[off];
        if (use_rolling) rolling->slide(chunk[off], chunk[off + window]);
    }
    return found;
}

// Recompute-and-compare schedule scan: the 16 or 32 bytes at each offset
// are treated as an AES key, expanded, and the derived round keys are
// compared against the bytes that follow. A candidate is emitted when the
// derived schedule differs from memory in at most `tolerance` bit
// positions; the mismatch count becomes the score.
inline std::vector<KeyCandidate> scan_aes_schedules(std::span<const std::uint8_t> chunk,
                                                    aes::Variant variant, int tolerance = 0,
                                                    std::size_t stride = 1) {
    if (tolerance < 0) throw std::invalid_argument("tolerance must be >= 0");
    if (stride == 0) throw std::invalid_argument("stride must be >= 1");

    std::vector<KeyCandidate> found;
    const std::size_t footprint = aes::schedule_bytes(variant);
    if (chunk.size() < footprint) return found;

    const int nk = variant == aes::Variant::k128 ? 4 : 8;
    const int nwords = 4 * (aes::rounds(variant) + 1);
    std::array<std::uint32_t, 60> w{};

    for (std::size_t off = 0; off + footprint <= chunk.size(); off += stride) {
        const std::uint8_t* base = chunk.data() + off;
        for (int i = 0; i < nk; ++i) w[static_cast<std::size_t>(i)] = aes::detail::load_word(base + 4 * i);
        int err = 0;
        std::uint8_t rcon = 1;
        bool match = true;
        for (int i = nk; i < nwords; ++i) {
            std::uint32_t temp = w[static_cast<std::size_t>(i - 1)];
            if (i % nk == 0) {
                temp = aes::detail::sub_word(aes::detail::rot_word(temp)) ^
                       (static_cast<std::uint32_t>(rcon) << 24);
                rcon = aes::detail::xtime(rcon);
            } else if (nk > 6 && i % nk == 4) {
                temp = aes::detail::sub_word(temp);
            }
            const std::uint32_t derived = w[static_cast<std::size_t>(i - nk)] ^ temp;
            w[static_cast<std::size_t>(i)] = derived;
            err += std::popcount(derived ^ aes::detail::load_word(base + 4 * i));
            if (err > tolerance) {
                match = false;
                break;
            }
        }
        if (match) {
            KeyCandidate cand;
            cand.kind = variant == aes::Variant::k128 ? CandidateKind::AesKey128
                                                      : CandidateKind::AesKey256;
            cand.offset = off;
            cand.material.assign(base, base + aes::key_bytes(variant));
            cand.score = err;
            found.push_back(std::move(cand));
        }
    }
    return found;
}

// Structure-gated scan for the synthetic key-context record: both address
// fields must fall in the canonical kernel range and the length field must
// decode to a permitted key size. Material is the key that follows the
// header.
inline std::vector<KeyCandidate> scan_key_context(std::span<const std::uint8_t> chunk,
                                                  const KeyContextLayout& layout =
                                                      kDefaultKeyContextLayout) {
    std::vector<KeyCandidate> found;
    if (chunk.size() < KeyContextLayout::kHeaderSize) return found;
    for (std::size_t off = 0; off + KeyContextLayout::kHeaderSize <= chunk.size(); ++off) {
        const std::uint8_t* p = chunk.data() + off;
        const std::uint64_t a1 = detail::load_u64le(p + KeyContextLayout::kAddr1Offset);
        if (a1 < layout.addr_min || a1 > layout.addr_max) continue;
        const std::uint64_t a2 = detail::load_u64le(p + KeyContextLayout::kAddr2Offset);
        if (a2 < layout.addr_min || a2 > layout.addr_max) continue;
        const std::uint32_t len = detail::load_u32le(p + KeyContextLayout::kLenOffset);
        if (!layout.length_allowed(len)) continue;
        if (off + KeyContextLayout::kHeaderSize + len > chunk.size()) continue;
        KeyCandidate cand;
        cand.kind = CandidateKind::KeyContext;
        cand.offset = off;
        cand.material.assign(p + KeyContextLayout::kHeaderSize,
                             p + KeyContextLayout::kHeaderSize + len);
        cand.score = 0;
        found.push_back(std::move(cand));
    }
    return found;
}

// Known-answer check: true iff single-block AES encryption of the probe
// plaintext under the candidate key reproduces the probe ciphertext. A
// 64-byte key-context payload is treated as an XTS pair; its first half
// is the block cipher key.
inline bool verify_key_candidate(const KeyCandidate& candidate, const AesProbe& probe) {
    std::span<const std::uint8_t> key;
    switch (candidate.kind) {
        case CandidateKind::AesKey128:
        case CandidateKind::AesKey256:
            key = candidate.material;
            break;
        case CandidateKind::KeyContext:
            if (candidate.material.size() == 64)
                key = std::span(candidate.material).first(32);
            else
                key = candidate.material;
            break;
        case CandidateKind::RsaFactor:
            throw std::invalid_argument("unsupported candidate kind for AES verification");
    }
    if (key.size() != 16 && key.size() != 32)
        throw std::invalid_argument("candidate key length unsupported");
    return aes::encrypt_block_with_key(key, probe.plaintext) == probe.ciphertext;
}

// Given one prime factor, recover the full factor pair of the modulus.
inline std::pair<Mpz, Mpz> complete_rsa_key(const Mpz& factor, const Mpz& modulus) {
    if (!(factor > 1UL) || !(factor < modulus) || !modulus.divisible_by(factor))
        throw std::invalid_argument("factor does not divide modulus");
    Mpz other = modulus.divided_by_exact(factor);
    if (other < factor) return {std::move(other), factor};
    return {factor, std::move(other)};
}

}  // namespace pagehunt::analyzers
