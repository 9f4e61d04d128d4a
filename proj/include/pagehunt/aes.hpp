#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <vector>

namespace pagehunt::aes {

enum class Variant : int { k128 = 128, k256 = 256 };

constexpr std::size_t key_bytes(Variant v) { return v == Variant::k128 ? 16 : 32; }

// 4 * 4 * (rounds + 1): 176 bytes for AES-128, 240 for AES-256.
constexpr std::size_t schedule_bytes(Variant v) { return v == Variant::k128 ? 176 : 240; }

constexpr int rounds(Variant v) { return v == Variant::k128 ? 10 : 14; }

namespace detail {

constexpr std::uint8_t xtime(std::uint8_t x) {
    return static_cast<std::uint8_t>((x << 1) ^ ((x & 0x80) ? 0x1b : 0x00));
}

constexpr std::uint8_t gf_mul(std::uint8_t a, std::uint8_t b) {
    std::uint8_t acc = 0;
    for (int i = 0; i < 8; ++i) {
        if (b & 1) acc ^= a;
        a = xtime(a);
        b >>= 1;
    }
    return acc;
}

// S-box built from the GF(2^8) inverse plus the affine transform, so no
// hand-typed table can go stale.
constexpr std::array<std::uint8_t, 256> make_sbox() {
    std::array<std::uint8_t, 256> inv{};
    for (int a = 1; a < 256; ++a) {
        for (int b = 1; b < 256; ++b) {
            if (gf_mul(static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)) == 1) {
                inv[static_cast<std::size_t>(a)] = static_cast<std::uint8_t>(b);
                break;
            }
        }
    }
    std::array<std::uint8_t, 256> box{};
    for (int i = 0; i < 256; ++i) {
        const std::uint8_t b = inv[static_cast<std::size_t>(i)];
        auto rotl8 = [](std::uint8_t x, int n) {
            return static_cast<std::uint8_t>((x << n) | (x >> (8 - n)));
        };
        box[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(
            b ^ rotl8(b, 1) ^ rotl8(b, 2) ^ rotl8(b, 3) ^ rotl8(b, 4) ^ 0x63);
    }
    return box;
}

inline constexpr std::array<std::uint8_t, 256> kSbox = make_sbox();

constexpr std::uint32_t load_word(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

constexpr void store_word(std::uint8_t* p, std::uint32_t w) {
    p[0] = static_cast<std::uint8_t>(w >> 24);
    p[1] = static_cast<std::uint8_t>(w >> 16);
    p[2] = static_cast<std::uint8_t>(w >> 8);
    p[3] = static_cast<std::uint8_t>(w);
}

constexpr std::uint32_t sub_word(std::uint32_t w) {
    return (static_cast<std::uint32_t>(kSbox[(w >> 24) & 0xff]) << 24) |
           (static_cast<std::uint32_t>(kSbox[(w >> 16) & 0xff]) << 16) |
           (static_cast<std::uint32_t>(kSbox[(w >> 8) & 0xff]) << 8) |
           static_cast<std::uint32_t>(kSbox[w & 0xff]);
}

constexpr std::uint32_t rot_word(std::uint32_t w) { return (w << 8) | (w >> 24); }

}  // namespace detail

// FIPS-197 key expansion. Returns the full schedule as a flat byte array,
// the layout the kernel (and therefore a memory scanner) sees.
inline std::vector<std::uint8_t> expand_key(std::span<const std::uint8_t> key, Variant variant) {
    if (key.size() != key_bytes(variant)) throw std::invalid_argument("wrong AES key length");
    const int nk = static_cast<int>(key.size() / 4);
    const int nwords = 4 * (rounds(variant) + 1);
    std::vector<std::uint8_t> out(static_cast<std::size_t>(nwords) * 4);
    std::memcpy(out.data(), key.data(), key.size());
    std::uint8_t rcon = 1;
    for (int i = nk; i < nwords; ++i) {
        std::uint32_t temp = detail::load_word(&out[static_cast<std::size_t>(i - 1) * 4]);
        if (i % nk == 0) {
            temp = detail::sub_word(detail::rot_word(temp)) ^
                   (static_cast<std::uint32_t>(rcon) << 24);
            rcon = detail::xtime(rcon);
        } else if (nk > 6 && i % nk == 4) {
            temp = detail::sub_word(temp);
        }
        const std::uint32_t prev = detail::load_word(&out[static_cast<std::size_t>(i - nk) * 4]);
        detail::store_word(&out[static_cast<std::size_t>(i) * 4], prev ^ temp);
    }
    return out;
}

// Single-block ECB encryption from an expanded schedule. Used by the
// known-answer verification of key candidates; speed is irrelevant here.
inline std::array<std::uint8_t, 16> encrypt_block(std::span<const std::uint8_t> schedule,
                                                  std::span<const std::uint8_t> plaintext) {
    if (plaintext.size() != 16) throw std::invalid_argument("plaintext block must be 16 bytes");
    int nr;
    if (schedule.size() == 176) {
        nr = 10;
    } else if (schedule.size() == 240) {
        nr = 14;
    } else {
        throw std::invalid_argument("bad schedule length");
    }

    std::array<std::uint8_t, 16> st{};
    std::memcpy(st.data(), plaintext.data(), 16);

    auto add_round_key = [&](int round) {
        for (int i = 0; i < 16; ++i) st[static_cast<std::size_t>(i)] ^= schedule[static_cast<std::size_t>(round * 16 + i)];
    };
    auto sub_bytes = [&] {
        for (auto& b : st) b = detail::kSbox[b];
    };
    auto shift_rows = [&] {
        std::array<std::uint8_t, 16> t = st;
        // byte index = 4 * col + row; row r rotates left by r columns
        for (int r = 1; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                st[static_cast<std::size_t>(4 * c + r)] = t[static_cast<std::size_t>(4 * ((c + r) % 4) + r)];
    };
    auto mix_columns = [&] {
        for (int c = 0; c < 4; ++c) {
            std::uint8_t* col = &st[static_cast<std::size_t>(4 * c)];
            const std::uint8_t a0 = col[0], a1 = col[1], a2 = col[2], a3 = col[3];
            const std::uint8_t all = static_cast<std::uint8_t>(a0 ^ a1 ^ a2 ^ a3);
            col[0] = static_cast<std::uint8_t>(a0 ^ all ^ detail::xtime(static_cast<std::uint8_t>(a0 ^ a1)));
            col[1] = static_cast<std::uint8_t>(a1 ^ all ^ detail::xtime(static_cast<std::uint8_t>(a1 ^ a2)));
            col[2] = static_cast<std::uint8_t>(a2 ^ all ^ detail::xtime(static_cast<std::uint8_t>(a2 ^ a3)));
            col[3] = static_cast<std::uint8_t>(a3 ^ all ^ detail::xtime(static_cast<std::uint8_t>(a3 ^ a0)));
        }
    };

    add_round_key(0);
    for (int round = 1; round < nr; ++round) {
        sub_bytes();
        shift_rows();
        mix_columns();
        add_round_key(round);
    }
    sub_bytes();
    shift_rows();
    add_round_key(nr);
    return st;
}

inline std::array<std::uint8_t, 16> encrypt_block_with_key(std::span<const std::uint8_t> key,
                                                           std::span<const std::uint8_t> plaintext) {
    const Variant v = key.size() == 16 ? Variant::k128 : Variant::k256;
    if (key.size() != 16 && key.size() != 32) throw std::invalid_argument("wrong AES key length");
    const auto schedule = expand_key(key, v);
    return encrypt_block(schedule, plaintext);
}

}  // namespace pagehunt::aes
