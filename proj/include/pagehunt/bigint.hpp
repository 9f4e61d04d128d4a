#pragma once

#include <gmp.h>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pagehunt {

enum class Endianness { Little, Big };

// Value-semantic wrapper around GMP's mpz_t, covering just the operations
// the scanners and key tooling need.
class Mpz {
  public:
    Mpz() { mpz_init(z_); }
    explicit Mpz(unsigned long v) { mpz_init_set_ui(z_, v); }
    Mpz(const Mpz& o) { mpz_init_set(z_, o.z_); }
    Mpz(Mpz&& o) noexcept {
        mpz_init(z_);
        mpz_swap(z_, o.z_);
    }
    Mpz& operator=(const Mpz& o) {
        if (this != &o) mpz_set(z_, o.z_);
        return *this;
    }
    Mpz& operator=(Mpz&& o) noexcept {
        mpz_swap(z_, o.z_);
        return *this;
    }
    ~Mpz() { mpz_clear(z_); }

    // Most-significant digit first, with or without 0x prefix.
    static Mpz from_hex(const std::string& text) {
        Mpz r;
        const char* s = text.c_str();
        if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) s += 2;
        if (*s == '\0' || mpz_set_str(r.z_, s, 16) != 0)
            throw std::invalid_argument("malformed hexadecimal integer");
        return r;
    }

    static Mpz from_bytes(std::span<const std::uint8_t> bytes, Endianness endian) {
        Mpz r;
        if (!bytes.empty())
            mpz_import(r.z_, bytes.size(), endian == Endianness::Big ? 1 : -1, 1, 0, 0,
                       bytes.data());
        return r;
    }

    std::string to_hex() const {
        std::vector<char> buf(mpz_sizeinbase(z_, 16) + 2);
        mpz_get_str(buf.data(), 16, z_);
        return std::string(buf.data());
    }

    // Fixed-width serialization; throws if the value needs more bytes.
    std::vector<std::uint8_t> to_bytes(std::size_t len, Endianness endian) const {
        const std::size_t need = byte_length();
        if (need > len) throw std::invalid_argument("value does not fit requested width");
        std::vector<std::uint8_t> out(len, 0);
        if (mpz_sgn(z_) != 0) {
            std::size_t written = 0;
            std::uint8_t* dst = endian == Endianness::Big ? out.data() + (len - need) : out.data();
            mpz_export(dst, &written, endian == Endianness::Big ? 1 : -1, 1, 0, 0, z_);
        }
        return out;
    }

    std::size_t bit_length() const { return mpz_sgn(z_) == 0 ? 0 : mpz_sizeinbase(z_, 2); }
    std::size_t byte_length() const { return (bit_length() + 7) / 8; }

    bool is_odd() const { return mpz_odd_p(z_) != 0; }
    bool divisible_by(const Mpz& d) const { return mpz_divisible_p(z_, d.z_) != 0; }
    unsigned long mod_u32(unsigned long m) const { return mpz_fdiv_ui(z_, m); }

    Mpz divided_by_exact(const Mpz& d) const {
        Mpz r;
        mpz_divexact(r.z_, z_, d.z_);
        return r;
    }

    // Truncating division: (quotient, remainder).
    std::pair<Mpz, Mpz> divmod(const Mpz& d) const {
        std::pair<Mpz, Mpz> out;
        mpz_tdiv_qr(out.first.z_, out.second.z_, z_, d.z_);
        return out;
    }

    bool is_zero() const { return mpz_sgn(z_) == 0; }

    friend Mpz operator*(const Mpz& a, const Mpz& b) {
        Mpz r;
        mpz_mul(r.z_, a.z_, b.z_);
        return r;
    }

    friend bool operator==(const Mpz& a, const Mpz& b) { return mpz_cmp(a.z_, b.z_) == 0; }
    friend bool operator<(const Mpz& a, const Mpz& b) { return mpz_cmp(a.z_, b.z_) < 0; }
    friend bool operator>(const Mpz& a, const Mpz& b) { return b < a; }
    friend bool operator<=(const Mpz& a, const Mpz& b) { return !(b < a); }
    friend bool operator>=(const Mpz& a, const Mpz& b) { return !(a < b); }
    friend bool operator!=(const Mpz& a, const Mpz& b) { return !(a == b); }

    bool operator==(unsigned long v) const { return mpz_cmp_ui(z_, v) == 0; }
    bool operator>(unsigned long v) const { return mpz_cmp_ui(z_, v) > 0; }
    bool operator<(unsigned long v) const { return mpz_cmp_ui(z_, v) < 0; }

    mpz_srcptr raw() const { return z_; }
    mpz_ptr raw() { return z_; }

    // Little-endian limb view for the low-level scan path.
    std::vector<mp_limb_t> limbs() const {
        const std::size_t n = mpz_size(z_);
        std::vector<mp_limb_t> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = mpz_getlimbn(z_, static_cast<mp_size_t>(i));
        return out;
    }

  private:
    mpz_t z_;
};

struct RsaKey {
    Mpz p;  // smaller prime
    Mpz q;
    Mpz modulus;
    unsigned modulus_bits = 0;
    unsigned factor_bits = 0;
};

// Deterministic RSA keypair generation: both primes carry their top two
// bits set, so the factors are exactly modulus_bits/2 wide and the modulus
// exactly modulus_bits wide. The caller keeps (p, q) as the recall oracle.
inline RsaKey generate_rsa_key(unsigned modulus_bits, std::uint64_t seed) {
    if (modulus_bits < 16 || modulus_bits % 2 != 0)
        throw std::invalid_argument("modulus_bits must be even and >= 16");
    const unsigned half = modulus_bits / 2;

    gmp_randstate_t st;
    gmp_randinit_mt(st);
    gmp_randseed_ui(st, static_cast<unsigned long>(seed));

    auto draw_prime = [&] {
        Mpz r;
        while (true) {
            mpz_urandomb(r.raw(), st, half);
            mpz_setbit(r.raw(), half - 1);
            mpz_setbit(r.raw(), half - 2);
            mpz_nextprime(r.raw(), r.raw());
            if (mpz_sizeinbase(r.raw(), 2) == half) return r;
        }
    };

    RsaKey key;
    key.p = draw_prime();
    do {
        key.q = draw_prime();
    } while (key.q == key.p);
    if (key.q < key.p) std::swap(key.p, key.q);
    key.modulus = key.p * key.q;
    key.modulus_bits = modulus_bits;
    key.factor_bits = half;
    gmp_randclear(st);
    return key;
}

}  // namespace pagehunt
