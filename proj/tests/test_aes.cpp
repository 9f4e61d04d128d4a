#include <catch_amalgamated.hpp>

#include "pagehunt/aes.hpp"
#include "pagehunt/hex.hpp"

using namespace pagehunt;

TEST_CASE("schedule lengths are forced by the expansion") {
    std::vector<std::uint8_t> k16(16, 0xab), k32(32, 0xcd);
    CHECK(aes::expand_key(k16, aes::Variant::k128).size() == 176);
    CHECK(aes::expand_key(k32, aes::Variant::k256).size() == 240);
    CHECK_THROWS_AS(aes::expand_key(k16, aes::Variant::k256), std::invalid_argument);
    CHECK_THROWS_AS(aes::expand_key(k32, aes::Variant::k128), std::invalid_argument);
}

TEST_CASE("all-zero key expansion starts its round keys with 62 63 63 63") {
    // frozen from an independent reference expansion
    std::vector<std::uint8_t> zero(16, 0);
    const auto sched = aes::expand_key(zero, aes::Variant::k128);
    CHECK(sched[16] == 0x62);
    CHECK(sched[17] == 0x63);
    CHECK(sched[18] == 0x63);
    CHECK(sched[19] == 0x63);
}

TEST_CASE("reference key expansion vectors") {
    const auto key128 = from_hex("2b7e151628aed2a6abf7158809cf4f3c");
    const auto s128 = aes::expand_key(key128, aes::Variant::k128);
    CHECK(to_hex(std::span(s128).subspan(16, 4)) == "a0fafe17");
    CHECK(to_hex(std::span(s128).subspan(20, 4)) == "88542cb1");
    CHECK(to_hex(std::span(s128).subspan(172, 4)) == "b6630ca6");

    const auto key256 =
        from_hex("603deb1015ca71be2b73aef0857d77811f352c073b6108d72d9810a30914dff4");
    const auto s256 = aes::expand_key(key256, aes::Variant::k256);
    CHECK(to_hex(std::span(s256).subspan(32, 4)) == "9ba35411");
    CHECK(to_hex(std::span(s256).subspan(36, 4)) == "8e6925af");
    CHECK(to_hex(std::span(s256).subspan(236, 4)) == "706c631e");
}

TEST_CASE("reference single-block encryption vectors") {
    const auto key = from_hex("2b7e151628aed2a6abf7158809cf4f3c");
    const auto pt = from_hex("3243f6a8885a308d313198a2e0370734");
    CHECK(to_hex(aes::encrypt_block_with_key(key, pt)) == "3925841d02dc09fbdc118597196a0b32");

    const auto k1 = from_hex("000102030405060708090a0b0c0d0e0f");
    const auto p1 = from_hex("00112233445566778899aabbccddeeff");
    CHECK(to_hex(aes::encrypt_block_with_key(k1, p1)) == "69c4e0d86a7b0430d8cdb78070b4c55a");

    const auto k3 =
        from_hex("000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f");
    CHECK(to_hex(aes::encrypt_block_with_key(k3, p1)) == "8ea2b7ca516745bfeafc49904b496089");
}

TEST_CASE("encryption rejects malformed blocks") {
    std::vector<std::uint8_t> key(16, 1), short_block(15, 0);
    CHECK_THROWS_AS(aes::encrypt_block_with_key(key, short_block), std::invalid_argument);
    std::vector<std::uint8_t> bad_key(20, 1), block(16, 0);
    CHECK_THROWS_AS(aes::encrypt_block_with_key(bad_key, block), std::invalid_argument);
}
