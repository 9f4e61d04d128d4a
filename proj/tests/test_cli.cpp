#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pagehunt/guest_memory.hpp"
#include "pagehunt/hex.hpp"

using namespace pagehunt;

namespace {

std::string cli_path() {
    const char* p = std::getenv("PAGEHUNT_CLI");
    REQUIRE(p != nullptr);
    return p;
}

struct CommandResult {
    int exit_code = -1;
    std::string output;
};

CommandResult run_command(const std::string& cmd) {
    CommandResult result;
    FILE* pipe = popen((cmd + " 2>/dev/null").c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf;
    std::size_t got;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0)
        result.output.append(buf.data(), got);
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::string line;
    std::istringstream in(text);
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("pagehunt_test_" + name);
}

}  // namespace

TEST_CASE("scan aes finds a planted schedule in an exported dump") {
    GuestMemory mem(64);
    mem.fill_random(31337);
    std::vector<std::uint8_t> key(32);
    Rng rng(8);
    for (auto& b : key) b = static_cast<std::uint8_t>(rng.next_u64());
    SecretSpec spec;
    spec.kind = AesKeySecret{aes::Variant::k256, key, true};
    spec.gpa_page = 17;
    spec.byte_offset = 1234;
    mem.place_secret(spec);

    const auto dump = temp_file("aes.dump");
    {
        std::ofstream out(dump, std::ios::binary);
        mem.export_dump(out);
    }

    const auto result =
        run_command(cli_path() + " scan aes --variant 256 " + dump.string());
    CHECK(result.exit_code == 0);
    const auto lines = lines_of(result.output);
    REQUIRE(lines.size() == 1);

    std::uint64_t offset;
    char hex_off[32], kind[32];
    int score;
    char material[600];
    REQUIRE(std::sscanf(lines[0].c_str(), "%llu %31s %31s %d %599s",
                        reinterpret_cast<unsigned long long*>(&offset), hex_off, kind, &score,
                        material) == 5);
    CHECK(offset == 17 * kPageSize + 1234);
    CHECK(std::string(kind) == "aes-256");
    CHECK(score == 0);
    CHECK(std::string(material) == to_hex(key));
    std::filesystem::remove(dump);
}

TEST_CASE("scan rsa against the wrong modulus prints nothing and succeeds") {
    GuestMemory mem(8);
    mem.fill_random(5);
    const auto dump = temp_file("rsa.dump");
    {
        std::ofstream out(dump, std::ios::binary);
        mem.export_dump(out);
    }
    const auto key = generate_rsa_key(512, 4);
    const auto result = run_command(cli_path() + " scan rsa --modulus-hex " +
                                    key.modulus.to_hex() + " --factor-bits 256 " + dump.string());
    CHECK(result.exit_code == 0);
    CHECK(lines_of(result.output).empty());
    std::filesystem::remove(dump);
}

TEST_CASE("scan rsa recovers a planted factor, both endiannesses") {
    GuestMemory mem(8);
    mem.fill_random(6);
    const auto key = generate_rsa_key(512, 21);
    SecretSpec spec;
    spec.kind = RsaFactorSecret{key.modulus, key.p, key.factor_bits, Endianness::Big};
    spec.gpa_page = 2;
    spec.byte_offset = 300;
    mem.place_secret(spec);

    const auto dump = temp_file("rsa_be.dump");
    {
        std::ofstream out(dump, std::ios::binary);
        mem.export_dump(out);
    }
    const auto modfile = temp_file("modulus.hex");
    {
        std::ofstream out(modfile);
        out << key.modulus.to_hex() << "\n";
    }

    // --endian both, modulus loaded from a file
    const auto result = run_command(cli_path() + " scan rsa --modulus-hex " + modfile.string() +
                                    " --factor-bits 256 --endian both " + dump.string());
    CHECK(result.exit_code == 0);
    const auto lines = lines_of(result.output);
    REQUIRE(lines.size() == 1);
    CHECK(lines[0].find("rsa-factor-be") != std::string::npos);
    CHECK(lines[0].find(std::to_string(2 * kPageSize + 300)) == 0);
    std::filesystem::remove(dump);
    std::filesystem::remove(modfile);
}

TEST_CASE("empty dump file: zero candidates, exit success") {
    const auto dump = temp_file("empty.dump");
    std::ofstream(dump, std::ios::binary).close();
    const auto result = run_command(cli_path() + " scan key-context " + dump.string());
    CHECK(result.exit_code == 0);
    CHECK(lines_of(result.output).empty());
    std::filesystem::remove(dump);
}

TEST_CASE("usage errors exit 1") {
    CHECK(run_command(cli_path() + " scan rsa --factor-bits 256 /nonexistent").exit_code == 1);
    CHECK(run_command(cli_path() + " simulate --scenario bogus").exit_code == 1);
    CHECK(run_command(cli_path() + " frobnicate").exit_code == 1);
    const auto dump = temp_file("usage.dump");
    std::ofstream(dump, std::ios::binary).close();
    CHECK(run_command(cli_path() + " scan rsa --modulus-hex nothex --factor-bits 64 " +
                      dump.string())
              .exit_code == 1);
    std::filesystem::remove(dump);
}

TEST_CASE("unreadable dump exits 2") {
    const auto result = run_command(cli_path() + " scan key-context /nonexistent/dump.bin");
    CHECK(result.exit_code == 2);
}

TEST_CASE("simulate writes results and histogram CSVs") {
    const auto out_csv = temp_file("results.csv");
    const auto hist_csv = temp_file("hist.csv");
    const auto config = temp_file("config.json");
    {
        std::ofstream cfg(config);
        cfg << R"({"secrets": {"tls_key_bits": 1024, "ssh_key_bits": 1024},
                   "tracking_start_s": {"min": 5, "max": 10}})";
    }
    const auto result = run_command(cli_path() + " simulate --scenario fde --load-level 9" +
                                    " --iterations 4 --seed 7 --config " + config.string() +
                                    " --out " + out_csv.string() + " --hist " + hist_csv.string());
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("success_rate") != std::string::npos);

    std::ifstream in(out_csv);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "scenario,load_level,iteration,seed,success,reaction_ms,tracked_pages,filtered_pages,"
          "extracted_pages,observation_s,search_s,requests");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ++rows;
    CHECK(rows == 4);

    std::ifstream hin(hist_csv);
    REQUIRE(hin.good());
    std::getline(hin, header);
    CHECK(header == "bin_ms,count,normalized");

    std::filesystem::remove(out_csv);
    std::filesystem::remove(hist_csv);
    std::filesystem::remove(config);
}
