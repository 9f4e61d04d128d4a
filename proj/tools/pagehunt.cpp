// pagehunt: attack-simulation harness and raw memory-dump scanner.
//
// `pagehunt simulate` runs randomized iterations of the two-phase
// secret-extraction attack against a simulated guest and emits per-
// iteration results plus a reaction-time histogram as CSV.
//
// `pagehunt scan` streams a raw dump (concatenated guest pages, no
// header) through the standalone analyzers: RSA factor-of-modulus scan,
// AES key-schedule scan, and the kernel key-context structure scan.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pagehunt/config.hpp"
#include "pagehunt/harness.hpp"
#include "pagehunt/hex.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;

struct SimulateArgs {
    std::string scenario;
    double load_level = 1.0;
    std::size_t iterations = 100;
    std::uint64_t seed = 1;
    std::string config_path;
    std::string out_path = "results.csv";
    std::string hist_path;
    unsigned workers = 0;
};

int run_simulate(const SimulateArgs& args) {
    pagehunt::harness::SimConfig config;
    if (!args.config_path.empty()) config = pagehunt::config::load_config_file(args.config_path);
    const auto scenario = pagehunt::harness::parse_scenario(args.scenario);

    std::fprintf(stderr, "simulate: scenario=%s load=%g iterations=%zu seed=%llu\n",
                 args.scenario.c_str(), args.load_level, args.iterations,
                 static_cast<unsigned long long>(args.seed));
    auto reports = pagehunt::harness::run_matrix(config, scenario, args.load_level,
                                                 args.iterations, args.seed, args.workers);
    const auto stats = pagehunt::harness::summarize(reports);

    std::ofstream out(args.out_path);
    if (!out) {
        std::fprintf(stderr, "error: cannot write %s\n", args.out_path.c_str());
        return kExitIo;
    }
    pagehunt::harness::write_reports_csv(out, reports);

    if (!args.hist_path.empty()) {
        std::ofstream hist(args.hist_path);
        if (!hist) {
            std::fprintf(stderr, "error: cannot write %s\n", args.hist_path.c_str());
            return kExitIo;
        }
        pagehunt::harness::write_histogram_csv(hist, stats);
    }

    std::printf("scenario=%s load=%g iterations=%zu success_rate=%.4f%% "
                "median_extracted=%g mad_extracted=%g median_observation_s=%.3f "
                "median_search_s=%.3f\n",
                args.scenario.c_str(), args.load_level, args.iterations,
                stats.success_rate * 100.0, stats.median_extracted, stats.mad_extracted,
                stats.median_observation_ms / 1000.0, stats.median_search_ms / 1000.0);
    return kExitOk;
}

const char* candidate_kind_label(const pagehunt::analyzers::KeyCandidate& c, const char* note) {
    using pagehunt::analyzers::CandidateKind;
    switch (c.kind) {
        case CandidateKind::RsaFactor:
            return note && note[0] == 'b' ? "rsa-factor-be" : "rsa-factor-le";
        case CandidateKind::AesKey128: return "aes-128";
        case CandidateKind::AesKey256: return "aes-256";
        case CandidateKind::KeyContext: return "key-context";
    }
    return "?";
}

int run_scan(const pagehunt::harness::ScanRequest& request, const std::string& dump_path) {
    std::ifstream in(dump_path, std::ios::binary);
    if (!in) {
        std::fprintf(stderr, "error: cannot read %s\n", dump_path.c_str());
        return kExitIo;
    }
    pagehunt::harness::scan_stream(
        in, request,
        [](std::uint64_t offset, const pagehunt::analyzers::KeyCandidate& c, const char* note) {
            std::printf("%llu 0x%llx %s %d %s\n", static_cast<unsigned long long>(offset),
                        static_cast<unsigned long long>(offset), candidate_kind_label(c, note),
                        c.score, pagehunt::to_hex(c.material).c_str());
        });
    if (in.bad()) {
        std::fprintf(stderr, "error: read failure on %s\n", dump_path.c_str());
        return kExitIo;
    }
    return kExitOk;
}

// --modulus-hex accepts the digits directly or a path to a file holding
// them (most significant digit first).
pagehunt::Mpz parse_modulus_arg(const std::string& arg) {
    std::string text = arg;
    if (std::filesystem::exists(arg) && std::filesystem::is_regular_file(arg)) {
        std::ifstream in(arg);
        if (!in) throw std::runtime_error("cannot read modulus file: " + arg);
        text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' '))
        text.pop_back();
    return pagehunt::Mpz::from_hex(text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"simulated page-tracking secret extraction and memory-dump scanning"};
    app.require_subcommand(1);

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "run randomized attack iterations");
    simulate->add_option("--scenario", sim_args.scenario, "tls-nginx|tls-apache|fde|ssh")
        ->required()
        ->check(CLI::IsMember({"tls-nginx", "tls-apache", "fde", "ssh"}));
    simulate->add_option("--load-level", sim_args.load_level, "requests per second")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--iterations", sim_args.iterations, "number of attack iterations");
    simulate->add_option("--seed", sim_args.seed, "master seed");
    simulate->add_option("--config", sim_args.config_path, "JSON config file (partial overrides)");
    simulate->add_option("--out", sim_args.out_path, "per-iteration results CSV");
    simulate->add_option("--hist", sim_args.hist_path, "reaction-time histogram CSV");
    simulate->add_option("--workers", sim_args.workers, "worker threads (0 = all cores)");

    auto* scan = app.add_subcommand("scan", "scan a raw memory dump for key material");
    scan->require_subcommand(1);

    std::string dump_path;
    std::string modulus_arg;
    unsigned factor_bits = 0;
    std::string endian = "le";
    std::size_t stride = 1;
    auto* scan_rsa = scan->add_subcommand("rsa", "divisor-of-modulus scan for RSA factors");
    scan_rsa->add_option("--modulus-hex", modulus_arg, "modulus as hex digits or a file")->required();
    scan_rsa->add_option("--factor-bits", factor_bits, "factor width in bits")->required();
    scan_rsa->add_option("--endian", endian, "le|be|both")->check(CLI::IsMember({"le", "be", "both"}));
    scan_rsa->add_option("--stride", stride, "window step in bytes")->check(CLI::PositiveNumber);
    scan_rsa->add_option("dump", dump_path, "raw dump file")->required();

    int variant = 256;
    int tolerance = 0;
    std::size_t aes_stride = 1;
    std::string aes_dump;
    auto* scan_aes = scan->add_subcommand("aes", "AES key-schedule scan");
    scan_aes->add_option("--variant", variant, "128|256")->check(CLI::IsMember({128, 256}));
    scan_aes->add_option("--tolerance", tolerance, "max schedule bit errors")
        ->check(CLI::NonNegativeNumber);
    scan_aes->add_option("--stride", aes_stride, "offset step in bytes")->check(CLI::PositiveNumber);
    scan_aes->add_option("dump", aes_dump, "raw dump file")->required();

    std::string ctx_dump;
    auto* scan_ctx = scan->add_subcommand("key-context", "kernel key-context structure scan");
    scan_ctx->add_option("dump", ctx_dump, "raw dump file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (simulate->parsed()) return run_simulate(sim_args);

        pagehunt::harness::ScanRequest request;
        if (scan_rsa->parsed()) {
            request.kind = pagehunt::harness::ScanRequest::Kind::Rsa;
            try {
                request.modulus = parse_modulus_arg(modulus_arg);
            } catch (const std::invalid_argument& e) {
                std::fprintf(stderr, "error: %s\n", e.what());
                return kExitUsage;
            }
            if (factor_bits < 2) {
                std::fprintf(stderr, "error: --factor-bits must be >= 2\n");
                return kExitUsage;
            }
            request.factor_bits = factor_bits;
            request.scan_little = endian != "be";
            request.scan_big = endian != "le";
            request.stride = stride;
            return run_scan(request, dump_path);
        }
        if (scan_aes->parsed()) {
            request.kind = pagehunt::harness::ScanRequest::Kind::Aes;
            request.variant = variant == 128 ? pagehunt::aes::Variant::k128
                                             : pagehunt::aes::Variant::k256;
            request.tolerance = tolerance;
            request.stride = aes_stride;
            return run_scan(request, aes_dump);
        }
        if (scan_ctx->parsed()) {
            request.kind = pagehunt::harness::ScanRequest::Kind::KeyContext;
            return run_scan(request, ctx_dump);
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }
    return kExitUsage;
}
