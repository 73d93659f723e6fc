// quenchctl <subcommand> --config <path> [--out <dir>] [--threads <n>]
//
// Exit codes: 0 all checks passed, 1 a check failed or a solve broke down,
// 2 the config could not be read or violates the structural assumptions.

#include "quench/commands.hpp"
#include "quench/io.hpp"
#include "quench/parallel.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>

namespace {

struct Options {
    std::string config;
    std::string out;
    int threads = 0;
};

int resolve_threads(int flag, int from_config) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv("QUENCHCTL_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n > 0) return static_cast<int>(n);
        std::cerr << "quenchctl: ignoring QUENCHCTL_THREADS='" << env << "'\n";
    }
    return from_config;
}

void print_result(const std::string& name, const quench::CommandResult& res, const std::string& out) {
    for (const auto& c : res.checks) {
        std::printf("%-24s %-4s %s", c.name.c_str(), c.pass ? "ok" : "FAIL", quench::format_double(c.value).c_str());
        if (c.relation == "in")
            std::printf(" in [%s, %s]", quench::format_double(c.limit).c_str(),
                        quench::format_double(c.limit_hi).c_str());
        else if (c.relation != "ok")
            std::printf(" %s %s", c.relation.c_str(), quench::format_double(c.limit).c_str());
        std::printf("\n");
    }
    std::printf("%s: %s, outputs in %s\n", name.c_str(), res.passed() ? "passed" : "failed", out.c_str());
}

int run(const std::string& name, const Options& opt) {
    using namespace quench;
    try {
        RunConfig cfg = read_config(opt.config);
        if (!opt.out.empty()) cfg.out_dir = opt.out;
        const int threads = resolve_threads(opt.threads, cfg.threads);
        if (threads > 0) set_thread_count(threads);

        if (name != "validate") {
            const ValidationReport rep = check_config(cfg);
            if (!rep.ok()) throw ValidationError(rep);
        }
        const CommandResult res = run_command(name, cfg, cfg.out_dir);
        if (name == "validate" && !res.passed()) {
            std::cerr << "quenchctl: " << check_config(cfg).summary() << "\n";
            return res.exit_code;
        }
        print_result(name, res, cfg.out_dir);
        return res.exit_code;
    } catch (const ParseError& e) {
        std::cerr << "quenchctl: config error at " << e.what() << "\n";
        return kExitConfig;
    } catch (const ValidationError& e) {
        std::cerr << "quenchctl: invalid config: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "quenchctl: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "quenchctl: " << name << " failed: " << e.what() << "\n";
        return kExitAssertion;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep-quench phase-field solver, optimal control and continuation studies"};
    app.require_subcommand(1);

    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "forward solve with per-step diagnostics"},
        {"optimize", "projected-gradient optimal control with optimality certificates"},
        {"quench-study", "state rate study and control continuation along the alpha schedule"},
        {"gradcheck", "adjoint gradient against central finite differences"},
        {"validate", "check the structural assumptions only"},
    };
    Options opt;
    std::string chosen;
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config,-c", opt.config, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out,-o", opt.out, "output directory (default: output.dir from the config)");
        sub->add_option("--threads,-j", opt.threads, "worker threads (default: QUENCHCTL_THREADS)")
            ->check(CLI::PositiveNumber);
        sub->callback([&chosen, n = std::string(name)] { chosen = n; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : quench::kExitConfig;
    }
    return run(chosen, opt);
}
