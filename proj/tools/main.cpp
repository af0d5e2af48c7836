// nlbath command-line front end: scenario-driven runs of the susceptibility,
// Langevin, atom, and validation tasks.

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

#include "nlbath/runner.hpp"
#include "nlbath/scenario.hpp"

namespace {

struct GlobalOpts {
    std::string scenario_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    int threads = 1;
};

void add_global(CLI::App* cmd, GlobalOpts& g) {
    cmd->add_option("--scenario", g.scenario_path, "scenario file (key = value grammar)")->required();
    cmd->add_option("--out", g.out_dir, "output directory");
    cmd->add_option("--seed", g.seed, "override the scenario seed");
    cmd->add_option("--threads", g.threads, "worker threads (sweep fan-out)");
}

int run_task(const GlobalOpts& g, std::optional<nlbath::cli::Task> expected, bool sweep) {
    using namespace nlbath;
    try {
        const std::string text = io::read_text_file(g.scenario_path);
        cli::Scenario sc = cli::parse_scenario_text(text);
        if (g.seed) sc.seed = *g.seed;
        if (expected && sc.task != *expected) {
            std::fprintf(stderr, "error: scenario declares task '%s' but the '%s' subcommand was invoked\n",
                         cli::task_name(sc.task).c_str(), cli::task_name(*expected).c_str());
            return 2;
        }
        const cli::RunResult r = sweep ? cli::run_sweep(text, sc, g.out_dir, g.threads) : cli::run(sc, g.out_dir);
        if (r.status != 0 && !r.message.empty()) std::fprintf(stderr, "error: %s\n", r.message.c_str());
        return r.status;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nlbath — coupling tensors, susceptibility kernels, memory-kernel Langevin dynamics, "
                 "and two-level-atom decay in a nonlinear absorbing environment"};
    app.require_subcommand(1);

    GlobalOpts g_chi, g_lan, g_atom, g_val, g_sweep;
    CLI::App* chi = app.add_subcommand("chi", "susceptibility kernels and noise correlation");
    add_global(chi, g_chi);
    CLI::App* lan = app.add_subcommand("langevin", "microscopic / macroscopic trajectories");
    add_global(lan, g_lan);
    CLI::App* at = app.add_subcommand("atom", "two-level-atom master equation and decay report");
    add_global(at, g_atom);
    CLI::App* val = app.add_subcommand("validate", "symmetry / causality / gauge validation battery");
    add_global(val, g_val);
    CLI::App* sw = app.add_subcommand("sweep", "fan a scenario out over sweep.parameter values");
    add_global(sw, g_sweep);

    CLI11_PARSE(app, argc, argv);

    using nlbath::cli::Task;
    if (chi->parsed()) return run_task(g_chi, Task::Chi, false);
    if (lan->parsed()) return run_task(g_lan, Task::Langevin, false);
    if (at->parsed()) return run_task(g_atom, Task::Atom, false);
    if (val->parsed()) return run_task(g_val, Task::Validate, false);
    if (sw->parsed()) return run_task(g_sweep, std::nullopt, true);
    return 2;
}
