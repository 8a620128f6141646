// reflev: command-line driver.
//
//   reflev model-info [config.json]
//   reflev simulate   [config.json] --seed 7 --out run/
//   reflev sweep      [config.json] --K 3,4,5,6,7 --reference
//   reflev validate   [config.json]
//
// Exit codes: 0 pass, 1 validation failure, 2 config error, 3 runtime error.

#include <reflev/commands.hpp>
#include <reflev/config.hpp>
#include <reflev/errors.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct Options {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::size_t> replicas;
    std::vector<double> buffers;
    std::optional<double> horizon;
    std::optional<std::string> scheme;
    std::optional<std::string> mutation;
    std::string out_dir = ".";
    bool reference = false;
    std::optional<std::string> table;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("config", o.config_path, "JSON run configuration (defaults are used when omitted)");
    cmd->add_option("--set", o.sets, "Override a config key, e.g. --set sim.T=2e5")
        ->expected(1)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    cmd->add_option("--seed", o.seed, "Random seed");
    cmd->add_option("--workers", o.workers, "Worker threads (default: REFLEV_WORKERS or all cores)");
    cmd->add_option("--replicas", o.replicas, "Independent replicas per buffer level");
    cmd->add_option("--K", o.buffers, "Buffer level(s), comma separated")
        ->expected(1)
        ->delimiter(',');
    cmd->add_option("--T", o.horizon, "Horizon per replica, burn-in included");
    cmd->add_option("--scheme", o.scheme, "event or grid");
    cmd->add_option("--mutation", o.mutation, "none or reversed_clamp (negative control)");
}

std::string json_list(const std::vector<double>& xs) {
    std::ostringstream s;
    s << '[';
    for (std::size_t i = 0; i < xs.size(); ++i) s << (i ? "," : "") << reflev::format_number(xs[i]);
    s << ']';
    return s.str();
}

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

std::vector<std::string> overrides(const Options& o) {
    std::vector<std::string> out = o.sets;
    if (o.seed) out.push_back("sim.seed=" + std::to_string(*o.seed));
    if (o.workers) out.push_back("sim.workers=" + std::to_string(*o.workers));
    if (o.replicas) out.push_back("sim.replicas=" + std::to_string(*o.replicas));
    if (o.buffers.size() == 1) out.push_back("sim.K=" + reflev::format_number(o.buffers.front()));
    if (o.buffers.size() > 1) out.push_back("sim.K_list=" + json_list(o.buffers));
    if (o.horizon) out.push_back("sim.T=" + reflev::format_number(*o.horizon));
    if (o.scheme) out.push_back("sim.scheme=" + quoted(*o.scheme));
    if (o.mutation) out.push_back("sim.mutation=" + quoted(*o.mutation));
    if (o.reference) out.push_back("sweep.reference=true");
    if (o.table) out.push_back("sweep.table=" + quoted(*o.table));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Loss rates of Levy-driven buffers with a periodic lower barrier"};
    app.require_subcommand(1);
    Options o;

    auto* info = app.add_subcommand("model-info", "Laplace exponent, Lundberg root and barrier moments");
    auto* simulate = app.add_subcommand("simulate", "Estimate l_K and the stationary histogram; writes loss.csv, hist.csv");
    auto* sweep = app.add_subcommand("sweep", "K-sweep and Cramer fit; writes loss.csv, asymptotics.csv");
    auto* validate = app.add_subcommand("validate", "Run the identity and invariant checks");
    for (auto* cmd : {info, simulate, sweep, validate}) add_common(cmd, o);
    for (auto* cmd : {simulate, sweep}) cmd->add_option("--out", o.out_dir, "Output directory");
    sweep->add_flag("--reference", o.reference, "Also run flat-barrier references at K and K - a");
    sweep->add_option("--table", o.table, "Fit an existing CSV table instead of simulating");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? reflev::kExitPass : reflev::kExitConfig;
    }

    try {
        const reflev::RunConfig cfg = reflev::load_config(o.config_path, overrides(o));
        if (info->parsed()) return reflev::cmd_model_info(cfg, std::cout);
        if (simulate->parsed()) return reflev::cmd_simulate(cfg, o.out_dir, std::cout);
        if (sweep->parsed()) return reflev::cmd_sweep(cfg, o.out_dir, std::cout);
        return reflev::cmd_validate(cfg, std::cout);
    } catch (const reflev::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return reflev::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return reflev::kExitRuntime;
    }
}
