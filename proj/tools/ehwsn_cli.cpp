// Command line front end for the experiment harness.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "ehwsn/harness.hpp"

using namespace ehwsn;

namespace {

nlohmann::json manifest(const std::string& cmd, const ExperimentConfig& c) {
    ResolvedSetup s = resolve(c);
    nlohmann::json j;
    j["version"] = kVersion;
    j["command"] = cmd;
    nlohmann::json k;
    k["topology"] = c.topology;
    k["omega"] = c.omega;
    k["V"] = c.V;
    k["slots"] = c.slots;
    k["seed"] = c.seed;
    k["mode"] = c.mode;
    k["force_zero_side_rate"] = c.force_zero_side_rate;
    k["burn_in"] = c.burn_in;
    k["initial_energy"] = c.initial_energy;
    k["cost"] = c.cost;
    k["gain_scale"] = c.gain_scale;
    k["H_max"] = c.H_max;
    k["H_max_sink"] = c.H_max_sink;
    k["alpha"] = c.alpha;
    k["alpha_sink"] = c.alpha_sink;
    k["D_min"] = c.D_min;
    k["D_max"] = c.D_max;
    k["mu_max"] = c.mu_max;
    k["b"] = c.b;
    k["P_max"] = s.prm.P_max;
    k["R_max"] = s.prm.R_max;
    k["rd_solver"] = c.rd_solver;
    k["rd_iters"] = c.rd_iters;
    k["eps0"] = c.eps0;
    k["eps_reg"] = c.eps_reg;
    k["lb_bins"] = c.lb_bins;
    k["lb_iters"] = c.lb_iters;
    k["lower_bound"] = c.lower_bound;
    k["strict"] = c.strict;
    k["replicas"] = c.replicas;
    k["v_list"] = c.v_list;
    k["omega_list"] = c.omega_list;
    j["config"] = k;
    nlohmann::json links = nlohmann::json::array();
    for (const auto& l : s.g.links) links.push_back({l.from, l.to});
    j["graph"] = {{"num_sensors", s.g.num_sensors}, {"measuring", s.g.measuring}, {"links", links},
                  {"l_max", s.g.l_max}};
    return j;
}

void print_summary(const std::vector<ResultRow>& rows) {
    for (const auto& s : summarize(rows))
        std::printf("%s=%g  F0=%.6g +- %.2g  queue_avg=%.6g +- %.2g  queue_max=%.6g +- %.2g  (n=%d)\n",
                    s.param.c_str(), s.value, s.F0_mean, s.F0_se, s.qavg_mean, s.qavg_se, s.qmax_mean, s.qmax_se,
                    s.n);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"energy-harvesting sensor network simulator"};
    app.set_config("--config", "", "key = value file; command line flags override it");
    app.fallthrough();
    app.require_subcommand(1);

    ExperimentConfig c;
    std::string out = ".";
    app.add_option("--out", out, "output directory");
    app.add_option("--topology", c.topology, "fig1 | line:N | star:N");
    app.add_option("--omega", c.omega);
    app.add_option("--V", c.V);
    app.add_option("--slots", c.slots);
    app.add_option("--seed", c.seed);
    app.add_option("--mode", c.mode)->check(CLI::IsMember({"plain", "side-info"}));
    app.add_flag("--force_zero_side_rate", c.force_zero_side_rate);
    app.add_option("--burn_in", c.burn_in);
    app.add_option("--initial_energy", c.initial_energy, "starting battery as a fraction of theta");
    app.add_option("--cost", c.cost)->check(CLI::IsMember({"linear", "square"}));
    app.add_option("--gain_scale", c.gain_scale);
    app.add_option("--H_max", c.H_max);
    app.add_option("--H_max_sink", c.H_max_sink);
    app.add_option("--alpha", c.alpha);
    app.add_option("--alpha_sink", c.alpha_sink);
    app.add_option("--D_min", c.D_min);
    app.add_option("--D_max", c.D_max);
    app.add_option("--mu_max", c.mu_max);
    app.add_option("--b", c.b);
    app.add_option("--P_max", c.P_max, "0 picks alpha * R_max");
    app.add_option("--R_max", c.R_max, "0 picks the full-set bound at D_min");
    app.add_option("--rd_solver", c.rd_solver)->check(CLI::IsMember({"central", "distributed", "subgradient"}));
    app.add_option("--rd_iters", c.rd_iters);
    app.add_option("--eps0", c.eps0);
    app.add_option("--eps_reg", c.eps_reg);
    app.add_option("--lb_bins", c.lb_bins);
    app.add_option("--lb_iters", c.lb_iters);
    app.add_option("--lower_bound", c.lower_bound, "compute the lower bound column");
    app.add_option("--strict", c.strict, "stop at the first invariant violation");
    app.add_option("--replicas", c.replicas);
    app.add_option("--threads", c.threads);
    app.add_option("--v_list", c.v_list)->delimiter(',');
    app.add_option("--omega_list", c.omega_list)->delimiter(',');

    auto* run_cmd = app.add_subcommand("run", "single configuration");
    auto* sv = app.add_subcommand("sweep-v", "sweep the penalty weight");
    auto* so = app.add_subcommand("sweep-omega", "sweep the source correlation");
    auto* ss = app.add_subcommand("sweep-sideinfo", "side information against the R_d = 0 baseline");
    auto* lb = app.add_subcommand("lower-bound", "lower bound per omega");

    CLI11_PARSE(app, argc, argv);

    try {
        std::vector<ResultRow> rows;
        std::string name;
        if (*run_cmd) {
            name = "run";
            rows = experiment_single(c);
        } else if (*sv) {
            name = "sweep-v";
            rows = experiment_v_sweep(c, c.v_list);
        } else if (*so) {
            name = "sweep-omega";
            rows = experiment_omega_sweep(c, c.omega_list);
        } else if (*ss) {
            name = "sweep-sideinfo";
            rows = experiment_side_info(c, c.omega_list);
        } else if (*lb) {
            name = "lower-bound";
            const double nan = std::numeric_limits<double>::quiet_NaN();
            for (double w : c.omega_list) {
                ExperimentConfig k = c;
                k.omega = w;
                k.mode = "plain";
                ResolvedSetup s = resolve(k);
                Policy pol(s.g, s.prm, s.f, s.opt);
                ResultRow r;
                r.sweep_param = "omega";
                r.value = w;
                r.F0 = r.queue_max = r.queue_avg = nan;
                r.lower_bound = lower_bound_for(k);
                r.B_over_V = pol.config().B / k.V;
                r.seed = k.seed;
                r.slots = 0;
                rows.push_back(r);
                std::printf("omega=%g  lower_bound=%.6g\n", w, r.lower_bound);
            }
        }
        if (name != "lower-bound") print_summary(rows);
        std::filesystem::create_directories(out);
        auto base = std::filesystem::path(out) / name;
        write_file(base.string() + ".csv", to_csv(rows));
        write_file(base.string() + ".json", manifest(name, c).dump(2) + "\n");
        long bad = 0;
        for (const auto& r : rows) bad += r.violations;
        if (bad > 0) {
            std::fprintf(stderr, "invariant violations: %ld\n", bad);
            return 2;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
