// Command-line front end: run, scenario, sweep, fit-rate.
//
// Exit codes: 0 completed, 2 blow-up detected, 1 error (including aborted runs).

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pks/harness.hpp"

extern char** environ;

namespace {

int exit_code(pks::RunStatus s) {
    switch (s) {
    case pks::RunStatus::completed:
        return 0;
    case pks::RunStatus::blowup_detected:
        return 2;
    default:
        return 1;
    }
}

pks::Overrides collect_overrides(const std::vector<std::string>& sets) {
    pks::Overrides ov = pks::env_overrides(environ);
    for (const auto& s : sets) ov.push_back(pks::split_assignment(s));
    return ov;
}

void report(const pks::RunResult& r) {
    const auto& o = r.outcome;
    pks::Json summary{{"status", pks::to_string(o.status)},
                      {"message", o.message},
                      {"t_final", o.final_state.t},
                      {"records", o.records.size()},
                      {"wall_seconds", r.wall_seconds}};
    if (!o.records.empty()) {
        const auto& last = o.records.back();
        summary["mass"] = last.mass;
        summary["n_linf"] = last.n_linf;
        summary["h2"] = last.h2_quantity();
    }
    if (!r.directory.empty()) summary["directory"] = r.directory.string();
    std::cout << summary.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shear-advected Patlak-Keller-Segel simulator"};
    app.require_subcommand(1);

    std::vector<std::string> sets;
    std::string config_path, resume_path, out_dir;

    auto* run_cmd = app.add_subcommand("run", "Run a configuration file");
    run_cmd->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--set", sets, "Override key=value (dotted path)");
    run_cmd->add_option("--resume", resume_path, "Continue from a checkpoint")->check(CLI::ExistingFile);
    run_cmd->add_option("--out", out_dir, "Output directory (overrides output.directory)");

    std::string scenario;
    auto* sc_cmd = app.add_subcommand("scenario", "Run a preset scenario");
    sc_cmd->add_option("name", scenario, "blowup_noflow | suppression | passive_scalar_ed | elliptic_comparison")
        ->required();
    sc_cmd->add_option("--set", sets, "Override key=value (dotted path)");
    sc_cmd->add_option("--out", out_dir, "Output directory");

    std::string param, values, column, window, sweep_base = "passive_scalar_ed";
    bool absolute_window = false;
    auto* sw_cmd = app.add_subcommand("sweep", "Run one scenario or config per parameter value");
    sw_cmd->add_option("--param", param, "Dotted parameter path, e.g. model.A")->required();
    sw_cmd->add_option("--values", values, "Comma-separated values")->required();
    sw_cmd->add_option("--scenario", sweep_base, "Base scenario")->capture_default_str();
    sw_cmd->add_option("--config", config_path, "Base config file instead of a scenario")->check(CLI::ExistingFile);
    sw_cmd->add_option("--set", sets, "Override key=value (dotted path)");
    sw_cmd->add_option("--column", column, "Fitted column (default phi_k1 passive, h2 otherwise)");
    sw_cmd->add_option("--window", window, "Fit window a,b (default 1,2 passive, 5,50 otherwise)");
    sw_cmd->add_flag("--absolute-window", absolute_window, "Window in time units instead of A^{1/3} units");
    sw_cmd->add_option("--out", out_dir, "Sweep output directory");

    std::string input;
    auto* fit_cmd = app.add_subcommand("fit-rate", "Fit an exponential decay rate to a records column");
    fit_cmd->add_option("--input", input, "Records CSV")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--column", column, "Column name, or h2")->required();
    fit_cmd->add_option("--window", window, "Time window a,b")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            pks::Overrides ov = collect_overrides(sets);
            if (!out_dir.empty()) ov.emplace_back("output.directory", pks::Json(out_dir).dump());
            const pks::RunConfig cfg = pks::load_config(config_path, ov);
            const auto resume = resume_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(resume_path);
            const pks::RunResult r = pks::execute(cfg, resume);
            report(r);
            return exit_code(r.outcome.status);
        }
        if (*sc_cmd) {
            pks::Overrides ov = collect_overrides(sets);
            if (!out_dir.empty()) ov.emplace_back("output.directory", pks::Json(out_dir).dump());
            const pks::RunResult r = pks::run_scenario(scenario, ov);
            report(r);
            return exit_code(r.outcome.status);
        }
        if (*sw_cmd) {
            const pks::Overrides ov = collect_overrides(sets);
            std::variant<std::string, pks::Json> base = sweep_base;
            pks::RunConfig probe;
            if (!config_path.empty()) {
                std::ifstream is(config_path);
                pks::Json doc = pks::Json::parse(is, nullptr, false);
                if (doc.is_discarded()) throw pks::ConfigError("config file is not valid JSON: " + config_path);
                base = doc;
                for (const auto& [k, v] : ov) pks::apply_override(doc, k, v);
                probe = pks::config_from_json(doc);
            } else {
                probe = pks::scenario_config(sweep_base, ov);
            }
            const bool passive = probe.mode == pks::RunMode::passive_scalar;
            pks::FitRequest fit;
            fit.column = !column.empty() ? column : (passive ? "phi_k1" : "h2");
            fit.window = !window.empty() ? pks::parse_window(window)
                                         : (passive ? std::pair{1.0, 2.0} : std::pair{5.0, 50.0});
            fit.scaled_window = !absolute_window;
            const pks::SweepResult s = pks::sweep(base, param, pks::parse_value_list(values), fit, ov, out_dir);
            std::cout << pks::to_json(s).dump(2) << '\n';
            int code = 0;
            for (const auto& row : s.rows) {
                if (row.status == pks::RunStatus::aborted) code = 1;
            }
            return code;
        }
        if (*fit_cmd) {
            const pks::RecordTable t = pks::read_records(input);
            pks::FitRequest req{column, pks::parse_window(window), false};
            const pks::DecayFit f = pks::fit_records(t, req, 1.0);
            std::cout << pks::Json{{"column", column},
                                   {"rate", f.rate},
                                   {"r_squared", f.r_squared},
                                   {"samples", f.samples},
                                   {"window", {f.t_lo, f.t_hi}}}
                             .dump(2)
                      << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
