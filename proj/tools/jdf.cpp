#include "jdf/apps.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    jdf::RunConfig cfg;
    CLI::App app{"Differentiable PDE operators: lens optimization, heat simulation, discretization swap"};
    app.set_config("--config", "", "Flat 'key = value' file; keys are long flag names without dashes");
    app.allow_config_extras(false);
    app.fallthrough();
    app.require_subcommand(1);

    std::size_t grid = 0;
    double dt = 0.0;
    app.add_option("--grid", grid, "Cells per axis (lens-opt 256, heat-sim 64, swap-check 128)");
    app.add_option("--spacing", cfg.spacing, "Grid spacing")->capture_default_str();
    app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    app.add_option("--out", cfg.out, "Output directory")->capture_default_str();
    app.add_option("--gmres-tol", cfg.gmres_tol)->capture_default_str();
    app.add_option("--gmres-restart", cfg.gmres_restart)->capture_default_str();
    app.add_option("--gmres-maxiter", cfg.gmres_maxiter)->capture_default_str();
    app.add_option("--steps", cfg.steps, "Adam steps")->capture_default_str();
    app.add_option("--lr", cfg.lr)->capture_default_str();
    app.add_option("--beta1", cfg.beta1)->capture_default_str();
    app.add_option("--beta2", cfg.beta2)->capture_default_str();
    app.add_option("--lambda-tv", cfg.lambda_tv)->capture_default_str();
    app.add_option("--dt", dt, "Time step (default 0.1 dx^2)");
    app.add_option("--t-end", cfg.t_end)->capture_default_str();
    app.add_option("--snapshots", cfg.snapshots)->capture_default_str();
    app.add_option("--discr", cfg.discr)->check(CLI::IsMember({"fourier", "fd"}))->capture_default_str();
    app.add_option("--init", cfg.init, "Initial FieldFile for heat-sim (Gaussian when omitted)");
    app.add_option("--tol", cfg.tol, "swap-check threshold")->capture_default_str();

    auto* lens = app.add_subcommand("lens-opt", "Optimize the lens sound speed for target amplitude");
    auto* heat = app.add_subcommand("heat-sim", "Integrate the heat equation");
    auto* swap = app.add_subcommand("swap-check", "Compare the Laplacian under two discretizations");

    CLI11_PARSE(app, argc, argv);
    if (app.count("--grid")) cfg.grid = grid;
    if (app.count("--dt")) cfg.dt = dt;

    if (lens->parsed()) return jdf::cmd_lens_opt(cfg, std::cout);
    if (heat->parsed()) return jdf::cmd_heat(cfg, std::cout);
    if (swap->parsed()) return jdf::cmd_swap_check(cfg, std::cout);
    return 2;
}
