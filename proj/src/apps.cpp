#include "jdf/apps.hpp"

#include "jdf/error.hpp"
#include "jdf/io.hpp"
#include "jdf/problems.hpp"
#include "jdf/solvers.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace jdf {

namespace {

std::string join(const std::string& dir, const std::string& name) { return (std::filesystem::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot create " + dir + ": " + ec.message());
}

std::string format(const char* fmt, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, a);
    return buf;
}

Tensor magnitude(const Tensor& u) {
    Tensor m = Tensor::zeros(u.shape());
    for (std::size_t i = 0; i < u.size(); ++i) m.real_data()[i] = std::abs(u.complex_at(i));
    return m;
}

void save(const std::string& dir, const std::string& stem, const Tensor& t) {
    write_field(join(dir, stem + ".jdf"), t);
    write_pgm(join(dir, stem + ".pgm"), t);
}

template <class F>
int guarded(std::ostream& log, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        log << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace

void RunConfig::validate() const {
    auto positive = [](double v, const char* what) {
        if (!(v > 0.0)) fail(ErrorCode::InvalidArgument, std::string(what) + " must be positive");
    };
    if (grid && *grid < 2) fail(ErrorCode::InvalidArgument, "grid must be at least 2");
    positive(spacing, "spacing");
    positive(gmres_tol, "gmres-tol");
    if (gmres_restart < 1 || gmres_maxiter < 1) fail(ErrorCode::InvalidArgument, "gmres restart and maxiter must be >= 1");
    positive(lr, "lr");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
        fail(ErrorCode::InvalidArgument, "betas must lie in [0, 1)");
    if (!(lambda_tv >= 0.0)) fail(ErrorCode::InvalidArgument, "lambda-tv must be non-negative");
    if (dt) positive(*dt, "dt");
    positive(t_end, "t-end");
    if (snapshots < 1) fail(ErrorCode::InvalidArgument, "snapshots must be >= 1");
    if (discr != "fourier" && discr != "fd") fail(ErrorCode::InvalidArgument, "discr must be 'fourier' or 'fd'");
    positive(tol, "tol");
}

int cmd_lens_opt(const RunConfig& cfg, std::ostream& log) {
    return guarded(log, [&] {
        cfg.validate();
        HelmholtzProblem p = HelmholtzProblem::scaled(cfg.grid.value_or(256), cfg.spacing);
        p.lambda_tv = cfg.lambda_tv;
        p.gmres = {cfg.gmres_tol, cfg.gmres_restart, cfg.gmres_maxiter};
        p.seed = cfg.seed;
        LensObjective objective(p);
        ensure_dir(cfg.out);

        std::ofstream csv(join(cfg.out, "loss.csv"));
        if (!csv) fail(ErrorCode::IoFailure, "cannot write loss.csv");
        csv << "step,loss,target_amplitude\n";

        Tensor rho = init_lens_params(p.seed, p.lens.shape());
        AdamState adam = adam_init(rho, cfg.lr, cfg.beta1, cfg.beta2);
        bool converged = true;
        for (std::size_t k = 0; k <= cfg.steps; ++k) {
            auto e = objective.value_and_grad(rho);
            const bool ok = e.diag.all_converged();
            converged = converged && ok;
            std::size_t iters = 0;
            for (const auto& r : e.diag.records) iters += r.iterations;
            csv << k << "," << format("%.12e", e.loss) << "," << format("%.12e", e.target_amplitude) << "\n";
            log << "step " << k << " loss " << format("%.6e", e.loss) << " amplitude "
                << format("%.6e", e.target_amplitude) << " gmres-iterations " << iters << (ok ? "" : " (not converged)")
                << "\n";
            if (k < cfg.steps) adam_step(adam, rho, e.grad);
        }
        if (!csv.flush()) fail(ErrorCode::IoFailure, "cannot write loss.csv");

        Diagnostics diag;
        Tensor u = objective.wavefield(rho, &diag);
        converged = converged && diag.all_converged();
        save(cfg.out, "sound_speed", objective.sound_speed(rho));
        save(cfg.out, "wavefield_abs", magnitude(u));
        save(cfg.out, "tv_integrand", objective.tv_field(rho));
        write_field(join(cfg.out, "wavefield.jdf"), u);
        log << (converged ? "all solves converged" : "some solves did not converge") << "\n";
        return converged ? 0 : 1;
    });
}

Tensor gaussian_field(const Domain& domain, double sigma) {
    Tensor x = grid_coordinates(domain);
    const std::size_t D = domain.dims();
    Tensor g = Tensor::zeros(domain.grid_shape(1));
    for (std::size_t i = 0; i < g.size(); ++i) {
        double r2 = 0.0;
        for (std::size_t a = 0; a < D; ++a) r2 += x.real_at(i * D + a) * x.real_at(i * D + a);
        g.real_data()[i] = std::exp(-r2 / (2.0 * sigma * sigma));
    }
    return g;
}

int cmd_heat(const RunConfig& cfg, std::ostream& log) {
    return guarded(log, [&] {
        cfg.validate();
        const std::size_t n = cfg.grid.value_or(64);
        Domain d({n, n}, {cfg.spacing, cfg.spacing});
        Family fam = cfg.discr == "fd" ? Family::finite_differences(d, 2) : Family::real_fourier(d);

        Tensor u0;
        if (cfg.init.empty()) {
            u0 = gaussian_field(d, 4.0 * cfg.spacing);
        } else {
            u0 = read_field(cfg.init);
            if (u0.is_complex()) fail(ErrorCode::ShapeMismatch, "heat initial field must be real");
            if (u0.shape() == Shape{n, n}) u0 = u0.reshaped({n, n, 1});
            if (u0.shape() != d.grid_shape(1))
                fail(ErrorCode::ShapeMismatch, "initial field " + to_string(u0.shape()) + " does not match the grid");
        }

        TracedOperator rhs = trace(ops::laplacian(ops::field("u")), {empty_field(fam, "u")});
        const double dt_max = cfg.dt.value_or(default_diffusion_dt(d));
        const auto steps = static_cast<std::size_t>(std::ceil(cfg.t_end / dt_max - 1e-9));
        const double dt = cfg.t_end / static_cast<double>(steps);
        ensure_dir(cfg.out);
        log << "heat " << cfg.discr << " grid " << n << " dt " << format("%.6g", dt) << " steps " << steps << "\n";

        // Snapshot k sits at step round(k * steps / (snapshots - 1)).
        const std::size_t N = cfg.snapshots;
        auto step_of = [&](std::size_t k) {
            return N == 1 ? steps : static_cast<std::size_t>(std::llround(double(k) * double(steps) / double(N - 1)));
        };
        Tensor u = u0;
        std::size_t done = 0;
        for (std::size_t k = 0; k < N; ++k) {
            const std::size_t target = step_of(k);
            if (target > done) {
                try {
                    u = integrate_explicit(rhs, "u", u, dt, target - done, target - done).states.back();
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::NaNEncountered) throw;
                    log << "error: blow-up between steps " << done << " and " << target << " (" << e.what()
                        << "); reduce --dt\n";
                    return 2;
                }
                done = target;
            }
            char stem[32];
            std::snprintf(stem, sizeof stem, "heat_%03zu", k);
            save(cfg.out, stem, u);
            double mean = 0.0;
            for (double v : u.real_data()) mean += v;
            mean /= static_cast<double>(u.size());
            log << "snapshot " << k << " t " << format("%.6g", double(done) * dt) << " max "
                << format("%.6e", max_abs(u)) << " mean " << format("%.12e", mean) << "\n";
        }
        return 0;
    });
}

double swap_discrepancy(const Domain& domain, const Tensor& u) {
    const Expr lap = ops::laplacian(ops::field("u"));
    Tensor fd = trace(lap, {empty_field(Family::finite_differences(domain, 2), "u")}).apply({{"u", u}});
    Tensor sp = trace(lap, {empty_field(Family::real_fourier(domain), "u")}).apply({{"u", u}});
    const std::size_t D = domain.dims();
    double num = 0.0, den = 0.0, scale = 0.0;
    std::vector<std::size_t> idx(D);
    for (std::size_t i = 0; i < u.size(); ++i) {
        std::size_t rem = i;
        bool interior = true;
        for (std::size_t a = D; a-- > 0;) {
            idx[a] = rem % domain.n()[a];
            rem /= domain.n()[a];
            interior = interior && idx[a] > 0 && idx[a] + 1 < domain.n()[a];
        }
        scale += u.real_at(i) * u.real_at(i);
        if (!interior) continue;
        num += std::pow(fd.real_at(i) - sp.real_at(i), 2);
        den += sp.real_at(i) * sp.real_at(i);
    }
    const double h2 = domain.min_spacing() * domain.min_spacing();
    if (std::sqrt(den) <= 1e-10 * std::sqrt(scale) / h2) return std::sqrt(num);
    return std::sqrt(num / den);
}

int cmd_swap_check(const RunConfig& cfg, std::ostream& log) {
    return guarded(log, [&] {
        cfg.validate();
        const std::size_t n = cfg.grid.value_or(128);
        const double dx = cfg.spacing;
        Domain coarse({n, n}, {dx, dx}), fine({2 * n, 2 * n}, {dx / 2, dx / 2});
        const double sigma = 8.0 * dx;
        const double e1 = swap_discrepancy(coarse, gaussian_field(coarse, sigma));
        const double e2 = swap_discrepancy(fine, gaussian_field(fine, sigma));
        const double err = e1;
        log << "relative L2 discrepancy fd vs fourier (" << n << "x" << n << ", sigma " << sigma
            << "): " << format("%.6e", err) << "\n";
        log << "fd convergence: error " << format("%.6e", e1) << " at dx " << dx << ", " << format("%.6e", e2)
            << " at dx " << dx / 2 << ", ratio " << format("%.4f", e1 / e2) << "\n";
        const bool ok = err < cfg.tol;
        log << (ok ? "within" : "exceeds") << " tolerance " << cfg.tol << "\n";
        return ok ? 0 : 1;
    });
}

} // namespace jdf
