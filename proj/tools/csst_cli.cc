// Copyright 2026 The CSST Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: simulate, shadows, reconstruct, sweep, theory, report.
//
// Exit codes: 0 success, 2 configuration / input error, 3 resource cap,
// 4 numerical failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "csst/csst.hpp"

namespace {

using namespace csst;

struct CommonOptions {
    std::string config_path;
    std::string profile = "desk";
    std::optional<std::uint64_t> seed;
    std::string out;
    int jobs = 1;
};

void add_common(CLI::App *cmd, CommonOptions &o) {
    cmd->add_option("--config", o.config_path, "JSON configuration file");
    cmd->add_option("--profile", o.profile, "built-in profile when no config is given")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
    cmd->add_option("--out", o.out, "output directory (overrides the config)");
    cmd->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
}

StageContext make_context(const CommonOptions &o) {
    StageContext ctx;
    ctx.config = o.config_path.empty() ? preset(o.profile) : load_config(o.config_path);
    if (o.seed) ctx.config.seed = *o.seed;
    if (!o.out.empty()) ctx.config.output_dir = o.out;
    ctx.config.validate();
    ctx.root = ctx.config.output_dir;
    ctx.jobs = o.jobs;
    if (ctx.config.profile == "paper") {
        std::cerr << "warning: the paper profile (6 qubits, N=1000, 1908 observables) runs for hours\n";
    }
    io::fs::create_directories(ctx.root);
    return ctx;
}

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::ResourceLimit: return 3;
        case ErrorKind::Numerical:
        case ErrorKind::NotDiagonalizable:
        case ErrorKind::UndefinedSignal: return 4;
        default: return 2;
    }
}

void print_theory_row(io::CsvWriter &w, const std::string &quantity, const std::string &inputs, const std::string &value) {
    w.row({quantity, "\"" + inputs + "\"", value});
}

struct TheoryOptions {
    int n = 6, w = 4, big_n = 1000, m = 100, s = 100;
    double eps = 1e-2, delta = 1e-2, eps_rms = 0.05, st_fraction = 0.5, c1 = 4, c2 = 4, m_rate = 1;
    std::string out;
};

int run_theory(const TheoryOptions &t) {
    TheoryParams tp;
    tp.c1 = t.c1;
    tp.c2 = t.c2;
    tp.m_rate_constant = t.m_rate;
    tp.validate();
    const double M = static_cast<double>(pauli_family_size(t.n, t.w));
    auto g = [](double v) { return io::fmt(v); };
    const std::string wem = "w=" + std::to_string(t.w) + " eps=" + g(t.eps) + " delta=" + g(t.delta) + " M=" + g(M);
    const std::string nmm = "N=" + std::to_string(t.big_n) + " m=" + std::to_string(t.m) + " M=" + g(M) + " delta=" + g(t.delta);

    io::CsvWriter w({"quantity", "inputs", "value"});
    print_theory_row(w, "observable_count", "n=" + std::to_string(t.n) + " w_max=" + std::to_string(t.w), g(M));
    print_theory_row(w, "bernstein_shots", wem, std::to_string(bernstein_shots(t.w, t.eps, t.delta, M)));
    const MomBudget mom = mom_shots(t.w, t.eps, t.delta, M);
    print_theory_row(w, "mom_shots", wem, std::to_string(mom.shots));
    print_theory_row(w, "mom_batches", wem, std::to_string(mom.k_batches));
    const BaselineBudget base = baseline_budget(t.w, t.eps, M, t.delta, t.big_n);
    print_theory_row(w, "baseline_shots_per_timestep", wem + " N=" + std::to_string(t.big_n), std::to_string(base.per_timestep));
    print_theory_row(w, "baseline_shots_total", wem + " N=" + std::to_string(t.big_n), std::to_string(base.total));
    const CsstBudget cs = csst_budget(t.w, t.eps, M, t.delta, t.m, t.st_fraction, tp);
    const std::string csin = wem + " m=" + std::to_string(t.m) + " c2=" + g(t.c2) + " st_fraction=" + g(t.st_fraction);
    print_theory_row(w, "csst_shots_per_timestep", csin, std::to_string(cs.per_timestep));
    print_theory_row(w, "csst_shots_total", csin, std::to_string(cs.total));
    print_theory_row(w, "required_timesteps", "s=" + std::to_string(t.s) + " N=" + std::to_string(t.big_n) + " C_m=" + g(t.m_rate),
                     std::to_string(required_timesteps(t.s, t.big_n, tp)));
    print_theory_row(w, "shot_ratio_exact", nmm, g(shot_ratio_exact(t.big_n, t.m, M, t.delta)));
    print_theory_row(w, "shot_ratio_exact", "N=" + std::to_string(t.big_n) + " m=N", g(shot_ratio_exact(t.big_n, t.big_n, M, t.delta)));
    const double b = b_rms(t.s, t.big_n, t.c1);
    print_theory_row(w, "b_rms", "s=" + std::to_string(t.s) + " N=" + std::to_string(t.big_n) + " c1=" + g(t.c1), g(b));
    print_theory_row(w, "b_rms", "s=N", g(b_rms(t.big_n, t.big_n, t.c1)));
    std::string approx;
    try {
        approx = g(shot_ratio_approx(t.big_n, t.m, M, t.delta, t.eps_rms, b));
    } catch (const InfeasibleTolerance &) {
        approx = "infeasible";
    }
    print_theory_row(w, "shot_ratio_approx", nmm + " eps_rms=" + g(t.eps_rms) + " B=" + g(b), approx);
    print_theory_row(w, "l1_tail_powerlaw", "C_r=1 r=2 s=10", g(l1_tail_powerlaw(1, 2, 10)));
    print_theory_row(w, "rip_threshold", "4/sqrt(41)", g(TheoryParams::rip_threshold()));
    std::cout << w.str();
    std::cout << "# c1, c2 and C_m are configurable defaults; they are not fixed by the theory\n";
    if (!t.out.empty()) w.save(io::fs::path(t.out) / "theory.csv");
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Compressed-sensing shadow tomography toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    CommonOptions common;
    auto *simulate_cmd = app.add_subcommand("simulate", "ground-truth Pauli signals from Lindblad dynamics");
    add_common(simulate_cmd, common);

    int n_st = 0, m = 0;
    bool noiseless = false;
    auto *shadows_cmd = app.add_subcommand("shadows", "snapshots and estimates at a random timestep mask");
    add_common(shadows_cmd, common);
    shadows_cmd->add_option("--n-st", n_st, "snapshots per sampled timestep (default: first configured)");
    shadows_cmd->add_option("--m", m, "number of sampled timesteps (default: first configured)");
    shadows_cmd->add_flag("--noiseless", noiseless, "write the exact sampled signals instead of shadow estimates");

    auto *reconstruct_cmd = app.add_subcommand("reconstruct", "alpha-sweep LASSO reconstruction of every observable");
    add_common(reconstruct_cmd, common);
    reconstruct_cmd->add_option("--n-st", n_st, "N_ST label of the shadows run");
    reconstruct_cmd->add_option("--m", m, "m of the shadows run");

    auto *sweep_cmd = app.add_subcommand("sweep", "full N_ST x m x alpha grid (resumable)");
    add_common(sweep_cmd, common);

    auto *report_cmd = app.add_subcommand("report", "rebuild figure data from a finished sweep");
    add_common(report_cmd, common);

    TheoryOptions theory;
    auto *theory_cmd = app.add_subcommand("theory", "shot-budget and sampling-rate calculators");
    theory_cmd->add_option("--n", theory.n, "qubits");
    theory_cmd->add_option("--w", theory.w, "maximum Pauli weight");
    theory_cmd->add_option("--eps", theory.eps, "per-observable accuracy");
    theory_cmd->add_option("--delta", theory.delta, "failure probability");
    theory_cmd->add_option("--N", theory.big_n, "grid length");
    theory_cmd->add_option("--m", theory.m, "sampled timesteps");
    theory_cmd->add_option("--s", theory.s, "sparsity");
    theory_cmd->add_option("--eps-rms", theory.eps_rms, "RMS accuracy target");
    theory_cmd->add_option("--st-fraction", theory.st_fraction, "share of delta assigned to shadow estimation");
    theory_cmd->add_option("--c1", theory.c1, "stability constant c1");
    theory_cmd->add_option("--c2", theory.c2, "stability constant c2");
    theory_cmd->add_option("--cm", theory.m_rate, "sampling-rate constant");
    theory_cmd->add_option("--out", theory.out, "also write theory.csv here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*theory_cmd) return run_theory(theory);

        StageContext ctx = make_context(common);
        if (*sweep_cmd) {
            const SweepOutcome o = run_sweep(ctx);
            std::cout << "sweep: " << o.cells_total << " cells (" << o.cells_computed << " computed, " << o.cells_reused
                      << " reused) in " << ctx.root.string() << "\n";
            return 0;
        }
        RunManifest manifest(ctx.root, ctx.config);
        if (*simulate_cmd) {
            const SimulationArtifacts sim = stage_simulate(ctx, manifest);
            std::cout << "simulate: " << sim.signal.rows() << " observables x " << sim.signal.cols() << " timesteps\n";
            return 0;
        }
        if (*report_cmd) {
            Stopwatch sw;
            manifest.record("stages", "report", stage_report(ctx.root), sw.seconds());
            return 0;
        }
        if (n_st == 0) n_st = ctx.config.n_st.front();
        if (m == 0) m = ctx.config.m_values.front();
        if (*shadows_cmd) {
            Stopwatch sw;
            auto files = run_shadows(ctx, n_st, m, noiseless);
            manifest.record("stages", "shadows/" + cell_name(n_st, m), files, sw.seconds());
            std::cout << "shadows: " << cell_name(n_st, m) << (noiseless ? " (noiseless)" : "") << "\n";
            return 0;
        }
        if (*reconstruct_cmd) {
            Stopwatch sw;
            auto files = run_reconstruct(ctx, n_st, m);
            manifest.record("stages", "reconstruct/" + cell_name(n_st, m), files, sw.seconds());
            std::cout << "reconstruct: " << cell_name(n_st, m) << "\n";
            return 0;
        }
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
