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

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "csst/errors.hpp"
#include "csst/io.hpp"
#include "csst/lindblad.hpp"
#include "csst/metrics.hpp"
#include "csst/pauli.hpp"
#include "csst/recovery.hpp"
#include "csst/rng.hpp"
#include "csst/shadows.hpp"
#include "csst/theory.hpp"
#include "csst/transform.hpp"

namespace csst {

inline constexpr const char *kToolVersion = "0.1.0";

// ---- configuration ---------------------------------------------------------

struct ModelConfig {
    std::string kind = "heisenberg";  // heisenberg | tfim
    int rows = 1;
    int cols = 3;
    double J = 1.0;
    double h = 1.0;  // transverse field (tfim only)
    double gamma_phi = 0.1;
    double gamma_1 = 0.1;
    std::string initial_state = "plus-minus-product";
};

struct ExperimentConfig {
    std::string profile = "desk";
    ModelConfig model;
    int N = 256;
    double dt = 0.05;
    int w_max = 2;
    std::vector<int> n_st{100, 1000, 10000};
    std::vector<int> m_values{64, 154, 256};
    double alpha_min = 1e-7;
    double alpha_max = 1e-2;
    int alpha_points = 30;
    double lasso_tol = 1e-8;
    int lasso_max_iters = 100000;
    double variance_threshold = 1e-3;
    double snr_threshold_db = 1.0;
    std::uint64_t seed = 20240601;
    int max_qubits = 6;
    std::string output_dir = "runs/desk";

    int num_qubits() const noexcept { return model.rows * model.cols; }
    std::vector<double> alpha_grid() const { return log_grid(alpha_min, alpha_max, alpha_points); }
    LassoConfig lasso() const {
        LassoConfig c;
        c.tol = lasso_tol;
        c.max_iters = lasso_max_iters;
        return c;
    }

    void validate() const {
        auto need = [](bool ok, const std::string &msg) {
            if (!ok) throw ConfigError("config: " + msg);
        };
        need(model.kind == "heisenberg" || model.kind == "tfim", "model.kind must be heisenberg or tfim");
        need(model.rows >= 1 && model.cols >= 1, "lattice dimensions must be >= 1");
        need(num_qubits() <= PauliString::kMaxQubits, "lattice is too large");
        need(model.gamma_phi >= 0 && model.gamma_1 >= 0, "dissipation rates must be >= 0");
        need(std::isfinite(model.J) && std::isfinite(model.h), "couplings must be finite");
        try {
            InitialStateSpec::parse(model.initial_state);
        } catch (const InvalidArgument &e) {
            need(false, e.what());
        }
        need(N >= 1, "grid.N must be >= 1");
        need(dt > 0 && std::isfinite(dt), "grid.dt must be positive");
        need(w_max >= 1 && w_max <= num_qubits(), "observables.w_max must lie in [1, n]");
        need(!n_st.empty() && !m_values.empty(), "shadows.n_st and masks.m must be nonempty");
        for (int k : n_st) need(k >= 1, "every N_ST must be >= 1");
        for (int m : m_values) need(m >= 1 && m <= N, "every m must lie in [1, N]");
        need(std::set<int>(n_st.begin(), n_st.end()).size() == n_st.size(), "shadows.n_st has duplicates");
        need(std::set<int>(m_values.begin(), m_values.end()).size() == m_values.size(), "masks.m has duplicates");
        need(alpha_min > 0 && alpha_max >= alpha_min && alpha_points >= 1, "alpha grid needs 0 < min <= max, points >= 1");
        need(lasso_tol > 0 && lasso_max_iters >= 1, "lasso.tol > 0 and lasso.max_iters >= 1 required");
        need(variance_threshold >= 0, "filters.variance_threshold must be >= 0");
        need(!std::isnan(snr_threshold_db), "filters.snr_threshold_db must be a number");
        need(max_qubits >= 1 && max_qubits <= 8, "max_qubits must lie in [1, 8]");
    }
};

/// Built-in profiles. "desk" is sized for a laptop; "paper" is the 2x3
/// lattice at full grid length and is expensive.
inline ExperimentConfig preset(const std::string &name) {
    ExperimentConfig c;
    if (name == "desk") return c;
    if (name == "paper") {
        c.profile = "paper";
        c.model.rows = 2;
        c.model.cols = 3;
        c.N = 1000;
        c.dt = 0.024;
        c.w_max = 4;
        c.n_st = {10, 100, 265, 1000, 7437, 50000};
        c.m_values = {50, 93, 200, 400, 597, 800, 1000};
        c.output_dir = "runs/paper";
        return c;
    }
    throw ConfigError("unknown profile \"" + name + "\" (expected desk or paper)");
}

inline io::Json config_to_json(const ExperimentConfig &c) {
    return io::Json{
        {"profile", c.profile},
        {"model",
         {{"kind", c.model.kind},
          {"rows", c.model.rows},
          {"cols", c.model.cols},
          {"J", c.model.J},
          {"h", c.model.h},
          {"gamma_phi", c.model.gamma_phi},
          {"gamma_1", c.model.gamma_1},
          {"initial_state", c.model.initial_state}}},
        {"grid", {{"N", c.N}, {"dt", c.dt}}},
        {"observables", {{"w_max", c.w_max}}},
        {"shadows", {{"n_st", c.n_st}}},
        {"masks", {{"m", c.m_values}}},
        {"alpha_grid", {{"min", c.alpha_min}, {"max", c.alpha_max}, {"points", c.alpha_points}}},
        {"lasso", {{"tol", c.lasso_tol}, {"max_iters", c.lasso_max_iters}}},
        {"filters", {{"variance_threshold", c.variance_threshold}, {"snr_threshold_db", c.snr_threshold_db}}},
        {"seed", c.seed},
        {"max_qubits", c.max_qubits},
        {"output_dir", c.output_dir},
    };
}

namespace detail {

inline void reject_unknown(const io::Json &obj, const std::string &where, std::initializer_list<const char *> keys) {
    if (!obj.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (const auto &[k, v] : obj.items()) {
        bool known = false;
        for (const char *allowed : keys) known = known || k == allowed;
        if (!known) throw ConfigError("config: unknown key \"" + (where.empty() ? k : where + "." + k) + "\"");
    }
}

template <class T>
void read_key(const io::Json &obj, const char *key, T &out, const std::string &where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception &) {
        throw ConfigError("config: \"" + where + key + "\" has the wrong type");
    }
}

}  // namespace detail

/// Strict parse: unknown keys and wrong types are ConfigErrors. Missing keys
/// take the value of the named profile (default "desk").
inline ExperimentConfig config_from_json(const io::Json &j) {
    using detail::read_key;
    detail::reject_unknown(j, "", {"profile", "model", "grid", "observables", "shadows", "masks", "alpha_grid", "lasso",
                                   "filters", "seed", "max_qubits", "output_dir"});
    std::string profile = "desk";
    read_key(j, "profile", profile, "");
    ExperimentConfig c = preset(profile);
    if (j.contains("model")) {
        const auto &m = j["model"];
        detail::reject_unknown(m, "model", {"kind", "rows", "cols", "J", "h", "gamma_phi", "gamma_1", "initial_state"});
        read_key(m, "kind", c.model.kind, "model.");
        read_key(m, "rows", c.model.rows, "model.");
        read_key(m, "cols", c.model.cols, "model.");
        read_key(m, "J", c.model.J, "model.");
        read_key(m, "h", c.model.h, "model.");
        read_key(m, "gamma_phi", c.model.gamma_phi, "model.");
        read_key(m, "gamma_1", c.model.gamma_1, "model.");
        read_key(m, "initial_state", c.model.initial_state, "model.");
    }
    if (j.contains("grid")) {
        detail::reject_unknown(j["grid"], "grid", {"N", "dt"});
        read_key(j["grid"], "N", c.N, "grid.");
        read_key(j["grid"], "dt", c.dt, "grid.");
    }
    if (j.contains("observables")) {
        detail::reject_unknown(j["observables"], "observables", {"w_max"});
        read_key(j["observables"], "w_max", c.w_max, "observables.");
    }
    if (j.contains("shadows")) {
        detail::reject_unknown(j["shadows"], "shadows", {"n_st"});
        read_key(j["shadows"], "n_st", c.n_st, "shadows.");
    }
    if (j.contains("masks")) {
        detail::reject_unknown(j["masks"], "masks", {"m"});
        read_key(j["masks"], "m", c.m_values, "masks.");
    }
    if (j.contains("alpha_grid")) {
        detail::reject_unknown(j["alpha_grid"], "alpha_grid", {"min", "max", "points"});
        read_key(j["alpha_grid"], "min", c.alpha_min, "alpha_grid.");
        read_key(j["alpha_grid"], "max", c.alpha_max, "alpha_grid.");
        read_key(j["alpha_grid"], "points", c.alpha_points, "alpha_grid.");
    }
    if (j.contains("lasso")) {
        detail::reject_unknown(j["lasso"], "lasso", {"tol", "max_iters"});
        read_key(j["lasso"], "tol", c.lasso_tol, "lasso.");
        read_key(j["lasso"], "max_iters", c.lasso_max_iters, "lasso.");
    }
    if (j.contains("filters")) {
        detail::reject_unknown(j["filters"], "filters", {"variance_threshold", "snr_threshold_db"});
        read_key(j["filters"], "variance_threshold", c.variance_threshold, "filters.");
        read_key(j["filters"], "snr_threshold_db", c.snr_threshold_db, "filters.");
    }
    read_key(j, "seed", c.seed, "");
    read_key(j, "max_qubits", c.max_qubits, "");
    read_key(j, "output_dir", c.output_dir, "");
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const io::fs::path &path) {
    io::Json j;
    try {
        j = io::Json::parse(io::read_text(path));
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    } catch (const IoError &e) {
        throw ConfigError(e.what());
    }
    return config_from_json(j);
}

/// FNV-1a over the canonical JSON, excluding the output directory.
inline std::string config_hash(const ExperimentConfig &c) {
    io::Json j = config_to_json(c);
    j.erase("output_dir");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_label(j.dump())));
    return buf;
}

// ---- seeds -----------------------------------------------------------------

/// Snapshot stream for one timestep; independent of N_ST, so smaller budgets
/// are prefixes of larger ones.
inline std::uint64_t shadow_key(std::uint64_t master, int timestep) {
    return derive_key(master, {hash_label("shadows"), static_cast<std::uint64_t>(timestep)});
}

/// One mask per m, shared by every N_ST.
inline std::uint64_t mask_key(std::uint64_t master, int m) {
    return derive_key(master, {hash_label("mask"), static_cast<std::uint64_t>(m)});
}

// ---- simulation ------------------------------------------------------------

struct Simulation {
    SpinHamiltonian hamiltonian;
    LindbladModel model;
    TimeGrid grid;
    std::vector<DensityMatrix> states;
    SignalMatrix signal;
};

inline SpinHamiltonian build_hamiltonian(const ExperimentConfig &c) {
    ResourceCaps caps{c.max_qubits};
    if (c.model.kind == "heisenberg") return build_heisenberg(c.model.rows, c.model.cols, c.model.J, caps);
    return build_tfim(c.model.rows, c.model.cols, c.model.J, c.model.h, caps);
}

inline Simulation simulate(const ExperimentConfig &c) {
    c.validate();
    Simulation s;
    s.hamiltonian = build_hamiltonian(c);
    const int n = s.hamiltonian.n;
    s.model.n = n;
    s.model.hamiltonian = s.hamiltonian.matrix();
    s.model.jumps = standard_dissipator(n, c.model.gamma_phi, c.model.gamma_1);
    s.grid = TimeGrid(c.N, c.dt);
    s.states = evolve_grid(s.model, initial_state(c.model.initial_state, n), s.grid, ResourceCaps{c.max_qubits});
    s.signal = signal_matrix(s.states, enumerate_paulis(n, c.w_max), s.grid);
    return s;
}

inline io::Json model_sidecar(const ExperimentConfig &c, const Simulation &s) {
    io::Json terms = io::Json::array();
    for (const auto &t : s.hamiltonian.terms) terms.push_back({{"pauli", t.pauli.str()}, {"coefficient", t.coeff}});
    io::Json jumps = io::Json::array();
    for (const auto &j : s.model.jumps) jumps.push_back({{"label", j.label}, {"rate", j.rate}});
    io::Json edges = io::Json::array();
    for (auto [a, b] : s.hamiltonian.edges) edges.push_back({a, b});
    return io::Json{{"kind", c.model.kind},  {"n", s.model.n},       {"rows", c.model.rows},
                    {"cols", c.model.cols},  {"edges", edges},       {"hamiltonian_terms", terms},
                    {"jumps", jumps},        {"initial_state", c.model.initial_state},
                    {"N", s.grid.N},         {"dt", s.grid.dt},      {"observables", s.signal.observables.size()}};
}

inline std::vector<int> all_timesteps(int n) {
    std::vector<int> t(static_cast<size_t>(n));
    std::iota(t.begin(), t.end(), 0);
    return t;
}

// ---- shadow estimation -----------------------------------------------------

/// Shadow estimates of every observable at each requested timestep, for each
/// budget in `budgets` (ascending). result[b] is M x timesteps.size(). The
/// budgets share one snapshot stream per timestep, so each budget's dataset
/// is a prefix of the next one.
inline std::vector<RMatrix> shadow_estimates(const std::vector<DensityMatrix> &states,
                                             const std::vector<PauliString> &family, const std::vector<int> &timesteps,
                                             const std::vector<int> &budgets, std::uint64_t master) {
    detail::require(std::is_sorted(budgets.begin(), budgets.end()) && !budgets.empty() && budgets.front() >= 1,
                    "shadow budgets must be ascending and positive");
    const auto M = static_cast<Eigen::Index>(family.size());
    std::vector<RMatrix> out(budgets.size(), RMatrix(M, static_cast<Eigen::Index>(timesteps.size())));
    std::vector<double> scale(family.size());
    for (size_t i = 0; i < family.size(); ++i) scale[i] = std::pow(3.0, family[i].weight());

    for (size_t c = 0; c < timesteps.size(); ++c) {
        const int j = timesteps[c];
        const ShadowDataset ds = sample_snapshots(states[static_cast<size_t>(j)], budgets.back(), shadow_key(master, j), j);
        // Histogram of distinct (basis, outcome) records: estimates are exact
        // integer sign sums weighted by multiplicity.
        std::unordered_map<std::uint64_t, size_t> index;
        std::vector<Snapshot> distinct;
        std::vector<long long> counts;
        size_t taken = 0;
        for (size_t b = 0; b < budgets.size(); ++b) {
            for (; taken < static_cast<size_t>(budgets[b]); ++taken) {
                const Snapshot &s = ds.snapshots[taken];
                const std::uint64_t key = (s.bases.packed() << 32) | s.outcome;
                auto [it, fresh] = index.emplace(key, distinct.size());
                if (fresh) {
                    distinct.push_back(s);
                    counts.push_back(0);
                }
                ++counts[it->second];
            }
            for (size_t i = 0; i < family.size(); ++i) {
                long long acc = 0;
                for (size_t u = 0; u < distinct.size(); ++u) acc += counts[u] * detail::shot_sign(distinct[u], family[i]);
                out[b](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                    scale[i] * static_cast<double>(acc) / static_cast<double>(budgets[b]);
            }
        }
    }
    return out;
}

// ---- per-cell reconstruction -----------------------------------------------

struct BaselineStats {
    std::vector<double> rmse_st;
    std::vector<double> snr_db;  // NaN when the truth is identically zero
};

inline BaselineStats baseline_stats(const RMatrix &truth, const RMatrix &estimates) {
    BaselineStats b;
    for (Eigen::Index i = 0; i < truth.rows(); ++i) {
        const RVector t = truth.row(i).transpose(), e = estimates.row(i).transpose();
        b.rmse_st.push_back(rmse(t, e));
        b.snr_db.push_back(t.squaredNorm() > 0 ? snr_db(t, e) : std::numeric_limits<double>::quiet_NaN());
    }
    return b;
}

struct CellResult {
    int n_st = 0;
    SamplingPlan plan;
    std::vector<ObservableReport> reports;
    std::vector<std::vector<double>> sweep_rmse;  // per observable, per alpha; empty unless kept
    std::vector<std::string> skip_reasons;        // per observable; empty when kept
    std::vector<RVector> best_signals;            // per observable; empty unless kept
    std::vector<ReconstructionResult> best_results;
};

/// Filters, alpha-sweeps and scores every observable for one mask.
/// `sampled` holds the estimates at plan.omega (M x m); `baseline` carries
/// the ST-at-all-times error statistics used for R and the SNR filter.
inline CellResult reconstruct_cell(const SignalMatrix &truth, const RMatrix &sampled, const SamplingPlan &plan,
                                   const BaselineStats &baseline, const ExperimentConfig &c) {
    const auto M = static_cast<size_t>(truth.rows());
    detail::require(sampled.rows() == truth.rows() && sampled.cols() == plan.m(), "reconstruct: estimate shape mismatch");
    const std::vector<double> grid = c.alpha_grid();
    CellResult cell;
    cell.plan = plan;
    cell.reports.resize(M);
    cell.sweep_rmse.resize(M);
    cell.skip_reasons.resize(M);
    cell.best_signals.resize(M);
    cell.best_results.resize(M);
    for (size_t i = 0; i < M; ++i) {
        auto &r = cell.reports[i];
        r.pauli = truth.observables[i];
        r.weight = r.pauli.weight();
        r.rmse_st = baseline.rmse_st[i];
        r.snr_db = baseline.snr_db[i];
        const RVector t = truth.row(static_cast<Eigen::Index>(i));
        if (t.size() < 2 || !variance_filter(t, c.variance_threshold)) {
            r.filtered = FilterStatus::VarianceFiltered;
            cell.skip_reasons[i] = "variance of true signal below " + io::fmt(c.variance_threshold);
            continue;
        }
        if (!(r.snr_db >= c.snr_threshold_db)) {
            r.filtered = FilterStatus::SnrFiltered;
            cell.skip_reasons[i] = "baseline SNR " + io::fmt(r.snr_db) + " dB below " + io::fmt(c.snr_threshold_db) + " dB";
            continue;
        }
        try {
            const RVector samples = sampled.row(static_cast<Eigen::Index>(i)).transpose();
            AlphaSweep sweep = alpha_sweep(plan, samples, grid, t, c.lasso());
            for (const auto &e : sweep.entries) cell.sweep_rmse[i].push_back(*e.rmse);
            const auto &best = sweep.entries[*sweep.best];
            r.rmse_cs_best = *best.rmse;
            r.alpha_star = best.alpha;
            if (r.rmse_st > 0) {
                r.R = r.rmse_cs_best / r.rmse_st;
                if (r.R > 0) r.srf = srf(plan.N, plan.m(), r.R);
            }
            cell.best_signals[i] = best.result.signal;
            cell.best_results[i] = best.result;
        } catch (const Error &e) {
            r.filtered = FilterStatus::SolverFailed;
            cell.sweep_rmse[i].clear();
            cell.skip_reasons[i] = std::string("solver failure: ") + e.what();
        }
    }
    return cell;
}

inline std::string cell_name(int n_st, int m) { return "nst" + std::to_string(n_st) + "_m" + std::to_string(m); }

inline io::Json weight_summary_json(const WeightSummary &s) {
    auto ms = [](const MeanStd &v) {
        return io::Json{{"mean", std::isnan(v.mean) ? io::Json(nullptr) : io::Json(v.mean)},
                        {"std", std::isnan(v.std) ? io::Json(nullptr) : io::Json(v.std)},
                        {"count", v.count}};
    };
    return io::Json{{"weight", s.weight},
                    {"total", s.total},
                    {"kept", s.kept},
                    {"variance_filtered", s.variance_filtered},
                    {"snr_filtered", s.snr_filtered},
                    {"solver_failed", s.solver_failed},
                    {"zero_baseline", s.zero_baseline},
                    {"rmse_st", ms(s.rmse_st)},
                    {"rmse_st_kept", ms(s.rmse_st_kept)},
                    {"rmse_cs", ms(s.rmse_cs)},
                    {"alpha_star", ms(s.alpha_star)},
                    {"R", ms(s.R)},
                    {"srf", ms(s.srf)}};
}

/// Writes one cell's files into `dir` and returns their paths.
inline std::vector<io::fs::path> write_cell(const io::fs::path &dir, const CellResult &cell, const SignalMatrix &truth,
                                           const std::vector<double> &grid, int n_st_label) {
    std::vector<io::fs::path> files;
    auto keep = [&](const io::fs::path &p) { files.push_back(p); };

    io::write_json(dir / "mask.json", io::plan_to_json(cell.plan));
    keep(dir / "mask.json");

    io::CsvWriter reports({"pauli", "weight", "filtered", "rmse_st", "rmse_cs_best", "alpha_star", "R", "snr_db", "srf"});
    io::CsvWriter sweep({"pauli", "weight", "alpha", "rmse_cs"});
    io::CsvWriter skips({"pauli", "weight", "reason"});
    std::vector<PauliString> kept;
    std::vector<RVector> kept_signals;
    for (size_t i = 0; i < cell.reports.size(); ++i) {
        const auto &r = cell.reports[i];
        reports.row({r.pauli.str(), std::to_string(r.weight), to_string(r.filtered), io::fmt(r.rmse_st),
                     io::fmt(r.rmse_cs_best), io::fmt(r.alpha_star), io::fmt(r.R), io::fmt(r.snr_db), io::fmt(r.srf)});
        if (r.filtered != FilterStatus::Kept) {
            skips.row({r.pauli.str(), std::to_string(r.weight), cell.skip_reasons[i]});
            continue;
        }
        for (size_t a = 0; a < grid.size(); ++a) {
            sweep.row({r.pauli.str(), std::to_string(r.weight), io::fmt(grid[a]), io::fmt(cell.sweep_rmse[i][a])});
        }
        kept.push_back(r.pauli);
        kept_signals.push_back(cell.best_signals[i]);
    }
    reports.save(dir / "reports.csv");
    sweep.save(dir / "alpha_sweep.csv");
    skips.save(dir / "skip_report.csv");
    keep(dir / "reports.csv");
    keep(dir / "alpha_sweep.csv");
    keep(dir / "skip_report.csv");

    RMatrix signals(static_cast<Eigen::Index>(kept.size()), truth.cols());
    for (size_t i = 0; i < kept.size(); ++i) signals.row(static_cast<Eigen::Index>(i)) = kept_signals[i].transpose();
    io::write_labelled_matrix(dir / "reconstructions.csv", kept, signals, all_timesteps(static_cast<int>(truth.cols())));
    keep(dir / "reconstructions.csv");

    io::Json sectors = io::Json::array();
    for (const auto &s : aggregate_by_weight(cell.reports)) sectors.push_back(weight_summary_json(s));
    const TheoryParams tp;
    io::Json summary{{"n_st", n_st_label},
                     {"m", cell.plan.m()},
                     {"N", cell.plan.N},
                     {"srf_reference", static_cast<double>(cell.plan.N) / cell.plan.m()},
                     {"sectors", sectors},
                     {"theory_params",
                      {{"c1", tp.c1},
                       {"c2", tp.c2},
                       {"rip_target", tp.rip_target},
                       {"m_rate_constant", tp.m_rate_constant},
                       {"note", "defaults; these constants are not fixed by theory"}}}};
    io::write_json(dir / "summary.json", summary);
    keep(dir / "summary.json");
    return files;
}

// ---- run directory and manifest ---------------------------------------------

/// Manifest bookkeeping shared by all stages of one run directory.
class RunManifest {
   public:
    RunManifest(io::fs::path root, const ExperimentConfig &c) : root_(std::move(root)), hash_(config_hash(c)) {
        const auto path = root_ / "manifest.json";
        if (io::fs::exists(path)) {
            try {
                io::Json old = io::read_json(path);
                if (old.value("config_hash", "") == hash_) j_ = std::move(old);
            } catch (const IoError &) {
                // unreadable manifest: start over
            }
        }
        if (j_.is_null()) {
            j_ = io::Json{{"tool", "csst"}, {"version", kToolVersion}, {"config_hash", hash_}, {"seed", c.seed},
                          {"seeds",
                           {{"shadows", "derive_key(seed, [fnv1a(\"shadows\"), timestep])"},
                            {"masks", "derive_key(seed, [fnv1a(\"mask\"), m])"},
                            {"shots", "derive_key(timestep_key, [shot])"}}},
                          {"stages", io::Json::object()},
                          {"cells", io::Json::object()}};
        }
        io::Json masks = io::Json::object();
        for (int m : c.m_values) masks[std::to_string(m)] = mask_key(c.seed, m);
        j_["seeds"]["mask_keys"] = masks;
    }

    const io::fs::path &root() const noexcept { return root_; }

    /// True if `section/name` is recorded and all its files exist.
    bool complete(const std::string &section, const std::string &name) const {
        std::lock_guard<std::mutex> lock(mu_);
        if (!j_[section].contains(name)) return false;
        for (const auto &f : j_[section][name]["files"]) {
            if (!io::fs::exists(root_ / f.get<std::string>())) return false;
        }
        return true;
    }

    void record(const std::string &section, const std::string &name, const std::vector<io::fs::path> &files,
                double seconds) {
        std::lock_guard<std::mutex> lock(mu_);
        io::Json list = io::Json::array();
        for (const auto &f : files) list.push_back(io::fs::relative(f, root_).generic_string());
        j_[section][name] = io::Json{{"files", list}, {"wall_seconds", seconds}};
        io::write_json(root_ / "manifest.json", j_);
    }

    void forget(const std::string &section, const std::string &name) {
        std::lock_guard<std::mutex> lock(mu_);
        j_[section].erase(name);
    }

   private:
    io::fs::path root_;
    std::string hash_;
    io::Json j_;
    mutable std::mutex mu_;
};

class Stopwatch {
   public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

   private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct StageContext {
    ExperimentConfig config;
    io::fs::path root;
    int jobs = 1;
    std::ostream *log = &std::cerr;
};

// ---- stage: simulate ---------------------------------------------------------

struct SimulationArtifacts {
    std::vector<DensityMatrix> states;
    SignalMatrix signal;
};

/// Ground truth: states.bin, S.csv, model.json, truncation.csv. Reuses the
/// files when the manifest records them for this configuration.
inline SimulationArtifacts stage_simulate(const StageContext &ctx, RunManifest &manifest) {
    const auto &c = ctx.config;
    const auto &root = ctx.root;
    if (manifest.complete("stages", "simulate")) {
        io::StoredStates stored = io::read_states(root / "states.bin");
        io::LabelledMatrix s = io::read_labelled_matrix(root / "S.csv");
        SimulationArtifacts a;
        a.states = std::move(stored.states);
        a.signal.values = std::move(s.values);
        a.signal.observables = std::move(s.rows);
        a.signal.grid = stored.grid;
        return a;
    }
    Stopwatch sw;
    Simulation sim = simulate(c);
    io::write_json(root / "config.json", config_to_json(c));
    io::write_states(root / "states.bin", sim.states, sim.grid);
    io::write_labelled_matrix(root / "S.csv", sim.signal.observables, sim.signal.values, all_timesteps(c.N));
    io::write_json(root / "model.json", model_sidecar(c, sim));

    // Best s-term DCT truncation error for every observable, s = 1..N.
    std::vector<std::string> header{"pauli", "weight"};
    std::vector<int> s_values;
    for (int s = 1; s <= c.N; ++s) {
        header.push_back("s_" + std::to_string(s));
        s_values.push_back(s);
    }
    io::CsvWriter trunc(header);
    for (Eigen::Index i = 0; i < sim.signal.rows(); ++i) {
        const auto &p = sim.signal.observables[static_cast<size_t>(i)];
        std::vector<std::string> row{p.str(), std::to_string(p.weight())};
        for (const auto &pt : truncation_rmse_curve(sim.signal.row(i), s_values)) row.push_back(io::fmt(pt.rmse));
        trunc.row(row);
    }
    trunc.save(root / "truncation.csv");

    manifest.record("stages", "simulate",
                    {root / "config.json", root / "states.bin", root / "S.csv", root / "model.json", root / "truncation.csv"},
                    sw.seconds());
    return {std::move(sim.states), std::move(sim.signal)};
}

// ---- stage: baseline estimates at all timesteps ------------------------------

inline io::fs::path baseline_path(const io::fs::path &root, int n_st) {
    return root / "estimates" / ("nst" + std::to_string(n_st) + ".csv");
}

/// ST-at-all-times estimate matrices, one per N_ST, plus baseline.csv.
inline std::vector<RMatrix> stage_baseline(const StageContext &ctx, RunManifest &manifest, const SimulationArtifacts &sim) {
    const auto &c = ctx.config;
    std::vector<int> budgets = c.n_st;
    std::sort(budgets.begin(), budgets.end());
    std::vector<RMatrix> by_budget;
    if (manifest.complete("stages", "shadows")) {
        for (int k : budgets) by_budget.push_back(io::read_labelled_matrix(baseline_path(ctx.root, k)).values);
    } else {
        Stopwatch sw;
        by_budget = shadow_estimates(sim.states, sim.signal.observables, all_timesteps(c.N), budgets, c.seed);
        std::vector<io::fs::path> files;
        io::CsvWriter base({"n_st", "pauli", "weight", "rmse_st", "snr_db"});
        for (size_t b = 0; b < budgets.size(); ++b) {
            const auto path = baseline_path(ctx.root, budgets[b]);
            io::write_labelled_matrix(path, sim.signal.observables, by_budget[b], all_timesteps(c.N));
            files.push_back(path);
            const BaselineStats st = baseline_stats(sim.signal.values, by_budget[b]);
            for (size_t i = 0; i < st.rmse_st.size(); ++i) {
                const auto &p = sim.signal.observables[i];
                base.row({std::to_string(budgets[b]), p.str(), std::to_string(p.weight()), io::fmt(st.rmse_st[i]),
                          io::fmt(st.snr_db[i])});
            }
        }
        base.save(ctx.root / "baseline.csv");
        files.push_back(ctx.root / "baseline.csv");
        manifest.record("stages", "shadows", files, sw.seconds());
    }
    // back to config order
    std::vector<RMatrix> out;
    for (int k : c.n_st) {
        const auto pos = std::find(budgets.begin(), budgets.end(), k) - budgets.begin();
        out.push_back(by_budget[static_cast<size_t>(pos)]);
    }
    return out;
}

// ---- stages: standalone shadows / reconstruct ----------------------------------

inline io::fs::path shadows_dir(const io::fs::path &root, int n_st, int m) { return root / "shadows" / cell_name(n_st, m); }

/// Snapshot datasets at the timesteps of the m-mask, plus the M x m estimate
/// matrix. With `noiseless` the exact sampled signal is written instead and
/// no snapshots are drawn. Requires a prior simulate stage.
inline std::vector<io::fs::path> run_shadows(const StageContext &ctx, int n_st, int m, bool noiseless = false) {
    const auto &c = ctx.config;
    detail::require(n_st >= 1, "N_ST must be >= 1");
    const io::fs::path states_file = ctx.root / "states.bin";
    if (!io::fs::exists(states_file)) throw IoError("missing " + states_file.string() + " (run simulate first)");
    const io::StoredStates stored = io::read_states(states_file);
    if (stored.grid.N != c.N) throw ConfigError("states file has N=" + std::to_string(stored.grid.N) + ", config has " + std::to_string(c.N));
    if (m < 1 || m > c.N) throw ConfigError("m must lie in [1, N]");
    const std::vector<PauliString> family = enumerate_paulis(stored.states.front().num_qubits(), c.w_max);
    const SamplingPlan plan = sample_mask(c.N, m, mask_key(c.seed, m));
    const io::fs::path dir = shadows_dir(ctx.root, n_st, m);
    std::vector<io::fs::path> files;

    RMatrix est;
    if (noiseless) {
        est = io::read_labelled_matrix(ctx.root / "S.csv").values;
        RMatrix sampled(est.rows(), plan.m());
        for (int i = 0; i < plan.m(); ++i) sampled.col(i) = est.col(plan.omega[static_cast<size_t>(i)]);
        est = std::move(sampled);
    } else {
        est = shadow_estimates(stored.states, family, plan.omega, {n_st}, c.seed).front();
        for (int j : plan.omega) {
            const ShadowDataset ds = sample_snapshots(stored.states[static_cast<size_t>(j)], n_st, shadow_key(c.seed, j), j);
            char name[32];
            std::snprintf(name, sizeof name, "t_%05d.txt", j + 1);
            io::write_dataset(dir / "datasets" / name, ds);
            files.push_back(dir / "datasets" / name);
        }
    }
    io::write_json(dir / "mask.json", io::plan_to_json(plan));
    io::write_labelled_matrix(dir / "estimates.csv", family, est, plan.omega);
    files.push_back(dir / "mask.json");
    files.push_back(dir / "estimates.csv");
    return files;
}

/// Alpha-sweep reconstruction of every observable from shadows/<cell>.
/// Baseline statistics (R, SNR filter) use the sampled estimates against the
/// truth on the mask, since only those timesteps were measured.
inline std::vector<io::fs::path> run_reconstruct(const StageContext &ctx, int n_st, int m) {
    const auto &c = ctx.config;
    const io::fs::path in = shadows_dir(ctx.root, n_st, m);
    const SamplingPlan plan = io::plan_from_json(io::read_json(in / "mask.json"));
    const io::LabelledMatrix est = io::read_labelled_matrix(in / "estimates.csv");
    const io::LabelledMatrix truth_file = io::read_labelled_matrix(ctx.root / "S.csv");
    if (est.rows != truth_file.rows) throw IoError("estimates and S.csv list different observables");
    if (est.timesteps != plan.omega) throw IoError("estimate columns do not match the mask");
    if (static_cast<int>(truth_file.timesteps.size()) != plan.N) throw IoError("S.csv length does not match the mask N");

    SignalMatrix truth;
    truth.values = truth_file.values;
    truth.observables = truth_file.rows;
    truth.grid = TimeGrid(plan.N, c.dt);
    RMatrix truth_on_mask(truth.values.rows(), plan.m());
    for (int i = 0; i < plan.m(); ++i) truth_on_mask.col(i) = truth.values.col(plan.omega[static_cast<size_t>(i)]);
    const BaselineStats stats = baseline_stats(truth_on_mask, est.values);

    const CellResult cell = reconstruct_cell(truth, est.values, plan, stats, c);
    const io::fs::path out = ctx.root / "reconstruct" / cell_name(n_st, m);
    auto files = write_cell(out, cell, truth, c.alpha_grid(), n_st);
    for (size_t i = 0; i < cell.reports.size(); ++i) {
        if (cell.reports[i].filtered != FilterStatus::Kept) continue;
        const std::string stem = cell.reports[i].pauli.str();
        io::write_json(out / "observables" / (stem + ".json"), io::reconstruction_to_json(cell.best_results[i], cell.reports[i].pauli));
        io::write_reconstruction_csv(out / "observables" / (stem + ".csv"), cell.best_results[i]);
        files.push_back(out / "observables" / (stem + ".json"));
        files.push_back(out / "observables" / (stem + ".csv"));
    }
    return files;
}

// ---- stage: report (figure data) ----------------------------------------------

namespace detail {

struct CellRow {
    int n_st, m, weight;
    std::string pauli;
    FilterStatus filtered;
    double rmse_st, rmse_cs, alpha_star, srf;
};

inline double mean_of(const std::vector<double> &v) { return mean_std(v).mean; }

}  // namespace detail

/// Rebuilds figures/ from the files of a finished sweep directory.
inline std::vector<io::fs::path> stage_report(const io::fs::path &root) {
    const ExperimentConfig c = config_from_json(io::read_json(root / "config.json"));
    const io::fs::path fig = root / "figures";
    std::vector<io::fs::path> files;
    const int n = c.num_qubits();
    const double m_family = static_cast<double>(pauli_family_size(n, c.w_max));
    const double delta = 0.01;

    // Baseline error vs N_ST, with the Bernstein accuracy reached at that budget:
    // N_ST eps^2 = a (2 + 2 eps / 3), a = 3^w ln(2M/delta).
    {
        io::CsvTable base = io::read_csv(root / "baseline.csv");
        std::map<std::pair<int, int>, std::vector<double>> groups;
        for (const auto &r : base.rows) {
            groups[{std::stoi(r[base.column("n_st")]), std::stoi(r[base.column("weight")])}].push_back(
                io::parse_double(r[base.column("rmse_st")]));
        }
        io::CsvWriter w({"n_st", "weight", "mean_rmse_st", "std_rmse_st", "count", "bernstein_bound"});
        for (const auto &[key, v] : groups) {
            const auto ms = mean_std(v);
            const double a = std::pow(3.0, key.second) * std::log(2 * m_family / delta);
            const double k = key.first;
            const double eps = (2 * a / 3 + std::sqrt(4 * a * a / 9 + 8 * a * k)) / (2 * k);
            w.row({std::to_string(key.first), std::to_string(key.second), io::fmt(ms.mean), io::fmt(ms.std),
                   std::to_string(ms.count), io::fmt(eps)});
        }
        w.save(fig / "fig2_baseline_rmse.csv");
        files.push_back(fig / "fig2_baseline_rmse.csv");
    }

    // Sector-averaged truncation curves.
    {
        io::CsvTable t = io::read_csv(root / "truncation.csv");
        std::map<int, std::vector<std::vector<double>>> by_weight;
        for (const auto &r : t.rows) {
            std::vector<double> curve;
            for (size_t k = 2; k < r.size(); ++k) curve.push_back(io::parse_double(r[k]));
            by_weight[std::stoi(r[1])].push_back(std::move(curve));
        }
        io::CsvWriter w({"weight", "s", "mean_rmse", "std_rmse"});
        for (const auto &[weight, curves] : by_weight) {
            for (size_t s = 0; s < curves.front().size(); ++s) {
                std::vector<double> v;
                for (const auto &cv : curves) v.push_back(cv[s]);
                const auto ms = mean_std(v);
                w.row({std::to_string(weight), std::to_string(s + 1), io::fmt(ms.mean), io::fmt(ms.std)});
            }
        }
        w.save(fig / "fig3_truncation.csv");
        files.push_back(fig / "fig3_truncation.csv");
    }

    // Per-cell reports and sweeps.
    std::vector<detail::CellRow> rows;
    std::map<std::tuple<int, int, int, double>, std::vector<double>> sweep_groups;  // (n_st, m, w, alpha)
    for (int k : c.n_st) {
        for (int m : c.m_values) {
            const io::fs::path dir = root / "cells" / cell_name(k, m);
            io::CsvTable rep = io::read_csv(dir / "reports.csv");
            for (const auto &r : rep.rows) {
                rows.push_back({k, m, std::stoi(r[1]), r[0], parse_filter_status(r[2]), io::parse_double(r[3]),
                                io::parse_double(r[4]), io::parse_double(r[5]), io::parse_double(r[8])});
            }
            io::CsvTable sw = io::read_csv(dir / "alpha_sweep.csv");
            for (const auto &r : sw.rows) {
                sweep_groups[{k, m, std::stoi(r[1]), io::parse_double(r[2])}].push_back(io::parse_double(r[3]));
            }
        }
    }

    // Kept-set baselines per (n_st, weight); the kept set does not depend on m.
    std::map<std::tuple<int, int, int>, std::vector<double>> kept_st, kept_cs, kept_alpha, kept_srf;
    for (const auto &r : rows) {
        if (r.filtered != FilterStatus::Kept) continue;
        kept_st[{r.n_st, r.m, r.weight}].push_back(r.rmse_st);
        kept_cs[{r.n_st, r.m, r.weight}].push_back(r.rmse_cs);
        kept_alpha[{r.n_st, r.m, r.weight}].push_back(r.alpha_star);
        if (std::isfinite(r.srf)) kept_srf[{r.n_st, r.m, r.weight}].push_back(r.srf);
    }

    {
        io::CsvWriter w({"n_st", "m", "weight", "alpha", "mean_rmse_cs", "count", "baseline_mean_rmse_st"});
        for (const auto &[key, v] : sweep_groups) {
            const auto [k, m, weight, alpha] = key;
            w.row({std::to_string(k), std::to_string(m), std::to_string(weight), io::fmt(alpha),
                   io::fmt(detail::mean_of(v)), std::to_string(v.size()),
                   io::fmt(detail::mean_of(kept_st[{k, m, weight}]))});
        }
        w.save(fig / "fig4_rmse_vs_alpha.csv");
        files.push_back(fig / "fig4_rmse_vs_alpha.csv");
    }
    {
        io::CsvWriter a({"n_st", "m", "weight", "mean_alpha_star", "std_alpha_star", "count"});
        io::CsvWriter s({"n_st", "m", "weight", "mean_srf", "std_srf", "count", "reference_n_over_m",
                         "mean_rmse_st", "mean_rmse_cs"});
        for (const auto &[key, v] : kept_alpha) {
            const auto [k, m, weight] = key;
            const auto ma = mean_std(v), mr = mean_std(kept_srf[key]);
            a.row({std::to_string(k), std::to_string(m), std::to_string(weight), io::fmt(ma.mean), io::fmt(ma.std),
                   std::to_string(ma.count)});
            s.row({std::to_string(k), std::to_string(m), std::to_string(weight), io::fmt(mr.mean), io::fmt(mr.std),
                   std::to_string(mr.count), io::fmt(static_cast<double>(c.N) / m),
                   io::fmt(detail::mean_of(kept_st[key])), io::fmt(detail::mean_of(kept_cs[key]))});
        }
        a.save(fig / "fig5_alpha_star.csv");
        s.save(fig / "fig7_srf.csv");
        files.push_back(fig / "fig5_alpha_star.csv");
        files.push_back(fig / "fig7_srf.csv");
    }
    {
        io::CsvWriter w({"n_st", "m", "pauli", "weight", "rmse_st", "rmse_cs_best"});
        for (const auto &r : rows) {
            if (r.filtered != FilterStatus::Kept) continue;
            w.row({std::to_string(r.n_st), std::to_string(r.m), r.pauli, std::to_string(r.weight), io::fmt(r.rmse_st),
                   io::fmt(r.rmse_cs)});
        }
        w.save(fig / "fig6_st_vs_cs.csv");
        files.push_back(fig / "fig6_st_vs_cs.csv");
    }

    // m*: the smallest m < N whose sector-mean CS error, minimized over alpha,
    // reaches the sector-mean baseline error.
    {
        io::CsvWriter w({"n_st", "weight", "m_star", "baseline_mean_rmse_st"});
        std::vector<int> ms = c.m_values;
        std::sort(ms.begin(), ms.end());
        std::set<int> weights;
        for (const auto &r : rows) weights.insert(r.weight);
        for (int k : c.n_st) {
            for (int weight : weights) {
                std::optional<int> found;
                double baseline = std::numeric_limits<double>::quiet_NaN();
                for (int m : ms) {
                    if (m >= c.N) continue;
                    const auto st = kept_st.find({k, m, weight});
                    if (st == kept_st.end()) continue;
                    baseline = detail::mean_of(st->second);
                    double best = std::numeric_limits<double>::infinity();
                    for (double alpha : c.alpha_grid()) {
                        auto it = sweep_groups.find({k, m, weight, alpha});
                        if (it != sweep_groups.end()) best = std::min(best, detail::mean_of(it->second));
                    }
                    if (best <= baseline) {
                        found = m;
                        break;
                    }
                }
                w.row({std::to_string(k), std::to_string(weight), found ? std::to_string(*found) : "",
                       io::fmt(baseline)});
            }
        }
        w.save(fig / "m_star.csv");
        files.push_back(fig / "m_star.csv");
    }
    return files;
}

// ---- stage: sweep ----------------------------------------------------------------

struct SweepOutcome {
    int cells_total = 0;
    int cells_computed = 0;
    int cells_reused = 0;
};

/// Full (N_ST x m x alpha) grid. Each (N_ST, m) cell is an independent job;
/// finished cells recorded in the manifest are skipped on rerun.
inline SweepOutcome run_sweep(const StageContext &ctx) {
    const auto &c = ctx.config;
    c.validate();
    io::fs::create_directories(ctx.root);
    RunManifest manifest(ctx.root, c);
    const SimulationArtifacts sim = stage_simulate(ctx, manifest);
    const std::vector<RMatrix> estimates = stage_baseline(ctx, manifest, sim);

    std::vector<BaselineStats> stats;
    for (const auto &e : estimates) stats.push_back(baseline_stats(sim.signal.values, e));
    std::map<int, SamplingPlan> plans;
    for (int m : c.m_values) plans[m] = sample_mask(c.N, m, mask_key(c.seed, m));

    struct Job {
        size_t budget;
        int m;
    };
    std::vector<Job> jobs;
    SweepOutcome outcome;
    for (size_t b = 0; b < c.n_st.size(); ++b) {
        for (int m : c.m_values) {
            ++outcome.cells_total;
            if (manifest.complete("cells", cell_name(c.n_st[b], m))) {
                ++outcome.cells_reused;
            } else {
                manifest.forget("cells", cell_name(c.n_st[b], m));
                jobs.push_back({b, m});
            }
        }
    }

    const std::vector<double> grid = c.alpha_grid();
    std::atomic<size_t> next{0};
    std::mutex err_mu, log_mu;
    std::exception_ptr failure;
    auto worker = [&] {
        for (size_t idx = next++; idx < jobs.size(); idx = next++) {
            try {
                const Job &job = jobs[idx];
                Stopwatch sw;
                const SamplingPlan &plan = plans.at(job.m);
                RMatrix sampled(estimates[job.budget].rows(), plan.m());
                for (int i = 0; i < plan.m(); ++i) sampled.col(i) = estimates[job.budget].col(plan.omega[static_cast<size_t>(i)]);
                const CellResult cell = reconstruct_cell(sim.signal, sampled, plan, stats[job.budget], c);
                const std::string name = cell_name(c.n_st[job.budget], job.m);
                auto files = write_cell(ctx.root / "cells" / name, cell, sim.signal, grid, c.n_st[job.budget]);
                manifest.record("cells", name, files, sw.seconds());
                std::lock_guard<std::mutex> lock(log_mu);
                if (ctx.log) *ctx.log << "cell " << name << " done in " << sw.seconds() << " s\n";
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(ctx.jobs, static_cast<int>(jobs.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto &t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    outcome.cells_computed = static_cast<int>(jobs.size());

    Stopwatch sw;
    auto files = stage_report(ctx.root);
    manifest.record("stages", "report", files, sw.seconds());
    return outcome;
}

}  // namespace csst
