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

#include "csst/experiment.hpp"

#include <cstdlib>
#include <sys/wait.h>

#include "gtest/gtest.h"

using namespace csst;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
    fs::path p = fs::path(::testing::TempDir()) / ("csst_experiment_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Two qubits, short grid: every stage runs in well under a second.
io::Json small_config(const fs::path &out) {
    return io::Json{{"model", {{"rows", 1}, {"cols", 2}}},
                    {"grid", {{"N", 32}, {"dt", 0.1}}},
                    {"observables", {{"w_max", 2}}},
                    {"shadows", {{"n_st", {200, 2000}}}},
                    {"masks", {{"m", {16, 32}}}},
                    {"alpha_grid", {{"min", 1e-10}, {"max", 1e-2}, {"points", 9}}},
                    {"seed", 7},
                    {"output_dir", out.string()}};
}

fs::path write_config(const fs::path &dir, const io::Json &j) {
    const fs::path p = dir / "config.input.json";
    io::write_json(p, j);
    return p;
}

int run_cli(const std::string &args) {
    const std::string cmd = std::string(CSST_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string run_cli_output(const std::string &args) {
    const std::string cmd = std::string(CSST_CLI_PATH) + " " + args + " 2>/dev/null";
    std::string out;
    FILE *pipe = popen(cmd.c_str(), "r");
    char buf[4096];
    while (pipe && fgets(buf, sizeof buf, pipe)) out += buf;
    if (pipe) pclose(pipe);
    return out;
}

std::map<std::string, std::string> csv_contents(const fs::path &root) {
    std::map<std::string, std::string> out;
    for (const auto &e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") {
            out[fs::relative(e.path(), root).generic_string()] = io::read_text(e.path());
        }
    }
    return out;
}

}  // namespace

TEST(experiment, presets) {
    const auto desk = preset("desk");
    EXPECT_EQ(desk.num_qubits(), 3);
    EXPECT_EQ(desk.N, 256);
    EXPECT_EQ(desk.dt, 0.05);
    EXPECT_EQ(desk.w_max, 2);
    EXPECT_EQ(desk.n_st, (std::vector<int>{100, 1000, 10000}));
    EXPECT_EQ(desk.m_values, (std::vector<int>{64, 154, 256}));
    EXPECT_EQ(desk.alpha_grid().size(), 30u);
    const auto full = preset("paper");
    EXPECT_EQ(full.num_qubits(), 6);
    EXPECT_EQ(full.N, 1000);
    EXPECT_EQ(full.w_max, 4);
    EXPECT_NE(std::find(full.n_st.begin(), full.n_st.end(), 7437), full.n_st.end());
    EXPECT_NE(std::find(full.m_values.begin(), full.m_values.end(), 597), full.m_values.end());
    EXPECT_NO_THROW(full.validate());
    EXPECT_THROW(preset("laptop"), ConfigError);
}

TEST(experiment, config_round_trip_and_strictness) {
    const auto c = config_from_json(small_config("x"));
    EXPECT_EQ(c.N, 32);
    EXPECT_EQ(c.model.kind, "heisenberg");
    EXPECT_EQ(config_to_json(config_from_json(config_to_json(c))), config_to_json(c));

    auto j = small_config("x");
    j["shadow"] = 3;
    EXPECT_THROW(config_from_json(j), ConfigError);
    j = small_config("x");
    j["grid"]["steps"] = 3;
    EXPECT_THROW(config_from_json(j), ConfigError);
    j = small_config("x");
    j["grid"]["N"] = "many";
    EXPECT_THROW(config_from_json(j), ConfigError);
    j = small_config("x");
    j["masks"]["m"] = {64};
    EXPECT_THROW(config_from_json(j), ConfigError);
    j = small_config("x");
    j["shadows"]["n_st"] = io::Json::array();
    EXPECT_THROW(config_from_json(j), ConfigError);

    auto a = c, b = c;
    b.output_dir = "elsewhere";
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.seed = 8;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(experiment, trivial_simulation_shape) {
    ExperimentConfig c;
    c.model.rows = 1;
    c.model.cols = 1;
    c.N = 1;
    c.w_max = 1;
    c.m_values = {1};
    const Simulation s = simulate(c);
    EXPECT_EQ(s.signal.rows(), 3);
    EXPECT_EQ(s.signal.cols(), 1);
}

TEST(experiment, full_profile_simulation_shape) {
    const Simulation s = simulate(preset("paper"));
    EXPECT_EQ(s.signal.rows(), 1908);
    EXPECT_EQ(s.signal.cols(), 1000);
}

TEST(experiment, shadow_estimates_are_nested_and_exact) {
    const auto c = config_from_json(small_config("x"));
    const Simulation s = simulate(c);
    const std::vector<int> ts{0, 5, 31};
    const auto est = shadow_estimates(s.states, s.signal.observables, ts, {10, 40}, 3);
    for (size_t col = 0; col < ts.size(); ++col) {
        const auto ds = sample_snapshots(s.states[static_cast<size_t>(ts[col])], 40, shadow_key(3, ts[col]), ts[col]);
        ShadowDataset prefix = ds;
        prefix.snapshots.resize(10);
        for (size_t i = 0; i < s.signal.observables.size(); ++i) {
            EXPECT_EQ(est[1](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)), estimate_pauli(ds, s.signal.observables[i]));
            EXPECT_EQ(est[0](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)), estimate_pauli(prefix, s.signal.observables[i]));
        }
    }
}

TEST(experiment, cli_simulate_is_deterministic) {
    const fs::path dir = scratch("simulate");
    const fs::path cfg = write_config(dir, small_config(dir / "run"));
    ASSERT_EQ(run_cli("simulate --config " + cfg.string()), 0);
    const io::LabelledMatrix s = io::read_labelled_matrix(dir / "run" / "S.csv");
    EXPECT_EQ(s.values.rows(), 15);
    EXPECT_EQ(s.values.cols(), 32);
    const std::string first = io::read_text(dir / "run" / "S.csv");
    fs::remove_all(dir / "run");
    ASSERT_EQ(run_cli("simulate --config " + cfg.string()), 0);
    EXPECT_EQ(io::read_text(dir / "run" / "S.csv"), first);
    const io::Json manifest = io::read_json(dir / "run" / "manifest.json");
    for (const auto &f : manifest["stages"]["simulate"]["files"]) EXPECT_TRUE(fs::exists(dir / "run" / f.get<std::string>()));
}

TEST(experiment, cli_shadows_and_reconstruct) {
    const fs::path dir = scratch("shadows");
    const fs::path root = dir / "run";
    const fs::path cfg = write_config(dir, small_config(root));
    EXPECT_EQ(run_cli("shadows --config " + cfg.string()), 2);  // no states yet
    ASSERT_EQ(run_cli("simulate --config " + cfg.string()), 0);
    ASSERT_EQ(run_cli("shadows --config " + cfg.string() + " --n-st 200 --m 16"), 0);

    const fs::path sh = root / "shadows" / "nst200_m16";
    const io::LabelledMatrix est = io::read_labelled_matrix(sh / "estimates.csv");
    EXPECT_EQ(est.values.rows(), 15);
    EXPECT_EQ(est.values.cols(), 16);
    const SamplingPlan plan = io::plan_from_json(io::read_json(sh / "mask.json"));
    EXPECT_EQ(est.timesteps, plan.omega);
    // the persisted snapshots reproduce the estimates
    char name[32];
    std::snprintf(name, sizeof name, "t_%05d.txt", plan.omega[3] + 1);
    const ShadowDataset ds = io::read_dataset(sh / "datasets" / name);
    EXPECT_EQ(ds.size(), 200u);
    for (size_t i = 0; i < est.rows.size(); ++i) EXPECT_EQ(estimate_pauli(ds, est.rows[i]), est.values(static_cast<Eigen::Index>(i), 3));

    ASSERT_EQ(run_cli("reconstruct --config " + cfg.string() + " --n-st 200 --m 16"), 0);
    const fs::path rc = root / "reconstruct" / "nst200_m16";
    const io::CsvTable reports = io::read_csv(rc / "reports.csv");
    EXPECT_EQ(reports.rows.size(), 15u);
    const io::CsvTable skips = io::read_csv(rc / "skip_report.csv");
    const io::LabelledMatrix rec = io::read_labelled_matrix(rc / "reconstructions.csv");
    EXPECT_EQ(rec.rows.size() + skips.rows.size(), 15u);
    EXPECT_EQ(rec.values.cols(), 32);
    for (const auto &r : skips.rows) EXPECT_FALSE(r[2].empty());
    for (const auto &p : rec.rows) EXPECT_TRUE(fs::exists(rc / "observables" / (p.str() + ".json")));
}

TEST(experiment, full_mask_reproduces_baseline_estimates) {
    const fs::path dir = scratch("fullmask");
    const fs::path root = dir / "run";
    auto j = small_config(root);
    j["shadows"]["n_st"] = {10000};
    j["masks"]["m"] = {32};
    const fs::path cfg = write_config(dir, j);
    ASSERT_EQ(run_cli("sweep --config " + cfg.string()), 0);
    ASSERT_EQ(run_cli("shadows --config " + cfg.string() + " --n-st 10000 --m 32"), 0);
    const auto baseline = io::read_labelled_matrix(root / "estimates" / "nst10000.csv");
    const auto masked = io::read_labelled_matrix(root / "shadows" / "nst10000_m32" / "estimates.csv");
    EXPECT_EQ(baseline.values, masked.values);

    // weight-1 errors at N_ST = 1e4: single-shot variance <= 3
    const auto truth = io::read_labelled_matrix(root / "S.csv");
    std::vector<double> errors;
    for (size_t i = 0; i < truth.rows.size(); ++i) {
        if (truth.rows[i].weight() != 1) continue;
        for (Eigen::Index t = 0; t < truth.values.cols(); ++t) {
            errors.push_back(masked.values(static_cast<Eigen::Index>(i), t) - truth.values(static_cast<Eigen::Index>(i), t));
        }
    }
    EXPECT_LE(mean_std(errors).std, std::sqrt(3.0) / 100 * 1.2);
}

TEST(experiment, noiseless_full_observation_reconstructs_exactly) {
    const fs::path dir = scratch("noiseless");
    const fs::path root = dir / "run";
    const fs::path cfg = write_config(dir, small_config(root));
    ASSERT_EQ(run_cli("simulate --config " + cfg.string()), 0);
    ASSERT_EQ(run_cli("shadows --noiseless --config " + cfg.string() + " --n-st 200 --m 32"), 0);
    ASSERT_EQ(run_cli("reconstruct --config " + cfg.string() + " --n-st 200 --m 32"), 0);
    const io::CsvTable reports = io::read_csv(root / "reconstruct" / "nst200_m32" / "reports.csv");
    int kept = 0;
    for (const auto &r : reports.rows) {
        if (r[reports.column("filtered")] != "kept") continue;
        ++kept;
        EXPECT_LE(io::parse_double(r[reports.column("rmse_cs_best")]), 1e-6) << r[0];
    }
    EXPECT_GT(kept, 0);
}

TEST(experiment, sweep_is_resumable_and_deterministic) {
    const fs::path dir = scratch("sweep");
    const fs::path cfg = write_config(dir, small_config(dir / "a"));
    ASSERT_EQ(run_cli("sweep --config " + cfg.string()), 0);
    ASSERT_EQ(run_cli("sweep --config " + cfg.string() + " --out " + (dir / "b").string()), 0);
    const auto a = csv_contents(dir / "a");
    EXPECT_EQ(a, csv_contents(dir / "b"));
    EXPECT_TRUE(a.count("figures/fig7_srf.csv"));
    EXPECT_TRUE(a.count("figures/m_star.csv"));
    EXPECT_TRUE(a.count("cells/nst2000_m16/reports.csv"));

    const io::Json manifest = io::read_json(dir / "a" / "manifest.json");
    for (const auto &section : {"stages", "cells"}) {
        for (const auto &[name, entry] : manifest[section].items()) {
            for (const auto &f : entry["files"]) EXPECT_TRUE(fs::exists(dir / "a" / f.get<std::string>())) << f;
        }
    }

    // drop one cell: only that cell is recomputed, byte for byte
    fs::remove_all(dir / "a" / "cells" / "nst200_m32");
    StageContext ctx;
    ctx.config = load_config(cfg);
    ctx.root = dir / "a";
    ctx.log = nullptr;
    const SweepOutcome o = run_sweep(ctx);
    EXPECT_EQ(o.cells_total, 4);
    EXPECT_EQ(o.cells_computed, 1);
    EXPECT_EQ(o.cells_reused, 3);
    EXPECT_EQ(csv_contents(dir / "a"), a);
}

TEST(experiment, single_cell_sweep) {
    const fs::path dir = scratch("single");
    auto j = small_config(dir / "run");
    j["shadows"]["n_st"] = {500};
    j["masks"]["m"] = {20};
    j["alpha_grid"] = {{"min", 1e-4}, {"max", 1e-4}, {"points", 1}};
    StageContext ctx;
    ctx.config = config_from_json(j);
    ctx.root = dir / "run";
    ctx.log = nullptr;
    const SweepOutcome o = run_sweep(ctx);
    EXPECT_EQ(o.cells_total, 1);
    const io::CsvTable sweep = io::read_csv(ctx.root / "cells" / "nst500_m20" / "alpha_sweep.csv");
    for (const auto &r : sweep.rows) EXPECT_EQ(io::parse_double(r[2]), 1e-4);
}

TEST(experiment, cli_exit_codes) {
    const fs::path dir = scratch("exit");
    auto j = small_config(dir / "run");
    j["bogus"] = 1;
    EXPECT_EQ(run_cli("simulate --config " + write_config(dir, j).string()), 2);
    EXPECT_EQ(run_cli("simulate --config " + (dir / "missing.json").string()), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);

    j = small_config(dir / "run");
    j["model"]["rows"] = 2;
    j["model"]["cols"] = 4;
    EXPECT_EQ(run_cli("simulate --config " + write_config(dir, j).string()), 3);

    j = small_config(dir / "run");
    j["grid"]["dt"] = 1e300;
    j["model"]["J"] = 1e300;
    EXPECT_EQ(run_cli("simulate --config " + write_config(dir, j).string()), 4);
}

TEST(experiment, cli_theory_table) {
    const std::string out = run_cli_output("theory");
    EXPECT_NE(out.find("observable_count,\"n=6 w_max=4\",1908"), std::string::npos) << out;
    EXPECT_NE(out.find("bernstein_shots"), std::string::npos);
    EXPECT_NE(out.find("mom_shots"), std::string::npos);
    EXPECT_NE(out.find("shot_ratio_exact,\"N=1000 m=N\",1\n"), std::string::npos);
    EXPECT_NE(out.find("b_rms,\"s=N\",0\n"), std::string::npos);
    EXPECT_EQ(run_cli("theory --delta 2"), 2);
}
