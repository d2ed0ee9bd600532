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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "csst/errors.hpp"
#include "csst/pauli.hpp"

namespace csst {

/// sqrt((1/N) sum_j (truth_j - estimate_j)^2).
inline double rmse(const Eigen::VectorXd &truth, const Eigen::VectorXd &estimate) {
    detail::require(truth.size() >= 1 && truth.size() == estimate.size(), "rmse: length mismatch");
    return (truth - estimate).norm() / std::sqrt(static_cast<double>(truth.size()));
}

/// Value reported when the estimate matches the truth exactly.
inline constexpr double kSnrClampDb = 300.0;

/// 10 log10(sum S^2 / sum (S_hat - S)^2), clamped at +300 dB for zero error.
inline double snr_db(const Eigen::VectorXd &truth, const Eigen::VectorXd &estimate) {
    detail::require(truth.size() >= 1 && truth.size() == estimate.size(), "snr_db: length mismatch");
    const double signal = truth.squaredNorm();
    if (signal == 0) throw UndefinedSignal("snr_db: truth is identically zero");
    const double noise = (estimate - truth).squaredNorm();
    if (noise == 0) return kSnrClampDb;
    return std::min(kSnrClampDb, 10.0 * std::log10(signal / noise));
}

/// Population variance.
inline double population_variance(const Eigen::VectorXd &v) {
    const double mean = v.mean();
    return (v.array() - mean).square().mean();
}

/// Keep iff the population variance of the truth reaches `threshold`.
inline bool variance_filter(const Eigen::VectorXd &truth, double threshold = 1e-3) {
    detail::require(truth.size() >= 2, "variance_filter: need N >= 2");
    return population_variance(truth) >= threshold;
}

/// Keep iff snr_db >= threshold_db (threshold in dB).
inline bool snr_filter(const Eigen::VectorXd &truth, const Eigen::VectorXd &estimate, double threshold_db = 1.0) {
    return snr_db(truth, estimate) >= threshold_db;
}

/// Inferred shot-reduction factor (N/m) / R^2.
inline double srf(double n, double m, double r) {
    detail::require(m >= 1 && m <= n, "srf: need 1 <= m <= N");
    detail::require(r > 0 && std::isfinite(r), "srf: R must be positive");
    return (n / m) / (r * r);
}

enum class FilterStatus { Kept, VarianceFiltered, SnrFiltered, SolverFailed };

inline std::string to_string(FilterStatus f) {
    switch (f) {
        case FilterStatus::Kept: return "kept";
        case FilterStatus::VarianceFiltered: return "variance-filtered";
        case FilterStatus::SnrFiltered: return "snr-filtered";
        case FilterStatus::SolverFailed: return "solver-failed";
    }
    return {};
}

inline FilterStatus parse_filter_status(const std::string &s) {
    for (auto f : {FilterStatus::Kept, FilterStatus::VarianceFiltered, FilterStatus::SnrFiltered, FilterStatus::SolverFailed}) {
        if (to_string(f) == s) return f;
    }
    throw InvalidArgument("unknown filter status \"" + s + "\"");
}

/// One observable in one (N_ST, m) cell. CS fields are NaN when the
/// observable was filtered before reconstruction.
struct ObservableReport {
    PauliString pauli;
    int weight = 0;
    double rmse_st = 0;
    double rmse_cs_best = std::numeric_limits<double>::quiet_NaN();
    double alpha_star = std::numeric_limits<double>::quiet_NaN();
    double R = std::numeric_limits<double>::quiet_NaN();
    double snr_db = 0;
    double srf = std::numeric_limits<double>::quiet_NaN();
    FilterStatus filtered = FilterStatus::Kept;

    /// R and SRF exist only for kept observables with a nonzero baseline error.
    bool has_ratio() const noexcept { return filtered == FilterStatus::Kept && rmse_st > 0 && std::isfinite(R); }
};

struct MeanStd {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std = std::numeric_limits<double>::quiet_NaN();
    int count = 0;
};

inline MeanStd mean_std(const std::vector<double> &v) {
    MeanStd out;
    out.count = static_cast<int>(v.size());
    if (v.empty()) return out;
    double sum = 0;
    for (double x : v) sum += x;
    out.mean = sum / static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size()));
    return out;
}

/// Per-weight-sector statistics (population standard deviations).
struct WeightSummary {
    int weight = 0;
    int total = 0;
    int kept = 0;
    int variance_filtered = 0;
    int snr_filtered = 0;
    int solver_failed = 0;
    int zero_baseline = 0;  // kept, but R undefined because rmse_st == 0
    MeanStd rmse_st;        // over all observables in the sector
    MeanStd rmse_cs;        // over kept observables
    MeanStd alpha_star;     // over kept observables
    MeanStd R;              // over observables with a defined ratio
    MeanStd srf;            // over observables with a defined ratio
    MeanStd rmse_st_kept;   // baseline restricted to kept observables
};

inline std::vector<WeightSummary> aggregate_by_weight(const std::vector<ObservableReport> &reports) {
    std::map<int, std::vector<const ObservableReport *>> groups;
    for (const auto &r : reports) groups[r.weight].push_back(&r);

    std::vector<WeightSummary> out;
    for (const auto &[w, group] : groups) {
        WeightSummary s;
        s.weight = w;
        s.total = static_cast<int>(group.size());
        std::vector<double> st, st_kept, cs, alpha, ratio, reduction;
        for (const auto *r : group) {
            st.push_back(r->rmse_st);
            switch (r->filtered) {
                case FilterStatus::VarianceFiltered: ++s.variance_filtered; continue;
                case FilterStatus::SnrFiltered: ++s.snr_filtered; continue;
                case FilterStatus::SolverFailed: ++s.solver_failed; continue;
                case FilterStatus::Kept: break;
            }
            ++s.kept;
            st_kept.push_back(r->rmse_st);
            cs.push_back(r->rmse_cs_best);
            alpha.push_back(r->alpha_star);
            if (r->has_ratio()) {
                ratio.push_back(r->R);
                reduction.push_back(r->srf);
            } else {
                ++s.zero_baseline;
            }
        }
        s.rmse_st = mean_std(st);
        s.rmse_st_kept = mean_std(st_kept);
        s.rmse_cs = mean_std(cs);
        s.alpha_star = mean_std(alpha);
        s.R = mean_std(ratio);
        s.srf = mean_std(reduction);
        out.push_back(s);
    }
    return out;
}

}  // namespace csst
