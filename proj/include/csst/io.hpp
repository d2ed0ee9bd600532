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

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "csst/errors.hpp"
#include "csst/lindblad.hpp"
#include "csst/recovery.hpp"
#include "csst/shadows.hpp"
#include "csst/transform.hpp"
#include "json.hpp"

namespace csst::io {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

/// Shortest text that round-trips a double exactly.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string &s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    try {
        size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw IoError("malformed number \"" + s + "\"");
        return v;
    } catch (const std::logic_error &) {
        throw IoError("malformed number \"" + s + "\"");
    }
}

/// Writes through a temporary sibling and renames, so an interrupted run
/// never leaves a truncated file under the final name.
inline void write_text(const fs::path &path, const std::string &text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + path.string());
        out << text;
        if (!out) throw IoError("write failed for " + path.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_text(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_json(const fs::path &path, const Json &j) { write_text(path, j.dump(2) + "\n"); }

inline Json read_json(const fs::path &path) {
    try {
        return Json::parse(read_text(path));
    } catch (const nlohmann::json::exception &e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

// ---- CSV -------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    size_t column(const std::string &name) const {
        for (size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw IoError("missing CSV column \"" + name + "\"");
    }
};

inline std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline CsvTable read_csv(const fs::path &path) {
    std::istringstream in(read_text(path));
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_csv_line(line);
        if (first) {
            t.header = std::move(cells);
            first = false;
            continue;
        }
        if (cells.size() != t.header.size()) throw IoError(path.string() + ": ragged CSV row");
        t.rows.push_back(std::move(cells));
    }
    if (first) throw IoError(path.string() + ": empty CSV");
    return t;
}

/// Incremental CSV text builder.
class CsvWriter {
   public:
    explicit CsvWriter(const std::vector<std::string> &header) { row(header); }

    void row(const std::vector<std::string> &cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) text_ += ',';
            text_ += cells[i];
        }
        text_ += '\n';
    }
    const std::string &str() const noexcept { return text_; }
    void save(const fs::path &path) const { write_text(path, text_); }

   private:
    std::string text_;
};

// ---- Pauli-labelled matrices ----------------------------------------------

/// Rows are observables, columns are 1-based timestep labels:
///   pauli,t_1,t_2,...
inline void write_labelled_matrix(const fs::path &path, const std::vector<PauliString> &rows, const RMatrix &values,
                                  const std::vector<int> &timesteps) {
    detail::require(static_cast<Eigen::Index>(rows.size()) == values.rows(), "matrix/label row mismatch");
    detail::require(static_cast<Eigen::Index>(timesteps.size()) == values.cols(), "matrix/label column mismatch");
    std::vector<std::string> header{"pauli"};
    for (int j : timesteps) header.push_back("t_" + std::to_string(j + 1));
    CsvWriter w(header);
    for (size_t i = 0; i < rows.size(); ++i) {
        std::vector<std::string> cells{rows[i].str()};
        for (Eigen::Index c = 0; c < values.cols(); ++c) cells.push_back(fmt(values(static_cast<Eigen::Index>(i), c)));
        w.row(cells);
    }
    w.save(path);
}

struct LabelledMatrix {
    std::vector<PauliString> rows;
    std::vector<int> timesteps;  // 0-based
    RMatrix values;
};

inline LabelledMatrix read_labelled_matrix(const fs::path &path) {
    CsvTable t = read_csv(path);
    if (t.header.empty() || t.header[0] != "pauli") throw IoError(path.string() + ": first column must be \"pauli\"");
    LabelledMatrix out;
    for (size_t c = 1; c < t.header.size(); ++c) {
        const std::string &h = t.header[c];
        if (h.rfind("t_", 0) != 0) throw IoError(path.string() + ": bad column \"" + h + "\"");
        out.timesteps.push_back(std::stoi(h.substr(2)) - 1);
    }
    out.values.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(out.timesteps.size()));
    for (size_t r = 0; r < t.rows.size(); ++r) {
        out.rows.push_back(PauliString::parse(t.rows[r][0]));
        for (size_t c = 1; c < t.rows[r].size(); ++c) {
            out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) = parse_double(t.rows[r][c]);
        }
    }
    return out;
}

// ---- density matrices --------------------------------------------------------

inline constexpr char kStatesMagic[8] = {'C', 'S', 'S', 'T', 'R', 'H', 'O', '1'};

/// Binary layout: magic, int32 n, int32 N, float64 dt, then N column-major
/// d x d complex128 matrices (little-endian host order).
inline void write_states(const fs::path &path, const std::vector<DensityMatrix> &states, const TimeGrid &grid) {
    detail::require(!states.empty(), "write_states: no states");
    std::string buf(kStatesMagic, sizeof kStatesMagic);
    auto put = [&](const void *p, size_t n) { buf.append(static_cast<const char *>(p), n); };
    const std::int32_t n = states.front().num_qubits(), count = static_cast<std::int32_t>(states.size());
    put(&n, sizeof n);
    put(&count, sizeof count);
    put(&grid.dt, sizeof grid.dt);
    for (const auto &s : states) put(s.matrix().data(), sizeof(cplx) * static_cast<size_t>(s.matrix().size()));
    write_text(path, buf);
}

struct StoredStates {
    std::vector<DensityMatrix> states;
    TimeGrid grid;
};

inline StoredStates read_states(const fs::path &path) {
    const std::string buf = read_text(path);
    size_t pos = 0;
    auto get = [&](void *p, size_t n) {
        if (pos + n > buf.size()) throw IoError(path.string() + ": truncated states file");
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    };
    char magic[sizeof kStatesMagic];
    get(magic, sizeof magic);
    if (std::memcmp(magic, kStatesMagic, sizeof magic) != 0) throw IoError(path.string() + ": not a states file");
    std::int32_t n = 0, count = 0;
    double dt = 0;
    get(&n, sizeof n);
    get(&count, sizeof count);
    get(&dt, sizeof dt);
    if (n < 1 || n > 16 || count < 1) throw IoError(path.string() + ": corrupt header");
    StoredStates out;
    out.grid = TimeGrid(count, dt);
    const Eigen::Index d = Eigen::Index{1} << n;
    for (std::int32_t j = 0; j < count; ++j) {
        CMatrix m(d, d);
        get(m.data(), sizeof(cplx) * static_cast<size_t>(m.size()));
        out.states.push_back(DensityMatrix::unchecked(std::move(m)));
    }
    if (pos != buf.size()) throw IoError(path.string() + ": trailing bytes in states file");
    return out;
}

// ---- shadow datasets -------------------------------------------------------

inline void write_dataset(const fs::path &path, const ShadowDataset &ds) {
    std::string text = "# timestep " + std::to_string(ds.timestep + 1) + "\n# seed " + std::to_string(ds.seed) +
                       "\n# shots " + std::to_string(ds.size()) + "\nBASES,BITS\n";
    for (const auto &s : ds.snapshots) text += s.bases_str() + ',' + s.bits_str() + '\n';
    write_text(path, text);
}

inline ShadowDataset read_dataset(const fs::path &path) {
    std::istringstream in(read_text(path));
    ShadowDataset ds;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream meta(line.substr(1));
            std::string key;
            meta >> key;
            if (key == "timestep") {
                meta >> ds.timestep;
                --ds.timestep;
            } else if (key == "seed") {
                meta >> ds.seed;
            }
            continue;
        }
        if (!header) {
            if (line != "BASES,BITS") throw IoError(path.string() + ": expected BASES,BITS header");
            header = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw IoError(path.string() + ": malformed snapshot line");
        Snapshot s{PauliString::parse(line.substr(0, comma)), 0};
        const std::string bits = line.substr(comma + 1);
        if (static_cast<int>(bits.size()) != s.bases.num_qubits()) throw IoError(path.string() + ": bit length mismatch");
        for (char c : bits) {
            if (c != '0' && c != '1') throw IoError(path.string() + ": bad outcome bit");
            s.outcome = (s.outcome << 1) | static_cast<std::uint64_t>(c == '1');
        }
        ds.snapshots.push_back(std::move(s));
    }
    return ds;
}

// ---- sampling plans and reconstructions -------------------------------------

/// {"N", "m", "omega" (1-based labels), "seed"}.
inline Json plan_to_json(const SamplingPlan &p) {
    Json omega = Json::array();
    for (int j : p.omega) omega.push_back(j + 1);
    return Json{{"N", p.N}, {"m", p.m()}, {"omega", omega}, {"seed", p.seed}};
}

inline SamplingPlan plan_from_json(const Json &j) {
    try {
        SamplingPlan p;
        p.N = j.at("N").get<int>();
        p.seed = j.at("seed").get<std::uint64_t>();
        for (int label : j.at("omega").get<std::vector<int>>()) p.omega.push_back(label - 1);
        if (j.at("m").get<int>() != p.m()) throw IoError("sampling plan: m disagrees with omega");
        p.validate();
        return p;
    } catch (const nlohmann::json::exception &e) {
        throw IoError(std::string("sampling plan: ") + e.what());
    } catch (const InvalidArgument &e) {
        throw IoError(e.what());
    }
}

inline Json reconstruction_to_json(const ReconstructionResult &r, const PauliString &p) {
    return Json{{"pauli", p.str()},
                {"alpha", r.alpha},
                {"iterations", r.iterations},
                {"residual_norm", r.residual_norm},
                {"converged", r.converged},
                {"nonzeros", (r.coefficients.array() != 0).count()}};
}

/// Columns k (0-based coefficient index / timestep), x_hat, s_hat.
inline void write_reconstruction_csv(const fs::path &path, const ReconstructionResult &r) {
    CsvWriter w({"k", "coefficient", "signal"});
    for (Eigen::Index k = 0; k < r.coefficients.size(); ++k) {
        w.row({std::to_string(k), fmt(r.coefficients(k)), fmt(r.signal(k))});
    }
    w.save(path);
}

}  // namespace csst::io
