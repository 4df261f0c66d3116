// File output helpers: CSV writing at full double precision, the JSON run
// archive holding a RunRecord, and a stable hash for config provenance.

#ifndef TCLFLOCK_IO_HPP
#define TCLFLOCK_IO_HPP

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tclflock/estimation.hpp"
#include "tclflock/grid.hpp"

namespace tclflock {

/// Shortest round-trip-safe decimal form (17 significant digits).
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
        : out_(path, std::ios::binary), ncols_(columns.size()) {
        if (!out_) throw std::runtime_error("cannot open " + path.string());
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out_ << ',';
            out_ << columns[i];
        }
        out_ << '\n';
    }

    void row(const std::vector<double>& values) {
        if (values.size() != ncols_) throw std::logic_error("CsvWriter: column count mismatch");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << fmt17(values[i]);
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
    std::size_t ncols_;
};

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ull;
    }
    return h;
}

inline nlohmann::json grid_to_json(const Grid& g) {
    return nlohmann::json{{"x_lo", g.x_lo}, {"x_hi", g.x_hi}, {"nx", g.nx}};
}

inline Grid grid_from_json(const nlohmann::json& j) {
    return make_grid(j.at("x_lo").get<double>(), j.at("x_hi").get<double>(),
                     j.at("nx").get<int>());
}

inline nlohmann::json params_to_json(const TclParams& p) {
    return nlohmann::json{{"r", p.R},     {"c", p.C}, {"p", p.P},
                          {"x_e", p.x_e}, {"s", p.s}, {"eta", p.eta}};
}

inline TclParams params_from_json(const nlohmann::json& j) {
    TclParams p;
    p.R = j.at("r").get<double>();
    p.C = j.at("c").get<double>();
    p.P = j.at("p").get<double>();
    p.x_e = j.at("x_e").get<double>();
    p.s = j.at("s").get<int>();
    p.eta = j.at("eta").get<double>();
    return p;
}

/// Self-describing run archive: everything estimate_beta / fpe_replay needs.
inline void save_run_record(const RunRecord& rec, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "tclflock-run-archive";
    j["version"] = 1;
    j["grid"] = grid_to_json(rec.grid);
    j["dt_ctrl_h"] = rec.dt_ctrl;
    j["n"] = rec.N;
    j["params"] = params_to_json(rec.params);
    j["w0"] = rec.w0;
    j["v0"] = rec.v0;
    j["u_series"] = rec.u_series;
    nlohmann::json deltas = nlohmann::json::array();
    for (const auto& d : rec.delta_series) deltas.push_back(d.values);
    j["delta_series"] = std::move(deltas);
    j["non_truth"] = rec.non_truth;
    j["noff_truth"] = rec.noff_truth;
    j["w_truth"] = rec.w_truth;
    j["v_truth"] = rec.v_truth;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << j.dump();
    out << '\n';
}

inline RunRecord load_run_record(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != std::string("tclflock-run-archive"))
        throw std::runtime_error(path.string() + " is not a run archive");

    RunRecord rec;
    rec.grid = grid_from_json(j.at("grid"));
    rec.dt_ctrl = j.at("dt_ctrl_h").get<double>();
    rec.N = j.at("n").get<int>();
    rec.params = params_from_json(j.at("params"));
    rec.w0 = j.at("w0").get<std::vector<double>>();
    rec.v0 = j.at("v0").get<std::vector<double>>();
    rec.u_series = j.at("u_series").get<std::vector<double>>();
    for (const auto& values : j.at("delta_series")) {
        SwitchFlux d(rec.grid);
        d.values = values.get<std::vector<double>>();
        if (d.values.size() != static_cast<std::size_t>(rec.grid.nx))
            throw std::runtime_error("archive flux length does not match the grid");
        rec.delta_series.push_back(std::move(d));
    }
    rec.non_truth = j.at("non_truth").get<std::vector<double>>();
    rec.noff_truth = j.at("noff_truth").get<std::vector<double>>();
    rec.w_truth = j.at("w_truth").get<std::vector<std::vector<double>>>();
    rec.v_truth = j.at("v_truth").get<std::vector<std::vector<double>>>();

    const std::size_t n = rec.u_series.size();
    if (rec.delta_series.size() != n || rec.non_truth.size() != n ||
        rec.noff_truth.size() != n || rec.w_truth.size() != n || rec.v_truth.size() != n)
        throw std::runtime_error("archive series lengths disagree");
    return rec;
}

}  // namespace tclflock

#endif
