#include "rsdiff/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

namespace rsdiff {

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["model_hash"] = model_hash;
    j["seed"] = seed;
    j["tool_version"] = tool_version;
    j["command_line"] = command_line;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    j["outputs"] = outputs;
    return j;
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
}

std::string path_csv(const HybridPath& path) {
    std::string out = "t";
    for (int i = 0; i < path.dim; ++i) out += ",x" + std::to_string(i);
    out += ",lambda\n";
    for (std::size_t s = 0; s < path.n_samples(); ++s) {
        out += g17(path.time_of(s));
        for (int i = 0; i < path.dim; ++i) out += "," + g17(path.x[s * path.dim + i]);
        out += "," + std::to_string(path.lambda[s]) + "\n";
    }
    return out;
}

std::string jumps_csv(const HybridPath& path) {
    std::string out = "t,z,from,to,accepted\n";
    for (const auto& ev : path.jumps) {
        out += g17(ev.time) + "," + g17(ev.mark_z) + "," + std::to_string(ev.from_state) + "," +
               std::to_string(ev.to_state) + "," + (ev.accepted ? "1" : "0") + "\n";
    }
    return out;
}

std::string density_csv(const DensityEstimate& de) {
    if (de.grid.dim() != 1) throw ModelError("density_csv: 1D grids only");
    std::string out = "bin_center,state,rho_hat\n";
    const int nb = de.grid.n_bins_total();
    for (int k = 0; k < de.n_states; ++k)
        for (int b = 0; b < nb; ++b) {
            const std::size_t i = static_cast<std::size_t>(k) * nb + b;
            if (!de.included[i]) continue;
            out += g17(de.grid.bin_center(b)(0)) + "," + std::to_string(k + 1) + "," +
                   g17(de.rho[i]) + "\n";
        }
    return out;
}

std::string oracle_csv(const StationarySolution& sol, const ReferenceMeasure& ref) {
    std::string out = "bin_center,state,rho_hat\n";
    for (int k = 1; k <= sol.n_states; ++k) {
        const Vec rho = oracle_rho(sol, ref, k);
        for (int i = 0; i < sol.grid.n; ++i)
            out += g17(sol.grid.node(i)) + "," + std::to_string(k) + "," + g17(rho(i)) + "\n";
    }
    return out;
}

}  // namespace rsdiff
