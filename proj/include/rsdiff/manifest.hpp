#pragma once

// Run manifest + deterministic text output. All numbers are serialized with
// 17 significant digits so reruns with the same manifest inputs are
// byte-identical regardless of worker count.

#include "rsdiff/estimate.hpp"
#include "rsdiff/fp_oracle.hpp"
#include "rsdiff/simulate.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace rsdiff {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
    std::string model_hash;
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    std::string command_line;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> outputs;

    nlohmann::json to_json() const;
};

/// printf %.17g.
std::string g17(double v);

std::string timestamp_utc();

void write_text_file(const std::filesystem::path& path, const std::string& content);

std::string path_csv(const HybridPath& path);
std::string jumps_csv(const HybridPath& path);
/// Columns: bin_center, state, rho_hat.
std::string density_csv(const DensityEstimate& de);
/// Same schema as density_csv, oracle restricted to grid nodes.
std::string oracle_csv(const StationarySolution& sol, const ReferenceMeasure& ref);

}  // namespace rsdiff
