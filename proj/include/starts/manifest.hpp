#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "starts/params.hpp"
#include "starts/simulate.hpp"

namespace starts {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
/// Throws IntegrityError when the file cannot be read.
std::string sha256_file(const std::string& path);

struct ManifestFile {
    std::string name;  // relative to the manifest's directory
    std::string sha256;
    int rows = 0;
    int cols = 0;
};

struct Manifest {
    SimConfig config;
    std::vector<ManifestFile> files;

    nlohmann::json to_json() const;
    /// Throws ParseError on a malformed document.
    static Manifest from_json(const nlohmann::json& j);
};

/// Writes `datasets` CSV files (dataset_000.csv, ...) plus manifest.json into
/// `dir`. Dataset k draws from the stream keyed by (seed, 0, k); k = 0 is the
/// same data gen_dataset(cfg) produces.
Manifest simulate_to_dir(const SimConfig& cfg, int datasets, const std::string& dir);

/// Re-hashes every file listed in the manifest. Throws IntegrityError on the
/// first missing file or hash mismatch.
Manifest verify_manifest(const std::string& manifest_path);

}  // namespace starts
