#include "starts/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "starts/errors.hpp"
#include "starts/model.hpp"

namespace starts {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw IntegrityError("SHA-256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IntegrityError("cannot read '" + path + "'");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes);
}

json Manifest::to_json() const {
    json files_json = json::array();
    for (const auto& f : files) {
        files_json.push_back({{"name", f.name}, {"sha256", f.sha256}, {"rows", f.rows}, {"cols", f.cols}});
    }
    const StartsParams& th = config.theta_true;
    return {{"seed", config.seed},
            {"n", config.n},
            {"t", config.t},
            {"centered", config.centered},
            {"theta_true",
             {{"psi2", th.psi2}, {"phi2", th.phi2}, {"beta", th.beta}, {"omega2", th.omega2}, {"sigma1_2", th.sigma1_2}}},
            {"files", files_json}};
}

Manifest Manifest::from_json(const json& j) {
    try {
        Manifest m;
        m.config.seed = j.at("seed").get<std::uint64_t>();
        m.config.n = j.at("n").get<int>();
        m.config.t = j.at("t").get<int>();
        m.config.centered = j.at("centered").get<bool>();
        const json& th = j.at("theta_true");
        m.config.theta_true = {th.at("psi2").get<double>(), th.at("phi2").get<double>(), th.at("beta").get<double>(),
                               th.at("omega2").get<double>(), th.at("sigma1_2").get<double>()};
        for (const auto& f : j.at("files")) {
            m.files.push_back({f.at("name").get<std::string>(), f.at("sha256").get<std::string>(),
                               f.value("rows", 0), f.value("cols", 0)});
        }
        return m;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed manifest: ") + e.what());
    }
}

Manifest simulate_to_dir(const SimConfig& cfg, int datasets, const std::string& dir) {
    if (datasets < 1) throw ConfigError("need at least one dataset");
    if (cfg.n < cfg.t + 1) throw ConfigError("need N >= T + 1");
    const Matrix sigma = implied_cov(cfg.theta_true, cfg.t);
    fs::create_directories(dir);

    Manifest m;
    m.config = cfg;
    for (int k = 0; k < datasets; ++k) {
        auto rng = keyed_stream(cfg.seed, 0, static_cast<std::uint64_t>(k));
        const Matrix y = gen_dataset(sigma, cfg.n, rng, cfg.centered);
        std::ostringstream os;
        write_dataset_csv(os, y);
        const std::string bytes = os.str();

        char name[32];
        std::snprintf(name, sizeof name, "dataset_%03d.csv", k);
        std::ofstream out(fs::path(dir) / name, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + (fs::path(dir) / name).string());
        out << bytes;
        m.files.push_back({name, sha256_hex(bytes), cfg.n, cfg.t});
    }
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << m.to_json().dump(2) << '\n';
    return m;
}

Manifest verify_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IntegrityError("cannot read manifest '" + manifest_path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
    }
    Manifest m = Manifest::from_json(j);
    const fs::path base = fs::path(manifest_path).parent_path();
    for (const auto& f : m.files) {
        const std::string actual = sha256_file((base / f.name).string());
        if (actual != f.sha256) {
            throw IntegrityError("hash mismatch for " + f.name + ": manifest " + f.sha256 + ", file " + actual);
        }
    }
    return m;
}

}  // namespace starts
