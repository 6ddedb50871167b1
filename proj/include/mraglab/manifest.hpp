#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace mraglab::manifest {

struct FileDigest {
    std::string name;
    std::string sha256;
    std::uint64_t bytes = 0;
};

FileDigest digest_file(const std::filesystem::path& path);
FileDigest digest_bytes(std::string name, std::string_view bytes);

/// sha256 over "name\tsha256\n" lines in the given order.
std::string outputs_digest(const std::vector<FileDigest>& outputs);

/// Everything needed to re-run a command. Timing is informational and kept
/// apart from the digests.
struct Manifest {
    std::string command;
    std::vector<std::string> args;
    std::string config_hash;
    nlohmann::ordered_json config;
    std::map<std::string, std::string> backends;  // role -> fingerprint
    std::vector<FileDigest> inputs;
    std::vector<FileDigest> outputs;
    std::string status = "ok";
    int exit_code = 0;
    std::string started_utc;
    double elapsed_s = 0.0;
};

nlohmann::ordered_json to_json(const Manifest& m);

/// `<output>.manifest.json`.
std::filesystem::path manifest_path(const std::filesystem::path& output);

}  // namespace mraglab::manifest
