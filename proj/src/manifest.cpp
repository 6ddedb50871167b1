#include "mraglab/manifest.hpp"

#include <openssl/evp.h>

#include <fmt/format.h>

#include "mraglab/core.hpp"
#include "mraglab/hashing.hpp"

namespace mraglab {

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
    return out;
}

}  // namespace mraglab

namespace mraglab::manifest {

using ordered_json = nlohmann::ordered_json;

FileDigest digest_bytes(std::string name, std::string_view bytes) {
    return {std::move(name), sha256_hex(bytes), bytes.size()};
}

FileDigest digest_file(const std::filesystem::path& path) {
    return digest_bytes(path.filename().string(), read_text_file(path));
}

std::string outputs_digest(const std::vector<FileDigest>& outputs) {
    std::string lines;
    for (const FileDigest& f : outputs) lines += f.name + "\t" + f.sha256 + "\n";
    return sha256_hex(lines);
}

namespace {

ordered_json files_json(const std::vector<FileDigest>& files) {
    ordered_json a = ordered_json::array();
    for (const FileDigest& f : files) a.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    return a;
}

}  // namespace

ordered_json to_json(const Manifest& m) {
    ordered_json j;
    j["schema"] = "mraglab.manifest/1";
    j["code_version"] = MRAGLAB_VERSION;
    j["command"] = m.command;
    j["args"] = m.args;
    j["config_sha256"] = m.config_hash;
    j["config"] = m.config;
    ordered_json backends = ordered_json::object();
    for (const auto& [role, fp] : m.backends) backends[role] = fp;
    j["backends"] = backends;
    j["inputs"] = files_json(m.inputs);
    j["outputs"] = files_json(m.outputs);
    j["outputs_digest"] = outputs_digest(m.outputs);
    j["status"] = m.status;
    j["exit_code"] = m.exit_code;
    j["timing"] = {{"started_utc", m.started_utc}, {"elapsed_s", m.elapsed_s}};
    return j;
}

std::filesystem::path manifest_path(const std::filesystem::path& output) {
    return output.string() + ".manifest.json";
}

}  // namespace mraglab::manifest
