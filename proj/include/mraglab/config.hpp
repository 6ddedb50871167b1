#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mraglab/backends.hpp"
#include "mraglab/core.hpp"

namespace mraglab::config {

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Which profile plays which part. Empty means unset; `reranker` and
/// `similarity_embedder` fall back to `embedder`.
struct Roles {
    std::string embedder;
    std::string reranker;
    std::string translator;
    std::string generator;
    std::string similarity_embedder;
};

struct Paths {
    std::string corpus;
    std::string index;
    std::string queries;
};

struct RunParams {
    std::size_t k_retrieve = 50;
    std::size_t k_use = 5;
    std::size_t k_mlrs = 50;
    std::size_t top_docs = 5;
    std::size_t batch_size = 64;
    /// Language codes, or "query-lang".
    std::vector<std::string> target_langs{"query-lang"};
    std::vector<std::string> answer_langs{"en", "ko", "zh", "fr", "ja", "it", "pt", "es"};
    std::optional<std::uint64_t> seed;
    /// 0 selects the number of logical CPUs.
    std::size_t workers = 0;
    std::uint64_t n_perm = 100000;
    double temperature = 0.0;
    int answer_max_tokens = 256;
    int rewrite_max_tokens = 512;
    int genpref_max_tokens = 512;
    std::string concat_order = "translated-first";
    bool ngram_multiset = false;
    std::size_t similarity_max_chars = 512;
};

struct ExperimentConfig {
    std::map<std::string, backends::BackendProfile> profiles;
    Roles roles;
    Paths paths;
    RunParams run;
    std::string output_dir = ".";
    /// Directory relative paths are resolved against; not serialized.
    std::filesystem::path base_dir;

    /// Throws ConfigError on a dangling or mistyped role reference, a missing
    /// seed for a stochastic setting, or out-of-range parameters.
    void validate() const;
    std::filesystem::path resolve(const std::string& path) const;
    std::size_t effective_workers() const;

    /// Profile for a role, with relative mock lexicon paths resolved.
    /// Throws ConfigError when the role is unset.
    backends::BackendProfile profile_for(std::string_view role) const;
};

ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
/// Canonical form: fixed key order, secrets never included.
nlohmann::ordered_json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// sha256 of the canonical JSON text.
std::string config_hash(const ExperimentConfig& config);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// MRAG_LAB_SEED, MRAG_LAB_WORKERS and MRAG_LAB_OUT_DIR override file values.
/// Every applied override is logged.
void apply_env(ExperimentConfig& config, const EnvLookup& env);

/// Built-in all-mock configuration over the synthetic data set.
ExperimentConfig mock_config(const std::string& lexicon_path, int dim = 256);

}  // namespace mraglab::config
