#include "mraglab/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include <spdlog/spdlog.h>

#include "mraglab/hashing.hpp"
#include "mraglab/parallel.hpp"

namespace mraglab::config {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using backends::BackendKind;
using backends::BackendProfile;

namespace {

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
        }
    }
}

template <typename T>
void read(const json& j, std::string_view key, T& out, std::string_view where) {
    const auto it = j.find(std::string(key));
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string(where) + "." + std::string(key) + ": wrong type");
    }
}

BackendProfile profile_from_json(const std::string& name, const json& j) {
    const std::string where = "profiles." + name;
    check_keys(j, where,
               {"kind", "backend", "endpoint", "model_name", "timeout_s", "max_retries", "batch_limit", "max_in_flight",
                "backoff_base_s", "backoff_max_s", "mock", "auth_token"});
    if (j.contains("auth_token")) {
        throw ConfigError(where + ": tokens are not read from config files; set " + backends::token_env_var(name));
    }
    BackendProfile p;
    p.name = name;
    std::string kind;
    read(j, "kind", kind, where);
    if (kind.empty()) throw ConfigError(where + ": 'kind' is required");
    try {
        p.kind = backends::parse_backend_kind(kind);
    } catch (const Error& e) {
        throw ConfigError(where + ": " + e.what());
    }
    read(j, "backend", p.backend, where);
    read(j, "endpoint", p.endpoint, where);
    read(j, "model_name", p.model_name, where);
    read(j, "timeout_s", p.timeout_s, where);
    read(j, "max_retries", p.max_retries, where);
    read(j, "batch_limit", p.batch_limit, where);
    read(j, "max_in_flight", p.max_in_flight, where);
    read(j, "backoff_base_s", p.backoff_base_s, where);
    read(j, "backoff_max_s", p.backoff_max_s, where);
    if (const auto m = j.find("mock"); m != j.end()) {
        check_keys(*m, where + ".mock", {"dim", "seed", "penalty", "lexicon"});
        read(*m, "dim", p.mock_dim, where + ".mock");
        read(*m, "seed", p.mock_seed, where + ".mock");
        read(*m, "penalty", p.mock_penalty, where + ".mock");
        read(*m, "lexicon", p.mock_lexicon, where + ".mock");
    }
    return p;
}

ordered_json profile_to_json(const BackendProfile& p) {
    ordered_json j;
    j["kind"] = backends::to_string(p.kind);
    j["backend"] = p.backend;
    j["endpoint"] = p.endpoint;
    j["model_name"] = p.model_name;
    j["timeout_s"] = p.timeout_s;
    j["max_retries"] = p.max_retries;
    j["batch_limit"] = p.batch_limit;
    j["max_in_flight"] = p.max_in_flight;
    j["backoff_base_s"] = p.backoff_base_s;
    j["backoff_max_s"] = p.backoff_max_s;
    j["mock"] = {{"dim", p.mock_dim}, {"seed", p.mock_seed}, {"penalty", p.mock_penalty}, {"lexicon", p.mock_lexicon}};
    return j;
}

}  // namespace

ExperimentConfig from_json(const json& j, const std::filesystem::path& base_dir) {
    check_keys(j, "config", {"profiles", "roles", "paths", "run", "output_dir"});
    ExperimentConfig c;
    c.base_dir = base_dir;
    if (const auto p = j.find("profiles"); p != j.end()) {
        if (!p->is_object()) throw ConfigError("profiles: expected an object");
        for (const auto& [name, value] : p->items()) c.profiles[name] = profile_from_json(name, value);
    }
    if (const auto r = j.find("roles"); r != j.end()) {
        check_keys(*r, "roles", {"embedder", "reranker", "translator", "generator", "similarity_embedder"});
        read(*r, "embedder", c.roles.embedder, "roles");
        read(*r, "reranker", c.roles.reranker, "roles");
        read(*r, "translator", c.roles.translator, "roles");
        read(*r, "generator", c.roles.generator, "roles");
        read(*r, "similarity_embedder", c.roles.similarity_embedder, "roles");
    }
    if (const auto p = j.find("paths"); p != j.end()) {
        check_keys(*p, "paths", {"corpus", "index", "queries"});
        read(*p, "corpus", c.paths.corpus, "paths");
        read(*p, "index", c.paths.index, "paths");
        read(*p, "queries", c.paths.queries, "paths");
    }
    if (const auto r = j.find("run"); r != j.end()) {
        check_keys(*r, "run",
                   {"k_retrieve", "k_use", "k_mlrs", "top_docs", "batch_size", "target_langs", "answer_langs", "seed",
                    "workers", "n_perm", "temperature", "answer_max_tokens", "rewrite_max_tokens",
                    "genpref_max_tokens", "concat_order", "ngram_multiset", "similarity_max_chars"});
        RunParams& run = c.run;
        read(*r, "k_retrieve", run.k_retrieve, "run");
        read(*r, "k_use", run.k_use, "run");
        read(*r, "k_mlrs", run.k_mlrs, "run");
        read(*r, "top_docs", run.top_docs, "run");
        read(*r, "batch_size", run.batch_size, "run");
        read(*r, "target_langs", run.target_langs, "run");
        read(*r, "answer_langs", run.answer_langs, "run");
        if (const auto s = r->find("seed"); s != r->end() && !s->is_null()) {
            if (!s->is_number_unsigned()) throw ConfigError("run.seed: expected a non-negative integer");
            run.seed = s->get<std::uint64_t>();
        }
        read(*r, "workers", run.workers, "run");
        read(*r, "n_perm", run.n_perm, "run");
        read(*r, "temperature", run.temperature, "run");
        read(*r, "answer_max_tokens", run.answer_max_tokens, "run");
        read(*r, "rewrite_max_tokens", run.rewrite_max_tokens, "run");
        read(*r, "genpref_max_tokens", run.genpref_max_tokens, "run");
        read(*r, "concat_order", run.concat_order, "run");
        read(*r, "ngram_multiset", run.ngram_multiset, "run");
        read(*r, "similarity_max_chars", run.similarity_max_chars, "run");
    }
    read(j, "output_dir", c.output_dir, "config");
    return c;
}

ordered_json to_json(const ExperimentConfig& c) {
    ordered_json j;
    ordered_json profiles = ordered_json::object();
    for (const auto& [name, p] : c.profiles) profiles[name] = profile_to_json(p);
    j["profiles"] = profiles;
    j["roles"] = {{"embedder", c.roles.embedder},
                  {"reranker", c.roles.reranker},
                  {"translator", c.roles.translator},
                  {"generator", c.roles.generator},
                  {"similarity_embedder", c.roles.similarity_embedder}};
    j["paths"] = {{"corpus", c.paths.corpus}, {"index", c.paths.index}, {"queries", c.paths.queries}};
    const RunParams& r = c.run;
    ordered_json run;
    run["k_retrieve"] = r.k_retrieve;
    run["k_use"] = r.k_use;
    run["k_mlrs"] = r.k_mlrs;
    run["top_docs"] = r.top_docs;
    run["batch_size"] = r.batch_size;
    run["target_langs"] = r.target_langs;
    run["answer_langs"] = r.answer_langs;
    run["seed"] = r.seed ? ordered_json(*r.seed) : ordered_json(nullptr);
    run["workers"] = r.workers;
    run["n_perm"] = r.n_perm;
    run["temperature"] = r.temperature;
    run["answer_max_tokens"] = r.answer_max_tokens;
    run["rewrite_max_tokens"] = r.rewrite_max_tokens;
    run["genpref_max_tokens"] = r.genpref_max_tokens;
    run["concat_order"] = r.concat_order;
    run["ngram_multiset"] = r.ngram_multiset;
    run["similarity_max_chars"] = r.similarity_max_chars;
    j["run"] = run;
    j["output_dir"] = c.output_dir;
    return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    ExperimentConfig c = from_json(j, path.parent_path());
    c.validate();
    return c;
}

std::string config_hash(const ExperimentConfig& config) { return sha256_hex(to_json(config).dump()); }

void ExperimentConfig::validate() const {
    for (const auto& [name, p] : profiles) {
        const std::string where = "profiles." + name;
        if (p.backend != "mock" && p.backend != "http" && p.backend != "openai") {
            throw ConfigError(where + ": unknown backend '" + p.backend + "'");
        }
        if (p.backend == "openai" && p.kind != BackendKind::generator) {
            throw ConfigError(where + ": the openai adapter only serves generators");
        }
        if (p.backend != "mock" && p.endpoint.empty()) throw ConfigError(where + ": endpoint is required");
        if (!(p.timeout_s > 0.0)) throw ConfigError(where + ": timeout_s must be positive");
        if (p.max_retries < 0) throw ConfigError(where + ": max_retries must be >= 0");
        if (p.batch_limit < 1 || p.max_in_flight < 1) {
            throw ConfigError(where + ": batch_limit and max_in_flight must be >= 1");
        }
        if (p.mock_dim < 2) throw ConfigError(where + ": mock.dim must be >= 2");
        if (p.mock_penalty < 0.0 || p.mock_penalty >= 1.0) throw ConfigError(where + ": mock.penalty must be in [0, 1)");
    }
    const auto check_role = [&](std::string_view role, const std::string& name, BackendKind kind) {
        if (name.empty()) return;
        const auto it = profiles.find(name);
        if (it == profiles.end()) {
            throw ConfigError("roles." + std::string(role) + ": no profile named '" + name + "'");
        }
        if (it->second.kind != kind) {
            throw ConfigError("roles." + std::string(role) + ": profile '" + name + "' is a " +
                              std::string(backends::to_string(it->second.kind)));
        }
    };
    check_role("embedder", roles.embedder, BackendKind::embedder);
    check_role("reranker", roles.reranker, BackendKind::embedder);
    check_role("translator", roles.translator, BackendKind::translator);
    check_role("generator", roles.generator, BackendKind::generator);
    check_role("similarity_embedder", roles.similarity_embedder, BackendKind::embedder);

    if (run.k_use < 1 || run.k_use > run.k_retrieve) throw ConfigError("run: need 1 <= k_use <= k_retrieve");
    if (run.k_mlrs < 1 || run.top_docs < 1 || run.batch_size < 1) {
        throw ConfigError("run: k_mlrs, top_docs and batch_size must be >= 1");
    }
    if (run.n_perm < 1000) throw ConfigError("run: n_perm must be >= 1000");
    if (run.temperature < 0.0) throw ConfigError("run: temperature must be >= 0");
    if (run.temperature > 0.0 && !run.seed) throw ConfigError("run: a seed is required when temperature > 0");
    if (run.answer_max_tokens < 1 || run.rewrite_max_tokens < 1 || run.genpref_max_tokens < 1) {
        throw ConfigError("run: max token limits must be >= 1");
    }
    if (run.concat_order != "translated-first" && run.concat_order != "refined-first") {
        throw ConfigError("run: concat_order must be translated-first or refined-first");
    }
    if (run.target_langs.empty()) throw ConfigError("run: target_langs is empty");
    try {
        for (const std::string& t : run.target_langs) {
            if (t != "query-lang") (void)LanguageCode{t};
        }
        std::set<std::string> seen;
        for (const std::string& l : run.answer_langs) {
            (void)LanguageCode{l};
            if (!seen.insert(l).second) throw ConfigError("run: duplicate answer language '" + l + "'");
        }
    } catch (const UnknownLanguageError& e) {
        throw ConfigError(std::string("run: ") + e.what());
    }
    if (run.answer_langs.empty()) throw ConfigError("run: answer_langs is empty");
}

std::filesystem::path ExperimentConfig::resolve(const std::string& path) const {
    const std::filesystem::path p(path);
    if (p.empty() || p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

std::size_t ExperimentConfig::effective_workers() const { return run.workers == 0 ? default_workers() : run.workers; }

BackendProfile ExperimentConfig::profile_for(std::string_view role) const {
    std::string name;
    if (role == "embedder") name = roles.embedder;
    if (role == "reranker") name = roles.reranker.empty() ? roles.embedder : roles.reranker;
    if (role == "similarity_embedder") {
        name = roles.similarity_embedder.empty() ? roles.embedder : roles.similarity_embedder;
    }
    if (role == "translator") name = roles.translator;
    if (role == "generator") name = roles.generator;
    if (name.empty()) throw ConfigError("config: role '" + std::string(role) + "' is not assigned to a profile");
    const auto it = profiles.find(name);
    if (it == profiles.end()) throw ConfigError("config: no profile named '" + name + "'");
    BackendProfile p = it->second;
    if (!p.mock_lexicon.empty()) p.mock_lexicon = resolve(p.mock_lexicon).string();
    return p;
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (v == nullptr || *v == '\0') return std::nullopt;
        return std::string(v);
    };
}

void apply_env(ExperimentConfig& config, const EnvLookup& env) {
    const auto parse_u64 = [](const std::string& name, const std::string& v) {
        std::size_t used = 0;
        std::uint64_t x = 0;
        try {
            x = std::stoull(v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != v.size() || v.empty() || v[0] == '-') throw ConfigError(name + ": expected a non-negative integer");
        return x;
    };
    if (auto v = env("MRAG_LAB_SEED")) {
        config.run.seed = parse_u64("MRAG_LAB_SEED", *v);
        spdlog::info("config: run.seed = {} (from MRAG_LAB_SEED)", *config.run.seed);
    }
    if (auto v = env("MRAG_LAB_WORKERS")) {
        config.run.workers = parse_u64("MRAG_LAB_WORKERS", *v);
        spdlog::info("config: run.workers = {} (from MRAG_LAB_WORKERS)", config.run.workers);
    }
    if (auto v = env("MRAG_LAB_OUT_DIR")) {
        config.output_dir = *v;
        spdlog::info("config: output_dir = {} (from MRAG_LAB_OUT_DIR)", config.output_dir);
    }
}

ExperimentConfig mock_config(const std::string& lexicon_path, int dim) {
    ExperimentConfig c;
    BackendProfile embed;
    embed.name = "mock-embed";
    embed.kind = BackendKind::embedder;
    embed.backend = "mock";
    embed.mock_dim = dim;
    BackendProfile translate;
    translate.name = "mock-translate";
    translate.kind = BackendKind::translator;
    translate.backend = "mock";
    translate.mock_lexicon = lexicon_path;
    BackendProfile generate;
    generate.name = "mock-generate";
    generate.kind = BackendKind::generator;
    generate.backend = "mock";
    c.profiles = {{embed.name, embed}, {translate.name, translate}, {generate.name, generate}};
    c.roles = {embed.name, "", translate.name, generate.name, ""};
    c.run.k_retrieve = 20;
    c.run.k_mlrs = 20;
    c.run.seed = 7;
    c.run.workers = 1;
    c.run.answer_langs = {"en", "ko", "zh", "fr", "es"};
    return c;
}

}  // namespace mraglab::config
