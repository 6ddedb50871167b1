#include "mraglab/cli.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "mraglab/datastore.hpp"
#include "mraglab/eval.hpp"
#include "mraglab/genpref.hpp"
#include "mraglab/hashing.hpp"
#include "mraglab/http_backends.hpp"
#include "mraglab/manifest.hpp"
#include "mraglab/mlrs.hpp"
#include "mraglab/parallel.hpp"
#include "mraglab/report.hpp"
#include "mraglab/text.hpp"

namespace mraglab::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using config::ConfigError;
using config::ExperimentConfig;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::size_t> workers;
    std::optional<std::uint64_t> seed;
    std::string log_level = "info";
};

void setup_logging(const std::string& level) {
    static std::shared_ptr<spdlog::logger> logger = [] {
        auto l = spdlog::stderr_logger_mt("mraglab");
        l->set_pattern("[%Y-%m-%dT%H:%M:%S.%e] [%l] %v");
        return l;
    }();
    spdlog::set_default_logger(logger);
    const spdlog::level::level_enum lvl = spdlog::level::from_str(level);
    if (lvl == spdlog::level::off && level != "off") throw ConfigError("unknown log level '" + level + "'");
    spdlog::set_level(lvl);
}

template <typename T>
void override_from_flag(T& field, const std::optional<T>& flag, std::string_view key, std::string_view flag_name) {
    if (!flag) return;
    field = *flag;
    spdlog::info("config: {} = {} (from {})", key, json(*flag).dump(), flag_name);
}

ExperimentConfig load_experiment(const Globals& g) {
    ExperimentConfig c;
    if (!g.config_path.empty()) c = config::load_config(g.config_path);
    config::apply_env(c, config::process_env());
    override_from_flag(c.run.workers, g.workers, "run.workers", "--workers");
    if (g.seed) {
        c.run.seed = g.seed;
        spdlog::info("config: run.seed = {} (from --seed)", *g.seed);
    }
    return c;
}

fs::path input_path(const ExperimentConfig& c, const std::string& flag, const std::string& configured,
                    std::string_view what) {
    if (!flag.empty()) return flag;
    if (!configured.empty()) return c.resolve(configured);
    throw ConfigError("no " + std::string(what) + " path; pass --" + std::string(what) + " or set paths." +
                      std::string(what));
}

fs::path output_path(const ExperimentConfig& c, const std::string& flag, const std::string& fallback) {
    const fs::path p = flag.empty() ? fs::path(fallback) : fs::path(flag);
    if (p.is_absolute() || c.output_dir.empty() || c.output_dir == ".") return p;
    return fs::path(c.output_dir) / p;
}

std::string utc_now() {
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
}

// Collects the digests of a run and writes its manifest beside the first output.
class Session {
public:
    Session(std::string command, const std::vector<std::string>& args, const ExperimentConfig& config)
        : start_(std::chrono::steady_clock::now()) {
        m_.command = std::move(command);
        m_.args = args;
        m_.config = config::to_json(config);
        m_.config_hash = config::config_hash(config);
        m_.started_utc = utc_now();
    }

    void input(const fs::path& path) { m_.inputs.push_back(manifest::digest_file(path)); }
    void backend(const std::string& role, const std::string& fingerprint) { m_.backends[role] = fingerprint; }

    void output(const fs::path& path, std::string_view bytes) {
        write_text_file(path, bytes);
        m_.outputs.push_back(manifest::digest_bytes(path.filename().string(), bytes));
        if (first_.empty()) first_ = path;
        spdlog::info("wrote {} ({} bytes)", path.string(), bytes.size());
    }

    int finish(int exit_code) {
        m_.exit_code = exit_code;
        m_.status = exit_code == kExitOk ? "ok" : exit_code == kExitPartial ? "partial" : "failed";
        m_.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        if (!first_.empty()) {
            const fs::path mp = manifest::manifest_path(first_);
            write_text_file(mp, manifest::to_json(m_).dump(2) + "\n");
            spdlog::info("manifest {} (outputs digest {})", mp.string(), manifest::outputs_digest(m_.outputs));
        }
        return exit_code;
    }

private:
    manifest::Manifest m_;
    std::chrono::steady_clock::time_point start_;
    fs::path first_;
};

// Stands in for an unassigned translator role; strategies that never
// translate run without one.
class UnavailableTranslator final : public backends::Translator {
public:
    std::string identify() const override { return "none"; }

protected:
    std::vector<std::string> do_translate(std::span<const std::string>, const LanguageCode&,
                                          const LanguageCode&) override {
        throw backends::BackendError("no translator profile is configured");
    }
};

datastore::Index open_index(const fs::path& path, backends::Embedder& embedder, Session& session) {
    session.input(path);
    datastore::LoadedIndex loaded = datastore::load_index(path, embedder.identify());
    if (loaded.warning) spdlog::warn("{}", *loaded.warning);
    return std::move(loaded.index);
}

std::vector<Query> open_queries(const fs::path& path, Session& session) {
    session.input(path);
    return load_queries(path);
}

backends::DecodeSettings decode_settings(const ExperimentConfig& c, int max_tokens) {
    backends::DecodeSettings d;
    d.temperature = c.run.temperature;
    d.max_tokens = max_tokens;
    if (c.run.seed) d.seed = static_cast<std::int64_t>(*c.run.seed);
    return d;
}

dkmrag::DkmConfig dkm_config(const ExperimentConfig& c) {
    dkmrag::DkmConfig d;
    d.k_retrieve = c.run.k_retrieve;
    d.k_use = c.run.k_use;
    d.order = c.run.concat_order == "refined-first" ? dkmrag::ConcatOrder::refined_first
                                                    : dkmrag::ConcatOrder::translated_first;
    d.answer_decode = decode_settings(c, c.run.answer_max_tokens);
    d.rewrite_decode = decode_settings(c, c.run.rewrite_max_tokens);
    d.workers = c.effective_workers();
    return d;
}

std::vector<LanguageCode> to_langs(const std::vector<std::string>& codes) {
    std::vector<LanguageCode> out;
    for (const std::string& c : codes) out.emplace_back(c);
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (const std::string& part : text::split(s, ',')) {
        const std::string t = text::trim(part);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::string pretty(const ordered_json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

int cmd_index_build(const Globals& g, const std::vector<std::string>& args, const std::string& corpus_flag,
                    const std::string& out_flag, std::optional<std::size_t> batch_size) {
    ExperimentConfig c = load_experiment(g);
    override_from_flag(c.run.batch_size, batch_size, "run.batch_size", "--batch-size");
    c.validate();
    Session session("index build", args, c);
    const fs::path corpus_path = input_path(c, corpus_flag, c.paths.corpus, "corpus");
    session.input(corpus_path);
    const std::vector<Document> corpus = load_corpus(corpus_path);
    auto embedder = backends::make_embedder(c.profile_for("embedder"));
    session.backend("embedder", embedder->identify());
    const datastore::Index index = datastore::build_index(corpus, *embedder, c.run.batch_size, c.effective_workers());
    session.output(output_path(c, out_flag.empty() ? c.paths.index : out_flag, "index.bin"),
                   datastore::serialize_index(index));
    return session.finish(kExitOk);
}

int cmd_index_info(const std::string& path) {
    const datastore::LoadedIndex loaded = datastore::load_index(path);
    const datastore::Index& index = loaded.index;
    ordered_json j;
    j["path"] = path;
    j["count"] = index.size();
    j["dim"] = index.dim();
    j["fingerprint"] = index.fingerprint();
    ordered_json langs = ordered_json::object();
    for (const auto& [lang, rows] : index.lang_partitions()) langs[lang.str()] = rows.size();
    j["languages"] = langs;
    std::cout << pretty(j);
    return kExitOk;
}

int cmd_mlrs_run(const Globals& g, const std::vector<std::string>& args, const std::string& index_flag,
                 const std::string& queries_flag, const std::vector<std::string>& targets_flag,
                 std::optional<std::size_t> k, const std::string& out_flag) {
    ExperimentConfig c = load_experiment(g);
    override_from_flag(c.run.k_mlrs, k, "run.k_mlrs", "--k");
    if (!targets_flag.empty()) {
        std::vector<std::string> targets;
        for (const std::string& t : targets_flag) {
            for (const std::string& part : split_list(t)) targets.push_back(part);
        }
        override_from_flag(c.run.target_langs, std::optional(targets), "run.target_langs", "--target-lang");
    }
    c.validate();
    Session session("mlrs run", args, c);
    auto embedder = backends::make_embedder(c.profile_for("embedder"));
    auto translator = backends::make_translator(c.profile_for("translator"));
    session.backend("embedder", embedder->identify());
    session.backend("translator", translator->identify());
    const datastore::Index index = open_index(input_path(c, index_flag, c.paths.index, "index"), *embedder, session);
    const std::vector<Query> queries = open_queries(input_path(c, queries_flag, c.paths.queries, "queries"), session);

    std::vector<mlrs::MlrsQueryResult> results;
    std::vector<mlrs::QueryFailure> failures;
    for (const std::string& t : c.run.target_langs) {
        mlrs::RunOptions opts;
        opts.k = c.run.k_mlrs;
        opts.workers = c.effective_workers();
        if (t != "query-lang") opts.target = LanguageCode(t);
        mlrs::MlrsReport r = mlrs::run_mlrs(queries, index, *translator, *embedder, opts);
        std::move(r.results.begin(), r.results.end(), std::back_inserter(results));
        std::move(r.failures.begin(), r.failures.end(), std::back_inserter(failures));
    }
    mlrs::MlrsReport report = mlrs::mlrs_corpus(std::move(results), std::move(failures));
    report.encoder = embedder->identify();
    report.k = c.run.k_mlrs;
    session.output(output_path(c, out_flag, "mlrs_report.json"), pretty(mlrs::to_json(report)));
    for (const mlrs::QueryFailure& f : report.failures) {
        std::cerr << fmt::format("mraglab: excluded[{}]: {}: {}\n", f.stage, f.query_id, f.message);
    }
    spdlog::info("mlrs: {} scored, {} failed, corpus MLRS {:.4f}", report.results.size(), report.failures.size(),
                 report.corpus_score);
    return session.finish(report.failures.empty() ? kExitOk : kExitPartial);
}

std::vector<json> read_reports(const std::vector<std::string>& paths, Session* session) {
    std::vector<json> out;
    for (const std::string& p : paths) {
        if (session) session->input(p);
        try {
            out.push_back(json::parse(read_text_file(p)));
        } catch (const json::parse_error& e) {
            throw ParseError(p + ": " + e.what(), 0);
        }
    }
    return out;
}

int cmd_report(const Globals& g, const std::vector<std::string>& args, const std::string& name,
               const std::vector<std::string>& inputs, const std::string& format, const std::string& out_flag) {
    const report::Format fmt_ = report::parse_format(format);
    if (out_flag.empty()) {
        std::cout << report::emit_report(read_reports(inputs, nullptr), fmt_);
        return kExitOk;
    }
    ExperimentConfig c = load_experiment(g);
    Session session(name, args, c);
    const std::string rendered = report::emit_report(read_reports(inputs, &session), fmt_);
    session.output(output_path(c, out_flag, ""), rendered);
    return session.finish(kExitOk);
}

int cmd_genpref_run(const Globals& g, const std::vector<std::string>& args, const std::string& index_flag,
                    const std::string& queries_flag, const std::string& langs_flag, std::optional<std::size_t> top_docs,
                    const std::string& out_flag) {
    ExperimentConfig c = load_experiment(g);
    if (!langs_flag.empty()) {
        override_from_flag(c.run.answer_langs, std::optional(split_list(langs_flag)), "run.answer_langs", "--langs");
    }
    override_from_flag(c.run.top_docs, top_docs, "run.top_docs", "--top-docs");
    c.validate();
    Session session("genpref run", args, c);
    auto retriever = backends::make_embedder(c.profile_for("embedder"));
    auto similarity = backends::make_embedder(c.profile_for("similarity_embedder"));
    auto generator = backends::make_generator(c.profile_for("generator"));
    session.backend("embedder", retriever->identify());
    session.backend("similarity_embedder", similarity->identify());
    session.backend("generator", generator->identify());
    const datastore::Index index = open_index(input_path(c, index_flag, c.paths.index, "index"), *retriever, session);
    const std::vector<Query> queries = open_queries(input_path(c, queries_flag, c.paths.queries, "queries"), session);

    genpref::GenprefRunOptions opts;
    opts.top_docs = c.run.top_docs;
    opts.langs = to_langs(c.run.answer_langs);
    opts.decode = decode_settings(c, c.run.genpref_max_tokens);
    opts.similarity.max_chars = c.run.similarity_max_chars;
    opts.workers = c.effective_workers();
    const genpref::GenprefReport report =
        genpref::run_genpref(queries, index, *retriever, *generator, *similarity, opts);

    const fs::path out = output_path(c, out_flag, "genpref_report.json");
    session.output(out, pretty(genpref::to_json(report)));
    if (report.preference) {
        fs::path csv = out;
        csv.replace_extension(".csv");
        session.output(csv, genpref::matrix_csv(report.preference->mean_matrix));
    }
    for (const genpref::QueryOutcome& o : report.outcomes) {
        if (!o.similarity) std::cerr << fmt::format("mraglab: excluded[genpref]: {}: {}\n", o.query_id, o.error);
    }
    if (!report.preference) {
        session.finish(kExitFatal);
        throw Error("genpref: no query produced a usable answer set");
    }
    return session.finish(report.failed == 0 ? kExitOk : kExitPartial);
}

int cmd_dkm_run(const Globals& g, const std::vector<std::string>& args, const std::string& strategy_flag,
                const std::string& index_flag, const std::string& queries_flag, std::optional<std::size_t> k_retrieve,
                std::optional<std::size_t> k_use, const std::string& out_flag) {
    ExperimentConfig c = load_experiment(g);
    override_from_flag(c.run.k_retrieve, k_retrieve, "run.k_retrieve", "--k-retrieve");
    override_from_flag(c.run.k_use, k_use, "run.k_use", "--k-use");
    c.validate();
    const dkmrag::Strategy strategy = dkmrag::Strategy::parse(strategy_flag);
    Session session("dkm run", args, c);

    auto retriever = backends::make_embedder(c.profile_for("embedder"));
    std::unique_ptr<backends::Embedder> reranker;
    if (!c.roles.reranker.empty() && c.roles.reranker != c.roles.embedder) {
        reranker = backends::make_embedder(c.profile_for("reranker"));
    }
    std::unique_ptr<backends::Translator> translator;
    if (!c.roles.translator.empty()) {
        translator = backends::make_translator(c.profile_for("translator"));
    } else if (strategy.kind == dkmrag::StrategyKind::all || strategy.kind == dkmrag::StrategyKind::closed_book) {
        translator = std::make_unique<UnavailableTranslator>();
    } else {
        throw ConfigError("strategy '" + strategy.to_string() + "' needs roles.translator");
    }
    auto generator = backends::make_generator(c.profile_for("generator"));
    backends::Embedder& rr = reranker ? *reranker : *retriever;
    session.backend("embedder", retriever->identify());
    session.backend("reranker", rr.identify());
    session.backend("translator", translator->identify());
    session.backend("generator", generator->identify());

    const datastore::Index index = open_index(input_path(c, index_flag, c.paths.index, "index"), *retriever, session);
    const std::vector<Query> queries = open_queries(input_path(c, queries_flag, c.paths.queries, "queries"), session);
    const dkmrag::Backends b{*retriever, rr, *translator, *generator};
    const std::vector<dkmrag::RunTrace> traces = dkmrag::run_queries(queries, index, dkm_config(c), b, strategy);

    session.output(output_path(c, out_flag, trace_file_name(strategy)), dkmrag::traces_jsonl(traces));
    std::size_t failed = 0;
    for (const dkmrag::RunTrace& t : traces) {
        if (t.ok) continue;
        ++failed;
        std::cerr << fmt::format("mraglab: excluded[{}]: {}: {}\n", t.failed_stage, t.query_id, t.error);
    }
    if (failed == traces.size() && !traces.empty()) {
        session.finish(kExitFatal);
        throw Error("dkm: every query failed");
    }
    return session.finish(failed == 0 ? kExitOk : kExitPartial);
}

std::vector<dkmrag::RunTrace> read_traces(const fs::path& path) {
    std::vector<dkmrag::RunTrace> out;
    const std::string data = read_text_file(path);
    std::size_t line_no = 0;
    for (const std::string& line : text::split(data, '\n')) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(dkmrag::trace_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw ParseError(path.string() + ": " + e.what(), line_no);
        }
    }
    return out;
}

int cmd_eval_recall(const Globals& g, const std::vector<std::string>& args, const std::string& traces_flag,
                    const std::string& queries_flag, bool multiset, const std::string& out_flag) {
    ExperimentConfig c = load_experiment(g);
    if (multiset) override_from_flag(c.run.ngram_multiset, std::optional(true), "run.ngram_multiset", "--ngram-multiset");
    c.validate();
    Session session("eval recall", args, c);
    session.input(traces_flag);
    const std::vector<dkmrag::RunTrace> traces = read_traces(traces_flag);
    const std::vector<Query> queries = open_queries(input_path(c, queries_flag, c.paths.queries, "queries"), session);
    eval::RecallOptions opts;
    opts.multiset = c.run.ngram_multiset;
    const report::RecallReport r = report::score_traces(traces, queries, opts);
    if (r.rows.empty()) throw Error("recall: no trace could be scored");
    session.output(output_path(c, out_flag, "recall_report.json"), pretty(report::to_json(r)));
    for (const std::string& id : r.skipped) std::cerr << fmt::format("mraglab: excluded[recall]: {}\n", id);
    std::cout << report::recall_grid(r.rows, report::Format::markdown);
    return session.finish(r.skipped.empty() ? kExitOk : kExitPartial);
}

// Reads one numeric column of a CSV file whose first non-comment line is the
// header. Lines starting with '#' are comments.
std::vector<std::pair<std::string, double>> read_column(const fs::path& path, const std::string& column) {
    const std::string data = read_text_file(path);
    std::vector<std::string> header;
    std::size_t col = 0;
    std::vector<std::pair<std::string, double>> out;
    std::size_t line_no = 0;
    for (const std::string& raw : text::split(data, '\n')) {
        ++line_no;
        const std::string line = text::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells = split_list(line);
        if (header.empty()) {
            header = cells;
            const auto it = std::find(header.begin(), header.end(), column);
            if (it == header.end()) throw ParseError(path.string() + ": no column '" + column + "'", line_no);
            col = static_cast<std::size_t>(it - header.begin());
            continue;
        }
        if (cells.size() != header.size()) throw ParseError(path.string() + ": wrong number of fields", line_no);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(cells[col], &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != cells[col].size()) throw ParseError(path.string() + ": not a number: '" + cells[col] + "'", line_no);
        out.emplace_back(cells[0], v);
    }
    return out;
}

std::pair<fs::path, std::string> column_ref(const std::string& ref, const std::string& table) {
    const std::size_t colon = ref.rfind(':');
    if (colon != std::string::npos) return {ref.substr(0, colon), ref.substr(colon + 1)};
    if (table.empty()) throw ConfigError("column '" + ref + "' needs --table or the form <file>:<column>");
    return {table, ref};
}

int cmd_eval_correlate(const Globals& g, const std::vector<std::string>& args, const std::string& table,
                       const std::string& x_ref, const std::string& y_ref, std::optional<std::uint64_t> n_perm,
                       const std::string& out_flag) {
    ExperimentConfig c = load_experiment(g);
    override_from_flag(c.run.n_perm, n_perm, "run.n_perm", "--n-perm");
    c.validate();
    if (!c.run.seed) throw ConfigError("the permutation test needs a seed; pass --seed or set run.seed");
    Session session("eval correlate", args, c);
    const auto [x_path, x_col] = column_ref(x_ref, table);
    const auto [y_path, y_col] = column_ref(y_ref, table);
    session.input(x_path);
    if (y_path != x_path) session.input(y_path);
    const auto xs_rows = read_column(x_path, x_col);
    const auto ys_rows = read_column(y_path, y_col);
    if (xs_rows.size() != ys_rows.size()) throw PreconditionError("correlate: columns have different lengths");
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < xs_rows.size(); ++i) {
        if (xs_rows[i].first != ys_rows[i].first) {
            throw PreconditionError("correlate: row keys differ ('" + xs_rows[i].first + "' vs '" + ys_rows[i].first + "')");
        }
        xs.push_back(xs_rows[i].second);
        ys.push_back(ys_rows[i].second);
    }
    const eval::CorrelationResult r = eval::correlate(xs, ys, c.run.n_perm, *c.run.seed, c.effective_workers());
    ordered_json j = report::to_json(r, c.run.n_perm, *c.run.seed);
    j["x"] = x_ref;
    j["y"] = y_ref;
    session.output(output_path(c, out_flag, "correlation.json"), pretty(j));
    std::cout << report::correlation_summary(json::parse(j.dump()), report::Format::markdown);
    return session.finish(kExitOk);
}

int cmd_selftest(const Globals& g, const std::vector<std::string>& args, const std::string& data_dir,
                 const std::string& golden_dir, const std::string& out_dir) {
    ExperimentConfig c = g.config_path.empty() ? config::mock_config("lexicon.json") : load_experiment(g);
    if (g.config_path.empty()) {
        config::apply_env(c, config::process_env());
        override_from_flag(c.run.workers, g.workers, "run.workers", "--workers");
    }
    c.validate();
    const synthetic::Dataset data = synthetic::generate();

    std::vector<std::string> problems;
    if (!data_dir.empty()) {
        const fs::path d(data_dir);
        const std::vector<std::pair<std::string, std::string>> expected{
            {"corpus.jsonl", serialize_corpus(data.corpus)},
            {"queries.jsonl", serialize_queries(data.queries)},
            {"lexicon.json", synthetic::serialize_lexicon(data.lexicon)}};
        for (const auto& [name, bytes] : expected) {
            if (read_text_file(d / name) != bytes) problems.push_back(name + " differs from the generator output");
        }
    }

    ExperimentConfig serial = c;
    serial.run.workers = 1;
    ExperimentConfig parallel = c;
    parallel.run.workers = std::max<std::size_t>(2, default_workers());
    const auto first = mock_pipeline(data, serial);
    const auto second = mock_pipeline(data, parallel);
    for (const auto& [name, bytes] : first) {
        if (second.at(name) != bytes) problems.push_back(name + " differs between serial and parallel runs");
    }
    if (!golden_dir.empty()) {
        for (const dkmrag::Strategy& s : golden_strategies()) {
            const std::string name = trace_file_name(s);
            if (read_text_file(fs::path(golden_dir) / name) != first.at(name)) {
                problems.push_back(name + " differs from the golden file");
            }
        }
    }
    if (!problems.empty()) {
        for (const std::string& p : problems) spdlog::error("selftest: {}", p);
        throw Error("selftest failed: " + problems.front() +
                    (problems.size() > 1 ? fmt::format(" (+{} more)", problems.size() - 1) : ""));
    }

    std::vector<manifest::FileDigest> digests;
    for (const auto& [name, bytes] : first) digests.push_back(manifest::digest_bytes(name, bytes));
    if (!out_dir.empty()) {
        Session session("selftest", args, c);
        // The manifest goes beside the first output; write a listing first so
        // it lands under a predictable name.
        std::string listing;
        for (const auto& d : digests) listing += d.sha256 + "  " + d.name + "\n";
        session.output(fs::path(out_dir) / "selftest.sha256", listing);
        for (const auto& [name, bytes] : first) session.output(fs::path(out_dir) / name, bytes);
        session.finish(kExitOk);
    }
    std::cout << fmt::format("selftest ok: {} outputs, digest {}\n", first.size(), manifest::outputs_digest(digests));
    return kExitOk;
}

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const backends::BackendError*>(&e)) return "backend";
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
        dynamic_cast<const datastore::IndexFormatError*>(&e) || dynamic_cast<const DuplicateIdError*>(&e) ||
        dynamic_cast<const UnknownLanguageError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
        return "input";
    }
    if (dynamic_cast<const PreconditionError*>(&e)) return "precondition";
    return "fatal";
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

}  // namespace

std::vector<dkmrag::Strategy> golden_strategies() {
    std::vector<dkmrag::Strategy> out;
    for (const char* s : {"dkm", "all", "single:query-lang", "no-refined", "no-translated", "closed-book"}) {
        out.push_back(dkmrag::Strategy::parse(s));
    }
    return out;
}

std::string trace_file_name(const dkmrag::Strategy& strategy) {
    std::string s = strategy.to_string();
    std::replace(s.begin(), s.end(), ':', '-');
    return "traces_" + s + ".jsonl";
}

std::map<std::string, std::string> mock_pipeline(const synthetic::Dataset& data, const ExperimentConfig& c) {
    const backends::BackendProfile ep = c.profile_for("embedder");
    backends::MockEmbedder embedder(ep.mock_dim, ep.mock_seed, ep.mock_penalty);
    backends::MockTranslator translator(data.lexicon);
    backends::MockGenerator generator;
    const std::size_t workers = c.effective_workers();

    std::map<std::string, std::string> out;
    const datastore::Index index = datastore::build_index(data.corpus, embedder, c.run.batch_size, workers);
    out["index.bin"] = datastore::serialize_index(index);

    const dkmrag::Backends b{embedder, embedder, translator, generator};
    std::vector<dkmrag::RunTrace> all_traces;
    for (const dkmrag::Strategy& s : golden_strategies()) {
        std::vector<dkmrag::RunTrace> traces = dkmrag::run_queries(data.queries, index, dkm_config(c), b, s);
        out[trace_file_name(s)] = dkmrag::traces_jsonl(traces);
        std::move(traces.begin(), traces.end(), std::back_inserter(all_traces));
    }

    mlrs::RunOptions mopts;
    mopts.k = c.run.k_mlrs;
    mopts.workers = workers;
    out["mlrs_report.json"] = pretty(mlrs::to_json(mlrs::run_mlrs(data.queries, index, translator, embedder, mopts)));

    genpref::GenprefRunOptions gopts;
    gopts.top_docs = c.run.top_docs;
    gopts.langs = to_langs(c.run.answer_langs);
    gopts.decode = decode_settings(c, c.run.genpref_max_tokens);
    gopts.similarity.max_chars = c.run.similarity_max_chars;
    gopts.workers = workers;
    out["genpref_report.json"] =
        pretty(genpref::to_json(genpref::run_genpref(data.queries, index, embedder, generator, embedder, gopts)));

    eval::RecallOptions ropts;
    ropts.multiset = c.run.ngram_multiset;
    out["recall_report.json"] = pretty(report::to_json(report::score_traces(all_traces, data.queries, ropts)));
    return out;
}

int run_command(std::vector<std::string> args) {
    CLI::App app{"Multilingual RAG evaluation toolkit", "mraglab"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", MRAGLAB_VERSION);
    Globals g;
    app.add_option("--config", g.config_path, "Experiment configuration (JSON)");
    app.add_option("--workers", g.workers, "Worker threads (default: logical CPUs)");
    app.add_option("--seed", g.seed, "Seed for stochastic settings");
    app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off");

    std::string out;
    std::string index_path;
    std::string queries_path;
    std::function<int()> action;

    // index
    auto* index_cmd = app.add_subcommand("index", "Build or inspect an embedding index");
    index_cmd->require_subcommand(1);
    std::string corpus_path;
    std::optional<std::size_t> batch_size;
    auto* index_build = index_cmd->add_subcommand("build", "Embed a corpus and write an index file");
    index_build->add_option("--corpus", corpus_path, "Corpus JSONL");
    index_build->add_option("--out", out, "Index file");
    index_build->add_option("--batch-size", batch_size, "Texts per embedding request");
    index_build->callback([&] { action = [&] { return cmd_index_build(g, args, corpus_path, out, batch_size); }; });
    auto* index_info = index_cmd->add_subcommand("info", "Print an index header");
    index_info->add_option("--index", index_path, "Index file")->required();
    index_info->callback([&] { action = [&] { return cmd_index_info(index_path); }; });

    // mlrs
    auto* mlrs_cmd = app.add_subcommand("mlrs", "MultiLingualRankShift");
    mlrs_cmd->require_subcommand(1);
    std::vector<std::string> targets;
    std::optional<std::size_t> k;
    auto* mlrs_run = mlrs_cmd->add_subcommand("run", "Score a query set");
    mlrs_run->add_option("--index", index_path, "Index file");
    mlrs_run->add_option("--queries", queries_path, "Query JSONL");
    mlrs_run->add_option("--target-lang", targets, "Translation target: a language code or query-lang");
    mlrs_run->add_option("--k", k, "Initial retrieval depth");
    mlrs_run->add_option("--out", out, "Report JSON");
    mlrs_run->callback([&] {
        action = [&] { return cmd_mlrs_run(g, args, index_path, queries_path, targets, k, out); };
    });
    std::vector<std::string> inputs;
    std::string format = "markdown";
    auto* mlrs_table = mlrs_cmd->add_subcommand("table", "Render MLRS reports as a language grid");
    mlrs_table->add_option("--in", inputs, "MLRS report JSON files")->required();
    mlrs_table->add_option("--format", format, "markdown, csv or json");
    mlrs_table->add_option("--out", out, "Output file (default: stdout)");
    mlrs_table->callback([&] { action = [&] { return cmd_report(g, args, "mlrs table", inputs, format, out); }; });

    // genpref
    auto* genpref_cmd = app.add_subcommand("genpref", "Generator language preference");
    genpref_cmd->require_subcommand(1);
    std::string langs;
    std::optional<std::size_t> top_docs;
    auto* genpref_run = genpref_cmd->add_subcommand("run", "Answer in several languages and compare");
    genpref_run->add_option("--index", index_path, "Index file");
    genpref_run->add_option("--queries", queries_path, "Query JSONL");
    genpref_run->add_option("--langs", langs, "Comma-separated answer languages");
    genpref_run->add_option("--top-docs", top_docs, "Passages shown to the generator");
    genpref_run->add_option("--out", out, "Report JSON; the mean matrix goes to the same name with .csv");
    genpref_run->callback([&] {
        action = [&] { return cmd_genpref_run(g, args, index_path, queries_path, langs, top_docs, out); };
    });

    // dkm
    auto* dkm_cmd = app.add_subcommand("dkm", "Dual knowledge multilingual RAG");
    dkm_cmd->require_subcommand(1);
    std::string strategy;
    std::optional<std::size_t> k_retrieve;
    std::optional<std::size_t> k_use;
    auto* dkm_run = dkm_cmd->add_subcommand("run", "Answer a query set and write traces");
    dkm_run->add_option("--strategy", strategy,
                        "dkm, all, single:<lang>, single:query-lang, no-refined, no-translated or closed-book")
        ->required();
    dkm_run->add_option("--index", index_path, "Index file");
    dkm_run->add_option("--queries", queries_path, "Query JSONL");
    dkm_run->add_option("--k-retrieve", k_retrieve, "Initial retrieval depth");
    dkm_run->add_option("--k-use", k_use, "Passages kept after re-ranking");
    dkm_run->add_option("--out", out, "Trace JSONL");
    dkm_run->callback([&] {
        action = [&] { return cmd_dkm_run(g, args, strategy, index_path, queries_path, k_retrieve, k_use, out); };
    });

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Answer quality and correlation statistics");
    eval_cmd->require_subcommand(1);
    std::string traces_path;
    bool multiset = false;
    auto* eval_recall = eval_cmd->add_subcommand("recall", "Character 3-gram recall of traced answers");
    eval_recall->add_option("--traces", traces_path, "Trace JSONL")->required();
    eval_recall->add_option("--queries", queries_path, "Query JSONL with gold answers");
    eval_recall->add_flag("--ngram-multiset", multiset, "Count repeated grams");
    eval_recall->add_option("--out", out, "Recall report JSON");
    eval_recall->callback([&] {
        action = [&] { return cmd_eval_recall(g, args, traces_path, queries_path, multiset, out); };
    });
    std::string table;
    std::string x_ref;
    std::string y_ref;
    std::optional<std::uint64_t> n_perm;
    auto* eval_corr = eval_cmd->add_subcommand("correlate", "Pearson and Spearman with permutation p-values");
    eval_corr->add_option("--table", table, "CSV file holding both columns");
    eval_corr->add_option("--x", x_ref, "Column name or <file>:<column>")->required();
    eval_corr->add_option("--y", y_ref, "Column name or <file>:<column>")->required();
    eval_corr->add_option("--n-perm", n_perm, "Permutations (>= 1000)");
    eval_corr->add_option("--out", out, "Correlation JSON");
    eval_corr->callback([&] {
        action = [&] { return cmd_eval_correlate(g, args, table, x_ref, y_ref, n_perm, out); };
    });

    // report
    auto* report_cmd = app.add_subcommand("report", "Render report JSON files as tables");
    report_cmd->add_option("--in", inputs, "Report JSON files")->required();
    report_cmd->add_option("--format", format, "markdown, csv or json");
    report_cmd->add_option("--out", out, "Output file (default: stdout)");
    report_cmd->callback([&] { action = [&] { return cmd_report(g, args, "report", inputs, format, out); }; });

    // selftest
    std::string data_dir;
    std::string golden_dir;
    std::string out_dir;
    auto* selftest_cmd = app.add_subcommand("selftest", "Run the mock pipeline twice and compare outputs");
    selftest_cmd->add_option("--data-dir", data_dir, "Check the committed synthetic data set");
    selftest_cmd->add_option("--golden-dir", golden_dir, "Check the committed golden traces");
    selftest_cmd->add_option("--out-dir", out_dir, "Also write the outputs here");
    selftest_cmd->callback([&] { action = [&] { return cmd_selftest(g, args, data_dir, golden_dir, out_dir); }; });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "mraglab: error[usage]: " << one_line(e.what()) << "\n";
        return kExitFatal;
    }

    try {
        setup_logging(g.log_level);
        return action ? action() : kExitFatal;
    } catch (const std::exception& e) {
        std::cerr << "mraglab: error[" << error_kind(e) << "]: " << one_line(e.what()) << "\n";
        return kExitFatal;
    }
}

}  // namespace mraglab::cli
