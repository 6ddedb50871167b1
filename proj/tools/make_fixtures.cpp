// Regenerates the synthetic data set and the golden traces under tests/.
//
//   make_fixtures <repo root>

#include <filesystem>
#include <iostream>

#include "mraglab/cli.hpp"
#include "mraglab/config.hpp"
#include "mraglab/synthetic.hpp"

namespace fs = std::filesystem;
using namespace mraglab;

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_fixtures <repo root>\n";
        return 1;
    }
    const fs::path root(argv[1]);
    const fs::path data_dir = root / "tests" / "data" / "synthetic";
    const fs::path golden_dir = root / "tests" / "golden";
    const fs::path scratch = fs::temp_directory_path() / "mraglab_fixtures";
    fs::create_directories(golden_dir);
    fs::create_directories(scratch);

    const synthetic::Dataset data = synthetic::generate();
    write_text_file(data_dir / "corpus.jsonl", serialize_corpus(data.corpus));
    write_text_file(data_dir / "queries.jsonl", serialize_queries(data.queries));
    write_text_file(data_dir / "lexicon.json", synthetic::serialize_lexicon(data.lexicon));
    config::ExperimentConfig cfg = config::mock_config("lexicon.json");
    cfg.paths.corpus = "corpus.jsonl";
    cfg.paths.queries = "queries.jsonl";
    write_text_file(data_dir / "config.json", config::to_json(cfg).dump(2) + "\n");

    const std::string config_path = (data_dir / "config.json").string();
    const std::string index_path = (scratch / "index.bin").string();
    if (cli::run_command({"--config", config_path, "--log-level", "warn", "index", "build", "--out", index_path}) != 0) {
        return 1;
    }
    for (const dkmrag::Strategy& s : cli::golden_strategies()) {
        const std::string name = cli::trace_file_name(s);
        const fs::path out = scratch / name;
        if (cli::run_command({"--config", config_path, "--log-level", "warn", "dkm", "run", "--strategy",
                              s.to_string(), "--index", index_path, "--out", out.string()}) != 0) {
            return 1;
        }
        fs::copy_file(out, golden_dir / name, fs::copy_options::overwrite_existing);
        std::cout << "wrote " << (golden_dir / name).string() << "\n";
    }
    return 0;
}
