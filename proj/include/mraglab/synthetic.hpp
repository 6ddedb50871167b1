#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mraglab/backends.hpp"
#include "mraglab/core.hpp"

namespace mraglab::synthetic {

/// A small multilingual corpus built from pseudo-words. Every language spells
/// each concept with its own script, so same-topic documents in different
/// languages share few character 3-grams until a lexicon translation maps
/// them onto the query's language.
struct Dataset {
    std::vector<Document> corpus;
    std::vector<Query> queries;
    backends::Lexicon lexicon;
};

struct Options {
    std::uint64_t seed = 20240917;
    std::vector<LanguageCode> langs;  // en, ko, zh, fr, es when empty
    std::size_t topics = 8;
    std::size_t concepts_per_topic = 8;
    std::size_t filler_concepts = 24;
    std::size_t queries = 6;
};

Dataset generate(const Options& options = {});

/// Lexicon as JSON text, keys sorted, one pair table per "src>tgt".
std::string serialize_lexicon(const backends::Lexicon& lexicon);

}  // namespace mraglab::synthetic
