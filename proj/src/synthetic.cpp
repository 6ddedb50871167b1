#include "mraglab/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "mraglab/hashing.hpp"
#include "mraglab/text.hpp"

namespace mraglab::synthetic {

namespace {

// Counter-based generator; unlike the <random> distributions its output does
// not depend on the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {}
    std::uint64_t next() { return splitmix64(seed_ ^ splitmix64(counter_++)); }
    std::size_t below(std::size_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next();
        while (x >= limit) x = next();
        return static_cast<std::size_t>(x % n);
    }
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

struct Alphabet {
    std::vector<std::string> consonants;
    std::vector<std::string> vowels;
};

const Alphabet& latin_alphabet(const std::string& lang) {
    static const Alphabet en{{"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z"},
                             {"a", "e", "i", "o", "u", "y"}};
    static const Alphabet fr{{"b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "ch"},
                             {"a", "e", "i", "o", "u", "é", "è", "ou", "ai", "eau"}};
    static const Alphabet es{{"b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "ñ", "ll"},
                             {"a", "e", "i", "o", "u", "á", "í", "ó", "ue", "ie"}};
    if (lang == "fr") return fr;
    if (lang == "es") return es;
    return en;
}

std::string make_word(const LanguageCode& lang, Rng& rng) {
    std::string out;
    if (lang.str() == "ko") {
        const std::size_t n = 2 + rng.below(2);
        for (std::size_t i = 0; i < n; ++i) out += text::to_utf8(std::u32string(1, static_cast<char32_t>(0xAC00 + rng.below(11172))));
        return out;
    }
    if (lang.str() == "zh" || lang.str() == "ja") {
        for (int i = 0; i < 2; ++i) out += text::to_utf8(std::u32string(1, static_cast<char32_t>(0x4E00 + rng.below(3000))));
        return out;
    }
    const Alphabet& a = latin_alphabet(lang.str());
    const std::size_t n = 2 + rng.below(2);
    for (std::size_t i = 0; i < n; ++i) {
        out += a.consonants[rng.below(a.consonants.size())];
        out += a.vowels[rng.below(a.vowels.size())];
    }
    return out;
}

std::vector<std::size_t> pick(std::size_t n, std::size_t count, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx);
    idx.resize(std::min(count, n));
    return idx;
}

}  // namespace

Dataset generate(const Options& options) {
    std::vector<LanguageCode> langs = options.langs;
    if (langs.empty()) {
        for (const char* c : {"en", "ko", "zh", "fr", "es"}) langs.emplace_back(c);
    }
    if (options.topics == 0 || options.concepts_per_topic < 5 || options.filler_concepts < 4) {
        throw PreconditionError("synthetic: too few topics or concepts");
    }
    Rng rng(options.seed);

    const std::size_t n_concepts = options.topics * options.concepts_per_topic + options.filler_concepts;
    // words[lang][concept]
    std::vector<std::vector<std::string>> words(langs.size());
    for (std::size_t l = 0; l < langs.size(); ++l) {
        std::set<std::string> seen;
        for (std::size_t c = 0; c < n_concepts; ++c) {
            std::string w = make_word(langs[l], rng);
            while (!seen.insert(w).second) w = make_word(langs[l], rng);
            words[l].push_back(std::move(w));
        }
    }
    const auto topic_concept = [&](std::size_t t, std::size_t i) { return t * options.concepts_per_topic + i; };
    const auto filler = [&](std::size_t i) { return options.topics * options.concepts_per_topic + i; };

    std::vector<std::string> entities;
    {
        std::set<std::string> seen;
        const LanguageCode en("en");
        while (entities.size() < options.topics) {
            std::string name = make_word(en, rng);
            name[0] = static_cast<char>(name[0] - 'a' + 'A');
            if (seen.insert(name).second) entities.push_back(name);
        }
    }

    Dataset data;
    for (std::size_t t = 0; t < options.topics; ++t) {
        const std::string year = std::to_string(1500 + rng.below(500));
        for (std::size_t l = 0; l < langs.size(); ++l) {
            std::vector<std::string> tokens;
            for (std::size_t i : pick(options.concepts_per_topic, 6, rng)) tokens.push_back(words[l][topic_concept(t, i)]);
            for (std::size_t i : pick(options.filler_concepts - 1, 3, rng)) tokens.push_back(words[l][filler(i + 1)]);
            tokens.push_back(entities[t]);
            tokens.push_back(year);
            rng.shuffle(tokens);
            char id[32];
            std::snprintf(id, sizeof id, "d-%s-%02zu", langs[l].str().c_str(), t);
            data.corpus.push_back({id, langs[l], text::join(tokens, " ")});
        }
    }

    for (std::size_t q = 0; q < options.queries; ++q) {
        const std::size_t l = q % langs.size();
        const std::size_t t = q % options.topics;
        std::vector<std::string> tokens{words[l][filler(0)]};
        for (std::size_t i : pick(options.concepts_per_topic, 4, rng)) tokens.push_back(words[l][topic_concept(t, i)]);
        char id[16];
        std::snprintf(id, sizeof id, "q%02zu", q + 1);
        data.queries.push_back({id, langs[l], text::join(tokens, " ") + "?", {entities[t]}});
    }

    for (std::size_t s = 0; s < langs.size(); ++s) {
        for (std::size_t d = 0; d < langs.size(); ++d) {
            if (s == d) continue;
            auto& table = data.lexicon[langs[s].str() + ">" + langs[d].str()];
            for (std::size_t c = 0; c < n_concepts; ++c) table[words[s][c]] = words[d][c];
        }
    }
    return data;
}

std::string serialize_lexicon(const backends::Lexicon& lexicon) {
    const nlohmann::json j = lexicon;
    return j.dump(1) + "\n";
}

}  // namespace mraglab::synthetic
