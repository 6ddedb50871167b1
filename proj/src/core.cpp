#include "mraglab/core.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "mraglab/text.hpp"

namespace mraglab {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

LanguageCode::LanguageCode(std::string_view code) {
    if (code.size() != 2 || code[0] < 'a' || code[0] > 'z' || code[1] < 'a' || code[1] > 'z') {
        throw UnknownLanguageError(std::string(code));
    }
    code_ = std::string(code);
}

const std::vector<LanguageCode>& default_languages() {
    static const std::vector<LanguageCode> langs = [] {
        std::vector<LanguageCode> out;
        for (const char* c : {"en", "ko", "ar", "zh", "fi", "fr", "de", "ja", "it", "pt", "ru", "es", "th"}) {
            out.emplace_back(c);
        }
        return out;
    }();
    return langs;
}

std::string language_name(const LanguageCode& lang) {
    static const std::map<std::string, std::string> names = {
        {"en", "English"}, {"ko", "Korean"},   {"ar", "Arabic"},  {"zh", "Chinese"},
        {"fi", "Finnish"}, {"fr", "French"},   {"de", "German"},  {"ja", "Japanese"},
        {"it", "Italian"}, {"pt", "Portuguese"}, {"ru", "Russian"}, {"es", "Spanish"},
        {"th", "Thai"},
    };
    const auto it = names.find(lang.str());
    return it == names.end() ? lang.str() : it->second;
}

LanguageSet::LanguageSet() : langs_(default_languages().begin(), default_languages().end()) {}

LanguageSet::LanguageSet(const std::vector<LanguageCode>& langs) : langs_(langs.begin(), langs.end()) {}

LanguageCode LanguageSet::parse(std::string_view code) const {
    LanguageCode lang(code);
    if (!contains(lang)) throw UnknownLanguageError(std::string(code));
    return lang;
}

void validate_ranked_list(const RankedList& list) {
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < list.items.size(); ++i) {
        const RankedItem& item = list.items[i];
        if (item.rank != static_cast<int>(i) + 1) {
            throw Error("ranked list '" + list.query_id + "': rank gap at position " + std::to_string(i + 1));
        }
        if (!seen.insert(item.doc_id).second) {
            throw DuplicateIdError(item.doc_id);
        }
        if (i > 0) {
            const RankedItem& prev = list.items[i - 1];
            if (!ranks_before(prev.score, prev.doc_id, item.score, item.doc_id)) {
                throw Error("ranked list '" + list.query_id + "': order violated at rank " +
                            std::to_string(item.rank));
            }
        }
    }
}

namespace {

template <typename Fn>
void for_each_jsonl_record(std::string_view jsonl, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < jsonl.size()) {
        std::size_t end = jsonl.find('\n', start);
        if (end == std::string_view::npos) end = jsonl.size();
        std::string_view line = jsonl.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        if (!record.is_object()) throw ParseError("record is not a JSON object", line_no);
        fn(record, line_no);
    }
}

std::string required_string(const json& record, const char* field, std::size_t line_no) {
    const auto it = record.find(field);
    if (it == record.end() || !it->is_string()) {
        throw ParseError(std::string("missing or non-string field '") + field + "'", line_no);
    }
    return it->get<std::string>();
}

std::string normalized_text(const json& record, const char* field, std::size_t line_no) {
    std::string raw = required_string(record, field, line_no);
    std::string normalized;
    try {
        normalized = text::nfc(raw);
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("field '") + field + "': " + e.what(), line_no);
    }
    if (text::trim(normalized).empty()) {
        throw ParseError(std::string("field '") + field + "' is empty", line_no);
    }
    return normalized;
}

LanguageCode parse_lang(const json& record, const LanguageSet& langs, std::size_t line_no) {
    const std::string code = required_string(record, "lang", line_no);
    try {
        return langs.parse(code);
    } catch (const UnknownLanguageError&) {
        throw UnknownLanguageError(code);
    }
}

}  // namespace

std::vector<Document> parse_corpus(std::string_view jsonl, const LanguageSet& langs) {
    std::vector<Document> docs;
    std::unordered_set<std::string> ids;
    for_each_jsonl_record(jsonl, [&](const json& record, std::size_t line_no) {
        Document doc;
        doc.id = required_string(record, "id", line_no);
        doc.lang = parse_lang(record, langs, line_no);
        doc.text = normalized_text(record, "text", line_no);
        if (!ids.insert(doc.id).second) throw DuplicateIdError(doc.id);
        docs.push_back(std::move(doc));
    });
    return docs;
}

std::vector<Query> parse_queries(std::string_view jsonl, const LanguageSet& langs) {
    std::vector<Query> queries;
    std::unordered_set<std::string> ids;
    for_each_jsonl_record(jsonl, [&](const json& record, std::size_t line_no) {
        Query q;
        q.id = required_string(record, "id", line_no);
        q.lang = parse_lang(record, langs, line_no);
        q.text = normalized_text(record, "text", line_no);
        if (const auto it = record.find("gold_answers"); it != record.end() && !it->is_null()) {
            if (!it->is_array()) throw ParseError("'gold_answers' must be an array", line_no);
            for (const auto& g : *it) {
                if (!g.is_string()) throw ParseError("'gold_answers' entries must be strings", line_no);
                q.gold_answers.push_back(text::nfc(g.get<std::string>()));
            }
        }
        if (!ids.insert(q.id).second) throw DuplicateIdError(q.id);
        queries.push_back(std::move(q));
    });
    return queries;
}

std::vector<Document> load_corpus(const std::filesystem::path& path, const LanguageSet& langs) {
    return parse_corpus(read_text_file(path), langs);
}

std::vector<Query> load_queries(const std::filesystem::path& path, const LanguageSet& langs) {
    return parse_queries(read_text_file(path), langs);
}

std::string serialize_corpus(const std::vector<Document>& docs) {
    std::string out;
    for (const Document& d : docs) {
        ordered_json j;
        j["id"] = d.id;
        j["lang"] = d.lang.str();
        j["text"] = d.text;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string serialize_queries(const std::vector<Query>& queries) {
    std::string out;
    for (const Query& q : queries) {
        ordered_json j;
        j["id"] = q.id;
        j["lang"] = q.lang.str();
        j["text"] = q.text;
        j["gold_answers"] = q.gold_answers;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file '" + path.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace mraglab
