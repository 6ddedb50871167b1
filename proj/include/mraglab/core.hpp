#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mraglab {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input file is malformed. `line` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateIdError : public Error {
public:
    explicit DuplicateIdError(const std::string& id)
        : Error("duplicate id '" + id + "'"), id_(id) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class UnknownLanguageError : public Error {
public:
    explicit UnknownLanguageError(const std::string& code)
        : Error("unknown language code '" + code + "'"), code_(code) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// A file could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// A caller violated an operation's precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Two-letter lowercase ISO-639-1 tag. Membership in the supported set is
/// checked at load time, not here.
class LanguageCode {
public:
    LanguageCode() = default;
    explicit LanguageCode(std::string_view code);

    const std::string& str() const noexcept { return code_; }
    auto operator<=>(const LanguageCode&) const = default;

private:
    std::string code_{"en"};
};

/// The thirteen languages used by the MKQA experiments.
const std::vector<LanguageCode>& default_languages();

/// English display name for the language ("Korean" for ko); the code itself
/// when unknown.
std::string language_name(const LanguageCode& lang);

/// Set of languages accepted by loaders.
class LanguageSet {
public:
    LanguageSet();
    explicit LanguageSet(const std::vector<LanguageCode>& langs);

    bool contains(const LanguageCode& lang) const { return langs_.count(lang) > 0; }
    /// Parses and validates a code against the set.
    LanguageCode parse(std::string_view code) const;
    std::vector<LanguageCode> to_vector() const { return {langs_.begin(), langs_.end()}; }

private:
    std::set<LanguageCode> langs_;
};

struct Document {
    std::string id;
    LanguageCode lang;
    std::string text;
};

struct Query {
    std::string id;
    LanguageCode lang;
    std::string text;
    std::vector<std::string> gold_answers;
};

struct RankedItem {
    std::string doc_id;
    double score = 0.0;
    int rank = 0;
};

struct RankedList {
    std::string query_id;
    std::vector<RankedItem> items;
};

/// Ordering used everywhere ranks are assigned: higher score first, then the
/// lexicographically smaller id.
inline bool ranks_before(double score_a, std::string_view id_a, double score_b,
                         std::string_view id_b) {
    if (score_a != score_b) return score_a > score_b;
    return id_a < id_b;
}

/// Checks the RankedList invariants (ranks 1..k, non-increasing scores,
/// tie-break order, unique ids). Throws Error on violation.
void validate_ranked_list(const RankedList& list);

std::vector<Document> load_corpus(const std::filesystem::path& path,
                                  const LanguageSet& langs = LanguageSet());
std::vector<Query> load_queries(const std::filesystem::path& path,
                                const LanguageSet& langs = LanguageSet());

/// Parses JSONL text held in memory; the loaders delegate here.
std::vector<Document> parse_corpus(std::string_view jsonl, const LanguageSet& langs = LanguageSet());
std::vector<Query> parse_queries(std::string_view jsonl, const LanguageSet& langs = LanguageSet());

std::string serialize_corpus(const std::vector<Document>& docs);
std::string serialize_queries(const std::vector<Query>& queries);

void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mraglab
