#include "mraglab/backends.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "mraglab/hashing.hpp"
#include "mraglab/http_backends.hpp"
#include "mraglab/text.hpp"

namespace mraglab::backends {

std::string_view to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::embedder: return "embedder";
        case BackendKind::translator: return "translator";
        case BackendKind::generator: return "generator";
    }
    return "?";
}

std::string_view to_string(EmbedRole role) {
    return role == EmbedRole::query ? "query" : "passage";
}

std::string_view to_string(ChatMessage::Role role) {
    return role == ChatMessage::Role::system ? "system" : "user";
}

BackendKind parse_backend_kind(std::string_view s) {
    if (s == "embedder") return BackendKind::embedder;
    if (s == "translator") return BackendKind::translator;
    if (s == "generator") return BackendKind::generator;
    throw Error("unknown backend kind '" + std::string(s) + "'");
}

std::string token_env_var(std::string_view profile_name) {
    std::string out = "MRAG_LAB_TOKEN_";
    for (char c : profile_name) {
        const auto u = static_cast<unsigned char>(c);
        out.push_back(std::isalnum(u) ? static_cast<char>(std::toupper(u)) : '_');
    }
    return out;
}

std::vector<Vector> Embedder::embed(std::span<const std::string> texts, EmbedRole role) {
    if (texts.empty()) throw PreconditionError("embed: empty batch");
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) throw PreconditionError("embed: text " + std::to_string(i) + " is empty");
    }
    std::vector<Vector> out = do_embed(texts, role);
    if (out.size() != texts.size()) {
        throw ProtocolError("embed: expected " + std::to_string(texts.size()) + " vectors, got " +
                            std::to_string(out.size()));
    }
    const std::size_t dim = out.front().size();
    if (dim == 0) throw ProtocolError("embed: zero-dimensional vector");
    for (const Vector& v : out) {
        if (v.size() != dim) throw ProtocolError("embed: inconsistent vector dimensions in one response");
    }
    return out;
}

Translation Translator::translate(std::span<const std::string> texts, const LanguageCode& src,
                                  const LanguageCode& tgt) {
    if (src == tgt) {
        throw PreconditionError("translate: source and target are both '" + src.str() + "'");
    }
    Translation result;
    if (texts.empty()) return result;
    calls_.fetch_add(1);
    result.texts = do_translate(texts, src, tgt);
    if (result.texts.size() != texts.size()) {
        throw ProtocolError("translate: expected " + std::to_string(texts.size()) + " outputs, got " +
                            std::to_string(result.texts.size()));
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (text::trim(result.texts[i]).empty()) {
            spdlog::warn("translate {}->{}: empty output for item {}, passing input through", src.str(),
                         tgt.str(), i);
            result.texts[i] = texts[i];
            result.passthrough.push_back(i);
        }
    }
    return result;
}

std::string Generator::generate(const std::vector<ChatMessage>& messages, const DecodeSettings& decode) {
    const bool has_user = std::any_of(messages.begin(), messages.end(),
                                      [](const ChatMessage& m) { return m.role == ChatMessage::Role::user; });
    if (!has_user) throw PreconditionError("generate: no user message");
    std::string out = do_generate(messages, decode);
    if (out.empty()) throw BackendError("generate: empty completion from " + identify());
    return out;
}

// --- mocks -----------------------------------------------------------------

namespace {

constexpr std::string_view kMarkerOpen = "⟦";
constexpr std::string_view kMarkerClose = "⟧";
constexpr std::string_view kArrow = "→";

std::string marker(const LanguageCode& src, const LanguageCode& tgt) {
    std::string m(kMarkerOpen);
    m += src.str();
    m += kArrow;
    m += tgt.str();
    m += kMarkerClose;
    return m;
}

}  // namespace

std::pair<std::string, int> strip_translation_markers(std::string_view text) {
    std::string out;
    int count = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t open = text.find(kMarkerOpen, pos);
        if (open == std::string_view::npos) break;
        const std::size_t close = text.find(kMarkerClose, open + kMarkerOpen.size());
        if (close == std::string_view::npos) break;
        out.append(text.substr(pos, open - pos));
        pos = close + kMarkerClose.size();
        ++count;
    }
    out.append(text.substr(pos));
    return {out, count};
}

MockEmbedder::MockEmbedder(int dim, std::uint64_t seed, double penalty)
    : dim_(dim), seed_(seed), penalty_(penalty) {
    if (dim_ < 2) throw PreconditionError("mock embedder: dim must be >= 2");
    if (penalty_ < 0.0 || penalty_ > 1.0) throw PreconditionError("mock embedder: penalty must be in [0,1]");
}

std::string MockEmbedder::identify() const {
    if (penalty_ == 0.0) return "mock-3gram/dim=" + std::to_string(dim_) + "/seed=" + std::to_string(seed_);
    nlohmann::json p = penalty_;
    return "mock-3gram/dim=" + std::to_string(dim_) + "/seed=" + std::to_string(seed_) + "/penalty=" + p.dump();
}

std::vector<Vector> MockEmbedder::do_embed(std::span<const std::string> texts, EmbedRole) {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const std::string& t : texts) out.push_back(embed_one(t));
    return out;
}

Vector MockEmbedder::embed_one(std::string_view raw) const {
    const auto [stripped, markers] = strip_translation_markers(raw);
    const std::u32string cps = text::to_codepoints(stripped);
    const std::uint64_t salt = splitmix64(seed_);
    const auto buckets = static_cast<std::uint64_t>(dim_ - 1);

    std::vector<double> acc(static_cast<std::size_t>(dim_), 0.0);
    auto add_gram = [&](std::u32string_view gram) {
        const std::uint64_t h = splitmix64(fnv1a64(text::to_utf8(gram)) ^ salt);
        acc[1 + static_cast<std::size_t>(h % buckets)] += 1.0;
    };
    if (cps.size() < 3) {
        add_gram(cps);
    } else {
        for (std::size_t i = 0; i + 3 <= cps.size(); ++i) add_gram(std::u32string_view(cps).substr(i, 3));
    }

    double norm = 0.0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        // Marker-only text: nothing left to hash.
        acc[0] = 1.0;
        norm = 1.0;
    }
    const double keep = penalty_ > 0.0 ? std::pow(1.0 - penalty_, markers) : 1.0;
    Vector v(static_cast<std::size_t>(dim_));
    for (std::size_t i = 0; i < acc.size(); ++i) v[i] = static_cast<float>(keep * acc[i] / norm);
    if (keep < 1.0) v[0] += static_cast<float>(std::sqrt(std::max(0.0, 1.0 - keep * keep)));
    return v;
}

Lexicon load_lexicon(const std::string& path) {
    const nlohmann::json j = nlohmann::json::parse(read_text_file(path));
    Lexicon lex;
    for (const auto& [pair, table] : j.items()) {
        for (const auto& [from, to] : table.items()) lex[pair][from] = to.get<std::string>();
    }
    return lex;
}

std::string MockTranslator::identify() const {
    return lexicon_.empty() ? "mock-marker" : "mock-marker+lexicon/" + std::to_string(lexicon_.size());
}

std::vector<std::string> MockTranslator::do_translate(std::span<const std::string> texts,
                                                      const LanguageCode& src, const LanguageCode& tgt) {
    const auto table_it = lexicon_.find(src.str() + ">" + tgt.str());
    std::vector<std::string> out;
    out.reserve(texts.size());
    for (const std::string& t : texts) {
        std::string body;
        if (table_it == lexicon_.end()) {
            body = t;
        } else {
            std::vector<std::string> tokens = text::split(t, ' ');
            for (std::string& tok : tokens) {
                if (const auto w = table_it->second.find(tok); w != table_it->second.end()) tok = w->second;
            }
            body = text::join(tokens, " ");
        }
        out.push_back(marker(src, tgt) + body);
    }
    return out;
}

std::string MockGenerator::do_generate(const std::vector<ChatMessage>& messages, const DecodeSettings&) {
    const ChatMessage* last_user = nullptr;
    for (const ChatMessage& m : messages) {
        if (m.role == ChatMessage::Role::user) last_user = &m;
    }
    const std::u32string cps = text::to_codepoints(last_user->content);
    const std::size_t take = std::min<std::size_t>(64, cps.size());
    const std::string echo = text::to_utf8(std::u32string_view(cps).substr(cps.size() - take));

    static constexpr std::string_view kKeysRule = "The JSON object must contain exactly these keys: ";
    for (const ChatMessage& m : messages) {
        if (m.role != ChatMessage::Role::system) continue;
        const std::size_t at = m.content.find(kKeysRule);
        if (at == std::string::npos) continue;
        const std::size_t start = at + kKeysRule.size();
        const std::size_t end = m.content.find('.', start);
        nlohmann::ordered_json answer = nlohmann::ordered_json::object();
        for (std::string key : text::split(m.content.substr(start, end - start), ',')) {
            key = text::trim(key);
            if (!key.empty()) answer[key] = std::string(kMarkerOpen) + "gen" + std::string(kArrow) + key +
                                             std::string(kMarkerClose) + echo;
        }
        return answer.dump();
    }
    return echo;
}

// --- factories -------------------------------------------------------------

namespace {

void require_kind(const BackendProfile& p, BackendKind kind) {
    if (p.kind != kind) {
        throw Error("profile '" + p.name + "' is a " + std::string(to_string(p.kind)) + ", expected " +
                    std::string(to_string(kind)));
    }
}

}  // namespace

std::unique_ptr<Embedder> make_embedder(const BackendProfile& profile) {
    require_kind(profile, BackendKind::embedder);
    if (profile.backend == "mock") {
        return std::make_unique<MockEmbedder>(profile.mock_dim, profile.mock_seed, profile.mock_penalty);
    }
    if (profile.backend == "http") return std::make_unique<HttpEmbedder>(profile);
    throw Error("profile '" + profile.name + "': backend '" + profile.backend + "' cannot embed");
}

std::unique_ptr<Translator> make_translator(const BackendProfile& profile) {
    require_kind(profile, BackendKind::translator);
    if (profile.backend == "mock") {
        if (profile.mock_lexicon.empty()) return std::make_unique<MockTranslator>();
        return std::make_unique<MockTranslator>(load_lexicon(profile.mock_lexicon));
    }
    if (profile.backend == "http") return std::make_unique<HttpTranslator>(profile);
    throw Error("profile '" + profile.name + "': backend '" + profile.backend + "' cannot translate");
}

std::unique_ptr<Generator> make_generator(const BackendProfile& profile) {
    require_kind(profile, BackendKind::generator);
    if (profile.backend == "mock") return std::make_unique<MockGenerator>();
    if (profile.backend == "http") return std::make_unique<HttpGenerator>(profile);
    if (profile.backend == "openai") return std::make_unique<OpenAiChatGenerator>(profile);
    throw Error("profile '" + profile.name + "': unknown backend '" + profile.backend + "'");
}

}  // namespace mraglab::backends
