#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mraglab/core.hpp"

namespace mraglab::backends {

enum class BackendKind { embedder, translator, generator };
enum class EmbedRole { query, passage };

std::string_view to_string(BackendKind kind);
std::string_view to_string(EmbedRole role);
BackendKind parse_backend_kind(std::string_view s);

/// Connection settings for one model service. `backend` selects the adapter:
/// "http" (neutral JSON protocol), "openai" (chat-completions, generators
/// only) or "mock" (in-process, deterministic).
struct BackendProfile {
    std::string name;
    BackendKind kind = BackendKind::embedder;
    std::string backend = "http";
    std::string endpoint;
    std::string model_name;
    double timeout_s = 60.0;
    int max_retries = 3;
    std::size_t batch_limit = 32;
    std::size_t max_in_flight = 4;
    double backoff_base_s = 0.5;
    double backoff_max_s = 8.0;
    std::optional<std::string> auth_token;

    // Mock parameters.
    int mock_dim = 64;
    std::uint64_t mock_seed = 0;
    double mock_penalty = 0.0;
    std::string mock_lexicon;
};

/// Name of the environment variable holding the bearer token for a profile:
/// MRAG_LAB_TOKEN_<NAME>, upper-cased, non-alphanumerics mapped to '_'.
std::string token_env_var(std::string_view profile_name);

/// One request attempt, as recorded in BackendError.
struct Attempt {
    int number = 0;
    int http_status = 0;  // 0 for transport errors
    std::string detail;
};

class BackendError : public Error {
public:
    BackendError(const std::string& what, std::vector<Attempt> attempts = {})
        : Error(what), attempts_(std::move(attempts)) {}
    const std::vector<Attempt>& attempts() const noexcept { return attempts_; }

private:
    std::vector<Attempt> attempts_;
};

/// The service answered, but not according to the wire contract.
class ProtocolError : public BackendError {
public:
    using BackendError::BackendError;
};

using Vector = std::vector<float>;

class Embedder {
public:
    virtual ~Embedder() = default;

    /// One vector per text, order preserved, consistent dimension.
    std::vector<Vector> embed(std::span<const std::string> texts, EmbedRole role);

    /// Stable string describing the model; recorded in index files.
    virtual std::string identify() const = 0;

protected:
    virtual std::vector<Vector> do_embed(std::span<const std::string> texts, EmbedRole role) = 0;
};

struct Translation {
    std::vector<std::string> texts;
    /// Positions where the service returned an empty string and the input was
    /// passed through instead.
    std::vector<std::size_t> passthrough;
};

class Translator {
public:
    virtual ~Translator() = default;

    /// Requires src != tgt.
    Translation translate(std::span<const std::string> texts, const LanguageCode& src,
                          const LanguageCode& tgt);

    virtual std::string identify() const = 0;
    std::uint64_t calls() const noexcept { return calls_.load(); }

protected:
    virtual std::vector<std::string> do_translate(std::span<const std::string> texts,
                                                  const LanguageCode& src, const LanguageCode& tgt) = 0;

private:
    std::atomic<std::uint64_t> calls_{0};
};

struct ChatMessage {
    enum class Role { system, user };
    Role role = Role::user;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

std::string_view to_string(ChatMessage::Role role);

struct DecodeSettings {
    double temperature = 0.0;
    int max_tokens = 256;
    std::optional<std::int64_t> seed;
};

class Generator {
public:
    virtual ~Generator() = default;

    /// Raw completion, untrimmed. Empty completions raise BackendError.
    std::string generate(const std::vector<ChatMessage>& messages, const DecodeSettings& decode);

    virtual std::string identify() const = 0;

protected:
    virtual std::string do_generate(const std::vector<ChatMessage>& messages,
                                    const DecodeSettings& decode) = 0;
};

// ---------------------------------------------------------------------------
// Mocks. Test-only semantics: the translator tags its output with a
// ⟦src→tgt⟧ marker which the mock embedder strips before hashing.

/// Removes every ⟦...⟧ marker; returns the stripped text and the marker count.
std::pair<std::string, int> strip_translation_markers(std::string_view text);

/// L2-normalized bag of hashed character 3-grams. Bucket 0 is reserved: for
/// `penalty` p > 0 a text carrying m markers keeps (1-p)^m of its gram
/// direction and puts the remaining mass on bucket 0, so its cosine with the
/// unmarked source is exactly (1-p)^m.
class MockEmbedder final : public Embedder {
public:
    MockEmbedder(int dim, std::uint64_t seed, double penalty = 0.0);

    std::string identify() const override;
    int dim() const noexcept { return dim_; }

protected:
    std::vector<Vector> do_embed(std::span<const std::string> texts, EmbedRole role) override;

private:
    Vector embed_one(std::string_view text) const;

    int dim_;
    std::uint64_t seed_;
    double penalty_;
};

/// Word-level lexicon keyed by "src>tgt".
using Lexicon = std::map<std::string, std::map<std::string, std::string>>;

Lexicon load_lexicon(const std::string& path);

/// Output is "⟦src→tgt⟧" followed by the input, with whitespace-separated
/// tokens substituted through the lexicon when one is configured.
class MockTranslator final : public Translator {
public:
    MockTranslator() = default;
    explicit MockTranslator(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}

    std::string identify() const override;

protected:
    std::vector<std::string> do_translate(std::span<const std::string> texts, const LanguageCode& src,
                                          const LanguageCode& tgt) override;

private:
    Lexicon lexicon_;
};

/// Echoes the last 64 code points of the final user message. When the system
/// prompt requests a multilingual JSON object, answers with one such object
/// whose values are the echo tagged with a ⟦gen→lang⟧ marker.
class MockGenerator final : public Generator {
public:
    std::string identify() const override { return "mock-echo/64"; }

protected:
    std::string do_generate(const std::vector<ChatMessage>& messages, const DecodeSettings& decode) override;
};

std::unique_ptr<Embedder> make_embedder(const BackendProfile& profile);
std::unique_ptr<Translator> make_translator(const BackendProfile& profile);
std::unique_ptr<Generator> make_generator(const BackendProfile& profile);

}  // namespace mraglab::backends
