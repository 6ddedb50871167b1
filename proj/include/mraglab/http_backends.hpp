#pragma once

#include <atomic>
#include <mutex>
#include <random>
#include <semaphore>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mraglab/backends.hpp"

namespace mraglab::backends {

/// JSON-over-HTTP POST with retries. Transport errors and 5xx are retried up
/// to `max_retries` times with jittered exponential backoff; 4xx fails at
/// once. At most `max_in_flight` requests run concurrently per transport.
class HttpTransport {
public:
    explicit HttpTransport(BackendProfile profile);

    nlohmann::json post_json(std::string_view path, const nlohmann::json& body);

    const BackendProfile& profile() const noexcept { return profile_; }
    std::uint64_t requests_sent() const noexcept { return requests_.load(); }

private:
    double backoff_seconds(int attempt);

    BackendProfile profile_;
    std::string host_;       // scheme://host:port
    std::string base_path_;  // path prefix without trailing slash
    std::counting_semaphore<256> in_flight_;
    std::atomic<std::uint64_t> requests_{0};
    std::mutex jitter_mutex_;
    std::mt19937_64 jitter_rng_;
};

/// POST {endpoint}/embed  {"model","texts","role"} -> {"vectors"}
class HttpEmbedder final : public Embedder {
public:
    explicit HttpEmbedder(const BackendProfile& profile) : transport_(profile) {}
    std::string identify() const override;
    std::uint64_t requests_sent() const noexcept { return transport_.requests_sent(); }

protected:
    std::vector<Vector> do_embed(std::span<const std::string> texts, EmbedRole role) override;

private:
    HttpTransport transport_;
};

/// POST {endpoint}/translate  {"model","texts","src","tgt"} -> {"texts"}
class HttpTranslator final : public Translator {
public:
    explicit HttpTranslator(const BackendProfile& profile) : transport_(profile) {}
    std::string identify() const override;

protected:
    std::vector<std::string> do_translate(std::span<const std::string> texts, const LanguageCode& src,
                                          const LanguageCode& tgt) override;

private:
    HttpTransport transport_;
};

/// POST {endpoint}/generate  {"model","messages","temperature","max_tokens","seed"?} -> {"text"}
class HttpGenerator final : public Generator {
public:
    explicit HttpGenerator(const BackendProfile& profile) : transport_(profile) {}
    std::string identify() const override;

protected:
    std::string do_generate(const std::vector<ChatMessage>& messages, const DecodeSettings& decode) override;

private:
    HttpTransport transport_;
};

/// Maps generate onto an OpenAI-compatible POST {endpoint}/chat/completions.
class OpenAiChatGenerator final : public Generator {
public:
    explicit OpenAiChatGenerator(const BackendProfile& profile) : transport_(profile) {}
    std::string identify() const override;

protected:
    std::string do_generate(const std::vector<ChatMessage>& messages, const DecodeSettings& decode) override;

private:
    HttpTransport transport_;
};

nlohmann::json messages_to_json(const std::vector<ChatMessage>& messages);

}  // namespace mraglab::backends
