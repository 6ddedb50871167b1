#include "mraglab/http_backends.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "mraglab/hashing.hpp"

namespace mraglab::backends {

using json = nlohmann::json;

namespace {

std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    const std::size_t scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw Error("endpoint '" + endpoint + "' must be an absolute http(s) URL");
    }
    const std::size_t path_start = endpoint.find('/', scheme_end + 3);
    std::string host = endpoint.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "" : endpoint.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {host, path};
}

struct SemaphoreGuard {
    explicit SemaphoreGuard(std::counting_semaphore<256>& s) : sem(s) { sem.acquire(); }
    ~SemaphoreGuard() { sem.release(); }
    std::counting_semaphore<256>& sem;
};

std::string clip(const std::string& s, std::size_t n = 200) {
    return s.size() <= n ? s : s.substr(0, n) + "...";
}

}  // namespace

HttpTransport::HttpTransport(BackendProfile profile)
    : profile_(std::move(profile)),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(profile_.max_in_flight, 1, 256))),
      jitter_rng_(fnv1a64(profile_.name)) {
    if (profile_.batch_limit < 1) throw Error("profile '" + profile_.name + "': batch_limit must be >= 1");
    std::tie(host_, base_path_) = split_endpoint(profile_.endpoint);
    if (!profile_.auth_token) {
        if (const char* token = std::getenv(token_env_var(profile_.name).c_str()); token && *token) {
            profile_.auth_token = token;
        }
    }
}

double HttpTransport::backoff_seconds(int attempt) {
    const double cap = std::min(profile_.backoff_max_s, profile_.backoff_base_s * std::pow(2.0, attempt - 1));
    std::lock_guard lock(jitter_mutex_);
    std::uniform_real_distribution<double> jitter(0.5, 1.0);
    return cap * jitter(jitter_rng_);
}

json HttpTransport::post_json(std::string_view path, const json& body) {
    SemaphoreGuard guard(in_flight_);
    const std::string payload = body.dump();
    const std::string full_path = base_path_ + std::string(path);
    std::vector<Attempt> attempts;

    const int total = 1 + std::max(0, profile_.max_retries);
    for (int n = 1; n <= total; ++n) {
        httplib::Client client(host_);
        const auto timeout = std::chrono::duration<double>(profile_.timeout_s);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        httplib::Headers headers;
        if (profile_.auth_token) headers.emplace("Authorization", "Bearer " + *profile_.auth_token);

        requests_.fetch_add(1);
        const auto res = client.Post(full_path, headers, payload, "application/json");
        if (!res) {
            attempts.push_back({n, 0, httplib::to_string(res.error())});
        } else if (res->status >= 200 && res->status < 300) {
            try {
                return json::parse(res->body);
            } catch (const json::parse_error& e) {
                attempts.push_back({n, res->status, "unparsable body"});
                throw ProtocolError(profile_.name + " " + full_path + ": response is not JSON: " + e.what(),
                                    attempts);
            }
        } else {
            attempts.push_back({n, res->status, clip(res->body)});
            if (res->status < 500) {
                throw BackendError(profile_.name + " " + full_path + ": HTTP " + std::to_string(res->status),
                                   attempts);
            }
        }
        if (n < total) {
            const double wait = backoff_seconds(n);
            spdlog::debug("{} {}: attempt {} failed ({}), retrying in {:.3f}s", profile_.name, full_path, n,
                          attempts.back().detail, wait);
            std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        }
    }
    throw BackendError(profile_.name + " " + full_path + ": giving up after " + std::to_string(total) +
                           " attempts (last: " + attempts.back().detail + ")",
                       attempts);
}

std::string HttpEmbedder::identify() const {
    return "http:" + transport_.profile().model_name + "@" + transport_.profile().endpoint;
}

std::vector<Vector> HttpEmbedder::do_embed(std::span<const std::string> texts, EmbedRole role) {
    const std::size_t limit = transport_.profile().batch_limit;
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (std::size_t begin = 0; begin < texts.size(); begin += limit) {
        const std::size_t end = std::min(texts.size(), begin + limit);
        const std::string range = "[" + std::to_string(begin) + "," + std::to_string(end) + ")";
        json body;
        body["model"] = transport_.profile().model_name;
        body["texts"] = json::array();
        for (std::size_t i = begin; i < end; ++i) body["texts"].push_back(texts[i]);
        body["role"] = std::string(to_string(role));

        json res;
        try {
            res = transport_.post_json("/embed", body);
        } catch (const BackendError& e) {
            throw BackendError(std::string(e.what()) + " (batch " + range + ")", e.attempts());
        }
        const auto vectors = res.find("vectors");
        if (vectors == res.end() || !vectors->is_array()) {
            throw ProtocolError("embed batch " + range + ": response lacks 'vectors'");
        }
        if (vectors->size() != end - begin) {
            throw ProtocolError("embed batch " + range + ": expected " + std::to_string(end - begin) +
                                " vectors, got " + std::to_string(vectors->size()));
        }
        for (const json& v : *vectors) {
            if (!v.is_array()) throw ProtocolError("embed batch " + range + ": vector is not an array");
            Vector vec;
            vec.reserve(v.size());
            for (const json& x : v) {
                if (!x.is_number()) throw ProtocolError("embed batch " + range + ": non-numeric component");
                vec.push_back(x.get<float>());
            }
            if (!out.empty() && vec.size() != out.front().size()) {
                throw ProtocolError("embed batch " + range + ": dimension " + std::to_string(vec.size()) +
                                    " differs from earlier batches (" + std::to_string(out.front().size()) + ")");
            }
            out.push_back(std::move(vec));
        }
    }
    return out;
}

std::string HttpTranslator::identify() const {
    return "http:" + transport_.profile().model_name + "@" + transport_.profile().endpoint;
}

std::vector<std::string> HttpTranslator::do_translate(std::span<const std::string> texts, const LanguageCode& src,
                                                      const LanguageCode& tgt) {
    const std::size_t limit = transport_.profile().batch_limit;
    std::vector<std::string> out;
    out.reserve(texts.size());
    for (std::size_t begin = 0; begin < texts.size(); begin += limit) {
        const std::size_t end = std::min(texts.size(), begin + limit);
        json body;
        body["model"] = transport_.profile().model_name;
        body["texts"] = json::array();
        for (std::size_t i = begin; i < end; ++i) body["texts"].push_back(texts[i]);
        body["src"] = src.str();
        body["tgt"] = tgt.str();
        const json res = transport_.post_json("/translate", body);
        const auto outputs = res.find("texts");
        if (outputs == res.end() || !outputs->is_array() || outputs->size() != end - begin) {
            throw ProtocolError("translate: response 'texts' missing or wrong length");
        }
        for (const json& t : *outputs) {
            if (!t.is_string()) throw ProtocolError("translate: non-string output");
            out.push_back(t.get<std::string>());
        }
    }
    return out;
}

json messages_to_json(const std::vector<ChatMessage>& messages) {
    json arr = json::array();
    for (const ChatMessage& m : messages) {
        arr.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    }
    return arr;
}

std::string HttpGenerator::identify() const {
    return "http:" + transport_.profile().model_name + "@" + transport_.profile().endpoint;
}

std::string HttpGenerator::do_generate(const std::vector<ChatMessage>& messages, const DecodeSettings& decode) {
    json body;
    body["model"] = transport_.profile().model_name;
    body["messages"] = messages_to_json(messages);
    body["temperature"] = static_cast<float>(decode.temperature);
    body["max_tokens"] = decode.max_tokens;
    if (decode.seed) body["seed"] = *decode.seed;
    const json res = transport_.post_json("/generate", body);
    const auto text = res.find("text");
    if (text == res.end() || !text->is_string()) throw ProtocolError("generate: response lacks 'text'");
    return text->get<std::string>();
}

std::string OpenAiChatGenerator::identify() const {
    return "openai:" + transport_.profile().model_name + "@" + transport_.profile().endpoint;
}

std::string OpenAiChatGenerator::do_generate(const std::vector<ChatMessage>& messages,
                                             const DecodeSettings& decode) {
    json body;
    body["model"] = transport_.profile().model_name;
    body["messages"] = messages_to_json(messages);
    body["temperature"] = decode.temperature;
    body["max_tokens"] = decode.max_tokens;
    if (decode.seed) body["seed"] = *decode.seed;
    const json res = transport_.post_json("/chat/completions", body);
    try {
        const json& content = res.at("choices").at(0).at("message").at("content");
        if (content.is_null()) return {};
        return content.get<std::string>();
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("chat completion response malformed: ") + e.what());
    }
}

}  // namespace mraglab::backends
