#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "fake_server.hpp"
#include "mraglab/backends.hpp"
#include "mraglab/datastore.hpp"
#include "mraglab/http_backends.hpp"
#include "mraglab/text.hpp"
#include "oracles.hpp"

using namespace mraglab;
using namespace mraglab::backends;
using mraglab::testing::FakeServer;
using nlohmann::json;

namespace {

std::vector<std::string> numbered(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("text " + std::to_string(i));
    return out;
}

Vector embed1(Embedder& e, const std::string& s) {
    const std::vector<std::string> t{s};
    return e.embed(t, EmbedRole::passage).front();
}

}  // namespace

// --- mocks -------------------------------------------------------------------

TEST(MockEmbedder, Deterministic) {
    MockEmbedder a(8, 42);
    MockEmbedder b(8, 42);
    EXPECT_EQ(embed1(a, "hello world"), embed1(a, "hello world"));
    EXPECT_EQ(embed1(a, "hello world"), embed1(b, "hello world"));
    MockEmbedder c(8, 43);
    EXPECT_NE(embed1(a, "hello world"), embed1(c, "hello world"));
}

TEST(MockEmbedder, UnitNormAndReservedBucket) {
    MockEmbedder e(64, 1);
    const Vector v = embed1(e, "a longer sentence");
    double sq = 0;
    for (float x : v) sq += double(x) * x;
    EXPECT_NEAR(sq, 1.0, 1e-6);
    EXPECT_EQ(v[0], 0.0f);
}

TEST(MockEmbedder, StripsMarkers) {
    MockEmbedder e(64, 5);
    EXPECT_EQ(embed1(e, "abc"), embed1(e, "⟦en→ko⟧abc"));
    const auto [stripped, n] = strip_translation_markers("⟦en→ko⟧⟦ko→zh⟧abc");
    EXPECT_EQ(stripped, "abc");
    EXPECT_EQ(n, 2);
}

TEST(MockEmbedder, BiasedCosineIsPowerOfKeep) {
    for (double p : {0.1, 0.5, 0.9}) {
        MockEmbedder e(128, 9, p);
        const Vector src = embed1(e, "some passage text");
        const Vector once = embed1(e, "⟦en→ko⟧some passage text");
        const Vector twice = embed1(e, "⟦ko→zh⟧⟦en→ko⟧some passage text");
        EXPECT_LT(oracle::dot(src, once), 1.0);
        EXPECT_NEAR(oracle::dot(src, once), 1.0 - p, 1e-6);
        EXPECT_NEAR(oracle::dot(src, twice), (1.0 - p) * (1.0 - p), 1e-6);
        EXPECT_NEAR(oracle::dot(once, once), 1.0, 1e-6);
    }
}

TEST(MockTranslator, MarkerContract) {
    MockTranslator t;
    const std::vector<std::string> in{"abc"};
    const Translation out = t.translate(in, LanguageCode("en"), LanguageCode("ko"));
    EXPECT_EQ(out.texts, std::vector<std::string>{"⟦en→ko⟧abc"});
    EXPECT_EQ(t.calls(), 1u);
}

TEST(MockTranslator, LexiconSubstitution) {
    Lexicon lex;
    lex["en>fr"] = {{"cat", "chat"}, {"black", "noir"}};
    MockTranslator t(lex);
    const std::vector<std::string> in{"black cat sleeps"};
    EXPECT_EQ(t.translate(in, LanguageCode("en"), LanguageCode("fr")).texts[0], "⟦en→fr⟧noir chat sleeps");
    EXPECT_EQ(t.translate(in, LanguageCode("en"), LanguageCode("ko")).texts[0], "⟦en→ko⟧black cat sleeps");
}

TEST(MockTranslator, SameLanguageIsAPreconditionError) {
    MockTranslator t;
    const std::vector<std::string> in{"abc"};
    EXPECT_THROW(t.translate(in, LanguageCode("en"), LanguageCode("en")), PreconditionError);
    EXPECT_EQ(t.calls(), 0u);
}

TEST(MockGenerator, EchoesLast64Codepoints) {
    MockGenerator g;
    std::string user;
    for (int i = 0; i < 100; ++i) user += (i % 2 ? "가" : "a");
    const std::vector<ChatMessage> msgs{{ChatMessage::Role::system, "sys"}, {ChatMessage::Role::user, user}};
    const std::string out = g.generate(msgs, {});
    EXPECT_EQ(text::codepoint_length(out), 64u);
    EXPECT_EQ(out, text::to_utf8(text::to_codepoints(user).substr(36)));
    EXPECT_EQ(out, g.generate(msgs, {0.0, 256, 7}));
}

TEST(MockGenerator, AnswersJsonWhenAsked) {
    MockGenerator g;
    const std::vector<ChatMessage> msgs{
        {ChatMessage::Role::system, "Reply with JSON. The JSON object must contain exactly these keys: en, ko."},
        {ChatMessage::Role::user, "question"}};
    const json j = json::parse(g.generate(msgs, {}));
    ASSERT_TRUE(j.is_object());
    EXPECT_EQ(j.size(), 2u);
    EXPECT_EQ(j.at("en").get<std::string>(), "⟦gen→en⟧question");
    EXPECT_EQ(j.at("ko").get<std::string>(), "⟦gen→ko⟧question");
}

TEST(Profiles, TokenEnvVarName) { EXPECT_EQ(token_env_var("my-embed.v2"), "MRAG_LAB_TOKEN_MY_EMBED_V2"); }

// --- HTTP adapters -------------------------------------------------------------

TEST(HttpEmbedder, ChunksByBatchLimitAndKeepsOrder) {
    FakeServer server;
    server.on("/embed", [](const FakeServer::Request& r, httplib::Response& res) {
        json vecs = json::array();
        for (const auto& t : r.body.at("texts")) {
            const std::string s = t.get<std::string>();
            vecs.push_back({std::stof(s.substr(5)), 1.0});
        }
        FakeServer::reply(res, {{"vectors", vecs}});
    });
    server.start();
    BackendProfile p = server.profile("emb", BackendKind::embedder);
    p.batch_limit = 100;
    HttpEmbedder e(p);
    const auto texts = numbered(250);
    const auto vecs = e.embed(texts, EmbedRole::query);
    ASSERT_EQ(vecs.size(), 250u);
    for (std::size_t i = 0; i < 250; ++i) EXPECT_EQ(vecs[i][0], float(i));
    const auto reqs = server.requests();
    ASSERT_EQ(reqs.size(), 3u);
    EXPECT_EQ(reqs[0].body.at("texts").size(), 100u);
    EXPECT_EQ(reqs[2].body.at("texts").size(), 50u);
    EXPECT_EQ(reqs[0].body.at("role"), "query");
    EXPECT_EQ(reqs[0].body.at("model"), "fake");
}

TEST(HttpEmbedder, WrongVectorCountIsProtocolError) {
    FakeServer server;
    server.on("/embed", [](const FakeServer::Request&, httplib::Response& res) {
        FakeServer::reply(res, {{"vectors", {{1.0, 0.0}, {0.0, 1.0}}}});
    });
    server.start();
    HttpEmbedder e(server.profile("emb", BackendKind::embedder));
    EXPECT_THROW(e.embed(numbered(3), EmbedRole::passage), ProtocolError);
}

TEST(HttpEmbedder, InconsistentDimensionIsProtocolError) {
    FakeServer server;
    server.on("/embed", [](const FakeServer::Request&, httplib::Response& res) {
        FakeServer::reply(res, {{"vectors", {{1.0, 0.0}, {0.0, 1.0, 2.0}}}});
    });
    server.start();
    HttpEmbedder e(server.profile("emb", BackendKind::embedder));
    EXPECT_THROW(e.embed(numbered(2), EmbedRole::passage), ProtocolError);
}

TEST(HttpGenerator, ServerErrorsAreRetriedThenReported) {
    FakeServer server;
    server.on("/generate", [](const FakeServer::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("boom", "text/plain");
    });
    server.start();
    HttpGenerator g(server.profile("gen", BackendKind::generator));
    const std::vector<ChatMessage> msgs{{ChatMessage::Role::user, "hi"}};
    try {
        g.generate(msgs, {});
        FAIL() << "expected BackendError";
    } catch (const BackendError& e) {
        ASSERT_EQ(e.attempts().size(), 4u);  // first try plus three retries
        for (const Attempt& a : e.attempts()) EXPECT_EQ(a.http_status, 500);
    }
    EXPECT_EQ(server.requests().size(), 4u);
}

TEST(HttpGenerator, RecoversWhenARetrySucceeds) {
    FakeServer server;
    std::atomic<int> n{0};
    server.on("/generate", [&](const FakeServer::Request& r, httplib::Response& res) {
        if (n++ < 3) {
            res.status = 503;
            return;
        }
        EXPECT_EQ(r.body.at("max_tokens"), 256);
        EXPECT_EQ(r.body.at("seed"), 7);
        EXPECT_EQ(r.body.at("messages")[0].at("role"), "user");
        FakeServer::reply(res, {{"text", "answer"}});
    });
    server.start();
    HttpGenerator g(server.profile("gen", BackendKind::generator));
    const std::vector<ChatMessage> msgs{{ChatMessage::Role::user, "hi"}};
    EXPECT_EQ(g.generate(msgs, {0.0, 256, 7}), "answer");
}

TEST(HttpGenerator, ClientErrorFailsWithoutRetry) {
    FakeServer server;
    server.on("/generate", [](const FakeServer::Request&, httplib::Response& res) { res.status = 400; });
    server.start();
    HttpGenerator g(server.profile("gen", BackendKind::generator));
    const std::vector<ChatMessage> msgs{{ChatMessage::Role::user, "hi"}};
    EXPECT_THROW(g.generate(msgs, {}), BackendError);
    EXPECT_EQ(server.requests().size(), 1u);
}

TEST(HttpGenerator, EmptyCompletionIsAnError) {
    FakeServer server;
    server.on("/generate", [](const FakeServer::Request&, httplib::Response& res) {
        FakeServer::reply(res, {{"text", ""}});
    });
    server.start();
    HttpGenerator g(server.profile("gen", BackendKind::generator));
    const std::vector<ChatMessage> msgs{{ChatMessage::Role::user, "hi"}};
    EXPECT_THROW(g.generate(msgs, {}), BackendError);
}

TEST(HttpTranslator, EmptyOutputIsPassedThrough) {
    FakeServer server;
    server.on("/translate", [](const FakeServer::Request& r, httplib::Response& res) {
        EXPECT_EQ(r.body.at("src"), "en");
        EXPECT_EQ(r.body.at("tgt"), "ko");
        FakeServer::reply(res, {{"texts", {"번역", ""}}});
    });
    server.start();
    HttpTranslator t(server.profile("tr", BackendKind::translator));
    const std::vector<std::string> in{"one", "two"};
    const Translation out = t.translate(in, LanguageCode("en"), LanguageCode("ko"));
    EXPECT_EQ(out.texts, (std::vector<std::string>{"번역", "two"}));
    EXPECT_EQ(out.passthrough, std::vector<std::size_t>{1});
}

TEST(HttpTransport, BearerTokenComesFromEnvironment) {
    FakeServer server;
    server.on("/generate", [](const FakeServer::Request&, httplib::Response& res) {
        FakeServer::reply(res, {{"text", "ok"}});
    });
    server.start();
    ::setenv("MRAG_LAB_TOKEN_AUTHED_GEN", "s3cret", 1);
    HttpGenerator g(server.profile("authed-gen", BackendKind::generator));
    ::unsetenv("MRAG_LAB_TOKEN_AUTHED_GEN");
    const std::vector<ChatMessage> msgs{{ChatMessage::Role::user, "hi"}};
    g.generate(msgs, {});
    EXPECT_EQ(server.requests().at(0).authorization, "Bearer s3cret");
}

TEST(OpenAiChatGenerator, MapsOntoChatCompletions) {
    FakeServer server;
    server.on("/v1/chat/completions", [](const FakeServer::Request& r, httplib::Response& res) {
        EXPECT_EQ(r.body.at("messages").size(), 2u);
        EXPECT_EQ(r.body.at("messages")[0].at("role"), "system");
        FakeServer::reply(res, {{"choices", {{{"message", {{"role", "assistant"}, {"content", "Paris"}}}}}}});
    });
    server.start();
    BackendProfile p = server.profile("oa", BackendKind::generator);
    p.backend = "openai";
    p.endpoint += "/v1";
    auto g = make_generator(p);
    const std::vector<ChatMessage> msgs{{ChatMessage::Role::system, "s"}, {ChatMessage::Role::user, "capital?"}};
    EXPECT_EQ(g->generate(msgs, {}), "Paris");
}
