#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "svqa/services/services.hpp"

using namespace svqa;
using namespace svqa::services;

namespace {

ServiceConfig quick_config(const std::string& url) {
    ServiceConfig c;
    c.base_url = url;
    c.timeout_ms = 2000;
    c.max_retries = 2;
    c.backoff_ms = 1;
    return c;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot;
}

double norm(const std::vector<double>& v) { return std::sqrt(cosine(v, v)); }

// One-route throwaway server for failure-path tests.
class ScriptedServer {
  public:
    template <typename Handler>
    std::string start(const std::string& route, Handler&& handler) {
        server_.Post(route, std::forward<Handler>(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        REQUIRE(port_ > 0);
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return "http://127.0.0.1:" + std::to_string(port_);
    }
    ~ScriptedServer() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

  private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

struct TempFile {
    std::filesystem::path path;
    explicit TempFile(const std::string& name) {
        path = std::filesystem::temp_directory_path() /
               (name + "-" + std::to_string(::getpid()) + ".jsonl");
        std::filesystem::remove(path);
    }
    ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("mock embeddings are deterministic unit vectors") {
    MockEmbeddingProvider p;
    const auto a1 = p.embed("The cup is to the left of the mug.");
    const auto a2 = p.embed("The cup is to the left of the mug.");
    CHECK(a1 == a2);
    CHECK(a1.size() == MockEmbeddingProvider::kDim);
    CHECK(norm(a1) == Catch::Approx(1.0).margin(1e-9));
    CHECK(p.provider_id() == "mock-trigram-v1");

    const auto tiny = p.embed("ab");
    CHECK(tiny[0] == 1.0);
    CHECK(norm(tiny) == 1.0);

    CHECK_THROWS_AS(p.embed_batch({}), std::invalid_argument);
    const auto batch = p.embed_batch({"x y z", "ab"});
    CHECK(batch[0] == p.embed("x y z"));
    CHECK(batch[1] == tiny);
}

TEST_CASE("mock embeddings rank paraphrases above unrelated text") {
    MockEmbeddingProvider p;
    const std::string ref = "The cup is to the left of the mug.";
    const auto v_ref = p.embed(ref);
    const double near = cosine(v_ref, p.embed("The cup is to the left of the mug!"));
    const double far = cosine(v_ref, p.embed("Rainfall totals were unusually high."));
    CHECK(near > far);
    CHECK(near > 0.8);
    CHECK(rewards::semantic_reward(ref, ref, p) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("mock judge normalizes verdicts before comparing") {
    MockJudge judge;
    CHECK(judge.judge("Yes, to the left.", "Yes, the cup is to the left of the mug.") == 1);
    CHECK(judge.judge("No.", "Yes, the cup is to the left of the mug.") == 0);
    // Fallback: neither side normalizes, trimmed lowercase equality decides.
    CHECK(judge.judge("  Horizontally Aligned ", "horizontally aligned") == 1);
    CHECK(judge.judge("somewhere else", "horizontally aligned") == 0);
}

TEST_CASE("mock rewriter swaps directions and inverts itself") {
    MockRewriter rw;
    const auto [q, a] = rw.rewrite("Is the cup to the left of the mug?",
                                   "Yes, the cup is to the left of the mug.");
    CHECK(q == "Is the cup to the right of the mug?");
    CHECK(a == "Yes, the cup is to the right of the mug.");
    const auto [q2, a2] = rw.rewrite(q, a);
    CHECK(q2 == "Is the cup to the left of the mug?");
    CHECK(a2 == "Yes, the cup is to the left of the mug.");
}

TEST_CASE("base urls split into host and path prefix") {
    auto s = services::detail::split_base_url("http://127.0.0.1:8080");
    CHECK(s.host == "http://127.0.0.1:8080");
    CHECK(s.path_prefix.empty());
    s = services::detail::split_base_url("http://gateway:9000/svqa/v1/");
    CHECK(s.host == "http://gateway:9000");
    CHECK(s.path_prefix == "/svqa/v1");
}

TEST_CASE("service configuration is validated") {
    CHECK_NOTHROW(validate_service_config(ServiceConfig{}));
    ServiceConfig c;
    c.timeout_ms = 0;
    CHECK_THROWS_AS(validate_service_config(c), std::invalid_argument);
    c = ServiceConfig{};
    c.max_retries = -1;
    CHECK_THROWS_AS(validate_service_config(c), std::invalid_argument);
}

TEST_CASE("embedding client round-trips through the reference server") {
    ReferenceServer server;
    const std::string url = server.start();
    EmbeddingHttpClient client(quick_config(url));
    CHECK(client.provider_id() == "http-embed-v1");

    const std::vector<std::string> texts = {"first text", "second text", "ab"};
    const auto remote = client.embed_batch(texts);
    REQUIRE(remote.size() == 3);

    MockEmbeddingProvider local;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        REQUIRE(remote[i].size() == MockEmbeddingProvider::kDim);
        CHECK(norm(remote[i]) == Catch::Approx(1.0).margin(1e-9));
        CHECK(cosine(remote[i], local.embed(texts[i])) == Catch::Approx(1.0).margin(1e-12));
    }
    CHECK(client.embed("first text") == remote[0]);
    CHECK_THROWS_AS(client.embed_batch({}), std::invalid_argument);
    server.stop();
}

TEST_CASE("judge client parses verdicts over the wire") {
    ReferenceServer server;
    JudgeHttpClient client(quick_config(server.start()));
    CHECK(client.judge("Yes, to the left.", "Yes, the cup is to the left of the mug.") == 1);
    CHECK(client.judge("No.", "Yes, the cup is to the left of the mug.") == 0);
    server.stop();
}

TEST_CASE("rewrite client matches the local mock and verifies end to end") {
    ReferenceServer server;
    RewriteHttpClient client(quick_config(server.start()));
    const auto [q, a] = client.rewrite("Is the cup to the left of the mug?",
                                       "No, the cup is not to the left of the mug.");
    MockRewriter local;
    CHECK(std::make_pair(q, a) == local.rewrite("Is the cup to the left of the mug?",
                                                "No, the cup is not to the left of the mug."));

    const env::EnvConfig cfg;
    const env::Dataset ds = build_dataset(cfg, 20);
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
        const QAItem m = mirror::rewrite_qa_llm(ds.items[i], client, ds.scenes[i].canvas_width);
        CHECK(mirror::verify_consistency(ds.items[i], m, ds.scenes[i], cfg.meters_per_pixel).pass);
    }
    server.stop();
}

TEST_CASE("malformed judge verdicts surface with the raw payload") {
    ScriptedServer bad;
    const std::string url =
        bad.start("/judge", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"verdict\": \"maybe\"}", "application/json");
        });
    JudgeHttpClient client(quick_config(url));
    try {
        client.judge("a", "b");
        FAIL("expected MalformedVerdict");
    } catch (const MalformedVerdict& e) {
        CHECK(e.raw() == "maybe");
    }

    ScriptedServer junk;
    JudgeHttpClient client2(quick_config(
        junk.start("/judge", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("plain text, not json", "application/json");
        })));
    CHECK_THROWS_AS(client2.judge("a", "b"), MalformedVerdict);
}

TEST_CASE("protocol violations are not retried") {
    std::atomic<int> calls{0};
    ScriptedServer ragged;
    const std::string url =
        ragged.start("/embed", [&calls](const httplib::Request&, httplib::Response& res) {
            ++calls;
            res.set_content("{\"vectors\": [[1.0, 0.0], [1.0]]}", "application/json");
        });
    EmbeddingHttpClient client(quick_config(url));
    CHECK_THROWS_AS(client.embed_batch({"a", "b"}), ProtocolViolation);
    CHECK(calls.load() == 1);

    ScriptedServer shapeless;
    EmbeddingHttpClient client2(quick_config(
        shapeless.start("/embed", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"vectors\": 42}", "application/json");
        })));
    CHECK_THROWS_AS(client2.embed("a"), ProtocolViolation);

    // Missing route: the server answers 404, which is a contract violation.
    ScriptedServer wrong_route;
    JudgeHttpClient client3(quick_config(
        wrong_route.start("/other", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{}", "application/json");
        })));
    CHECK_THROWS_AS(client3.judge("a", "b"), ProtocolViolation);
}

TEST_CASE("malformed rewrites surface with the raw payload") {
    ScriptedServer bad;
    RewriteHttpClient client(quick_config(
        bad.start("/rewrite", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"question\": 5, \"answer\": \"x\"}", "application/json");
        })));
    CHECK_THROWS_AS(client.rewrite("q", "a"), MalformedRewrite);
}

TEST_CASE("transient server errors are retried with backoff") {
    std::atomic<int> calls{0};
    ScriptedServer flaky;
    const std::string url =
        flaky.start("/judge", [&calls](const httplib::Request&, httplib::Response& res) {
            if (++calls == 1) {
                res.status = 503;
                res.set_content("warming up", "text/plain");
                return;
            }
            res.set_content("{\"verdict\": \"1\"}", "application/json");
        });
    JudgeHttpClient client(quick_config(url));
    CHECK(client.judge("a", "b") == 1);
    CHECK(calls.load() == 2);
}

TEST_CASE("a dead endpoint raises ServiceUnavailable after the retry budget") {
    ServiceConfig c = quick_config("http://127.0.0.1:9");  // discard port, nothing listens
    c.max_retries = 1;
    c.timeout_ms = 200;
    JudgeHttpClient client(c);
    try {
        client.judge("a", "b");
        FAIL("expected ServiceUnavailable");
    } catch (const ServiceUnavailable& e) {
        CHECK(std::string(e.what()).find("after 2 attempts") != std::string::npos);
    }
}

TEST_CASE("environment variables override configured urls") {
    ReferenceServer server;
    const std::string url = server.start();
    ::setenv("SVQA_JUDGE_URL", url.c_str(), 1);
    ServiceConfig c = quick_config("http://127.0.0.1:9");  // would fail without the override
    c.max_retries = 0;
    JudgeHttpClient client(c);
    const int verdict = client.judge("Yes.", "Yes, it is.");
    ::unsetenv("SVQA_JUDGE_URL");
    CHECK(verdict == 1);
    CHECK(env_or("SVQA_JUDGE_URL", "fallback") == "fallback");
    server.stop();
}

TEST_CASE("the response archive logs every exchange in order") {
    TempFile file("svqa-archive");
    ReferenceServer server;
    const std::string url = server.start();
    {
        ResponseArchive archive(file.path.string());
        JudgeHttpClient client(quick_config(url), &archive);
        client.judge("Yes.", "Yes, it is.");
        client.judge("No, it is wrong.", "Yes, it is.");
    }
    std::ifstream in(file.path);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("endpoint") == "/judge");
        CHECK(j.at("sequence") == rows);
        CHECK(j.at("request").get<std::string>().find("prompt") != std::string::npos);
        CHECK(j.at("response").get<std::string>().find("verdict") != std::string::npos);
        ++rows;
    }
    CHECK(rows == 2);
    server.stop();

    ResponseArchive blank;  // no path: recording is a no-op
    blank.record("/x", "req", "res");
}
