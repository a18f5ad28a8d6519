#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "svqa/core/parse.hpp"
#include "svqa/core/rng.hpp"
#include "svqa/metrics/keywords.hpp"
#include "svqa/metrics/metrics.hpp"
#include "svqa/mirror/mirror.hpp"
#include "svqa/rewards/rewards.hpp"

namespace svqa::services {

struct ServiceConfig {
    std::string base_url = "http://127.0.0.1:8080";
    int timeout_ms = 5000;
    int max_retries = 2;    // retries after the first attempt
    int backoff_ms = 100;   // exponential base
};

inline void validate_service_config(const ServiceConfig& c) {
    if (c.timeout_ms <= 0) throw std::invalid_argument("service timeout must be positive");
    if (c.max_retries < 0) throw std::invalid_argument("max_retries must be nonnegative");
    if (c.backoff_ms < 0) throw std::invalid_argument("backoff_ms must be nonnegative");
}

class ServiceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Transport failure or 5xx that survived every retry.
class ServiceUnavailable : public ServiceError {
  public:
    using ServiceError::ServiceError;
};

// The remote answered but broke the wire contract (bad status, bad JSON
// shape, ragged dimensions). Never retried.
class ProtocolViolation : public ServiceError {
  public:
    using ServiceError::ServiceError;
};

class MalformedVerdict : public ServiceError {
  public:
    explicit MalformedVerdict(const std::string& raw)
        : ServiceError("judge returned neither 0 nor 1: \"" + raw + "\""), raw_(raw) {}
    const std::string& raw() const { return raw_; }

  private:
    std::string raw_;
};

class MalformedRewrite : public ServiceError {
  public:
    explicit MalformedRewrite(const std::string& raw)
        : ServiceError("rewrite response is not the expected JSON object: \"" + raw + "\""),
          raw_(raw) {}
    const std::string& raw() const { return raw_; }

  private:
    std::string raw_;
};

inline std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return (v && *v) ? std::string(v) : fallback;
}

// Appends one JSON line per remote call so raw responses stay auditable.
class ResponseArchive {
  public:
    ResponseArchive() = default;
    explicit ResponseArchive(const std::string& path) : path_(path) {}

    void record(const std::string& endpoint, const std::string& request_body,
                const std::string& response_body) {
        if (path_.empty()) return;
        std::lock_guard<std::mutex> lock(mutex_);
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        nlohmann::json j;
        j["endpoint"] = endpoint;
        j["request"] = request_body;
        j["response"] = response_body;
        j["sequence"] = sequence_++;
        out << j.dump() << "\n";
    }

  private:
    std::string path_;
    std::mutex mutex_;
    std::uint64_t sequence_ = 0;
};

namespace detail {

struct SplitUrl {
    std::string host;         // scheme://authority
    std::string path_prefix;  // "" or "/x/y", no trailing slash
};

inline SplitUrl split_base_url(const std::string& base_url) {
    SplitUrl out;
    const auto scheme_end = base_url.find("://");
    const std::size_t authority_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto slash = base_url.find('/', authority_start);
    if (slash == std::string::npos) {
        out.host = base_url;
    } else {
        out.host = base_url.substr(0, slash);
        out.path_prefix = base_url.substr(slash);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
    }
    return out;
}

}  // namespace detail

// POST-JSON transport with retry on transport errors and 5xx only; anything
// else is surfaced immediately.
class HttpJsonClient {
  public:
    HttpJsonClient(const ServiceConfig& config, ResponseArchive* archive = nullptr)
        : config_(config), split_(detail::split_base_url(config.base_url)), archive_(archive) {
        validate_service_config(config);
    }

    std::string post_json(const std::string& endpoint, const std::string& body) {
        const std::string path = split_.path_prefix + endpoint;
        std::string last_error = "no attempt made";
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                const auto delay = config_.backoff_ms * (1LL << (attempt - 1));
                std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            }
            httplib::Client client(split_.host);
            client.set_connection_timeout(0, config_.timeout_ms * 1000LL);
            client.set_read_timeout(0, config_.timeout_ms * 1000LL);
            client.set_write_timeout(0, config_.timeout_ms * 1000LL);
            httplib::Result res = client.Post(path, body, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500) {
                last_error = "server status " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw ProtocolViolation("unexpected status " + std::to_string(res->status) +
                                        " from " + path);
            if (archive_) archive_->record(path, body, res->body);
            return res->body;
        }
        throw ServiceUnavailable(path + " unavailable after " +
                                 std::to_string(config_.max_retries + 1) + " attempts (" +
                                 last_error + ")");
    }

  private:
    ServiceConfig config_;
    detail::SplitUrl split_;
    ResponseArchive* archive_;
};

// Remote embedding provider; vectors are re-normalized locally so the
// similarity contract holds even against a sloppy server.
class EmbeddingHttpClient : public rewards::SimilarityProvider {
  public:
    explicit EmbeddingHttpClient(ServiceConfig config, ResponseArchive* archive = nullptr)
        : config_([&config] {
              config.base_url = env_or("SVQA_EMBED_URL", config.base_url);
              return config;
          }()),
          http_(config_, archive) {}

    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) {
        if (texts.empty()) throw std::invalid_argument("embed_batch: empty batch");
        nlohmann::json req;
        req["texts"] = texts;
        const std::string raw = http_.post_json("/embed", req.dump());
        nlohmann::json res;
        try {
            res = nlohmann::json::parse(raw);
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolViolation(std::string("embed response is not JSON: ") + e.what());
        }
        if (!res.is_object() || !res.contains("vectors") || !res["vectors"].is_array())
            throw ProtocolViolation("embed response lacks a vectors array");
        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        std::size_t dim = 0;
        for (const auto& v : res["vectors"]) {
            if (!v.is_array()) throw ProtocolViolation("embed vector is not an array");
            std::vector<double> vec = v.get<std::vector<double>>();
            if (out.empty())
                dim = vec.size();
            else if (vec.size() != dim)
                throw ProtocolViolation("embed response has ragged dimensions");
            double norm = 0.0;
            for (double x : vec) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 0.0)
                for (double& x : vec) x /= norm;
            out.push_back(std::move(vec));
        }
        if (out.size() != texts.size())
            throw ProtocolViolation("embed response count disagrees with request");
        return out;
    }

    std::vector<double> embed(const std::string& text) override {
        return embed_batch({text}).front();
    }

    std::string provider_id() const override { return "http-embed-v1"; }

  private:
    ServiceConfig config_;
    HttpJsonClient http_;
};

class JudgeHttpClient {
  public:
    explicit JudgeHttpClient(ServiceConfig config, ResponseArchive* archive = nullptr)
        : config_([&config] {
              config.base_url = env_or("SVQA_JUDGE_URL", config.base_url);
              return config;
          }()),
          http_(config_, archive) {}

    // The prompt is fixed; the wire carries only the substituted fields.
    int judge(const std::string& pred, const std::string& gt) {
        nlohmann::json req;
        req["pred"] = pred;
        req["gt"] = gt;
        req["prompt"] = metrics::render_judge_prompt(pred, gt);
        const std::string raw = http_.post_json("/judge", req.dump());
        std::string verdict;
        try {
            const nlohmann::json res = nlohmann::json::parse(raw);
            if (!res.is_object() || !res.contains("verdict") || !res["verdict"].is_string())
                throw MalformedVerdict(raw);
            verdict = res["verdict"].get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw MalformedVerdict(raw);
        }
        const std::string trimmed(svqa::detail::trim(verdict));
        if (trimmed == "0") return 0;
        if (trimmed == "1") return 1;
        throw MalformedVerdict(verdict);
    }

  private:
    ServiceConfig config_;
    HttpJsonClient http_;
};

class RewriteHttpClient : public mirror::RewriteClientBase {
  public:
    explicit RewriteHttpClient(ServiceConfig config, ResponseArchive* archive = nullptr)
        : config_([&config] {
              config.base_url = env_or("SVQA_REWRITE_URL", config.base_url);
              return config;
          }()),
          http_(config_, archive) {}

    std::pair<std::string, std::string> rewrite(const std::string& question,
                                                const std::string& answer) override {
        nlohmann::json req;
        req["question"] = question;
        req["answer"] = answer;
        const std::string raw = http_.post_json("/rewrite", req.dump());
        try {
            const nlohmann::json res = nlohmann::json::parse(raw);
            if (!res.is_object() || !res.contains("question") || !res.contains("answer") ||
                !res["question"].is_string() || !res["answer"].is_string())
                throw MalformedRewrite(raw);
            return {res["question"].get<std::string>(), res["answer"].get<std::string>()};
        } catch (const nlohmann::json::exception&) {
            throw MalformedRewrite(raw);
        }
    }

  private:
    ServiceConfig config_;
    HttpJsonClient http_;
};

// Offline stand-ins. All three are pure functions of their inputs.

// Hashed character-trigram frequency embedding (d = 256), L2-normalized.
// Near-paraphrases share most trigrams; unrelated answers share few.
class MockEmbeddingProvider : public rewards::SimilarityProvider {
  public:
    static constexpr std::size_t kDim = 256;

    std::vector<double> embed(const std::string& text) override {
        std::vector<double> v(kDim, 0.0);
        if (text.size() < 3) {
            v[0] = 1.0;
            return v;
        }
        for (std::size_t i = 0; i + 3 <= text.size(); ++i)
            v[fnv1a64(std::string_view(text).substr(i, 3)) % kDim] += 1.0;
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            v[0] = 1.0;
            return v;
        }
        for (double& x : v) x /= norm;
        return v;
    }

    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) {
        if (texts.empty()) throw std::invalid_argument("embed_batch: empty batch");
        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed(t));
        return out;
    }

    std::string provider_id() const override { return "mock-trigram-v1"; }
};

// Alias-normalized equality; when either side fails to normalize, falls back
// to trimmed lowercase equality.
class MockJudge {
  public:
    MockJudge() : rules_(metrics::KeywordRuleSet::standard()) {}
    explicit MockJudge(metrics::KeywordRuleSet rules) : rules_(std::move(rules)) {}

    int judge(const std::string& pred, const std::string& gt) const {
        const auto pv = metrics::extract_bool(pred, rules_);
        const auto gv = metrics::extract_bool(gt, rules_);
        if (pv && gv) return *pv == *gv ? 1 : 0;
        const std::string a = metrics::detail::lower(std::string(svqa::detail::trim(pred)));
        const std::string b = metrics::detail::lower(std::string(svqa::detail::trim(gt)));
        return a == b ? 1 : 0;
    }

  private:
    metrics::KeywordRuleSet rules_;
};

// Applies the same directional-term swap as the rule-based rewriter.
class MockRewriter : public mirror::RewriteClientBase {
  public:
    MockRewriter() : lexicon_(mirror::DirectionalLexicon::standard()) {}
    explicit MockRewriter(mirror::DirectionalLexicon lexicon) : lexicon_(std::move(lexicon)) {}

    std::pair<std::string, std::string> rewrite(const std::string& question,
                                                const std::string& answer) override {
        return {mirror::swap_directional_terms(question, lexicon_),
                mirror::swap_directional_terms(answer, lexicon_)};
    }

  private:
    mirror::DirectionalLexicon lexicon_;
};

struct MockSuite {
    MockEmbeddingProvider embedding;
    MockJudge judge;
    MockRewriter rewriter;
};

// In-process reference server exposing the mocks over the wire contract;
// used by client tests and by anyone who wants a local endpoint.
class ReferenceServer {
  public:
    ReferenceServer() {
        server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
            handle_embed(req, res);
        });
        server_.Post("/judge", [this](const httplib::Request& req, httplib::Response& res) {
            handle_judge(req, res);
        });
        server_.Post("/rewrite", [this](const httplib::Request& req, httplib::Response& res) {
            handle_rewrite(req, res);
        });
    }

    // Binds to an ephemeral port on localhost; returns the base URL.
    std::string start() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        if (port_ <= 0) throw std::runtime_error("cannot bind reference server");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return "http://127.0.0.1:" + std::to_string(port_);
    }

    void stop() {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    ~ReferenceServer() { stop(); }

  private:
    void handle_embed(const httplib::Request& req, httplib::Response& res) {
        try {
            const auto j = nlohmann::json::parse(req.body);
            const auto texts = j.at("texts").get<std::vector<std::string>>();
            nlohmann::json out;
            out["vectors"] = mocks_.embedding.embed_batch(texts);
            res.set_content(out.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(e.what(), "text/plain");
        }
    }

    void handle_judge(const httplib::Request& req, httplib::Response& res) {
        try {
            const auto j = nlohmann::json::parse(req.body);
            nlohmann::json out;
            out["verdict"] = std::to_string(
                mocks_.judge.judge(j.at("pred").get<std::string>(), j.at("gt").get<std::string>()));
            res.set_content(out.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(e.what(), "text/plain");
        }
    }

    void handle_rewrite(const httplib::Request& req, httplib::Response& res) {
        try {
            const auto j = nlohmann::json::parse(req.body);
            const auto [q, a] = mocks_.rewriter.rewrite(j.at("question").get<std::string>(),
                                                        j.at("answer").get<std::string>());
            nlohmann::json out;
            out["question"] = q;
            out["answer"] = a;
            res.set_content(out.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(e.what(), "text/plain");
        }
    }

    MockSuite mocks_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace svqa::services
