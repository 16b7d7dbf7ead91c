#include "martingap/remote.hpp"

#include "martingap/bitseq.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <semaphore>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace martingap {
namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr std::ptrdiff_t kSemaphoreCeiling = 4096;

bool retryable_status(int status) {
    return status == 429 || (status >= 500 && status <= 599);
}

std::map<std::string, double> parse_logprobs(const std::string& body) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
        throw RemoteError(RemoteError::Kind::protocol,
                          "malformed response: not valid JSON");
    }
    if (!doc.is_object() || !doc.contains("logprobs") ||
        !doc["logprobs"].is_object())
        throw RemoteError(RemoteError::Kind::protocol,
                          "malformed response: missing logprobs object");
    std::map<std::string, double> out;
    for (const auto& [token, value] : doc["logprobs"].items()) {
        if (!value.is_number())
            throw RemoteError(RemoteError::Kind::protocol,
                              "malformed response: non-numeric logprob");
        // Services report natural-log probabilities; bits everywhere else.
        out[token] = value.get<double>() / kLn2;
    }
    return out;
}

}  // namespace

struct RemoteClient::Impl {
    explicit Impl(int concurrency)
        : slots(std::min<std::ptrdiff_t>(concurrency, kSemaphoreCeiling)) {}

    std::counting_semaphore<kSemaphoreCeiling> slots;
    std::atomic<long> network_calls{0};
    std::atomic<long> retries{0};
    std::atomic<long> cache_hits{0};
};

RemoteClient::RemoteClient(RemoteClientConfig config)
    : config_(std::move(config)) {
    if (config_.endpoint.empty())
        throw RemoteError(RemoteError::Kind::config, "endpoint not configured");
    if (config_.model.empty())
        throw RemoteError(RemoteError::Kind::config, "model id not configured");
    if (config_.max_concurrency < 1)
        throw RemoteError(RemoteError::Kind::config,
                          "max concurrency must be at least 1");
    if (config_.max_retries < 0)
        throw RemoteError(RemoteError::Kind::config,
                          "max retries must be non-negative");
    if (config_.cache_dir.empty())
        throw RemoteError(RemoteError::Kind::config,
                          "cache directory not configured");
    std::error_code ec;
    std::filesystem::create_directories(config_.cache_dir, ec);
    if (ec)
        throw RemoteError(RemoteError::Kind::config,
                          "cannot create cache directory " + config_.cache_dir);
    impl_ = std::make_unique<Impl>(config_.max_concurrency);
}

RemoteClient::~RemoteClient() = default;

long RemoteClient::network_calls() const { return impl_->network_calls; }
long RemoteClient::retries() const { return impl_->retries; }
long RemoteClient::cache_hits() const { return impl_->cache_hits; }

std::string RemoteClient::cache_key(const std::string& model,
                                    const std::vector<std::string>& prefix) {
    // Unit/record separators frame the fields so ("ab","c") and ("a","bc")
    // hash differently.
    std::string framed = model;
    framed.push_back('\x1f');
    for (const auto& token : prefix) {
        framed += token;
        framed.push_back('\x1e');
    }
    return digest_hex(fnv1a64(framed.data(), framed.size()));
}

std::map<std::string, double> RemoteClient::logprobs(
    const std::vector<std::string>& prefix_tokens) {
    const std::string key = cache_key(config_.model, prefix_tokens);
    const std::filesystem::path record_path =
        std::filesystem::path(config_.cache_dir) / (key + ".json");

    {
        std::ifstream in(record_path);
        if (in) {
            std::string line;
            std::getline(in, line);
            try {
                nlohmann::json record = nlohmann::json::parse(line);
                auto out = parse_logprobs(record.at("response"));
                impl_->cache_hits.fetch_add(1);
                return out;
            } catch (...) {
                // Unreadable record: fall through and refetch.
            }
        }
    }

    const char* credential = std::getenv(config_.credential_env.c_str());
    if (credential == nullptr || credential[0] == '\0')
        throw RemoteError(RemoteError::Kind::config,
                          "credential environment variable " +
                              config_.credential_env + " is not set");

    nlohmann::json request = {
        {"model", config_.model},
        {"prefix", prefix_tokens},
        {"logprobs", true},
    };
    const std::string request_body = request.dump();

    impl_->slots.acquire();
    struct Release {
        std::counting_semaphore<kSemaphoreCeiling>& slots;
        ~Release() { slots.release(); }
    } release{impl_->slots};

    std::string body;
    int attempt = 0;
    for (;;) {
        httplib::Client http(config_.endpoint);
        http.set_connection_timeout(std::chrono::milliseconds(
            static_cast<long>(config_.timeout_sec * 1000)));
        http.set_read_timeout(std::chrono::milliseconds(
            static_cast<long>(config_.timeout_sec * 1000)));
        httplib::Headers headers = {
            {config_.auth_header, config_.auth_prefix + credential}};
        impl_->network_calls.fetch_add(1);
        auto res = http.Post(config_.path, headers, request_body,
                             "application/json");

        if (res && res->status >= 200 && res->status < 300) {
            body = res->body;
            break;
        }
        if (res && res->status == 401)
            throw RemoteError(RemoteError::Kind::config,
                              "authentication rejected by endpoint");
        bool retryable = !res || retryable_status(res->status);
        if (!retryable)
            throw RemoteError(RemoteError::Kind::protocol,
                              "unexpected response status " +
                                  std::to_string(res->status));
        if (attempt >= config_.max_retries) {
            std::string reason =
                res ? "status " + std::to_string(res->status)
                    : "transport error";
            throw RemoteError(RemoteError::Kind::network,
                              "request failed after " +
                                  std::to_string(attempt) + " retries (" +
                                  reason + ")");
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(
            static_cast<long>(config_.backoff_initial_ms) << attempt));
        ++attempt;
        impl_->retries.fetch_add(1);
    }

    auto out = parse_logprobs(body);

    nlohmann::json record = {
        {"key", key},
        {"request", request},
        {"response", body},
        {"timestamp", static_cast<long>(std::time(nullptr))},
    };
    // Temp-file rename keeps readers off partial records and makes a
    // racing duplicate write harmless.
    std::filesystem::path tmp = record_path;
    tmp += ".tmp" + std::to_string(
                        std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream outf(tmp, std::ios::trunc);
        outf << record.dump() << "\n";
    }
    std::error_code ec;
    std::filesystem::rename(tmp, record_path, ec);
    if (ec) std::filesystem::remove(tmp, ec);

    return out;
}

RemotePredictor::RemotePredictor(RemoteClientConfig config)
    : client_(std::make_shared<RemoteClient>(std::move(config))) {}

double RemotePredictor::predict_one(
    std::span<const std::uint8_t> prefix) const {
    std::vector<std::string> tokens;
    tokens.reserve(prefix.size());
    for (std::uint8_t b : prefix) tokens.emplace_back(b ? "1" : "0");
    auto lp = client_->logprobs(tokens);
    auto it0 = lp.find("0");
    auto it1 = lp.find("1");
    if (it0 == lp.end() || it1 == lp.end())
        throw RemoteError(RemoteError::Kind::protocol,
                          "response lacks candidates for both symbols");
    double p0 = std::exp2(it0->second);
    double p1 = std::exp2(it1->second);
    if (!(p0 + p1 > 0.0))
        throw RemoteError(RemoteError::Kind::protocol,
                          "response probabilities sum to zero");
    return clamp_prob(p1 / (p0 + p1));
}

std::string RemotePredictor::name() const {
    return "remote:" + client_->config().model;
}

}  // namespace martingap
