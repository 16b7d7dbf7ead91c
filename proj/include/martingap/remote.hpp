#pragma once

#include "martingap/predictors.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace martingap {

struct RemoteClientConfig {
    std::string endpoint;               // scheme://host[:port]
    std::string path = "/v1/logprobs";  // request path on the endpoint
    std::string model;                  // model identifier sent verbatim
    int max_concurrency = 10;           // in-flight request bound
    int max_retries = 3;                // retries after a retryable status
    int backoff_initial_ms = 100;       // doubles per retry
    double timeout_sec = 30.0;
    std::string cache_dir = ".martingap_cache";
    // The credential is read from this environment variable at request
    // time and sent in auth_header; it is never persisted or logged.
    std::string credential_env = "MARTINGAP_API_KEY";
    std::string auth_header = "Authorization";
    std::string auth_prefix = "Bearer ";
};

class RemoteError : public std::runtime_error {
  public:
    enum class Kind { config, protocol, network };
    RemoteError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

// Next-token log-probability client. Requests carry (model id, prefix
// tokens, a flag asking for per-token log-probabilities) as JSON; the
// response's "logprobs" object maps candidate tokens to natural-log
// probabilities, converted to base 2 here at the boundary.
//
// Every successful response is cached permanently on disk, one file per
// key under cache_dir, each holding a single JSON line with the request
// digest, the raw response body, and a timestamp. A cache hit never
// touches the network. Writers go through a temp-file rename, so
// concurrent readers see only complete records and retries never
// duplicate a write.
class RemoteClient {
  public:
    explicit RemoteClient(RemoteClientConfig config);
    ~RemoteClient();

    RemoteClient(const RemoteClient&) = delete;
    RemoteClient& operator=(const RemoteClient&) = delete;

    // Candidate token -> log2-probability of being the next token.
    std::map<std::string, double> logprobs(
        const std::vector<std::string>& prefix_tokens);

    static std::string cache_key(const std::string& model,
                                 const std::vector<std::string>& prefix);

    const RemoteClientConfig& config() const { return config_; }

    // Counters for harness assertions.
    long network_calls() const;
    long retries() const;
    long cache_hits() const;

  private:
    struct Impl;
    RemoteClientConfig config_;
    std::unique_ptr<Impl> impl_;
};

// Predictor over a binary alphabet served by a remote model: prefix bits
// become the tokens "0"/"1", and the next-bit probability is the
// normalized pair of returned candidates, clamped to the contract range.
class RemotePredictor final : public Predictor {
  public:
    using Predictor::predict_one;
    explicit RemotePredictor(RemoteClientConfig config);

    double predict_one(std::span<const std::uint8_t> prefix) const override;
    std::string name() const override;

    RemoteClient& client() { return *client_; }

  private:
    std::shared_ptr<RemoteClient> client_;
};

}  // namespace martingap
