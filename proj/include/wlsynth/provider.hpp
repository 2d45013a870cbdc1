#pragma once

#include "wlsynth/config.hpp"
#include "wlsynth/feature.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace wlsynth {

/// Text-in, text-out language model endpoint. Implementations raise
/// `Error(ErrorKind::Provider, ...)` on transport failures.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

/// Deterministic stand-in for a language model. It reads the TARGET and
/// POSITIVE sections of an augmentation prompt and answers according to a
/// fixed policy, so closed-loop tests know the ground truth.
class MockProvider : public Provider {
 public:
  enum class Policy {
    /// Returns the query text of the first positive example.
    CopyTopPositive,
    /// Returns an annotated query whose feature starts at
    /// `start_factor` x target and moves `rate` of the remaining gap toward
    /// the target on each further call for the same target.
    Converge,
  };
  struct Options {
    Policy policy = Policy::Converge;
    double start_factor = 1.0;
    double rate = 1.0;
  };

  MockProvider(FeatureSchema schema, Options options) : schema_(std::move(schema)), options_(options) {}

  std::string complete(const std::string& prompt) override;
  std::size_t calls() const { return calls_; }

 private:
  FeatureSchema schema_;
  Options options_;
  std::mutex mutex_;
  std::size_t calls_ = 0;
  /// Current answer per target line.
  std::map<std::string, Eigen::VectorXd> state_;
};

MockProvider::Policy parse_mock_policy(std::string_view text);

/// OpenAI-style chat completion over HTTP(S). The bearer token is read from
/// the WLSYNTH_LLM_TOKEN environment variable when set.
class HttpProvider : public Provider {
 public:
  struct Options {
    std::string endpoint;  ///< e.g. http://localhost:8080/v1/chat/completions
    std::string model = "default";
    int timeout_ms = 60'000;
  };

  explicit HttpProvider(Options options);
  std::string complete(const std::string& prompt) override;

 private:
  Options options_;
  std::string base_;
  std::string path_;
};

/// Builds the provider named by `provider.kind` (mock or http).
std::unique_ptr<Provider> make_provider(const Config& config, const FeatureSchema& schema);

}  // namespace wlsynth
