#include "wlsynth/provider.hpp"

#include "wlsynth/catalog.hpp"
#include "wlsynth/error.hpp"

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include <cstdlib>

namespace wlsynth {

namespace {

std::string_view line_after(std::string_view text, std::string_view tag) {
  auto pos = text.find(tag);
  if (pos == std::string_view::npos) return {};
  pos += tag.size();
  auto end = text.find('\n', pos);
  return text.substr(pos, end == std::string_view::npos ? text.npos : end - pos);
}

}  // namespace

MockProvider::Policy parse_mock_policy(std::string_view text) {
  if (text == "copy_top_positive") return MockProvider::Policy::CopyTopPositive;
  if (text == "converge") return MockProvider::Policy::Converge;
  throw Error(ErrorKind::Config, fmt::format("unknown mock provider policy \"{}\"", text));
}

std::string MockProvider::complete(const std::string& prompt) {
  std::lock_guard lock(mutex_);
  ++calls_;
  if (options_.policy == Policy::CopyTopPositive) {
    auto sec = prompt.find("POSITIVE EXAMPLES");
    auto q = sec == std::string::npos ? sec : prompt.find("query:\n", sec);
    if (q == std::string::npos) throw Error(ErrorKind::Provider, "mock provider: prompt has no positive example");
    q += 7;
    auto end = prompt.find("\nEND QUERY", q);
    return prompt.substr(q, end == std::string::npos ? std::string::npos : end - q);
  }

  const std::string target_line(line_after(prompt, "TARGET: "));
  auto target = parse_profile_annotation("wlsynth-profile " + target_line, schema_);
  if (!target) throw Error(ErrorKind::Provider, "mock provider: prompt has no TARGET line");
  const Eigen::VectorXd goal = target->feature.metrics;
  auto [it, fresh] = state_.try_emplace(target_line, goal * options_.start_factor);
  if (!fresh) it->second += options_.rate * (goal - it->second);

  ExecutionResult answer = *target;
  answer.feature.metrics = it->second;
  return fmt::format("SELECT 1 {};", format_profile_annotation(answer, schema_));
}

HttpProvider::HttpProvider(Options options) : options_(std::move(options)) {
  const auto& url = options_.endpoint;
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorKind::Config, fmt::format("provider endpoint \"{}\" is not a URL", url));
  auto slash = url.find('/', scheme + 3);
  base_ = url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url.substr(slash);
}

std::string HttpProvider::complete(const std::string& prompt) {
  httplib::Client client(base_);
  const auto sec = options_.timeout_ms / 1000;
  const auto usec = (options_.timeout_ms % 1000) * 1000;
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
  httplib::Headers headers;
  if (const char* token = std::getenv("WLSYNTH_LLM_TOKEN"); token && *token)
    headers.emplace("Authorization", fmt::format("Bearer {}", token));

  nlohmann::json body = {{"model", options_.model},
                         {"temperature", 0},
                         {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw Error(ErrorKind::Provider, fmt::format("provider request failed: {}", httplib::to_string(res.error())));
  if (res->status != 200) throw Error(ErrorKind::Provider, fmt::format("provider returned HTTP {}", res->status));
  try {
    auto reply = nlohmann::json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Provider, fmt::format("malformed provider response: {}", e.what()));
  }
}

std::unique_ptr<Provider> make_provider(const Config& config, const FeatureSchema& schema) {
  const auto kind = config.get_string("provider.kind", "mock");
  if (kind == "mock") {
    MockProvider::Options o;
    o.policy = parse_mock_policy(config.get_string("provider.mock_policy", "converge"));
    o.start_factor = config.get_double("provider.mock_start_factor", 1.0);
    o.rate = config.get_double("provider.mock_rate", 1.0);
    return std::make_unique<MockProvider>(schema, o);
  }
  if (kind == "http") {
    HttpProvider::Options o;
    o.endpoint = config.get_string("provider.endpoint", "");
    if (o.endpoint.empty()) throw Error(ErrorKind::Config, "provider.endpoint is required for provider.kind = http");
    o.model = config.get_string("provider.model", "default");
    o.timeout_ms = static_cast<int>(config.get_int("provider.timeout_ms", 60'000));
    return std::make_unique<HttpProvider>(o);
  }
  throw Error(ErrorKind::Config, fmt::format("unknown provider.kind \"{}\"", kind));
}

}  // namespace wlsynth
