#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mapscope/embed.hpp"
#include "mapscope/error.hpp"

namespace mapscope {

namespace {

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

Endpoint split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(Errc::InvalidArgument, "base_url needs a scheme: '" + base_url + "'");
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.scheme_host_port = base_url.substr(0, path_start);
  ep.path = path_start == std::string::npos ? std::string() : base_url.substr(path_start);
  while (!ep.path.empty() && ep.path.back() == '/') ep.path.pop_back();
  ep.path += "/embeddings";
  return ep;
}

std::string excerpt(const std::string& body) {
  constexpr std::size_t kMax = 200;
  return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

bool retryable(int status) { return status == 0 || status == 429 || status >= 500; }

std::vector<Vector> parse_response(const std::string& body, std::size_t expected) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw ProviderFailure(200, "unparseable response: " + excerpt(body));
  }
  auto data = doc.find("data");
  if (data == doc.end() || !data->is_array() || data->size() != expected) {
    throw ProviderFailure(200, "response 'data' does not match the request size");
  }
  std::vector<Vector> out(expected);
  std::vector<bool> filled(expected, false);
  for (const auto& item : *data) {
    const auto index = item.value("index", static_cast<std::size_t>(expected));
    if (index >= expected || filled[index]) {
      throw ProviderFailure(200, "response has a bad or repeated index");
    }
    auto emb = item.find("embedding");
    if (emb == item.end() || !emb->is_array()) {
      throw ProviderFailure(200, "response item lacks an embedding array");
    }
    Vector v;
    v.reserve(emb->size());
    // The wire values are float32; round so cache round trips are exact.
    for (const auto& x : *emb) {
      if (!x.is_number()) throw ProviderFailure(200, "non-numeric embedding entry");
      v.push_back(static_cast<double>(static_cast<float>(x.get<double>())));
    }
    check_vector(v);
    out[index] = std::move(v);
    filled[index] = true;
  }
  return out;
}

}  // namespace

std::vector<Vector> remote_embed(const ProviderConfig& cfg, std::span<const std::string> texts) {
  cfg.validate();
  if (cfg.kind != ProviderKind::Remote) throw Error(Errc::InvalidArgument, "provider is not remote");

  std::string api_key = cfg.api_key;
  if (api_key.empty()) {
    if (const char* env = std::getenv("EMBED_API_KEY")) api_key = env;
  }
  const auto ep = split_base_url(*cfg.base_url);

  httplib::Client client(ep.scheme_host_port);
  client.set_connection_timeout(cfg.timeout_seconds, 0);
  client.set_read_timeout(cfg.timeout_seconds, 0);
  client.set_write_timeout(cfg.timeout_seconds, 0);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

  std::vector<Vector> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += cfg.max_batch) {
    const std::size_t count = std::min(cfg.max_batch, texts.size() - start);
    nlohmann::json body;
    body["model"] = cfg.model;
    body["input"] = std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                             texts.begin() + static_cast<std::ptrdiff_t>(start + count));
    const auto payload = body.dump();

    for (int attempt = 0;; ++attempt) {
      auto res = client.Post(ep.path, headers, payload, "application/json");
      const int status = res ? res->status : 0;
      if (res && status >= 200 && status < 300) {
        auto batch = parse_response(res->body, count);
        for (auto& v : batch) out.push_back(std::move(v));
        break;
      }
      const std::string detail =
          res ? excerpt(res->body) : "transport error: " + httplib::to_string(res.error());
      if (!retryable(status) || attempt + 1 >= cfg.retry.max_attempts) {
        throw ProviderFailure(status, detail);
      }
      const auto delay = std::chrono::milliseconds(
          static_cast<long long>(cfg.retry.base_delay_ms) * (1LL << std::min(attempt, 20)));
      std::this_thread::sleep_for(delay);
    }
  }
  return out;
}

}  // namespace mapscope
