#pragma once

#include <cstddef>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mapscope/hash.hpp"
#include "mapscope/registry.hpp"

namespace mapscope {

inline constexpr std::size_t kEmbeddingDim = 1536;
inline constexpr std::string_view kDefaultModel = "text-embedding-ada-002";

using Vector = std::vector<double>;

/// Throws Errc::BadVector unless the vector has `dim` finite entries.
void check_vector(std::span<const double> v, std::size_t dim = kEmbeddingDim);

/// Deterministic signed feature hashing: lowercased alphanumeric words,
/// unigrams plus adjacent bigrams, FNV-1a 64 into 1536 buckets, sign from the
/// top hash bit, then L2 normalization. Bytes >= 0x80 count as word
/// characters so UTF-8 words survive. Throws Errc::EmptyInput when the text
/// has no word characters.
Vector local_embed(std::string_view text);

/// The word tokens local_embed hashes (exposed for tests and diagnostics).
std::vector<std::string> local_tokens(std::string_view text);

enum class ProviderKind { Remote, Local };

struct RetryPolicy {
  int max_attempts = 5;
  int base_delay_ms = 500;
};

struct ProviderConfig {
  ProviderKind kind = ProviderKind::Local;
  std::string model = std::string(kDefaultModel);
  std::optional<std::string> base_url;  // required iff kind == Remote
  std::size_t max_batch = 64;
  RetryPolicy retry;
  std::string api_key;  // falls back to $EMBED_API_KEY when empty
  int timeout_seconds = 60;

  /// Throws Errc::InvalidArgument.
  void validate() const;
};

nlohmann::json to_json(const ProviderConfig& cfg);  // api_key is never serialized
ProviderConfig provider_from_json(const nlohmann::json& j);

/// Append-only on-disk vector cache keyed by sha256(model, text).
///
/// File layout: a sequence of records, each a little-endian uint32 payload
/// length followed by the payload (32-byte key, then `dim` little-endian
/// float32 values). Vectors are stored as float32, so `get` returns the
/// float32-rounded value of what was `put`.
///
/// Reads take a shared lock and writes an exclusive one, so a single cache
/// can back concurrent embed_batch calls.
class EmbeddingCache {
 public:
  /// Opens (creating if absent) the cache file. A truncated or malformed
  /// file throws Errc::CacheCorrupt, unless `rebuild_if_corrupt` is set, in
  /// which case the file is truncated and the cache starts empty.
  explicit EmbeddingCache(std::string path, bool rebuild_if_corrupt = false,
                          std::size_t dim = kEmbeddingDim);

  static Digest key_for(std::string_view model, std::string_view text);

  std::optional<Vector> get(const Digest& key) const;
  void put(const Digest& key, std::span<const double> vector);
  std::size_t size() const;
  const std::string& path() const noexcept { return path_; }

 private:
  struct DigestHash {
    std::size_t operator()(const Digest& d) const noexcept;
  };

  std::string path_;
  std::size_t dim_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<Digest, std::vector<float>, DigestHash> entries_;
};

/// One vector per text, order-aligned, each checked at the 1536-D boundary.
/// Throws Errc::EmptyInput for an empty list or an empty text; remote
/// failures surface as ProviderFailure. The cache, when given, is consulted
/// and filled for the remote provider only (the local one is pure and cheap).
std::vector<Vector> embed_batch(const ProviderConfig& cfg, std::span<const std::string> texts,
                                EmbeddingCache* cache = nullptr);

/// Remote OpenAI-compatible client; batches by cfg.max_batch and retries
/// 429/5xx and transport failures with exponential backoff.
std::vector<Vector> remote_embed(const ProviderConfig& cfg, std::span<const std::string> texts);

enum class EmbeddingSource { Distilled, Iup };

std::string_view to_string(EmbeddingSource source) noexcept;

struct EmbeddingRecord {
  std::string id;
  Vector vector;
  EmbeddingSource source = EmbeddingSource::Distilled;
  std::string community;
  Category category;
  std::vector<std::string> post_ids;

  bool operator==(const EmbeddingRecord&) const = default;
};

/// Distilled records need at least one post id, IUP records exactly one.
/// Throws Errc::Malformed.
void validate_record(const EmbeddingRecord& record);

void write_records_jsonl(std::ostream& out, std::span<const EmbeddingRecord> records);
/// Throws Errc::Malformed (with the line number) or Errc::BadVector.
std::vector<EmbeddingRecord> read_records_jsonl(std::istream& in);

}  // namespace mapscope
