#include "mapscope/embed.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "mapscope/error.hpp"

namespace mapscope {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

void add_feature(Vector& acc, std::string_view feature) {
  const std::uint64_t h = fnv1a64(feature);
  const auto bucket = static_cast<std::size_t>(h % kEmbeddingDim);
  acc[bucket] += (h >> 63) == 0 ? 1.0 : -1.0;
}

void append_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void check_vector(std::span<const double> v, std::size_t dim) {
  if (v.size() != dim) {
    throw Error(Errc::BadVector,
                "expected " + std::to_string(dim) + " dimensions, got " + std::to_string(v.size()));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(Errc::BadVector, "non-finite entry");
  }
}

std::vector<std::string> local_tokens(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

Vector local_embed(std::string_view text) {
  const auto words = local_tokens(text);
  if (words.empty()) throw Error(Errc::EmptyInput, "text has no alphanumeric content");

  Vector acc(kEmbeddingDim, 0.0);
  std::string bigram;
  for (std::size_t i = 0; i < words.size(); ++i) {
    add_feature(acc, words[i]);
    if (i > 0) {
      bigram.assign(words[i - 1]);
      bigram.push_back(' ');
      bigram.append(words[i]);
      add_feature(acc, bigram);
    }
  }

  double norm2 = 0.0;
  for (double x : acc) norm2 += x * x;
  if (norm2 == 0.0) throw Error(Errc::EmptyInput, "feature hashing cancelled to zero");
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : acc) x *= inv;
  return acc;
}

void ProviderConfig::validate() const {
  if (kind == ProviderKind::Remote && (!base_url || base_url->empty())) {
    throw Error(Errc::InvalidArgument, "remote provider requires base_url");
  }
  if (kind == ProviderKind::Local && base_url) {
    throw Error(Errc::InvalidArgument, "base_url is only valid for the remote provider");
  }
  if (max_batch == 0) throw Error(Errc::InvalidArgument, "max_batch must be positive");
  if (retry.max_attempts < 1) throw Error(Errc::InvalidArgument, "retry.max_attempts must be >= 1");
  if (retry.base_delay_ms < 0) throw Error(Errc::InvalidArgument, "retry.base_delay_ms must be >= 0");
  if (model.empty()) throw Error(Errc::InvalidArgument, "model must be non-empty");
}

nlohmann::json to_json(const ProviderConfig& cfg) {
  nlohmann::json j;
  j["kind"] = cfg.kind == ProviderKind::Remote ? "remote" : "local";
  j["model"] = cfg.model;
  j["base_url"] = cfg.base_url ? nlohmann::json(*cfg.base_url) : nlohmann::json();
  j["max_batch"] = cfg.max_batch;
  j["retry"] = {{"max_attempts", cfg.retry.max_attempts}, {"base_delay_ms", cfg.retry.base_delay_ms}};
  j["timeout_seconds"] = cfg.timeout_seconds;
  return j;
}

ProviderConfig provider_from_json(const nlohmann::json& j) {
  ProviderConfig cfg;
  try {
    const auto kind = j.value("kind", std::string("local"));
    if (kind == "remote") {
      cfg.kind = ProviderKind::Remote;
    } else if (kind != "local") {
      throw Error(Errc::InvalidArgument, "provider.kind must be 'local' or 'remote'");
    }
    cfg.model = j.value("model", cfg.model);
    if (auto it = j.find("base_url"); it != j.end() && !it->is_null()) {
      cfg.base_url = it->get<std::string>();
    }
    cfg.max_batch = j.value("max_batch", cfg.max_batch);
    if (auto it = j.find("retry"); it != j.end()) {
      cfg.retry.max_attempts = it->value("max_attempts", cfg.retry.max_attempts);
      cfg.retry.base_delay_ms = it->value("base_delay_ms", cfg.retry.base_delay_ms);
    }
    cfg.timeout_seconds = j.value("timeout_seconds", cfg.timeout_seconds);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("provider config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

// --- cache -------------------------------------------------------------------

std::size_t EmbeddingCache::DigestHash::operator()(const Digest& d) const noexcept {
  std::size_t h = 0;
  std::memcpy(&h, d.data(), sizeof h);
  return h;
}

EmbeddingCache::EmbeddingCache(std::string path, bool rebuild_if_corrupt, std::size_t dim)
    : path_(std::move(path)), dim_(dim) {
  std::ifstream in(path_, std::ios::binary);
  if (!in) {
    std::ofstream create(path_, std::ios::binary | std::ios::app);
    if (!create) throw Error(Errc::Io, "cannot create cache file '" + path_ + "'");
    return;
  }
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t payload = 32 + 4 * dim_;

  std::size_t pos = 0;
  std::string problem;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < 4) {
      problem = "truncated length prefix";
      break;
    }
    const std::uint32_t len = read_u32_le(data + pos);
    if (len != payload) {
      problem = "record length " + std::to_string(len) + " != " + std::to_string(payload);
      break;
    }
    if (bytes.size() - pos - 4 < payload) {
      problem = "truncated record";
      break;
    }
    Digest key;
    std::memcpy(key.data(), data + pos + 4, key.size());
    std::vector<float> values(dim_);
    const unsigned char* p = data + pos + 4 + 32;
    for (std::size_t i = 0; i < dim_; ++i) values[i] = std::bit_cast<float>(read_u32_le(p + 4 * i));
    entries_.insert_or_assign(key, std::move(values));
    pos += 4 + payload;
  }

  if (!problem.empty()) {
    if (!rebuild_if_corrupt) throw Error(Errc::CacheCorrupt, path_ + ": " + problem);
    entries_.clear();
    std::ofstream truncate(path_, std::ios::binary | std::ios::trunc);
    if (!truncate) throw Error(Errc::Io, "cannot rebuild cache file '" + path_ + "'");
  }
}

Digest EmbeddingCache::key_for(std::string_view model, std::string_view text) {
  std::string material;
  material.reserve(model.size() + 1 + text.size());
  material.append(model);
  material.push_back('\0');
  material.append(text);
  return sha256(material);
}

std::optional<Vector> EmbeddingCache::get(const Digest& key) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return Vector(it->second.begin(), it->second.end());
}

void EmbeddingCache::put(const Digest& key, std::span<const double> vector) {
  check_vector(vector, dim_);
  std::vector<float> values(vector.begin(), vector.end());

  std::string record;
  record.reserve(4 + 32 + 4 * dim_);
  append_u32_le(record, static_cast<std::uint32_t>(32 + 4 * dim_));
  record.append(reinterpret_cast<const char*>(key.data()), key.size());
  for (float f : values) append_u32_le(record, std::bit_cast<std::uint32_t>(f));

  std::unique_lock lock(mutex_);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  out.write(record.data(), static_cast<std::streamsize>(record.size()));
  out.flush();
  if (!out) throw Error(Errc::Io, "cannot append to cache file '" + path_ + "'");
  entries_.insert_or_assign(key, std::move(values));
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

// --- batch entry point ---------------------------------------------------------

std::vector<Vector> embed_batch(const ProviderConfig& cfg, std::span<const std::string> texts,
                                EmbeddingCache* cache) {
  if (texts.empty()) throw Error(Errc::EmptyInput, "no texts to embed");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) throw Error(Errc::EmptyInput, "text " + std::to_string(i) + " is empty");
  }
  cfg.validate();

  std::vector<Vector> out(texts.size());
  if (cfg.kind == ProviderKind::Local) {
    for (std::size_t i = 0; i < texts.size(); ++i) out[i] = local_embed(texts[i]);
  } else {
    std::vector<std::size_t> missing;
    std::vector<std::string> missing_texts;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (cache) {
        if (auto hit = cache->get(EmbeddingCache::key_for(cfg.model, texts[i]))) {
          out[i] = std::move(*hit);
          continue;
        }
      }
      missing.push_back(i);
      missing_texts.push_back(texts[i]);
    }
    if (!missing.empty()) {
      auto fetched = remote_embed(cfg, missing_texts);
      for (std::size_t m = 0; m < missing.size(); ++m) {
        if (cache) cache->put(EmbeddingCache::key_for(cfg.model, missing_texts[m]), fetched[m]);
        out[missing[m]] = std::move(fetched[m]);
      }
    }
  }
  for (const auto& v : out) check_vector(v);
  return out;
}

// --- records -------------------------------------------------------------------

std::string_view to_string(EmbeddingSource source) noexcept {
  return source == EmbeddingSource::Distilled ? "distilled" : "iup";
}

void validate_record(const EmbeddingRecord& record) {
  if (record.id.empty()) throw Error(Errc::Malformed, "embedding record without id");
  if (record.source == EmbeddingSource::Distilled && record.post_ids.empty()) {
    throw Error(Errc::Malformed, record.id + ": distilled record needs at least one post id");
  }
  if (record.source == EmbeddingSource::Iup && record.post_ids.size() != 1) {
    throw Error(Errc::Malformed, record.id + ": iup record needs exactly one post id");
  }
}

void write_records_jsonl(std::ostream& out, std::span<const EmbeddingRecord> records) {
  for (const auto& r : records) {
    nlohmann::ordered_json obj;
    obj["id"] = r.id;
    obj["source"] = std::string(to_string(r.source));
    obj["community"] = r.community;
    obj["category"] = std::string(to_string(r.category.kind));
    obj["subclass"] = r.category.subclass ? nlohmann::ordered_json(*r.category.subclass)
                                          : nlohmann::ordered_json();
    obj["post_ids"] = r.post_ids;
    obj["vector"] = r.vector;
    out << obj.dump() << '\n';
  }
}

std::vector<EmbeddingRecord> read_records_jsonl(std::istream& in) {
  std::vector<EmbeddingRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = "embeddings line " + std::to_string(line_no) + ": ";
    EmbeddingRecord r;
    try {
      const auto obj = nlohmann::json::parse(line);
      r.id = obj.at("id").get<std::string>();
      const auto source = obj.at("source").get<std::string>();
      if (source == "distilled") {
        r.source = EmbeddingSource::Distilled;
      } else if (source == "iup") {
        r.source = EmbeddingSource::Iup;
      } else {
        throw Error(Errc::Malformed, where + "unknown source '" + source + "'");
      }
      r.community = obj.at("community").get<std::string>();
      r.category.kind = parse_category_kind(obj.at("category").get<std::string>());
      if (auto it = obj.find("subclass"); it != obj.end() && !it->is_null()) {
        r.category.subclass = it->get<std::string>();
      }
      r.post_ids = obj.at("post_ids").get<std::vector<std::string>>();
      r.vector = obj.at("vector").get<Vector>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::Malformed, where + e.what());
    }
    if ((r.category.kind == CategoryKind::Disorder) != r.category.subclass.has_value()) {
      throw Error(Errc::BadSubclass, where + "subclass must be present iff category is Disorder");
    }
    validate_record(r);
    const std::size_t dim = records.empty() ? r.vector.size() : records.front().vector.size();
    if (dim == 0) throw Error(Errc::BadVector, where + "empty vector");
    check_vector(r.vector, dim);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace mapscope
