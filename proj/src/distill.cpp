#include "mapscope/distill.hpp"

#include <cctype>
#include <cstdio>

#include "mapscope/error.hpp"
#include "text_util.hpp"

namespace mapscope {

void TokenBudget::validate() const {
  if (max_tokens < 1) throw Error(Errc::InvalidArgument, "max_tokens must be >= 1");
  if (counter == TokenCounterKind::Plugin && !plugin) {
    throw Error(Errc::InvalidArgument, "plugin token counter selected but none supplied");
  }
}

std::string_view to_string(TokenCounterKind kind) noexcept {
  switch (kind) {
    case TokenCounterKind::ApproxChars4: return "approx_chars4";
    case TokenCounterKind::Whitespace: return "whitespace";
    case TokenCounterKind::Plugin: return "plugin";
  }
  return "approx_chars4";
}

TokenCounterKind parse_token_counter(std::string_view name) {
  const auto key = detail::fold(name);
  if (key == "approx_chars4") return TokenCounterKind::ApproxChars4;
  if (key == "whitespace") return TokenCounterKind::Whitespace;
  if (key == "plugin") return TokenCounterKind::Plugin;
  throw Error(Errc::InvalidArgument, "unknown token counter '" + std::string(name) + "'");
}

std::size_t count_tokens(std::string_view text, TokenCounterKind counter, const TokenCountFn& plugin) {
  switch (counter) {
    case TokenCounterKind::ApproxChars4:
      return (text.size() + 3) / 4;
    case TokenCounterKind::Whitespace: {
      std::size_t runs = 0;
      bool in_run = false;
      for (unsigned char c : text) {
        const bool space = std::isspace(c) != 0;
        if (!space && !in_run) ++runs;
        in_run = !space;
      }
      return runs;
    }
    case TokenCounterKind::Plugin:
      if (!plugin) throw Error(Errc::InvalidArgument, "no plugin token counter supplied");
      return plugin(text);
  }
  return 0;
}

std::size_t count_tokens(std::string_view text, const TokenBudget& budget) {
  return count_tokens(text, budget.counter, budget.plugin);
}

PackResult pack_posts(std::span<const Post> posts, const TokenBudget& budget) {
  budget.validate();
  PackResult result;
  Batch open;

  auto close = [&] {
    if (open.post_ids.empty()) return;
    result.batches.push_back(std::move(open));
    open = Batch{};
  };

  for (const auto& post : posts) {
    if (post.title.empty() && post.body.empty()) {
      result.skipped.push_back({post.id, "empty_post", 0});
      continue;
    }
    const std::string text = post_text(post);
    const std::size_t alone = count_tokens(text, budget);
    if (alone > budget.max_tokens) {
      result.skipped.push_back({post.id, "oversize", alone});
      continue;
    }
    if (!open.post_ids.empty()) {
      const std::size_t restore = open.joined_text.size();
      open.joined_text.append(kPostSeparator);
      open.joined_text.append(text);
      const std::size_t joined = count_tokens(open.joined_text, budget);
      if (joined <= budget.max_tokens) {
        open.post_ids.push_back(post.id);
        open.token_count = joined;
        continue;
      }
      open.joined_text.resize(restore);
      close();
    }
    open.post_ids.push_back(post.id);
    open.joined_text = text;
    open.token_count = alone;
  }
  close();
  return result;
}

std::string distilled_record_id(std::string_view community, std::size_t batch_index) {
  char suffix[16];
  std::snprintf(suffix, sizeof suffix, "#d%04zu", batch_index);
  return std::string(community) + suffix;
}

std::string iup_record_id(std::string_view community, std::string_view post_id) {
  return std::string(community) + "#iup-" + std::string(post_id);
}

std::vector<EmbeddingRecord> distilled_embeddings(const CommunityInfo& community,
                                                  std::span<const Post> window,
                                                  const TokenBudget& budget,
                                                  const ProviderConfig& provider,
                                                  EmbeddingCache* cache) {
  if (window.empty()) throw Error(Errc::EmptyWindow, community.name);
  auto packed = pack_posts(window, budget);
  if (packed.batches.empty()) return {};

  std::vector<std::string> texts;
  texts.reserve(packed.batches.size());
  for (const auto& b : packed.batches) texts.push_back(b.joined_text);
  auto vectors = embed_batch(provider, texts, cache);

  std::vector<EmbeddingRecord> records;
  records.reserve(packed.batches.size());
  for (std::size_t i = 0; i < packed.batches.size(); ++i) {
    EmbeddingRecord r;
    r.id = distilled_record_id(community.name, i);
    r.vector = std::move(vectors[i]);
    r.source = EmbeddingSource::Distilled;
    r.community = community.name;
    r.category = community.category;
    r.post_ids = std::move(packed.batches[i].post_ids);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<EmbeddingRecord> iup_embeddings(const CommunityInfo& community,
                                            std::span<const Post> window, std::size_t n,
                                            const ProviderConfig& provider,
                                            EmbeddingCache* cache) {
  if (n == 0) throw Error(Errc::InvalidArgument, "iup sample size must be positive");
  const std::size_t take = std::min(n, window.size());
  if (take == 0) return {};

  std::vector<std::string> texts;
  texts.reserve(take);
  for (std::size_t i = 0; i < take; ++i) texts.push_back(post_text(window[i]));
  auto vectors = embed_batch(provider, texts, cache);

  std::vector<EmbeddingRecord> records;
  records.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    EmbeddingRecord r;
    r.id = iup_record_id(community.name, window[i].id);
    r.vector = std::move(vectors[i]);
    r.source = EmbeddingSource::Iup;
    r.community = community.name;
    r.category = community.category;
    r.post_ids = {window[i].id};
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace mapscope
