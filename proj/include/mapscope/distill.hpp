#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mapscope/corpus.hpp"
#include "mapscope/embed.hpp"
#include "mapscope/registry.hpp"

namespace mapscope {

/// Strictly below the 8192-token model limit.
inline constexpr std::size_t kDefaultMaxTokens = 8191;
inline constexpr std::size_t kDefaultIupCount = 50;
inline constexpr std::string_view kPostSeparator = "\n\n";

enum class TokenCounterKind { ApproxChars4, Whitespace, Plugin };

using TokenCountFn = std::function<std::size_t(std::string_view)>;

struct TokenBudget {
  std::size_t max_tokens = kDefaultMaxTokens;
  TokenCounterKind counter = TokenCounterKind::ApproxChars4;
  TokenCountFn plugin;  // used iff counter == Plugin

  void validate() const;
};

std::string_view to_string(TokenCounterKind kind) noexcept;
TokenCounterKind parse_token_counter(std::string_view name);

/// ApproxChars4: ceil(bytes / 4). Whitespace: number of non-whitespace runs.
/// Plugin: whatever the supplied function says.
std::size_t count_tokens(std::string_view text, TokenCounterKind counter,
                         const TokenCountFn& plugin = {});
std::size_t count_tokens(std::string_view text, const TokenBudget& budget);

struct Batch {
  std::vector<std::string> post_ids;
  std::string joined_text;
  std::size_t token_count = 0;

  bool operator==(const Batch&) const = default;
};

struct SkippedPost {
  std::string post_id;
  std::string reason;  // "oversize" or "empty_post"
  std::size_t token_count = 0;

  bool operator==(const SkippedPost&) const = default;
};

struct PackResult {
  std::vector<Batch> batches;
  std::vector<SkippedPost> skipped;
};

/// Greedy in-order packing. Each post joins the open batch if the joined
/// text (separator included) still fits the budget; otherwise the batch is
/// closed and a new one starts. A post that alone exceeds the budget is
/// skipped, never split or truncated.
PackResult pack_posts(std::span<const Post> posts, const TokenBudget& budget);

/// One distilled record per packed batch. Throws Errc::EmptyWindow.
std::vector<EmbeddingRecord> distilled_embeddings(const CommunityInfo& community,
                                                  std::span<const Post> window,
                                                  const TokenBudget& budget,
                                                  const ProviderConfig& provider,
                                                  EmbeddingCache* cache = nullptr);

/// Individually embeds the first min(n, window size) posts.
/// Throws Errc::InvalidArgument for n == 0.
std::vector<EmbeddingRecord> iup_embeddings(const CommunityInfo& community,
                                            std::span<const Post> window, std::size_t n,
                                            const ProviderConfig& provider,
                                            EmbeddingCache* cache = nullptr);

std::string distilled_record_id(std::string_view community, std::size_t batch_index);
std::string iup_record_id(std::string_view community, std::string_view post_id);

}  // namespace mapscope
