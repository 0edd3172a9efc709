#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mapscope/registry.hpp"

namespace mapscope {

struct Post {
  std::string id;
  std::string community;  // canonical registry name
  std::int64_t created_utc = 0;
  std::string title;
  std::string body;

  bool operator==(const Post&) const = default;
};

/// Title and body joined by a blank line; either alone when the other is
/// empty. Throws Errc::EmptyPost when both are empty.
std::string post_text(const Post& post);

/// Posts plus a per-community index sorted newest first (ties: id ascending).
/// Every registry community has an index entry, possibly empty.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Post> posts, const Registry& registry);

  const std::vector<Post>& posts() const noexcept { return posts_; }
  std::size_t size() const noexcept { return posts_.size(); }

  bool has_community(std::string_view community) const;
  /// Post ids of a community in index order. Throws Errc::UnknownCommunity.
  std::vector<std::string> community_ids(std::string_view community) const;
  const Post* find(std::string_view id) const;

  /// Community names in registry order.
  const std::vector<std::string>& communities() const noexcept { return community_order_; }

 private:
  friend std::vector<Post> select_window(const Corpus&, std::string_view, std::int64_t,
                                         std::size_t);

  std::vector<Post> posts_;
  std::vector<std::string> community_order_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> index_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

enum class UnknownPolicy { Skip, Error };

struct SkippedLine {
  std::size_t line_no = 0;  // 1-based
  std::string reason;

  bool operator==(const SkippedLine&) const = default;
};

struct IngestReport {
  std::size_t lines = 0;
  std::size_t accepted = 0;
  std::size_t skipped = 0;
  std::map<std::string, std::size_t> reasons;  // reason -> count
  std::vector<SkippedLine> details;
};

struct IngestResult {
  Corpus corpus;
  IngestReport report;
};

/// Reads posts.jsonl ({"id","subreddit","created_utc","title","selftext"}).
/// Malformed lines, posts with neither title nor body, and (under
/// UnknownPolicy::Skip) posts from unregistered communities are skipped and
/// reported. Throws Errc::DuplicateId, and Errc::UnknownCommunity under
/// UnknownPolicy::Error.
IngestResult ingest(std::istream& lines, const Registry& registry,
                    UnknownPolicy unknown_policy = UnknownPolicy::Skip);

/// Up to max_posts posts with created_utc <= cutoff_utc, newest first.
/// Throws Errc::UnknownCommunity.
std::vector<Post> select_window(const Corpus& corpus, std::string_view community,
                                std::int64_t cutoff_utc, std::size_t max_posts);

/// Writes the corpus back out as posts.jsonl, communities in registry order
/// and posts in index order.
void write_corpus(std::ostream& out, const Corpus& corpus);

std::string report_to_json(const IngestReport& report);

}  // namespace mapscope
