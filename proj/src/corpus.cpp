#include "mapscope/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "mapscope/error.hpp"
#include "text_util.hpp"

namespace mapscope {

namespace {

struct LineError {
  std::string reason;
};

std::int64_t parse_timestamp(const nlohmann::json& value) {
  if (value.is_number_integer() || value.is_number_unsigned()) return value.get<std::int64_t>();
  if (value.is_number_float()) {
    const double d = value.get<double>();
    if (!std::isfinite(d) || d > 9.0e18 || d < -9.0e18) throw LineError{"bad_timestamp"};
    return static_cast<std::int64_t>(d);
  }
  if (value.is_string()) {
    const auto& s = value.get_ref<const std::string&>();
    if (s.empty() || s.size() > 18 ||
        !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
      throw LineError{"bad_timestamp"};
    }
    return std::stoll(s);
  }
  throw LineError{"bad_timestamp"};
}

std::string optional_text(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) throw LineError{std::string("bad_") + key};
  return it->get<std::string>();
}

std::string community_key(std::string_view subreddit) {
  auto s = detail::trim(subreddit);
  if (s.size() >= 2 && (s[0] == 'r' || s[0] == 'R') && s[1] == '/') return std::string(s);
  return "r/" + std::string(s);
}

bool index_less(const Post& a, const Post& b) {
  if (a.created_utc != b.created_utc) return a.created_utc > b.created_utc;
  return a.id < b.id;
}

}  // namespace

std::string post_text(const Post& post) {
  if (post.title.empty() && post.body.empty()) throw Error(Errc::EmptyPost, post.id);
  if (post.body.empty()) return post.title;
  if (post.title.empty()) return post.body;
  return post.title + "\n\n" + post.body;
}

Corpus::Corpus(std::vector<Post> posts, const Registry& registry) : posts_(std::move(posts)) {
  community_order_.reserve(registry.size());
  for (const auto& c : registry.communities()) {
    community_order_.push_back(c.name);
    index_.emplace(c.name, std::vector<std::size_t>{});
  }
  by_id_.reserve(posts_.size());
  for (std::size_t i = 0; i < posts_.size(); ++i) {
    const auto& p = posts_[i];
    if (!by_id_.emplace(p.id, i).second) throw Error(Errc::DuplicateId, p.id);
    auto it = index_.find(p.community);
    if (it == index_.end()) throw Error(Errc::UnknownCommunity, p.community);
    it->second.push_back(i);
  }
  for (auto& [name, ids] : index_) {
    std::sort(ids.begin(), ids.end(),
              [this](std::size_t a, std::size_t b) { return index_less(posts_[a], posts_[b]); });
  }
}

bool Corpus::has_community(std::string_view community) const {
  return index_.find(community) != index_.end();
}

std::vector<std::string> Corpus::community_ids(std::string_view community) const {
  auto it = index_.find(community);
  if (it == index_.end()) throw Error(Errc::UnknownCommunity, std::string(community));
  std::vector<std::string> ids;
  ids.reserve(it->second.size());
  for (auto i : it->second) ids.push_back(posts_[i].id);
  return ids;
}

const Post* Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &posts_[it->second];
}

IngestResult ingest(std::istream& lines, const Registry& registry, UnknownPolicy unknown_policy) {
  IngestReport report;
  std::vector<Post> posts;
  std::unordered_map<std::string, std::size_t> seen;

  auto skip = [&report](std::size_t line_no, std::string reason) {
    ++report.skipped;
    ++report.reasons[reason];
    report.details.push_back({line_no, std::move(reason)});
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    ++report.lines;

    Post post;
    try {
      auto obj = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (obj.is_discarded() || !obj.is_object()) throw LineError{"malformed_json"};

      auto id = obj.find("id");
      if (id == obj.end() || !id->is_string() || id->get_ref<const std::string&>().empty()) {
        throw LineError{"missing_id"};
      }
      post.id = id->get<std::string>();

      auto sub = obj.find("subreddit");
      if (sub == obj.end() || !sub->is_string() || detail::trim(sub->get_ref<const std::string&>()).empty()) {
        throw LineError{"missing_subreddit"};
      }
      auto ts = obj.find("created_utc");
      if (ts == obj.end()) throw LineError{"bad_timestamp"};
      post.created_utc = parse_timestamp(*ts);
      if (post.created_utc <= 0) throw LineError{"bad_timestamp"};
      post.title = optional_text(obj, "title");
      post.body = optional_text(obj, "selftext");

      const auto& raw = sub->get_ref<const std::string&>();
      const auto key = community_key(raw);
      const auto* info = registry.find(key);
      if (info == nullptr) info = registry.find(detail::trim(raw));
      if (info == nullptr) {
        if (unknown_policy == UnknownPolicy::Error) throw Error(Errc::UnknownCommunity, key);
        throw LineError{"unknown_community"};
      }
      post.community = info->name;
      if (post.title.empty() && post.body.empty()) throw LineError{"empty_post"};
    } catch (const LineError& e) {
      skip(line_no, e.reason);
      continue;
    }

    if (!seen.emplace(post.id, line_no).second) {
      throw Error(Errc::DuplicateId, "'" + post.id + "' on line " + std::to_string(line_no) +
                                         " (first seen on line " +
                                         std::to_string(seen[post.id]) + ")");
    }
    posts.push_back(std::move(post));
    ++report.accepted;
  }

  return {Corpus(std::move(posts), registry), std::move(report)};
}

std::vector<Post> select_window(const Corpus& corpus, std::string_view community,
                                std::int64_t cutoff_utc, std::size_t max_posts) {
  auto it = corpus.index_.find(community);
  if (it == corpus.index_.end()) throw Error(Errc::UnknownCommunity, std::string(community));
  const auto& order = it->second;
  // Index is newest first, so eligible posts form a suffix.
  auto first = std::partition_point(order.begin(), order.end(), [&](std::size_t i) {
    return corpus.posts_[i].created_utc > cutoff_utc;
  });
  std::vector<Post> window;
  for (; first != order.end() && window.size() < max_posts; ++first) {
    window.push_back(corpus.posts_[*first]);
  }
  return window;
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& community : corpus.communities()) {
    for (const auto& id : corpus.community_ids(community)) {
      const auto* p = corpus.find(id);
      nlohmann::ordered_json obj;
      obj["id"] = p->id;
      obj["subreddit"] = p->community.substr(p->community.rfind('/') + 1);
      obj["created_utc"] = p->created_utc;
      obj["title"] = p->title;
      obj["selftext"] = p->body;
      out << obj.dump() << '\n';
    }
  }
}

std::string report_to_json(const IngestReport& report) {
  nlohmann::ordered_json doc;
  doc["lines"] = report.lines;
  doc["accepted"] = report.accepted;
  doc["skipped"] = report.skipped;
  doc["reasons"] = report.reasons;
  auto details = nlohmann::ordered_json::array();
  for (const auto& d : report.details) details.push_back({{"line", d.line_no}, {"reason", d.reason}});
  doc["details"] = std::move(details);
  return doc.dump(2);
}

}  // namespace mapscope
