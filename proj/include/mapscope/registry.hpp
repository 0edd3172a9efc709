#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mapscope {

enum class CategoryKind { Disorder, HateSpeech, Misinformation, Control };

std::string_view to_string(CategoryKind kind) noexcept;

/// Case-insensitive; accepts "hate speech", "hate_speech", "HateSpeech" etc.
/// Throws Errc::BadCategory.
CategoryKind parse_category_kind(std::string_view text);

/// A community's class. `subclass` names the disorder and is present iff the
/// kind is Disorder.
struct Category {
  CategoryKind kind = CategoryKind::Control;
  std::optional<std::string> subclass;

  /// Classification label: the disorder subclass, otherwise the kind name
  /// ("Control", "Hate Speech", "Misinformation").
  std::string label() const;

  bool operator==(const Category&) const = default;
};

struct CommunityInfo {
  std::string name;
  Category category;
  bool iup_enabled = false;
  std::optional<std::uint32_t> expected_distilled;

  bool operator==(const CommunityInfo&) const = default;
};

enum class RegistryFormat { Json, Csv };

/// The community catalog. Immutable once loaded.
class Registry {
 public:
  Registry() = default;
  Registry(std::vector<CommunityInfo> communities, std::vector<std::string> subclass_catalog);

  const std::vector<CommunityInfo>& communities() const noexcept { return communities_; }
  const std::vector<std::string>& subclass_catalog() const noexcept { return catalog_; }
  std::size_t size() const noexcept { return communities_.size(); }
  bool empty() const noexcept { return communities_.empty(); }

  /// Exact name match first, then a case-insensitive one.
  const CommunityInfo* find(std::string_view name) const;
  const CommunityInfo& at(std::string_view name) const;

  bool operator==(const Registry& other) const {
    return communities_ == other.communities_ && catalog_ == other.catalog_;
  }

 private:
  std::vector<CommunityInfo> communities_;
  std::vector<std::string> catalog_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::unordered_map<std::string, std::size_t> by_folded_name_;
};

/// The 17 disorder classes reported in the classification tables.
std::span<const std::string_view> builtin_disorder_catalog();

/// Parse and validate a registry. Without an explicit catalog the subclass
/// catalog is the set of subclasses in first-appearance order; with one, any
/// subclass outside it is rejected with BadSubclass.
Registry load_registry(std::istream& source, RegistryFormat format,
                       std::optional<std::span<const std::string_view>> catalog = std::nullopt);
Registry load_registry_file(const std::string& path,
                            std::optional<std::span<const std::string_view>> catalog = std::nullopt);

/// Throws Errc::UnknownCommunity.
const Category& category_of(const Registry& registry, std::string_view community);

/// JSON array in the registry.json layout.
std::string registry_to_json(const Registry& registry);

}  // namespace mapscope
