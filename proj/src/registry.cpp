#include "mapscope/registry.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "mapscope/error.hpp"
#include "text_util.hpp"

namespace mapscope {

namespace {

constexpr std::array<std::string_view, 17> kDisorderCatalog = {
    "ADHD",
    "Depression",
    "Borderline Personality Disorder (BPD)",
    "Eating Disorders",
    "Narcissistic Personality Disorder (NPD)",
    "Antisocial Personality Disorder (ASPD)",
    "Substance Use Disorder",
    "Bipolar Disorder",
    "Autism",
    "Anxiety",
    "Obsessive Compulsive Disorder (OCD)",
    "Post-Traumatic Stress Disorder (PTSD)",
    "Complex Post-Traumatic Stress Disorder (CPTSD)",
    "Suicidality",
    "Schizophrenia/Schizoaffective",
    "Schizotypal Personality Disorder",
    "Schizoid Personality Disorder",
};

struct RawRow {
  std::string name;
  std::string category;
  std::string subclass;
  std::string iup;
  std::string distilled;
};

bool parse_yes_no(std::string_view text, const std::string& row_name) {
  const auto folded = detail::fold(detail::trim(text));
  if (folded == "yes" || folded == "y" || folded == "true" || folded == "1") return true;
  if (folded == "no" || folded == "n" || folded == "false" || folded == "0" || folded.empty()) {
    return false;
  }
  throw Error(Errc::Malformed, "row '" + row_name + "': bad iup value '" + std::string(text) + "'");
}

std::optional<std::uint32_t> parse_distilled(std::string_view text, const std::string& row_name) {
  const auto trimmed = detail::trim(text);
  if (trimmed.empty()) return std::nullopt;
  std::uint64_t value = 0;
  for (char c : trimmed) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw Error(Errc::Malformed,
                  "row '" + row_name + "': bad distilled count '" + std::string(text) + "'");
    }
    value = value * 10 + static_cast<std::uint64_t>(c - '0');
    if (value > UINT32_MAX) {
      throw Error(Errc::Malformed, "row '" + row_name + "': distilled count out of range");
    }
  }
  return static_cast<std::uint32_t>(value);
}

std::vector<RawRow> read_json_rows(std::istream& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(source);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::Malformed, std::string("registry json: ") + e.what());
  }
  if (!doc.is_array()) throw Error(Errc::Malformed, "registry json must be an array");

  auto field = [](const nlohmann::json& obj, const char* key) -> std::string {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return {};
    if (it->is_string()) return it->get<std::string>();
    if (it->is_boolean()) return it->get<bool>() ? "yes" : "no";
    if (it->is_number_unsigned() || it->is_number_integer()) return it->dump();
    throw Error(Errc::Malformed, std::string("registry json: bad type for '") + key + "'");
  };

  std::vector<RawRow> rows;
  rows.reserve(doc.size());
  for (const auto& obj : doc) {
    if (!obj.is_object()) throw Error(Errc::Malformed, "registry json: row is not an object");
    rows.push_back({field(obj, "name"), field(obj, "category"), field(obj, "subclass"),
                    field(obj, "iup"), field(obj, "distilled")});
  }
  return rows;
}

std::vector<RawRow> read_csv_rows(std::istream& source) {
  std::string line;
  if (!std::getline(source, line)) throw Error(Errc::Malformed, "registry csv: missing header row");
  const auto header = detail::split_csv_line(line);

  auto column = [&](std::string_view key) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (detail::fold(detail::trim(header[i])) == key) return i;
    }
    throw Error(Errc::Malformed, "registry csv: header lacks column '" + std::string(key) + "'");
  };
  const std::size_t c_name = column("name"), c_cat = column("category"),
                    c_sub = column("subclass"), c_iup = column("iup"),
                    c_dist = column("distilled");

  std::vector<RawRow> rows;
  while (std::getline(source, line)) {
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    cells.resize(std::max(cells.size(), header.size()));
    rows.push_back({std::string(detail::trim(cells[c_name])), cells[c_cat], cells[c_sub],
                    cells[c_iup], cells[c_dist]});
  }
  return rows;
}

}  // namespace

std::string_view to_string(CategoryKind kind) noexcept {
  switch (kind) {
    case CategoryKind::Disorder: return "Disorder";
    case CategoryKind::HateSpeech: return "HateSpeech";
    case CategoryKind::Misinformation: return "Misinformation";
    case CategoryKind::Control: return "Control";
  }
  return "Control";
}

CategoryKind parse_category_kind(std::string_view text) {
  std::string key;
  for (char c : text) {
    if (c == ' ' || c == '_' || c == '-') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "disorder" || key == "psychiatricdisorder") return CategoryKind::Disorder;
  if (key == "hatespeech" || key == "hate") return CategoryKind::HateSpeech;
  if (key == "misinformation" || key == "misinfo") return CategoryKind::Misinformation;
  if (key == "control") return CategoryKind::Control;
  throw Error(Errc::BadCategory, "unknown category '" + std::string(text) + "'");
}

std::string Category::label() const {
  switch (kind) {
    case CategoryKind::Disorder: return subclass.value_or("Disorder");
    case CategoryKind::HateSpeech: return "Hate Speech";
    case CategoryKind::Misinformation: return "Misinformation";
    case CategoryKind::Control: return "Control";
  }
  return "Control";
}

Registry::Registry(std::vector<CommunityInfo> communities, std::vector<std::string> subclass_catalog)
    : communities_(std::move(communities)), catalog_(std::move(subclass_catalog)) {
  for (std::size_t i = 0; i < communities_.size(); ++i) {
    const auto& c = communities_[i];
    if (c.name.empty()) throw Error(Errc::Malformed, "community name is empty");
    if (!by_name_.emplace(c.name, i).second) {
      throw Error(Errc::DuplicateCommunity, c.name);
    }
    // Case-only collisions resolve to the first row; exact lookup still finds both.
    by_folded_name_.emplace(detail::fold(c.name), i);

    const bool is_disorder = c.category.kind == CategoryKind::Disorder;
    if (is_disorder != c.category.subclass.has_value()) {
      throw Error(Errc::BadSubclass, c.name + ": subclass must be present iff category is Disorder");
    }
    if (is_disorder &&
        std::find(catalog_.begin(), catalog_.end(), *c.category.subclass) == catalog_.end()) {
      throw Error(Errc::BadSubclass, c.name + ": subclass '" + *c.category.subclass +
                                         "' not in the subclass catalog");
    }
  }
}

const CommunityInfo* Registry::find(std::string_view name) const {
  if (auto it = by_name_.find(std::string(name)); it != by_name_.end()) {
    return &communities_[it->second];
  }
  if (auto it = by_folded_name_.find(detail::fold(name)); it != by_folded_name_.end()) {
    return &communities_[it->second];
  }
  return nullptr;
}

const CommunityInfo& Registry::at(std::string_view name) const {
  if (const auto* info = find(name)) return *info;
  throw Error(Errc::UnknownCommunity, std::string(name));
}

std::span<const std::string_view> builtin_disorder_catalog() { return kDisorderCatalog; }

Registry load_registry(std::istream& source, RegistryFormat format,
                       std::optional<std::span<const std::string_view>> catalog) {
  const auto rows = format == RegistryFormat::Json ? read_json_rows(source) : read_csv_rows(source);

  std::vector<std::string> subclasses;
  if (catalog) subclasses.assign(catalog->begin(), catalog->end());

  std::vector<CommunityInfo> communities;
  communities.reserve(rows.size());
  for (const auto& row : rows) {
    CommunityInfo info;
    info.name = std::string(detail::trim(row.name));
    info.category.kind = parse_category_kind(detail::trim(row.category));
    const auto subclass = detail::trim(row.subclass);
    if (!subclass.empty()) {
      if (info.category.kind != CategoryKind::Disorder) {
        throw Error(Errc::BadSubclass,
                    info.name + ": subclass given for a " +
                        std::string(to_string(info.category.kind)) + " community");
      }
      info.category.subclass = std::string(subclass);
      if (!catalog && std::find(subclasses.begin(), subclasses.end(), subclass) == subclasses.end()) {
        subclasses.emplace_back(subclass);
      }
    }
    info.iup_enabled = parse_yes_no(row.iup, info.name);
    info.expected_distilled = parse_distilled(row.distilled, info.name);
    communities.push_back(std::move(info));
  }
  return Registry(std::move(communities), std::move(subclasses));
}

Registry load_registry_file(const std::string& path,
                            std::optional<std::span<const std::string_view>> catalog) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open registry file '" + path + "'");
  const bool csv = path.size() >= 4 && detail::fold(path.substr(path.size() - 4)) == ".csv";
  return load_registry(in, csv ? RegistryFormat::Csv : RegistryFormat::Json, catalog);
}

const Category& category_of(const Registry& registry, std::string_view community) {
  return registry.at(community).category;
}

std::string registry_to_json(const Registry& registry) {
  auto doc = nlohmann::json::array();
  for (const auto& c : registry.communities()) {
    nlohmann::json row;
    row["name"] = c.name;
    row["category"] = std::string(to_string(c.category.kind));
    row["subclass"] = c.category.subclass ? nlohmann::json(*c.category.subclass) : nlohmann::json();
    row["iup"] = c.iup_enabled;
    row["distilled"] =
        c.expected_distilled ? nlohmann::json(*c.expected_distilled) : nlohmann::json();
    doc.push_back(std::move(row));
  }
  return doc.dump(2);
}

}  // namespace mapscope
