#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mapscope/classify.hpp"
#include "mapscope/corpus.hpp"
#include "mapscope/distill.hpp"
#include "mapscope/embed.hpp"
#include "mapscope/mapper.hpp"
#include "mapscope/registry.hpp"

namespace mapscope {

enum class MapperSource { Distilled, Iup, All };

std::string_view to_string(MapperSource source) noexcept;
MapperSource parse_mapper_source(std::string_view name);

/// Everything that determines a pipeline run's artifacts.
struct RunConfig {
  std::filesystem::path registry;
  std::filesystem::path corpus;
  ProviderConfig provider;
  std::size_t max_tokens = kDefaultMaxTokens;
  TokenCounterKind counter = TokenCounterKind::ApproxChars4;
  std::int64_t cutoff_utc = std::numeric_limits<std::int64_t>::max();
  std::size_t max_posts = 1000;
  std::size_t iup_n = kDefaultIupCount;
  ClassifierConfig classifier;
  std::vector<int> tasks{1, 2, 3, 4};
  std::set<std::string> exclusions;
  MapperParams mapper;
  MapperSource mapper_source = MapperSource::Distilled;
  std::optional<std::filesystem::path> cache;
  std::filesystem::path output_dir = "out";

  /// Throws Errc::InvalidArgument naming the field.
  void validate() const;
  TokenBudget budget() const;
};

/// Relative paths resolve against `base_dir`. Unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical form; paths are written as given, the output directory and the
/// cache location are left out because they do not affect artifact content.
nlohmann::ordered_json to_json(const RunConfig& cfg);

// --- stages --------------------------------------------------------------------

struct PlannedRecord {
  std::string id;
  EmbeddingSource source = EmbeddingSource::Distilled;
  std::string community;
  std::vector<std::string> post_ids;
  std::string text;
  std::size_t token_count = 0;
};

struct CommunitySkip {
  std::string community;
  std::string post_id;  // empty when the whole community is skipped
  std::string reason;
};

/// Texts to embed: distilled batches from each community's newest
/// `max_posts` posts at the cutoff and, for IUP-enabled communities, the
/// first `iup_n` posts of that same window.
struct DistillPlan {
  std::vector<PlannedRecord> records;
  std::vector<CommunitySkip> skipped;
};

DistillPlan plan_embeddings(const Registry& registry, const Corpus& corpus, const RunConfig& cfg);

void write_plan_jsonl(std::ostream& out, const DistillPlan& plan);
/// Throws Errc::Malformed.
DistillPlan read_plan_jsonl(std::istream& in);

/// Embeds every planned text, keeping plan order.
std::vector<EmbeddingRecord> embed_plan(const DistillPlan& plan, const Registry& registry,
                                        const ProviderConfig& provider, EmbeddingCache* cache = nullptr);

struct TaskOutcome {
  int task = 0;
  TaskData data;
  std::vector<Prediction> predictions;
  ConfusionMatrix confusion;
  ClassificationReport report;
  CompositionSummary composition;
};

/// label -> category kind name, for every label the registry can produce.
std::map<std::string, std::string> label_groups(const Registry& registry);

/// Throws Errc::EmptyTraining, Errc::EmptyMatrix when the task has no data.
TaskOutcome run_classification(int task, std::span<const EmbeddingRecord> records,
                               const Registry& registry, const std::set<std::string>& exclusions,
                               const ClassifierConfig& config);

/// Writes report.json, report.txt, confusion.csv, confusion.json,
/// predictions.jsonl and composition.json into `dir`.
void write_task_outcome(const TaskOutcome& outcome, const std::filesystem::path& dir);

/// Records feeding the mapper for a source selection.
std::vector<EmbeddingRecord> mapper_records(std::span<const EmbeddingRecord> records, MapperSource source);

/// Mapper graph plus per-node compositions for each grouping.
struct MapperRun {
  MapperGraph graph;
  std::map<std::string, std::vector<std::map<std::string, double>>> compositions;
  std::vector<Prediction> overlay;  // empty when no prediction overlay was built
};

/// Groups: category, community, subclass, and prediction (labels from a
/// classifier trained on disorder and control IUP embeddings minus
/// `exclusions`) when such training data exists.
MapperRun run_mapper(std::span<const EmbeddingRecord> records, MapperSource source,
                     const MapperParams& params, const Registry& registry,
                     const ClassifierConfig& classifier, const std::set<std::string>& exclusions);

nlohmann::ordered_json compositions_to_json(const MapperRun& run);

/// Per-member metadata for node inspection.
nlohmann::ordered_json members_to_json(std::span<const EmbeddingRecord> records,
                                       const std::vector<Prediction>& overlay);

/// Writes graph.json, graph.dot, graph.graphml, composition.json and
/// members.json into `dir`.
void write_mapper_run(const MapperRun& run, std::span<const EmbeddingRecord> records,
                      const std::filesystem::path& dir);

struct RunManifest {
  std::string run_id;
  std::string config_hash;
  std::map<std::string, std::string> inputs;     // name -> sha256
  std::map<std::string, std::string> artifacts;  // relative path -> sha256
  std::map<std::string, double> timings;         // stage -> seconds
  nlohmann::ordered_json summary;
};

/// The run id is a prefix of the config hash, which covers the canonical
/// config and the input file digests.
std::string run_config_hash(const RunConfig& cfg);

/// ingest -> distill -> embed -> classify -> mapper -> export into
/// cfg.output_dir. manifest.json holds no timing so identical inputs give
/// identical bytes; timings go to timings.json.
RunManifest run_pipeline(const RunConfig& cfg);

nlohmann::ordered_json manifest_to_json(const RunManifest& manifest);

// --- file helpers ----------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_file(const std::filesystem::path& path, std::string_view content);
std::string file_sha256(const std::filesystem::path& path);

std::vector<EmbeddingRecord> load_records(const std::filesystem::path& path);

}  // namespace mapscope
