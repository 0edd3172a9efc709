#include "mapscope/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "mapscope/error.hpp"
#include "mapscope/graph_io.hpp"
#include "mapscope/hash.hpp"
#include "text_util.hpp"

namespace mapscope {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kConfigKeys = {
    "registry",   "corpus",     "provider", "max_tokens", "counter",       "cutoff_utc",
    "max_posts",  "iup_n",      "classifier", "tasks",    "exclusions",    "mapper",
    "mapper_source", "cache",   "output_dir"};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
T field(const nlohmann::json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::InvalidArgument, std::string(key) + ": wrong type");
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string_view to_string(MapperSource source) noexcept {
  switch (source) {
    case MapperSource::Distilled: return "distilled";
    case MapperSource::Iup: return "iup";
    case MapperSource::All: return "all";
  }
  return "distilled";
}

MapperSource parse_mapper_source(std::string_view name) {
  const auto key = detail::fold(name);
  if (key == "distilled") return MapperSource::Distilled;
  if (key == "iup") return MapperSource::Iup;
  if (key == "all") return MapperSource::All;
  throw Error(Errc::InvalidArgument, "source must be distilled, iup or all");
}

void RunConfig::validate() const {
  provider.validate();
  budget().validate();
  if (max_posts == 0) throw Error(Errc::InvalidArgument, "max_posts: must be >= 1");
  if (iup_n == 0) throw Error(Errc::InvalidArgument, "iup_n: must be >= 1");
  if (classifier.k == 0) throw Error(Errc::InvalidArgument, "classifier.k: must be >= 1");
  for (int t : tasks) {
    if (t < 1 || t > 4) throw Error(Errc::InvalidArgument, "tasks: entries must be 1..4");
  }
  mapper.validate();
}

TokenBudget RunConfig::budget() const {
  TokenBudget b;
  b.max_tokens = max_tokens;
  b.counter = counter;
  return b;
}

RunConfig run_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "run config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kConfigKeys.count(key)) throw Error(Errc::InvalidArgument, "unknown config key '" + key + "'");
  }
  RunConfig cfg;
  cfg.registry = resolve(base_dir, field<std::string>(j, "registry", ""));
  cfg.corpus = resolve(base_dir, field<std::string>(j, "corpus", ""));
  if (j.contains("provider")) cfg.provider = provider_from_json(j.at("provider"));
  cfg.max_tokens = field(j, "max_tokens", cfg.max_tokens);
  if (j.contains("counter")) cfg.counter = parse_token_counter(field<std::string>(j, "counter", ""));
  cfg.cutoff_utc = field(j, "cutoff_utc", cfg.cutoff_utc);
  cfg.max_posts = field(j, "max_posts", cfg.max_posts);
  cfg.iup_n = field(j, "iup_n", cfg.iup_n);
  if (j.contains("classifier")) cfg.classifier = classifier_from_json(j.at("classifier"));
  cfg.tasks = field(j, "tasks", cfg.tasks);
  cfg.exclusions = field(j, "exclusions", cfg.exclusions);
  if (j.contains("mapper")) cfg.mapper = mapper_params_from_json(j.at("mapper"));
  if (j.contains("mapper_source")) {
    cfg.mapper_source = parse_mapper_source(field<std::string>(j, "mapper_source", ""));
  }
  if (auto c = field<std::string>(j, "cache", ""); !c.empty()) cfg.cache = resolve(base_dir, c);
  if (auto o = field<std::string>(j, "output_dir", ""); !o.empty()) cfg.output_dir = resolve(base_dir, o);
  if (cfg.registry.empty()) throw Error(Errc::InvalidArgument, "registry: required");
  if (cfg.corpus.empty()) throw Error(Errc::InvalidArgument, "corpus: required");
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::InvalidArgument, "config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["registry"] = cfg.registry.generic_string();
  j["corpus"] = cfg.corpus.generic_string();
  j["provider"] = to_json(cfg.provider);
  j["max_tokens"] = cfg.max_tokens;
  j["counter"] = std::string(to_string(cfg.counter));
  j["cutoff_utc"] = cfg.cutoff_utc;
  j["max_posts"] = cfg.max_posts;
  j["iup_n"] = cfg.iup_n;
  j["classifier"] = to_json(cfg.classifier);
  j["tasks"] = cfg.tasks;
  j["exclusions"] = cfg.exclusions;
  j["mapper"] = to_json(cfg.mapper);
  j["mapper_source"] = std::string(to_string(cfg.mapper_source));
  return j;
}

// --- distill / embed -------------------------------------------------------------

DistillPlan plan_embeddings(const Registry& registry, const Corpus& corpus, const RunConfig& cfg) {
  cfg.validate();
  const auto budget = cfg.budget();
  DistillPlan plan;
  for (const auto& info : registry.communities()) {
    const auto window = select_window(corpus, info.name, cfg.cutoff_utc, cfg.max_posts);
    if (window.empty()) {
      plan.skipped.push_back({info.name, "", "empty_window"});
      continue;
    }
    auto packed = pack_posts(window, budget);
    for (auto& s : packed.skipped) plan.skipped.push_back({info.name, s.post_id, s.reason});
    for (std::size_t b = 0; b < packed.batches.size(); ++b) {
      auto& batch = packed.batches[b];
      plan.records.push_back({distilled_record_id(info.name, b), EmbeddingSource::Distilled, info.name,
                              std::move(batch.post_ids), std::move(batch.joined_text), batch.token_count});
    }
    if (!info.iup_enabled) continue;
    for (std::size_t i = 0; i < std::min(cfg.iup_n, window.size()); ++i) {
      const auto& post = window[i];
      auto text = post_text(post);
      const auto tokens = count_tokens(text, budget);
      if (tokens > budget.max_tokens) {
        plan.skipped.push_back({info.name, post.id, "oversize"});
        continue;
      }
      plan.records.push_back({iup_record_id(info.name, post.id), EmbeddingSource::Iup, info.name,
                              {post.id}, std::move(text), tokens});
    }
  }
  return plan;
}

void write_plan_jsonl(std::ostream& out, const DistillPlan& plan) {
  for (const auto& r : plan.records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["source"] = std::string(to_string(r.source));
    j["community"] = r.community;
    j["post_ids"] = r.post_ids;
    j["token_count"] = r.token_count;
    j["text"] = r.text;
    out << j.dump() << '\n';
  }
  for (const auto& s : plan.skipped) {
    nlohmann::ordered_json j;
    j["skipped"] = s.community;
    j["post_id"] = s.post_id;
    j["reason"] = s.reason;
    out << j.dump() << '\n';
  }
}

DistillPlan read_plan_jsonl(std::istream& in) {
  DistillPlan plan;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("skipped")) {
        plan.skipped.push_back({j.at("skipped").get<std::string>(), j.value("post_id", std::string()),
                                j.at("reason").get<std::string>()});
        continue;
      }
      PlannedRecord r;
      r.id = j.at("id").get<std::string>();
      const auto source = j.at("source").get<std::string>();
      if (source == "distilled") r.source = EmbeddingSource::Distilled;
      else if (source == "iup") r.source = EmbeddingSource::Iup;
      else throw Error(Errc::Malformed, "bad source '" + source + "'");
      r.community = j.at("community").get<std::string>();
      r.post_ids = j.at("post_ids").get<std::vector<std::string>>();
      r.token_count = j.at("token_count").get<std::size_t>();
      r.text = j.at("text").get<std::string>();
      plan.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::Malformed, "plan line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return plan;
}

std::vector<EmbeddingRecord> embed_plan(const DistillPlan& plan, const Registry& registry,
                                        const ProviderConfig& provider, EmbeddingCache* cache) {
  std::vector<EmbeddingRecord> out;
  if (plan.records.empty()) return out;
  std::vector<std::string> texts;
  texts.reserve(plan.records.size());
  for (const auto& r : plan.records) texts.push_back(r.text);
  auto vectors = embed_batch(provider, texts, cache);
  out.reserve(plan.records.size());
  for (std::size_t i = 0; i < plan.records.size(); ++i) {
    const auto& r = plan.records[i];
    out.push_back({r.id, std::move(vectors[i]), r.source, r.community, category_of(registry, r.community),
                   r.post_ids});
  }
  return out;
}

// --- classify ----------------------------------------------------------------------

std::map<std::string, std::string> label_groups(const Registry& registry) {
  std::map<std::string, std::string> groups;
  for (const auto& sub : registry.subclass_catalog()) groups[sub] = "Disorder";
  for (const auto& c : registry.communities()) {
    groups[c.category.label()] = std::string(to_string(c.category.kind));
  }
  for (auto kind : {CategoryKind::HateSpeech, CategoryKind::Misinformation, CategoryKind::Control}) {
    groups[Category{kind, std::nullopt}.label()] = std::string(to_string(kind));
  }
  return groups;
}

TaskOutcome run_classification(int task, std::span<const EmbeddingRecord> records,
                               const Registry& registry, const std::set<std::string>& exclusions,
                               const ClassifierConfig& config) {
  TaskOutcome out;
  out.task = task;
  out.data = build_task(task, records, registry);
  if (out.data.test.empty()) throw Error(Errc::EmptyMatrix, "task has no test records");
  out.predictions = run_task(out.data.train, out.data.test, exclusions, config);
  out.confusion = confusion_matrix(out.predictions, out.data.train.label_space);
  out.report = classification_report(out.confusion);
  out.composition = composition_summary(out.predictions, label_groups(registry));
  return out;
}

void write_task_outcome(const TaskOutcome& outcome, const fs::path& dir) {
  fs::create_directories(dir);
  auto report = report_to_json(outcome.report);
  report["task"] = outcome.task;
  report["description"] = std::string(task_description(outcome.task));
  report["train_size"] = outcome.data.train.samples.size();
  report["test_size"] = outcome.data.test.size();
  report["overlapping_test_records"] = outcome.data.overlapping_test_records;
  write_file(dir / "report.json", dump(report));
  write_file(dir / "report.txt", report_to_text(outcome.report));
  write_file(dir / "confusion.csv", confusion_to_csv(outcome.confusion));
  write_file(dir / "confusion.json", dump(confusion_to_json(outcome.confusion)));
  write_file(dir / "predictions.jsonl", predictions_to_jsonl(outcome.predictions));
  write_file(dir / "composition.json", dump(composition_to_json(outcome.composition)));
}

// --- mapper ------------------------------------------------------------------------

std::vector<EmbeddingRecord> mapper_records(std::span<const EmbeddingRecord> records, MapperSource source) {
  std::vector<EmbeddingRecord> out;
  for (const auto& r : records) {
    if (source == MapperSource::All ||
        (source == MapperSource::Distilled) == (r.source == EmbeddingSource::Distilled)) {
      out.push_back(r);
    }
  }
  return out;
}

MapperRun run_mapper(std::span<const EmbeddingRecord> records, MapperSource source,
                     const MapperParams& params, const Registry& registry,
                     const ClassifierConfig& classifier, const std::set<std::string>& exclusions) {
  const auto selected = mapper_records(records, source);
  MapperRun run;
  run.graph = mapper_graph(selected, params);
  for (auto by : {GroupBy::Category, GroupBy::Community, GroupBy::Subclass}) {
    run.compositions[std::string(to_string(by))] = node_composition(run.graph, grouping_for(selected, by));
  }

  auto train = build_task(1, records, registry).train;
  std::erase_if(train.samples, [&](const Sample& s) { return exclusions.count(s.label) > 0; });
  if (!train.samples.empty()) {
    std::vector<Sample> targets;
    targets.reserve(selected.size());
    for (const auto& r : selected) targets.push_back({r.id, r.vector, r.category.label()});
    run.overlay = run_task(train, targets, exclusions, classifier);
    std::unordered_map<std::string, std::string> grouping;
    for (const auto& p : run.overlay) grouping[p.id] = p.predicted;
    run.compositions["prediction"] = node_composition(run.graph, grouping);
  }
  return run;
}

nlohmann::ordered_json compositions_to_json(const MapperRun& run) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [group, per_node] : run.compositions) j[group] = per_node;
  return j;
}

nlohmann::ordered_json members_to_json(std::span<const EmbeddingRecord> records,
                                       const std::vector<Prediction>& overlay) {
  std::map<std::string, const Prediction*> predicted;
  for (const auto& p : overlay) predicted[p.id] = &p;
  std::vector<const EmbeddingRecord*> order;
  for (const auto& r : records) order.push_back(&r);
  std::sort(order.begin(), order.end(),
            [](const EmbeddingRecord* a, const EmbeddingRecord* b) { return a->id < b->id; });
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto* r : order) {
    nlohmann::ordered_json m;
    m["community"] = r->community;
    m["category"] = std::string(to_string(r->category.kind));
    m["label"] = r->category.label();
    m["source"] = std::string(to_string(r->source));
    if (auto it = predicted.find(r->id); it != predicted.end()) m["predicted"] = it->second->predicted;
    j[r->id] = std::move(m);
  }
  return j;
}

void write_mapper_run(const MapperRun& run, std::span<const EmbeddingRecord> records, const fs::path& dir) {
  fs::create_directories(dir);
  std::unordered_set<std::string> in_graph;
  for (const auto& n : run.graph.nodes) in_graph.insert(n.members.begin(), n.members.end());
  std::vector<EmbeddingRecord> members;
  for (const auto& r : records) {
    if (in_graph.count(r.id)) members.push_back(r);
  }
  write_file(dir / "graph.json", export_graph(run.graph, GraphFormat::Json));
  write_file(dir / "graph.dot", export_graph(run.graph, GraphFormat::Dot));
  write_file(dir / "graph.graphml", export_graph(run.graph, GraphFormat::GraphMl));
  write_file(dir / "composition.json", dump(compositions_to_json(run)));
  write_file(dir / "members.json", dump(members_to_json(members, run.overlay)));
}

// --- full run ----------------------------------------------------------------------

std::string run_config_hash(const RunConfig& cfg) {
  auto j = to_json(cfg);
  j.erase("registry");
  j.erase("corpus");
  j["inputs"] = {{"registry", file_sha256(cfg.registry)}, {"corpus", file_sha256(cfg.corpus)}};
  return sha256_hex(j.dump());
}

RunManifest run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  const auto all_start = clock::now();
  RunManifest manifest;
  manifest.config_hash = run_config_hash(cfg);
  manifest.run_id = manifest.config_hash.substr(0, 16);
  manifest.inputs = {{"registry", file_sha256(cfg.registry)}, {"corpus", file_sha256(cfg.corpus)}};
  const auto& out = cfg.output_dir;
  fs::create_directories(out);
  auto& summary = manifest.summary;

  auto start = clock::now();
  const auto registry = load_registry_file(cfg.registry.string());
  std::ifstream corpus_in(cfg.corpus, std::ios::binary);
  if (!corpus_in) throw Error(Errc::Io, "cannot open corpus " + cfg.corpus.string());
  auto ingested = ingest(corpus_in, registry);
  write_file(out / "ingest_report.json", report_to_json(ingested.report) + "\n");
  summary["posts"] = ingested.report.accepted;
  summary["skipped_lines"] = ingested.report.skipped;
  manifest.timings["ingest"] = seconds_since(start);

  start = clock::now();
  const auto plan = plan_embeddings(registry, ingested.corpus, cfg);
  {
    std::ostringstream s;
    write_plan_jsonl(s, plan);
    write_file(out / "batches.jsonl", s.str());
  }
  manifest.timings["distill"] = seconds_since(start);

  start = clock::now();
  std::optional<EmbeddingCache> cache;
  if (cfg.cache) cache.emplace(cfg.cache->string(), true);
  const auto records = embed_plan(plan, registry, cfg.provider, cache ? &*cache : nullptr);
  {
    std::ostringstream s;
    write_records_jsonl(s, records);
    write_file(out / "embeddings.jsonl", s.str());
  }
  std::size_t distilled = 0;
  for (const auto& r : records) distilled += r.source == EmbeddingSource::Distilled;
  summary["distilled_records"] = distilled;
  summary["iup_records"] = records.size() - distilled;
  manifest.timings["embed"] = seconds_since(start);

  start = clock::now();
  nlohmann::ordered_json tasks = nlohmann::ordered_json::object();
  for (int t : cfg.tasks) {
    nlohmann::ordered_json status;
    try {
      const auto outcome = run_classification(t, records, registry, cfg.exclusions, cfg.classifier);
      write_task_outcome(outcome, out / ("task" + std::to_string(t)));
      status["status"] = "done";
      status["accuracy"] = outcome.report.accuracy;
      status["test_size"] = outcome.data.test.size();
    } catch (const Error& e) {
      if (e.code() != Errc::EmptyTraining && e.code() != Errc::EmptyMatrix) throw;
      status["status"] = "skipped";
      status["reason"] = e.what();
    }
    tasks[std::to_string(t)] = std::move(status);
  }
  summary["tasks"] = std::move(tasks);
  manifest.timings["classify"] = seconds_since(start);

  start = clock::now();
  const auto mapper =
      run_mapper(records, cfg.mapper_source, cfg.mapper, registry, cfg.classifier, cfg.exclusions);
  manifest.timings["mapper"] = seconds_since(start);
  start = clock::now();
  write_mapper_run(mapper, mapper_records(records, cfg.mapper_source), out / "mapper");
  summary["mapper"] = {{"input_size", mapper.graph.input_size},
                       {"nodes", mapper.graph.nodes.size()},
                       {"edges", mapper.graph.edges.size()}};
  manifest.timings["export"] = seconds_since(start);

  for (const auto& entry : fs::recursive_directory_iterator(out)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), out).generic_string();
    if (rel == "manifest.json" || rel == "timings.json") continue;
    manifest.artifacts[rel] = file_sha256(entry.path());
  }
  manifest.timings["total"] = seconds_since(all_start);

  auto doc = manifest_to_json(manifest);
  doc["config"] = to_json(cfg);
  write_file(out / "manifest.json", dump(doc));
  nlohmann::ordered_json timings(manifest.timings);
  write_file(out / "timings.json", dump(timings));
  return manifest;
}

nlohmann::ordered_json manifest_to_json(const RunManifest& manifest) {
  nlohmann::ordered_json j;
  j["run_id"] = manifest.run_id;
  j["kind"] = "pipeline";
  j["config_hash"] = manifest.config_hash;
  j["inputs"] = manifest.inputs;
  j["artifacts"] = manifest.artifacts;
  j["summary"] = manifest.summary;
  return j;
}

// --- files -------------------------------------------------------------------------

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(Errc::Io, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_file(path)); }

std::vector<EmbeddingRecord> load_records(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  return read_records_jsonl(in);
}

}  // namespace mapscope
