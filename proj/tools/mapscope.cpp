#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mapscope/classify.hpp"
#include "mapscope/corpus.hpp"
#include "mapscope/error.hpp"
#include "mapscope/graph_io.hpp"
#include "mapscope/graphan.hpp"
#include "mapscope/pipeline.hpp"
#include "mapscope/registry.hpp"
#include "mapscope/service.hpp"

namespace fs = std::filesystem;
using namespace mapscope;

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  return in;
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
  } else {
    write_file(out_path, content);
  }
}

GraphFormat format_from_path(const std::string& path) {
  const auto ext = fs::path(path).extension().string();
  if (ext == ".dot" || ext == ".gv") return GraphFormat::Dot;
  if (ext == ".graphml" || ext == ".xml") return GraphFormat::GraphMl;
  return GraphFormat::Json;
}

MapperGraph load_graph(const std::string& path, const std::string& from) {
  const auto format = from.empty() ? format_from_path(path) : parse_graph_format(from);
  return import_graph(read_file(path), format);
}

std::string join(const std::vector<std::size_t>& v, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + std::to_string(v[i]);
  return out;
}

struct IngestArgs {
  std::string registry, posts, out, unknown = "skip";
};

int cmd_ingest(const IngestArgs& a) {
  const auto registry = load_registry_file(a.registry);
  auto in = open_input(a.posts);
  const auto policy = a.unknown == "error" ? UnknownPolicy::Error : UnknownPolicy::Skip;
  const auto result = ingest(in, registry, policy);
  std::ostringstream posts;
  write_corpus(posts, result.corpus);
  write_file(fs::path(a.out) / "posts.jsonl", posts.str());
  write_file(fs::path(a.out) / "ingest_report.json", report_to_json(result.report) + "\n");
  std::cout << "accepted " << result.report.accepted << " of " << result.report.lines << " lines";
  for (const auto& [reason, n] : result.report.reasons) std::cout << ", " << reason << "=" << n;
  std::cout << "\n";
  return 0;
}

struct DistillArgs {
  std::string registry, posts, out;
  std::int64_t cutoff = std::numeric_limits<std::int64_t>::max();
  std::size_t max_posts = 1000, iup_n = kDefaultIupCount, max_tokens = kDefaultMaxTokens;
  std::string counter = "approx_chars4";
};

int cmd_distill(const DistillArgs& a) {
  const auto registry = load_registry_file(a.registry);
  auto in = open_input(a.posts);
  const auto corpus = ingest(in, registry).corpus;
  RunConfig cfg;
  cfg.cutoff_utc = a.cutoff;
  cfg.max_posts = a.max_posts;
  cfg.iup_n = a.iup_n;
  cfg.max_tokens = a.max_tokens;
  cfg.counter = parse_token_counter(a.counter);
  const auto plan = plan_embeddings(registry, corpus, cfg);
  std::ostringstream s;
  write_plan_jsonl(s, plan);
  emit(a.out, s.str());
  std::cerr << plan.records.size() << " texts planned, " << plan.skipped.size() << " skipped\n";
  return 0;
}

struct EmbedArgs {
  std::string registry, batches, out, provider = "local", base_url, model = std::string(kDefaultModel), cache;
  std::size_t max_batch = 64;
};

int cmd_embed(const EmbedArgs& a) {
  const auto registry = load_registry_file(a.registry);
  auto in = open_input(a.batches);
  const auto plan = read_plan_jsonl(in);
  ProviderConfig provider;
  provider.kind = a.provider == "remote" ? ProviderKind::Remote : ProviderKind::Local;
  provider.model = a.model;
  if (!a.base_url.empty()) provider.base_url = a.base_url;
  provider.max_batch = a.max_batch;
  provider.validate();
  std::optional<EmbeddingCache> cache;
  if (!a.cache.empty()) cache.emplace(a.cache);
  const auto records = embed_plan(plan, registry, provider, cache ? &*cache : nullptr);
  std::ostringstream s;
  write_records_jsonl(s, records);
  emit(a.out, s.str());
  std::cerr << records.size() << " embeddings\n";
  return 0;
}

struct ClassifyArgs {
  std::string embeddings, registry, out, classifier = "knn", metric = "cosine";
  int task = 1;
  std::vector<std::string> exclude;
  std::size_t k = 5;
};

int cmd_classify(const ClassifyArgs& a) {
  const auto registry = load_registry_file(a.registry);
  const auto records = load_records(a.embeddings);
  ClassifierConfig cfg;
  cfg.kind = parse_classifier_kind(a.classifier);
  cfg.k = a.k;
  cfg.metric = parse_metric(a.metric);
  const std::set<std::string> exclusions(a.exclude.begin(), a.exclude.end());
  const auto outcome = run_classification(a.task, records, registry, exclusions, cfg);
  if (!a.out.empty()) write_task_outcome(outcome, a.out);
  std::cout << "Task " << a.task << ": " << task_description(a.task) << "\n";
  std::cout << report_to_text(outcome.report);
  return 0;
}

struct MapperArgs {
  std::string embeddings, registry, out, source = "distilled", metric = "euclidean", noise = "drop";
  std::size_t intervals = 10, min_samples = 2, threads = 0;
  double overlap = 0.5, eps = 0.5;
  std::vector<std::string> exclude;
};

int cmd_mapper(const MapperArgs& a) {
  const auto registry = load_registry_file(a.registry);
  const auto records = load_records(a.embeddings);
  nlohmann::json pj = {{"intervals_per_dim", a.intervals}, {"overlap_fraction", a.overlap},
                       {"eps", a.eps},                     {"min_samples", a.min_samples},
                       {"metric", a.metric},               {"noise_policy", a.noise}};
  auto params = mapper_params_from_json(pj);
  params.threads = a.threads;
  const auto source = parse_mapper_source(a.source);
  const std::set<std::string> exclusions(a.exclude.begin(), a.exclude.end());
  const auto run = run_mapper(records, source, params, registry, ClassifierConfig{}, exclusions);
  if (!a.out.empty()) {
    write_mapper_run(run, mapper_records(records, source), a.out);
  } else {
    std::cout << export_graph(run.graph, GraphFormat::Json);
    return 0;
  }
  std::cout << "nodes " << run.graph.nodes.size() << ", edges " << run.graph.edges.size()
            << ", components " << component_count(run.graph) << ", input " << run.graph.input_size << "\n";
  return 0;
}

struct QueryArgs {
  std::string graph, from, composition, group = "category", a, b, mode = "connected";
  double theta = 0.0;
  bool json = false;
};

std::vector<std::map<std::string, double>> compositions_for(const MapperGraph& graph, const QueryArgs& q) {
  std::vector<std::map<std::string, double>> comps;
  if (q.composition.empty()) {
    if (q.group != "category") {
      throw Error(Errc::InvalidArgument, "--group other than category needs --composition");
    }
    for (const auto& n : graph.nodes) comps.push_back(n.composition);
    return comps;
  }
  const auto doc = nlohmann::json::parse(read_file(q.composition));
  if (!doc.contains(q.group)) throw Error(Errc::InvalidArgument, "composition has no group '" + q.group + "'");
  comps = doc.at(q.group).get<std::vector<std::map<std::string, double>>>();
  if (comps.size() != graph.nodes.size()) {
    throw Error(Errc::InvalidArgument, "composition does not match the graph's node count");
  }
  return comps;
}

int cmd_query_components(const QueryArgs& q) {
  const auto graph = load_graph(q.graph, q.from);
  const auto comp = connected_components(graph);
  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t v = 0; v < comp.size(); ++v) members[comp[v]].push_back(v);
  if (q.json) {
    nlohmann::ordered_json j;
    j["count"] = members.size();
    j["component_of"] = comp;
    j["cycle_rank"] = cycle_rank(graph);
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::printf("%-10s %-6s %s\n", "component", "size", "nodes");
  for (const auto& [c, nodes] : members) {
    std::printf("%-10zu %-6zu %s\n", c, nodes.size(), join(nodes, ",").c_str());
  }
  return 0;
}

int cmd_query_pair(const QueryArgs& q, bool distance) {
  const auto graph = load_graph(q.graph, q.from);
  const auto comps = compositions_for(graph, q);
  const auto ra = make_region(comps, q.a, q.theta);
  const auto rb = make_region(comps, q.b, q.theta);
  if (distance) {
    const auto d = region_distance(graph, ra, rb);
    if (q.json) {
      nlohmann::ordered_json j;
      j["a"] = to_json(ra);
      j["b"] = to_json(rb);
      j["distance"] = d ? nlohmann::ordered_json(*d) : nlohmann::ordered_json(nullptr);
      std::cout << j.dump(2) << "\n";
    } else {
      std::cout << "distance(" << q.a << ", " << q.b << ") = " << (d ? std::to_string(*d) : "inf") << "\n";
    }
    return 0;
  }
  const auto mode = parse_link_mode(q.mode);
  const auto result = region_linked(graph, ra, rb, mode);
  if (q.json) {
    auto j = to_json(result, mode);
    j["a"] = to_json(ra);
    j["b"] = to_json(rb);
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << to_string(mode) << "(" << q.a << ", " << q.b << ") = " << (result.linked ? "true" : "false");
    if (result.linked) std::cout << "  witness " << join(result.witness, " -- ");
    std::cout << "\n";
  }
  return 0;
}

struct ExportArgs {
  std::string graph, from, format = "json", out;
};

int cmd_export(const ExportArgs& a) {
  const auto graph = load_graph(a.graph, a.from);
  emit(a.out, export_graph(graph, parse_graph_format(a.format)));
  return 0;
}

struct ServeArgs {
  std::string data_dir, host = "127.0.0.1";
  int port = 8080;
  std::size_t workers = 1;
};

int cmd_serve(ServeArgs a) {
  if (a.data_dir.empty()) {
    if (const char* env = std::getenv("MAPSCOPE_DATA_DIR")) a.data_dir = env;
  }
  if (a.data_dir.empty()) throw Error(Errc::InvalidArgument, "--data-dir or MAPSCOPE_DATA_DIR is required");
  ServiceOptions opt;
  opt.data_dir = a.data_dir;
  opt.host = a.host;
  opt.port = a.port;
  opt.workers = a.workers;
  Service service(opt);
  std::cerr << "serving " << a.data_dir << " on http://" << a.host << ":" << a.port << "\n";
  service.run();
  return 0;
}

struct RunArgs {
  std::string config, out, data_dir, dataset;
};

int cmd_run(const RunArgs& a) {
  auto cfg = load_run_config(a.config);
  fs::path publish;
  if (!a.data_dir.empty()) {
    publish = a.data_dir;
    cfg.output_dir = publish / "runs" / run_config_hash(cfg).substr(0, 16);
  } else if (!a.out.empty()) {
    cfg.output_dir = a.out;
  }
  const auto manifest = run_pipeline(cfg);
  if (!publish.empty()) {
    const auto dataset = a.dataset.empty() ? manifest.run_id : a.dataset;
    write_file(publish / "datasets" / dataset / "embeddings.jsonl", read_file(cfg.output_dir / "embeddings.jsonl"));
    write_file(publish / "datasets" / dataset / "registry.json", read_file(cfg.registry));
    if (!fs::exists(publish / "registry.json")) write_file(publish / "registry.json", read_file(cfg.registry));
    std::cout << "dataset " << dataset << "\n";
  }
  std::cout << "run " << manifest.run_id << " -> " << cfg.output_dir.string() << "\n";
  std::cout << manifest.summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Community embedding analysis: ingestion, distillation, classification and Mapper graphs"};
  app.require_subcommand(1);

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate posts.jsonl against a registry");
  ingest_cmd->add_option("--registry", ingest_args.registry, "registry.json or registry.csv")->required();
  ingest_cmd->add_option("--posts", ingest_args.posts, "posts.jsonl")->required();
  ingest_cmd->add_option("--out", ingest_args.out, "output directory")->required();
  ingest_cmd->add_option("--unknown", ingest_args.unknown, "unregistered communities: skip or error")
      ->check(CLI::IsMember({"skip", "error"}));

  DistillArgs distill_args;
  auto* distill_cmd = app.add_subcommand("distill", "Pack community windows into texts to embed");
  distill_cmd->add_option("--registry", distill_args.registry)->required();
  distill_cmd->add_option("--posts", distill_args.posts)->required();
  distill_cmd->add_option("--out", distill_args.out, "batches.jsonl (default stdout)");
  distill_cmd->add_option("--cutoff", distill_args.cutoff, "newest created_utc to include");
  distill_cmd->add_option("--max-posts", distill_args.max_posts, "posts per community window")->capture_default_str();
  distill_cmd->add_option("--iup-n", distill_args.iup_n, "individual posts per community")->capture_default_str();
  distill_cmd->add_option("--max-tokens", distill_args.max_tokens, "token budget")->capture_default_str();
  distill_cmd->add_option("--counter", distill_args.counter, "approx_chars4 or whitespace")
      ->check(CLI::IsMember({"approx_chars4", "whitespace"}));

  EmbedArgs embed_args;
  auto* embed_cmd = app.add_subcommand("embed", "Embed planned texts");
  embed_cmd->add_option("--registry", embed_args.registry)->required();
  embed_cmd->add_option("--batches", embed_args.batches)->required();
  embed_cmd->add_option("--out", embed_args.out, "embeddings.jsonl (default stdout)");
  embed_cmd->add_option("--provider", embed_args.provider)->check(CLI::IsMember({"local", "remote"}));
  embed_cmd->add_option("--base-url", embed_args.base_url, "remote endpoint base URL");
  embed_cmd->add_option("--model", embed_args.model)->capture_default_str();
  embed_cmd->add_option("--max-batch", embed_args.max_batch)->capture_default_str();
  embed_cmd->add_option("--cache", embed_args.cache, "vector cache file");

  ClassifyArgs classify_args;
  auto* classify_cmd = app.add_subcommand("classify", "Run a zero-shot classification task");
  classify_cmd->add_option("--embeddings", classify_args.embeddings)->required();
  classify_cmd->add_option("--registry", classify_args.registry)->required();
  classify_cmd->add_option("--task", classify_args.task, "1..4")->check(CLI::Range(1, 4))->capture_default_str();
  classify_cmd->add_option("--exclude", classify_args.exclude, "labels dropped from training")->delimiter(',');
  classify_cmd->add_option("--classifier", classify_args.classifier)->check(CLI::IsMember({"knn", "centroid"}));
  classify_cmd->add_option("--k", classify_args.k)->capture_default_str();
  classify_cmd->add_option("--metric", classify_args.metric)->check(CLI::IsMember({"cosine", "euclidean"}));
  classify_cmd->add_option("--out", classify_args.out, "directory for report and confusion files");

  MapperArgs mapper_args;
  auto* mapper_cmd = app.add_subcommand("mapper", "Build a Mapper graph");
  mapper_cmd->add_option("--embeddings", mapper_args.embeddings)->required();
  mapper_cmd->add_option("--registry", mapper_args.registry)->required();
  mapper_cmd->add_option("--source", mapper_args.source)->check(CLI::IsMember({"distilled", "iup", "all"}));
  mapper_cmd->add_option("--intervals", mapper_args.intervals, "cover intervals per dimension")->capture_default_str();
  mapper_cmd->add_option("--overlap", mapper_args.overlap, "cover overlap fraction")->capture_default_str();
  mapper_cmd->add_option("--eps", mapper_args.eps, "DBSCAN radius")->capture_default_str();
  mapper_cmd->add_option("--min-samples", mapper_args.min_samples, "DBSCAN core size")->capture_default_str();
  mapper_cmd->add_option("--metric", mapper_args.metric)->check(CLI::IsMember({"euclidean", "cosine"}));
  mapper_cmd->add_option("--noise", mapper_args.noise)->check(CLI::IsMember({"drop", "singleton"}));
  mapper_cmd->add_option("--exclude", mapper_args.exclude, "labels dropped from the prediction overlay")
      ->delimiter(',');
  mapper_cmd->add_option("--threads", mapper_args.threads, "0 = all cores");
  mapper_cmd->add_option("--out", mapper_args.out, "directory for graph and composition files");

  QueryArgs query_args;
  auto* query_cmd = app.add_subcommand("query", "Query a Mapper graph");
  query_cmd->require_subcommand(1);
  auto add_graph_opts = [&](CLI::App* c) {
    c->add_option("--graph", query_args.graph, "graph.json, .dot or .graphml")->required();
    c->add_option("--from", query_args.from, "input format if not implied by the extension");
    c->add_flag("--json", query_args.json, "JSON output");
  };
  auto add_region_opts = [&](CLI::App* c) {
    c->add_option("--a", query_args.a, "first region key")->required();
    c->add_option("--b", query_args.b, "second region key")->required();
    c->add_option("--theta", query_args.theta, "minimum member fraction (0 = any member)");
    c->add_option("--composition", query_args.composition, "composition.json for other groupings");
    c->add_option("--group", query_args.group, "grouping in --composition");
  };
  auto* q_components = query_cmd->add_subcommand("components", "Connected components");
  add_graph_opts(q_components);
  auto* q_linked = query_cmd->add_subcommand("linked", "Whether two regions are linked");
  add_graph_opts(q_linked);
  add_region_opts(q_linked);
  q_linked->add_option("--mode", query_args.mode, "share_node, adjacent or connected");
  auto* q_distance = query_cmd->add_subcommand("distance", "Hop distance between two regions");
  add_graph_opts(q_distance);
  add_region_opts(q_distance);

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export", "Convert a graph to json, dot or graphml");
  export_cmd->add_option("--graph", export_args.graph)->required();
  export_cmd->add_option("--from", export_args.from);
  export_cmd->add_option("--format", export_args.format)->check(CLI::IsMember({"json", "dot", "graphml"}));
  export_cmd->add_option("--out", export_args.out, "output file (default stdout)");

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "Serve runs over HTTP");
  serve_cmd->add_option("--data-dir", serve_args.data_dir, "defaults to $MAPSCOPE_DATA_DIR");
  serve_cmd->add_option("--host", serve_args.host)->capture_default_str();
  serve_cmd->add_option("--port", serve_args.port)->capture_default_str();
  serve_cmd->add_option("--workers", serve_args.workers, "concurrent recomputes")->capture_default_str();

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Full pipeline from a config file");
  run_cmd->add_option("--config", run_args.config, "run config (JSON)")->required();
  run_cmd->add_option("--out", run_args.out, "output directory (overrides the config)");
  run_cmd->add_option("--data-dir", run_args.data_dir, "publish the run and its dataset here");
  run_cmd->add_option("--dataset", run_args.dataset, "dataset id when publishing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) std::cerr << "\n" << app.help();
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(ingest_args);
    if (*distill_cmd) return cmd_distill(distill_args);
    if (*embed_cmd) return cmd_embed(embed_args);
    if (*classify_cmd) return cmd_classify(classify_args);
    if (*mapper_cmd) return cmd_mapper(mapper_args);
    if (*q_components) return cmd_query_components(query_args);
    if (*q_linked) return cmd_query_pair(query_args, false);
    if (*q_distance) return cmd_query_pair(query_args, true);
    if (*export_cmd) return cmd_export(export_args);
    if (*serve_cmd) return cmd_serve(serve_args);
    if (*run_cmd) return cmd_run(run_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
