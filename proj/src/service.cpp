#include "mapscope/service.hpp"

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <regex>
#include <thread>

#include <httplib.h>

#include "mapscope/error.hpp"
#include "mapscope/graph_io.hpp"
#include "mapscope/hash.hpp"
#include "mapscope/pipeline.hpp"

namespace mapscope {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

const std::set<std::string> kMapperKeys = {"intervals_per_dim", "overlap_fraction", "eps",
                                           "min_samples",       "metric",           "noise_policy",
                                           "seed"};

bool valid_name(const std::string& s) {
  static const std::regex re(R"([A-Za-z0-9_.\-]+)");
  return !s.empty() && s.front() != '.' && std::regex_match(s, re);
}

// "InvalidArgument: eps: must be > 0" -> {"eps", "must be > 0"}.
std::pair<std::string, std::string> split_field(const Error& e, const std::string& fallback_field) {
  std::string msg = e.what();
  const auto prefix = std::string(errc_name(e.code())) + ": ";
  if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
  const auto colon = msg.find(": ");
  if (colon != std::string::npos && msg.find(' ') >= colon) {
    return {msg.substr(0, colon), msg.substr(colon + 2)};
  }
  return {fallback_field, msg};
}

[[noreturn]] void field_error(const std::string& field, const std::string& problem) {
  throw Error(Errc::InvalidArgument, field + ": " + problem);
}

void send_json(httplib::Response& res, int status, const ojson& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, ojson fields = nullptr) {
  ojson body;
  body["error"] = message;
  if (!fields.is_null()) body["fields"] = std::move(fields);
  send_json(res, status, body);
}

std::optional<ojson> read_json(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return std::nullopt;
  return ojson::parse(read_file(path));
}

}  // namespace

RunRequest parse_run_request(const nlohmann::json& body, const fs::path& data_dir) {
  if (!body.is_object()) field_error("body", "must be a JSON object");
  RunRequest req;

  auto dataset = body.find("dataset");
  if (dataset == body.end() || !dataset->is_string()) field_error("dataset", "required string");
  req.dataset = dataset->get<std::string>();
  if (!valid_name(req.dataset)) field_error("dataset", "invalid dataset id");
  const auto embeddings = data_dir / "datasets" / req.dataset / "embeddings.jsonl";
  if (!fs::is_regular_file(embeddings)) field_error("dataset", "unknown dataset '" + req.dataset + "'");

  MapperSource source = MapperSource::Distilled;
  if (auto it = body.find("source"); it != body.end() && !it->is_null()) {
    if (!it->is_string()) field_error("source", "must be a string");
    try {
      source = parse_mapper_source(it->get<std::string>());
    } catch (const Error&) {
      field_error("source", "must be distilled, iup or all");
    }
  }

  nlohmann::json mapper_json = nlohmann::json::object();
  if (auto it = body.find("mapper"); it != body.end()) {
    mapper_json = *it;
  } else {
    for (const auto& key : kMapperKeys) {
      if (body.contains(key)) mapper_json[key] = body.at(key);
    }
  }
  MapperParams params;
  try {
    params = mapper_params_from_json(mapper_json);
  } catch (const Error& e) {
    auto [field, problem] = split_field(e, "mapper");
    field_error(field, problem);
  }

  std::set<std::string> exclusions;
  if (auto it = body.find("exclusions"); it != body.end() && !it->is_null()) {
    if (!it->is_array()) field_error("exclusions", "must be an array of labels");
    for (const auto& label : *it) {
      if (!label.is_string()) field_error("exclusions", "must be an array of labels");
      exclusions.insert(label.get<std::string>());
    }
  }

  ClassifierConfig classifier;
  if (auto it = body.find("classifier"); it != body.end() && !it->is_null()) {
    try {
      classifier = classifier_from_json(*it);
    } catch (const Error& e) {
      field_error("classifier", split_field(e, "classifier").second);
    }
  }

  req.config["dataset"] = req.dataset;
  req.config["dataset_sha256"] = file_sha256(embeddings);
  req.config["source"] = std::string(to_string(source));
  req.config["mapper"] = to_json(params);
  req.config["classifier"] = to_json(classifier);
  req.config["exclusions"] = exclusions;
  req.run_id = sha256_hex(req.config.dump()).substr(0, 16);
  return req;
}

struct Service::Impl {
  enum class State { Pending, Done, Failed };

  struct Status {
    State state = State::Pending;
    std::string diagnostic;
  };

  ServiceOptions options;
  httplib::Server server;
  std::thread listener;

  std::mutex mutex;
  std::condition_variable work_cv;
  std::condition_variable idle_cv;
  std::deque<RunRequest> queue;
  std::size_t active = 0;
  bool stopping = false;
  std::map<std::string, Status> status;  // runs started by this process
  std::vector<std::thread> workers;

  std::mutex dataset_mutex;
  std::map<std::string, std::pair<std::string, std::shared_ptr<const std::vector<EmbeddingRecord>>>>
      datasets;  // id -> (sha256, records)

  explicit Impl(ServiceOptions o) : options(std::move(o)) {
    if (options.data_dir.empty()) throw Error(Errc::InvalidArgument, "data directory is required");
    if (!fs::is_directory(options.data_dir)) {
      throw Error(Errc::Io, "data directory " + options.data_dir.string() + " does not exist");
    }
    fs::create_directories(runs_dir());
    routes();
    for (std::size_t i = 0; i < std::max<std::size_t>(1, options.workers); ++i) {
      workers.emplace_back([this] { worker(); });
    }
  }

  ~Impl() {
    shutdown();
  }

  void shutdown() {
    server.stop();
    if (listener.joinable()) listener.join();
    {
      std::lock_guard lock(mutex);
      if (stopping) return;
      stopping = true;
    }
    work_cv.notify_all();
    for (auto& w : workers) w.join();
  }

  fs::path runs_dir() const { return options.data_dir / "runs"; }

  fs::path registry_path(const std::string& dataset) const {
    auto own = options.data_dir / "datasets" / dataset / "registry.json";
    return fs::is_regular_file(own) ? own : options.data_dir / "registry.json";
  }

  // Directory holding graph.json for a finished run.
  std::optional<fs::path> artifact_dir(const std::string& id) const {
    const auto dir = runs_dir() / id;
    if (fs::is_regular_file(dir / "graph.json")) return dir;
    if (fs::is_regular_file(dir / "mapper" / "graph.json")) return dir / "mapper";
    return std::nullopt;
  }

  std::optional<Status> status_of(const std::string& id) {
    {
      std::lock_guard lock(mutex);
      if (auto it = status.find(id); it != status.end()) return it->second;
    }
    if (fs::is_regular_file(runs_dir() / id / "manifest.json")) return Status{State::Done, {}};
    return std::nullopt;
  }

  static const char* state_name(State s) {
    switch (s) {
      case State::Pending: return "pending";
      case State::Done: return "done";
      case State::Failed: return "failed";
    }
    return "failed";
  }

  std::shared_ptr<const std::vector<EmbeddingRecord>> dataset_records(const std::string& id,
                                                                      const std::string& sha) {
    std::lock_guard lock(dataset_mutex);
    auto& slot = datasets[id];
    if (!slot.second || slot.first != sha) {
      auto records = load_records(options.data_dir / "datasets" / id / "embeddings.jsonl");
      slot = {sha, std::make_shared<const std::vector<EmbeddingRecord>>(std::move(records))};
    }
    return slot.second;
  }

  void worker() {
    for (;;) {
      RunRequest job;
      {
        std::unique_lock lock(mutex);
        work_cv.wait(lock, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        job = std::move(queue.front());
        queue.pop_front();
        ++active;
      }
      Status outcome{State::Done, {}};
      try {
        execute(job);
      } catch (const std::exception& e) {
        outcome = {State::Failed, e.what()};
      }
      {
        std::lock_guard lock(mutex);
        status[job.run_id] = outcome;
        --active;
      }
      idle_cv.notify_all();
    }
  }

  void execute(const RunRequest& job) {
    const auto& cfg = job.config;
    const auto records = dataset_records(job.dataset, cfg.at("dataset_sha256").get<std::string>());
    const auto registry = load_registry_file(registry_path(job.dataset).string());
    const auto source = parse_mapper_source(cfg.at("source").get<std::string>());
    const auto params = mapper_params_from_json(nlohmann::json::parse(cfg.at("mapper").dump()));
    const auto classifier = classifier_from_json(nlohmann::json::parse(cfg.at("classifier").dump()));
    const auto exclusions = cfg.at("exclusions").get<std::set<std::string>>();

    const auto run = run_mapper(*records, source, params, registry, classifier, exclusions);
    const auto staging = runs_dir() / (".staging-" + job.run_id);
    fs::remove_all(staging);
    write_mapper_run(run, mapper_records(*records, source), staging);

    ojson manifest;
    manifest["run_id"] = job.run_id;
    manifest["kind"] = "mapper";
    manifest["config_hash"] = sha256_hex(cfg.dump());
    manifest["dataset"] = job.dataset;
    manifest["config"] = cfg;
    ojson artifacts = ojson::object();
    for (const auto& entry : fs::directory_iterator(staging)) {
      artifacts[entry.path().filename().string()] = file_sha256(entry.path());
    }
    manifest["artifacts"] = std::move(artifacts);
    manifest["summary"] = {{"input_size", run.graph.input_size},
                           {"nodes", run.graph.nodes.size()},
                           {"edges", run.graph.edges.size()}};
    write_file(staging / "manifest.json", manifest.dump(2) + "\n");

    const auto final_dir = runs_dir() / job.run_id;
    fs::remove_all(final_dir);
    fs::rename(staging, final_dir);
  }

  ojson run_entry(const std::string& id, const Status& st) {
    ojson entry;
    entry["run_id"] = id;
    entry["status"] = state_name(st.state);
    if (!st.diagnostic.empty()) entry["diagnostic"] = st.diagnostic;
    if (auto manifest = read_json(runs_dir() / id / "manifest.json")) {
      for (const char* key : {"kind", "dataset", "config", "summary"}) {
        if (manifest->contains(key)) entry[key] = (*manifest)[key];
      }
    }
    return entry;
  }

  // Looks up a finished run, answering 404/409 itself when it is not one.
  std::optional<fs::path> finished(const std::string& id, httplib::Response& res) {
    const auto st = status_of(id);
    if (!st) {
      send_error(res, 404, "unknown run '" + id + "'");
      return std::nullopt;
    }
    if (st->state != State::Done) {
      ojson body;
      body["error"] = std::string("run is ") + state_name(st->state);
      body["status"] = state_name(st->state);
      if (!st->diagnostic.empty()) body["diagnostic"] = st->diagnostic;
      send_json(res, 409, body);
      return std::nullopt;
    }
    auto dir = artifact_dir(id);
    if (!dir) send_error(res, 404, "run '" + id + "' has no graph");
    return dir;
  }

  void routes() {
    httplib::Headers cors = {{"Access-Control-Allow-Origin", options.cors_origin},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}};
    server.set_default_headers(cors);

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      } catch (...) {
        send_error(res, 500, "internal error");
      }
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "not found" : "error");
    });

    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/api/registry", [this](const httplib::Request&, httplib::Response& res) {
      const auto path = options.data_dir / "registry.json";
      if (!fs::is_regular_file(path)) return send_error(res, 404, "no registry in the data directory");
      const auto registry = load_registry_file(path.string());
      res.set_content(registry_to_json(registry), "application/json");
    });

    server.Get("/api/datasets", [this](const httplib::Request&, httplib::Response& res) {
      ojson list = ojson::array();
      const auto dir = options.data_dir / "datasets";
      std::vector<std::string> names;
      if (fs::is_directory(dir)) {
        for (const auto& e : fs::directory_iterator(dir)) {
          if (fs::is_regular_file(e.path() / "embeddings.jsonl")) names.push_back(e.path().filename().string());
        }
      }
      std::sort(names.begin(), names.end());
      for (const auto& n : names) list.push_back({{"id", n}});
      send_json(res, 200, list);
    });

    server.Get("/api/runs", [this](const httplib::Request&, httplib::Response& res) {
      std::map<std::string, Status> all;
      for (const auto& e : fs::directory_iterator(runs_dir())) {
        const auto name = e.path().filename().string();
        if (name.front() != '.' && fs::is_regular_file(e.path() / "manifest.json")) {
          all[name] = Status{State::Done, {}};
        }
      }
      {
        std::lock_guard lock(mutex);
        for (const auto& [id, st] : status) all[id] = st;
      }
      ojson list = ojson::array();
      for (const auto& [id, st] : all) list.push_back(run_entry(id, st));
      send_json(res, 200, list);
    });

    server.Post("/api/runs", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::parse_error&) {
        return send_error(res, 400, "body is not valid JSON", {{"body", "invalid JSON"}});
      }
      RunRequest request;
      try {
        request = parse_run_request(body, options.data_dir);
      } catch (const Error& e) {
        auto [field, problem] = split_field(e, "body");
        return send_error(res, 400, field + ": " + problem, {{field, problem}});
      }
      bool dedup = false;
      std::string state = "pending";
      {
        std::lock_guard lock(mutex);
        auto it = status.find(request.run_id);
        const bool on_disk = fs::is_regular_file(runs_dir() / request.run_id / "manifest.json");
        if (it != status.end() && it->second.state != State::Failed) {
          dedup = true;
          state = state_name(it->second.state);
        } else if (it == status.end() && on_disk) {
          dedup = true;
          state = "done";
        } else {
          status[request.run_id] = Status{State::Pending, {}};
          queue.push_back(request);
        }
      }
      if (!dedup) work_cv.notify_one();
      send_json(res, 202, {{"run_id", request.run_id}, {"status", state}, {"deduplicated", dedup}});
    });

    server.Get(R"(/api/runs/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto st = status_of(id);
      if (!st) return send_error(res, 404, "unknown run '" + id + "'");
      send_json(res, 200, run_entry(id, *st));
    });

    server.Get(R"(/api/runs/([0-9a-f]+)/status)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto st = status_of(id);
      if (!st) return send_error(res, 404, "unknown run '" + id + "'");
      ojson body;
      body["run_id"] = id;
      body["status"] = state_name(st->state);
      if (!st->diagnostic.empty()) body["diagnostic"] = st->diagnostic;
      send_json(res, 200, body);
    });

    server.Get(R"(/api/runs/([0-9a-f]+)/graph)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto dir = finished(req.matches[1], res);
      if (!dir) return;
      res.set_content(read_file(*dir / "graph.json"), "application/json");
    });

    server.Get(R"(/api/runs/([0-9a-f]+)/composition)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 const auto group = req.has_param("group") ? req.get_param_value("group") : "category";
                 const auto dir = finished(id, res);
                 if (!dir) return;
                 const auto comps = read_json(*dir / "composition.json");
                 if (!comps || !comps->contains(group)) {
                   std::string available;
                   if (comps) {
                     for (const auto& [k, v] : comps->items()) available += (available.empty() ? "" : ", ") + k;
                   }
                   return send_error(res, 400, "group: unavailable (have " + available + ")",
                                     {{"group", "unavailable"}});
                 }
                 ojson nodes = ojson::array();
                 const auto& per_node = (*comps)[group];
                 for (std::size_t i = 0; i < per_node.size(); ++i) {
                   nodes.push_back({{"id", i}, {"composition", per_node[i]}});
                 }
                 send_json(res, 200, {{"run_id", id}, {"group", group}, {"nodes", std::move(nodes)}});
               });

    server.Get(R"(/api/runs/([0-9a-f]+)/nodes/(\d+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 const auto dir = finished(id, res);
                 if (!dir) return;
                 const auto graph = import_graph(read_file(*dir / "graph.json"), GraphFormat::Json);
                 std::size_t nid = 0;
                 try {
                   nid = std::stoul(req.matches[2]);
                 } catch (const std::exception&) {
                   nid = graph.nodes.size();
                 }
                 if (nid >= graph.nodes.size()) {
                   return send_error(res, 404, "run '" + id + "' has no node " + std::string(req.matches[2]));
                 }
                 const auto& node = graph.nodes[nid];
                 const auto members_meta = read_json(*dir / "members.json").value_or(ojson::object());
                 const auto comps = read_json(*dir / "composition.json").value_or(ojson::object());
                 ojson members = ojson::array();
                 for (const auto& m : node.members) {
                   ojson entry;
                   entry["id"] = m;
                   if (members_meta.contains(m)) {
                     for (const auto& [k, v] : members_meta[m].items()) entry[k] = v;
                   }
                   members.push_back(std::move(entry));
                 }
                 ojson composition = ojson::object();
                 for (const auto& [group, per_node] : comps.items()) composition[group] = per_node.at(nid);
                 ojson body;
                 body["run_id"] = id;
                 body["id"] = nid;
                 body["box"] = node.box;
                 body["size"] = node.members.size();
                 body["members"] = std::move(members);
                 body["composition"] = std::move(composition);
                 send_json(res, 200, body);
               });
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() = default;

int Service::start() {
  auto& s = impl_->server;
  int port = impl_->options.port;
  if (port == 0) {
    port = s.bind_to_any_port(impl_->options.host);
  } else if (!s.bind_to_port(impl_->options.host, port)) {
    port = -1;
  }
  if (port < 0) {
    throw Error(Errc::Io, "cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  }
  impl_->listener = std::thread([&s] { s.listen_after_bind(); });
  s.wait_until_ready();
  return port;
}

void Service::run() {
  if (!impl_->server.listen(impl_->options.host, impl_->options.port)) {
    throw Error(Errc::Io, "cannot listen on " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  }
}

void Service::stop() { impl_->server.stop(); }

void Service::wait_idle() {
  std::unique_lock lock(impl_->mutex);
  impl_->idle_cv.wait(lock, [&] { return impl_->queue.empty() && impl_->active == 0; });
}

}  // namespace mapscope
