#include "mapscope/graph_io.hpp"

#include <cstdio>
#include <regex>
#include <set>
#include <sstream>

#include "mapscope/error.hpp"
#include "text_util.hpp"

namespace mapscope {

namespace {

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sanitize_key(std::string_view group) {
  std::string out = "frac_";
  for (char c : group) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  }
  return out;
}

std::set<std::string> all_groups(const MapperGraph& graph) {
  std::set<std::string> groups;
  for (const auto& n : graph.nodes) {
    for (const auto& [g, f] : n.composition) groups.insert(g);
  }
  return groups;
}

std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string xml_unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const auto end = s.find(';', i);
    if (end == std::string_view::npos) throw Error(Errc::Malformed, "bad XML entity");
    const auto entity = s.substr(i, end - i + 1);
    if (entity == "&amp;") out.push_back('&');
    else if (entity == "&lt;") out.push_back('<');
    else if (entity == "&gt;") out.push_back('>');
    else if (entity == "&quot;") out.push_back('"');
    else if (entity == "&apos;") out.push_back('\'');
    else throw Error(Errc::Malformed, "unsupported XML entity " + std::string(entity));
    i = end;
  }
  return out;
}

std::string members_json(const MapperNode& n) { return nlohmann::json(n.members).dump(); }

std::string composition_json(const MapperNode& n) { return nlohmann::json(n.composition).dump(); }

// Header information shared by the DOT and GraphML emitters.
nlohmann::ordered_json graph_meta(const MapperGraph& graph) {
  auto doc = graph_to_json(graph);
  doc.erase("nodes");
  doc.erase("edges");
  return doc;
}

void apply_meta(MapperGraph& graph, const std::string& meta_text) {
  try {
    auto meta = nlohmann::json::parse(meta_text);
    meta["nodes"] = nlohmann::json::array();
    meta["edges"] = nlohmann::json::array();
    auto parsed = graph_from_json(meta);
    graph.params = parsed.params;
    graph.fingerprint = parsed.fingerprint;
    graph.input_size = parsed.input_size;
    graph.filter = parsed.filter;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Malformed, std::string("graph metadata: ") + e.what());
  }
}

void fill_node(MapperNode& node, const std::string& box, const std::string& members,
               const std::string& composition) {
  try {
    const auto comma = box.find(',');
    if (comma == std::string::npos) throw Error(Errc::Malformed, "bad box '" + box + "'");
    node.box = {std::stoul(box.substr(0, comma)), std::stoul(box.substr(comma + 1))};
    node.members = nlohmann::json::parse(members).get<std::vector<std::string>>();
    node.composition = nlohmann::json::parse(composition).get<std::map<std::string, double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Malformed, std::string("node attributes: ") + e.what());
  } catch (const std::logic_error&) {
    throw Error(Errc::Malformed, "bad box '" + box + "'");
  }
}

void finish(MapperGraph& graph) {
  std::sort(graph.nodes.begin(), graph.nodes.end(),
            [](const MapperNode& a, const MapperNode& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    if (graph.nodes[i].id != i) throw Error(Errc::Malformed, "node ids are not 0..n-1");
  }
  for (const auto& e : graph.edges) {
    if (e.a >= graph.nodes.size() || e.b >= graph.nodes.size() || e.a == e.b) {
      throw Error(Errc::Malformed, "edge refers to a missing node or is a self-loop");
    }
  }
  std::sort(graph.edges.begin(), graph.edges.end(), [](const MapperEdge& x, const MapperEdge& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
}

std::size_t parse_node_ref(const std::string& ref) {
  if (ref.size() < 2 || ref[0] != 'n') throw Error(Errc::Malformed, "bad node reference '" + ref + "'");
  try {
    return std::stoul(ref.substr(1));
  } catch (const std::logic_error&) {
    throw Error(Errc::Malformed, "bad node reference '" + ref + "'");
  }
}

// key=value pairs from a DOT attribute list body; values bare or quoted.
std::map<std::string, std::string> dot_attributes(std::string_view body) {
  std::map<std::string, std::string> attrs;
  std::size_t i = 0;
  auto skip = [&] {
    while (i < body.size() && (std::isspace(static_cast<unsigned char>(body[i])) || body[i] == ',')) ++i;
  };
  auto token = [&]() -> std::string {
    std::string out;
    if (i < body.size() && body[i] == '"') {
      ++i;
      while (i < body.size() && body[i] != '"') {
        if (body[i] == '\\' && i + 1 < body.size()) ++i;
        out.push_back(body[i++]);
      }
      if (i >= body.size()) throw Error(Errc::Malformed, "unterminated DOT string");
      ++i;
    } else {
      while (i < body.size() && body[i] != '=' && body[i] != ',' &&
             !std::isspace(static_cast<unsigned char>(body[i]))) {
        out.push_back(body[i++]);
      }
    }
    return out;
  };
  for (skip(); i < body.size(); skip()) {
    auto key = token();
    skip();
    if (i >= body.size() || body[i] != '=') throw Error(Errc::Malformed, "DOT attribute without value");
    ++i;
    skip();
    attrs[key] = token();
  }
  return attrs;
}

}  // namespace

GraphFormat parse_graph_format(std::string_view name) {
  const auto key = detail::fold(name);
  if (key == "json") return GraphFormat::Json;
  if (key == "dot") return GraphFormat::Dot;
  if (key == "graphml") return GraphFormat::GraphMl;
  throw Error(Errc::InvalidArgument, "format must be json, dot or graphml");
}

nlohmann::ordered_json graph_to_json(const MapperGraph& graph) {
  nlohmann::ordered_json doc;
  doc["params"] = to_json(graph.params);
  doc["fingerprint"] = graph.fingerprint;
  doc["input_size"] = graph.input_size;
  nlohmann::ordered_json filter;
  filter["kind"] = "pca2";
  filter["explained_variance"] = graph.filter.explained_variance;
  filter["second_degenerate"] = graph.filter.second_degenerate;
  filter["collapsed"] = graph.filter.collapsed;
  doc["filter"] = std::move(filter);
  auto nodes = nlohmann::ordered_json::array();
  for (const auto& n : graph.nodes) {
    nlohmann::ordered_json node;
    node["id"] = n.id;
    node["box"] = n.box;
    node["members"] = n.members;
    node["composition"] = n.composition;
    nodes.push_back(std::move(node));
  }
  doc["nodes"] = std::move(nodes);
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : graph.edges) {
    nlohmann::ordered_json edge;
    edge["a"] = e.a;
    edge["b"] = e.b;
    edge["shared"] = e.shared;
    edges.push_back(std::move(edge));
  }
  doc["edges"] = std::move(edges);
  return doc;
}

MapperGraph graph_from_json(const nlohmann::json& doc) {
  MapperGraph graph;
  try {
    graph.params = mapper_params_from_json(doc.at("params"));
    graph.fingerprint = doc.value("fingerprint", std::string());
    graph.input_size = doc.value("input_size", std::size_t{0});
    if (auto f = doc.find("filter"); f != doc.end()) {
      graph.filter.explained_variance = f->at("explained_variance").get<std::array<double, 2>>();
      graph.filter.second_degenerate = f->value("second_degenerate", false);
      graph.filter.collapsed = f->value("collapsed", std::array<bool, 2>{false, false});
    }
    for (const auto& n : doc.at("nodes")) {
      MapperNode node;
      node.id = n.at("id").get<std::size_t>();
      node.box = n.at("box").get<std::array<std::size_t, 2>>();
      node.members = n.at("members").get<std::vector<std::string>>();
      node.composition = n.at("composition").get<std::map<std::string, double>>();
      if (node.members.empty()) throw Error(Errc::Malformed, "node without members");
      graph.nodes.push_back(std::move(node));
    }
    for (const auto& e : doc.at("edges")) {
      graph.edges.push_back(
          {e.at("a").get<std::size_t>(), e.at("b").get<std::size_t>(), e.at("shared").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Malformed, std::string("graph json: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::Malformed) throw;
    throw Error(Errc::Malformed, std::string("graph json: ") + e.what());
  }
  finish(graph);
  return graph;
}

std::string graph_to_dot(const MapperGraph& graph) {
  const auto groups = all_groups(graph);
  std::ostringstream out;
  out << "graph mapper {\n";
  out << "  graph [meta=" << dot_quote(graph_meta(graph).dump()) << "];\n";
  for (const auto& n : graph.nodes) {
    out << "  n" << n.id << " [size=" << n.members.size() << ", box="
        << dot_quote(std::to_string(n.box[0]) + "," + std::to_string(n.box[1]))
        << ", members=" << dot_quote(members_json(n))
        << ", composition=" << dot_quote(composition_json(n));
    for (const auto& g : groups) {
      auto it = n.composition.find(g);
      out << ", " << sanitize_key(g) << "=" << number(it == n.composition.end() ? 0.0 : it->second);
    }
    out << "];\n";
  }
  for (const auto& e : graph.edges) {
    out << "  n" << e.a << " -- n" << e.b << " [shared=" << e.shared << "];\n";
  }
  out << "}\n";
  return out.str();
}

MapperGraph graph_from_dot(std::string_view text) {
  static const std::regex graph_re(R"re(^\s*graph\s*\[(.*)\];\s*$)re");
  static const std::regex edge_re(R"re(^\s*(n\d+)\s*--\s*(n\d+)\s*\[(.*)\];\s*$)re");
  static const std::regex node_re(R"re(^\s*(n\d+)\s*\[(.*)\];\s*$)re");

  MapperGraph graph;
  bool opened = false, closed = false, meta = false;
  std::istringstream in{std::string(text)};
  std::string line;
  std::smatch m;
  while (std::getline(in, line)) {
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    if (!opened) {
      if (trimmed.rfind("graph", 0) != 0 || trimmed.back() != '{') {
        throw Error(Errc::Malformed, "DOT must start with 'graph <name> {'");
      }
      opened = true;
    } else if (trimmed == "}") {
      closed = true;
    } else if (std::regex_match(line, m, graph_re)) {
      const auto attrs = dot_attributes(m[1].str());
      if (auto it = attrs.find("meta"); it != attrs.end()) {
        apply_meta(graph, it->second);
        meta = true;
      }
    } else if (std::regex_match(line, m, edge_re)) {
      const auto attrs = dot_attributes(m[3].str());
      auto shared = attrs.find("shared");
      if (shared == attrs.end()) throw Error(Errc::Malformed, "DOT edge without shared count");
      graph.edges.push_back(
          {parse_node_ref(m[1].str()), parse_node_ref(m[2].str()), std::stoul(shared->second)});
    } else if (std::regex_match(line, m, node_re)) {
      const auto attrs = dot_attributes(m[2].str());
      MapperNode node;
      node.id = parse_node_ref(m[1].str());
      auto get = [&](const char* key) {
        auto it = attrs.find(key);
        if (it == attrs.end()) throw Error(Errc::Malformed, std::string("DOT node lacks ") + key);
        return it->second;
      };
      fill_node(node, get("box"), get("members"), get("composition"));
      graph.nodes.push_back(std::move(node));
    } else {
      throw Error(Errc::Malformed, "unrecognized DOT line: " + std::string(trimmed));
    }
  }
  if (!opened || !closed) throw Error(Errc::Malformed, "DOT graph is not closed");
  if (!meta) throw Error(Errc::Malformed, "DOT graph lacks run metadata");
  finish(graph);
  return graph;
}

std::string graph_to_graphml(const MapperGraph& graph) {
  const auto groups = all_groups(graph);
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
      << "  <key id=\"meta\" for=\"graph\" attr.name=\"meta\" attr.type=\"string\"/>\n"
      << "  <key id=\"size\" for=\"node\" attr.name=\"size\" attr.type=\"int\"/>\n"
      << "  <key id=\"box\" for=\"node\" attr.name=\"box\" attr.type=\"string\"/>\n"
      << "  <key id=\"members\" for=\"node\" attr.name=\"members\" attr.type=\"string\"/>\n"
      << "  <key id=\"composition\" for=\"node\" attr.name=\"composition\" attr.type=\"string\"/>\n";
  std::size_t k = 0;
  for (const auto& g : groups) {
    out << "  <key id=\"f" << k++ << "\" for=\"node\" attr.name=\"" << xml_escape(sanitize_key(g))
        << "\" attr.type=\"double\"/>\n";
  }
  out << "  <key id=\"shared\" for=\"edge\" attr.name=\"shared\" attr.type=\"int\"/>\n"
      << "  <graph id=\"mapper\" edgedefault=\"undirected\">\n"
      << "    <data key=\"meta\">" << xml_escape(graph_meta(graph).dump()) << "</data>\n";
  for (const auto& n : graph.nodes) {
    out << "    <node id=\"n" << n.id << "\">"
        << "<data key=\"size\">" << n.members.size() << "</data>"
        << "<data key=\"box\">" << n.box[0] << "," << n.box[1] << "</data>"
        << "<data key=\"members\">" << xml_escape(members_json(n)) << "</data>"
        << "<data key=\"composition\">" << xml_escape(composition_json(n)) << "</data>";
    k = 0;
    for (const auto& g : groups) {
      auto it = n.composition.find(g);
      out << "<data key=\"f" << k++ << "\">" << number(it == n.composition.end() ? 0.0 : it->second)
          << "</data>";
    }
    out << "</node>\n";
  }
  for (const auto& e : graph.edges) {
    out << "    <edge source=\"n" << e.a << "\" target=\"n" << e.b << "\"><data key=\"shared\">"
        << e.shared << "</data></edge>\n";
  }
  out << "  </graph>\n</graphml>\n";
  return out.str();
}

MapperGraph graph_from_graphml(std::string_view text) {
  static const std::regex node_re(R"re(<node id="([^"]*)">(.*)</node>)re");
  static const std::regex edge_re(R"re(<edge source="([^"]*)" target="([^"]*)">(.*)</edge>)re");
  static const std::regex data_re(R"re(<data key="([^"]*)">([^<]*)</data>)re");

  auto data_of = [](const std::string& body) {
    std::map<std::string, std::string> out;
    for (std::sregex_iterator it(body.begin(), body.end(), data_re), end; it != end; ++it) {
      out[(*it)[1].str()] = xml_unescape((*it)[2].str());
    }
    return out;
  };

  if (text.find("<graphml") == std::string_view::npos) throw Error(Errc::Malformed, "not GraphML");
  MapperGraph graph;
  bool meta = false;
  std::istringstream in{std::string(text)};
  std::string line;
  std::smatch m;
  while (std::getline(in, line)) {
    if (std::regex_search(line, m, node_re)) {
      const auto data = data_of(m[2].str());
      MapperNode node;
      node.id = parse_node_ref(m[1].str());
      auto get = [&](const char* key) {
        auto it = data.find(key);
        if (it == data.end()) throw Error(Errc::Malformed, std::string("GraphML node lacks ") + key);
        return it->second;
      };
      fill_node(node, get("box"), get("members"), get("composition"));
      graph.nodes.push_back(std::move(node));
    } else if (std::regex_search(line, m, edge_re)) {
      const auto data = data_of(m[3].str());
      auto shared = data.find("shared");
      if (shared == data.end()) throw Error(Errc::Malformed, "GraphML edge without shared count");
      graph.edges.push_back(
          {parse_node_ref(m[1].str()), parse_node_ref(m[2].str()), std::stoul(shared->second)});
    } else if (line.find("<data key=\"meta\">") != std::string::npos) {
      const auto data = data_of(line);
      apply_meta(graph, data.at("meta"));
      meta = true;
    }
  }
  if (!meta) throw Error(Errc::Malformed, "GraphML graph lacks run metadata");
  finish(graph);
  return graph;
}

std::string export_graph(const MapperGraph& graph, GraphFormat format) {
  switch (format) {
    case GraphFormat::Json: return graph_to_json(graph).dump(2) + "\n";
    case GraphFormat::Dot: return graph_to_dot(graph);
    case GraphFormat::GraphMl: return graph_to_graphml(graph);
  }
  return {};
}

MapperGraph import_graph(std::string_view text, GraphFormat format) {
  switch (format) {
    case GraphFormat::Json: {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::Malformed, std::string("graph json: ") + e.what());
      }
      return graph_from_json(doc);
    }
    case GraphFormat::Dot: return graph_from_dot(text);
    case GraphFormat::GraphMl: return graph_from_graphml(text);
  }
  throw Error(Errc::InvalidArgument, "unknown graph format");
}

}  // namespace mapscope
