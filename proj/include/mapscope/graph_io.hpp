#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "mapscope/mapper.hpp"

namespace mapscope {

enum class GraphFormat { Json, Dot, GraphMl };

GraphFormat parse_graph_format(std::string_view name);

/// {"params":{...},"fingerprint","input_size","filter":{...},
///  "nodes":[{"id","box":[i,j],"members":[...],"composition":{...}}],
///  "edges":[{"a","b","shared"}]}
nlohmann::ordered_json graph_to_json(const MapperGraph& graph);
/// Throws Errc::Malformed.
MapperGraph graph_from_json(const nlohmann::json& doc);

/// Undirected DOT; nodes carry size, box, members and frac_<group> attributes.
std::string graph_to_dot(const MapperGraph& graph);
/// Reads the subset of DOT written by graph_to_dot. Throws Errc::Malformed.
MapperGraph graph_from_dot(std::string_view text);

/// GraphML with one frac_<group> key per composition group.
std::string graph_to_graphml(const MapperGraph& graph);
/// Reads the subset of GraphML written by graph_to_graphml. Throws Errc::Malformed.
MapperGraph graph_from_graphml(std::string_view text);

std::string export_graph(const MapperGraph& graph, GraphFormat format);
MapperGraph import_graph(std::string_view text, GraphFormat format);

}  // namespace mapscope
