#pragma once

// JSON mesh format: {"vertices": [[x, y], ...], "cells": [[i0, i1, ...], ...]},
// 0-based counter-clockwise vertex rings.

#include "minivem/geometry.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace minivem {

inline std::string format_double(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string mesh_to_json(const PolygonalMesh& mesh)
{
    std::ostringstream out;
    out << "{\n  \"vertices\": [";
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
        out << (v ? ",\n    " : "\n    ") << '[' << format_double(mesh.vertices[v].x()) << ", "
            << format_double(mesh.vertices[v].y()) << ']';
    }
    out << "\n  ],\n  \"cells\": [";
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
        out << (c ? ",\n    " : "\n    ") << '[';
        for (std::size_t i = 0; i < mesh.cells[c].size(); ++i) out << (i ? ", " : "") << mesh.cells[c][i];
        out << ']';
    }
    out << "\n  ]\n}\n";
    return out.str();
}

inline PolygonalMesh mesh_from_json(const std::string& text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw MeshError(std::string("mesh file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("vertices") || !doc.contains("cells"))
        throw MeshError("mesh file must be an object with \"vertices\" and \"cells\"");
    std::vector<Point> vertices;
    std::vector<std::vector<int>> cells;
    try {
        for (const auto& v : doc.at("vertices")) {
            if (!v.is_array() || v.size() != 2) throw MeshError("vertex entries must be [x, y] pairs");
            vertices.emplace_back(v[0].get<double>(), v[1].get<double>());
        }
        for (const auto& c : doc.at("cells")) cells.push_back(c.get<std::vector<int>>());
    } catch (const nlohmann::json::exception& e) {
        throw MeshError(std::string("malformed mesh file: ") + e.what());
    }
    return PolygonalMesh::from_cells(std::move(vertices), std::move(cells));
}

inline void export_mesh(const PolygonalMesh& mesh, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << mesh_to_json(mesh);
}

inline PolygonalMesh import_mesh(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open mesh file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return mesh_from_json(buf.str());
}

} // namespace minivem
