#pragma once

#include "agfm/graph.hpp"

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

// Graph directory layout:
//   meta.json     {"name": str, "num_nodes": int, "feature_dim": int}
//   edges.csv     header "src,dst", zero-based ids, direction-insensitive
//   features.csv  no header, N rows of feature_dim comma-separated floats
//   labels.csv    optional, header "node,label", label in {0,1}, any order

namespace agfm {

namespace detail {

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GraphError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Splits on '\n', tolerating a trailing '\r' and a missing final newline.
inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

inline std::string where(const std::filesystem::path& path, std::size_t line_no) {
  return path.filename().string() + ":" + std::to_string(line_no);
}

template <typename Number>
Number parse_number(std::string_view field, const std::filesystem::path& path,
                    std::size_t line_no) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
  Number value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw GraphError("malformed value '" + std::string(field) + "' at " + where(path, line_no));
  }
  return value;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline std::string format_float(float value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace detail

inline AttributedGraph load_graph(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path meta_path = dir / "meta.json";
  const fs::path edges_path = dir / "edges.csv";
  const fs::path features_path = dir / "features.csv";
  const fs::path labels_path = dir / "labels.csv";
  for (const auto& p : {meta_path, edges_path, features_path}) {
    if (!fs::exists(p)) throw GraphError("missing file " + p.string());
  }

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(detail::read_text(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw GraphError("malformed meta.json: " + std::string(e.what()));
  }
  if (!meta.contains("num_nodes") || !meta.contains("feature_dim") ||
      !meta["num_nodes"].is_number_unsigned() || !meta["feature_dim"].is_number_unsigned()) {
    throw GraphError("meta.json needs non-negative integer num_nodes and feature_dim");
  }
  const auto n = meta["num_nodes"].get<std::size_t>();
  const auto dim = meta["feature_dim"].get<std::size_t>();
  std::string name = meta.value("name", dir.filename().string());

  // edges
  const std::string edges_text = detail::read_text(edges_path);
  const auto edge_lines = detail::split_lines(edges_text);
  if (edge_lines.empty() || edge_lines[0] != "src,dst") {
    throw GraphError("edges.csv must start with header 'src,dst'");
  }
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(edge_lines.size());
  for (std::size_t i = 1; i < edge_lines.size(); ++i) {
    if (edge_lines[i].empty()) continue;
    const auto fields = detail::split_fields(edge_lines[i]);
    if (fields.size() != 2) {
      throw GraphError("expected 2 fields at " + detail::where(edges_path, i + 1));
    }
    const auto u = detail::parse_number<std::uint64_t>(fields[0], edges_path, i + 1);
    const auto v = detail::parse_number<std::uint64_t>(fields[1], edges_path, i + 1);
    if (u >= n || v >= n) {
      throw GraphError("node index >= N=" + std::to_string(n) + " at " +
                       detail::where(edges_path, i + 1));
    }
    edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  }

  // features
  const std::string features_text = detail::read_text(features_path);
  auto feature_lines = detail::split_lines(features_text);
  while (!feature_lines.empty() && feature_lines.back().empty()) feature_lines.pop_back();
  if (feature_lines.size() != n) {
    throw GraphError("features.csv has " + std::to_string(feature_lines.size()) +
                     " rows, expected N=" + std::to_string(n));
  }
  Matrix<float> features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    const auto fields = detail::split_fields(feature_lines[i]);
    if (fields.size() != dim) {
      throw GraphError("expected " + std::to_string(dim) + " features, got " +
                       std::to_string(fields.size()) + " at " +
                       detail::where(features_path, i + 1));
    }
    for (std::size_t k = 0; k < dim; ++k) {
      features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          detail::parse_number<float>(fields[k], features_path, i + 1);
    }
  }

  // labels
  std::optional<std::vector<std::uint8_t>> labels;
  if (fs::exists(labels_path)) {
    const std::string labels_text = detail::read_text(labels_path);
    const auto lines = detail::split_lines(labels_text);
    if (lines.empty() || lines[0] != "node,label") {
      throw GraphError("labels.csv must start with header 'node,label'");
    }
    std::vector<int> seen(n, -1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto fields = detail::split_fields(lines[i]);
      if (fields.size() != 2) {
        throw GraphError("expected 2 fields at " + detail::where(labels_path, i + 1));
      }
      const auto node = detail::parse_number<std::uint64_t>(fields[0], labels_path, i + 1);
      const auto label = detail::parse_number<int>(fields[1], labels_path, i + 1);
      if (node >= n) {
        throw GraphError("node index >= N at " + detail::where(labels_path, i + 1));
      }
      if (label != 0 && label != 1) {
        throw GraphError("label not in {0,1} at " + detail::where(labels_path, i + 1));
      }
      if (seen[node] != -1 && seen[node] != label) {
        throw GraphError("conflicting labels for node " + std::to_string(node));
      }
      seen[node] = label;
    }
    labels.emplace(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (seen[i] < 0) throw GraphError("labels.csv has no label for node " + std::to_string(i));
      (*labels)[i] = static_cast<std::uint8_t>(seen[i]);
    }
  }

  std::size_t loops = 0;
  AttributedGraph g =
      build_graph(n, edges, std::move(features), std::move(labels), std::move(name), &loops);
  if (loops > 0) {
    std::cerr << "warning: dropped " << loops << " self-loop(s) from " << edges_path.string()
              << "\n";
  }
  return g;
}

/// Writes the canonical form: each undirected edge once as (min,max) in CSR
/// order, features in shortest round-trip float notation.
inline void save_graph(const AttributedGraph& g, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json meta = {
      {"name", g.name}, {"num_nodes", g.num_nodes}, {"feature_dim", g.feature_dim()}};
  auto open = [](const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw GraphError("cannot write " + p.string());
    return out;
  };
  {
    auto out = open(dir / "meta.json");
    out << meta.dump(2) << "\n";
  }
  {
    auto out = open(dir / "edges.csv");
    std::string buf = "src,dst\n";
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
      for (NodeId j : g.neighbors(i)) {
        if (j <= i) continue;
        buf += std::to_string(i);
        buf += ',';
        buf += std::to_string(j);
        buf += '\n';
      }
    }
    out << buf;
  }
  {
    auto out = open(dir / "features.csv");
    std::string buf;
    for (Eigen::Index i = 0; i < g.features.rows(); ++i) {
      for (Eigen::Index k = 0; k < g.features.cols(); ++k) {
        if (k > 0) buf += ',';
        buf += detail::format_float(g.features(i, k));
      }
      buf += '\n';
    }
    out << buf;
  }
  if (g.labels) {
    auto out = open(dir / "labels.csv");
    std::string buf = "node,label\n";
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
      buf += std::to_string(i);
      buf += ',';
      buf += static_cast<char>('0' + (*g.labels)[i]);
      buf += '\n';
    }
    out << buf;
  }
}

}  // namespace agfm
