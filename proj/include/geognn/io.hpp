#pragma once

#include "geognn/types.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace geognn::io {

/// Whole file as bytes; Io error when unreadable.
std::string read_file(const std::string& path);

/// Writes to a temporary sibling and renames it over `path`. Missing parent
/// directories are created.
void atomic_write(const std::string& path, const std::string& bytes);

/// Pretty-printed JSON with a trailing newline, written atomically.
void write_json(const std::string& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::string& path);

/// Embedding file: "GEMB", u32 version 1, u64 n, u64 d, n*d little-endian
/// float32 values in row-major order.
Matrix read_embeddings(const std::string& path);
void write_embeddings(const Matrix& matrix, const std::string& path);

/// "src<TAB>dst" per line; blank lines and lines starting with '#' are skipped.
EdgeList read_edges(const std::string& path);
void write_edges(const EdgeList& edges, const std::string& path);

/// "node_id<TAB>class_id" per line. Every node 0..n-1 must appear exactly once.
Labels read_labels(const std::string& path);
void write_labels(const Labels& labels, const std::string& path);

/// One node id per line.
std::vector<std::size_t> read_ids(const std::string& path);
void write_ids(const std::vector<std::size_t>& ids, const std::string& path);

/// Shortest representation that reads back to the same double.
std::string format_double(double value);

}  // namespace geognn::io
