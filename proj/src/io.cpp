#include "geognn/io.hpp"

#include "geognn/errors.hpp"

#include <fmt/format.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace geognn::io {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) fail(ErrorCode::Io, "read error on '" + path + "'");
  return std::move(buf).str();
}

void atomic_write(const std::string& path, const std::string& bytes) {
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) {
    fs::create_directories(target.parent_path(), ec);
    if (ec) fail(ErrorCode::Io, "cannot create directory '" + target.parent_path().string() + "': " + ec.message());
  }
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) fail(ErrorCode::Io, "write error on '" + tmp.string() + "'");
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    fail(ErrorCode::Io, "cannot move '" + tmp.string() + "' to '" + path + "': " + ec.message());
  }
}

void write_json(const std::string& path, const nlohmann::json& doc) {
  atomic_write(path, doc.dump(2) + "\n");
}

nlohmann::json read_json(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Validation, path + ": invalid JSON: " + e.what());
  }
}

namespace {

constexpr char kMagic[4] = {'G', 'E', 'M', 'B'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 8;

template <typename T>
T load(const std::string& bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

template <typename T>
void store(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= line.size()) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return out;
}

std::size_t parse_id(std::string_view field, const std::string& path, std::size_t line_no) {
  std::size_t value = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end) {
    fail(ErrorCode::Validation,
         path + ":" + std::to_string(line_no) + ": expected a non-negative integer, got '" + std::string(field) + "'");
  }
  return value;
}

/// Calls fn(fields, line_no) for each non-comment, non-blank line.
template <typename Fn>
void for_each_record(const std::string& path, Fn fn) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    fn(split_fields(line), line_no);
  }
}

}  // namespace

Matrix read_embeddings(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorCode::Format, path + ": not an embedding file (bad magic)");
  }
  const auto version = load<std::uint32_t>(bytes, 4);
  if (version != kVersion) {
    fail(ErrorCode::Format, path + ": unsupported embedding file version " + std::to_string(version));
  }
  const auto n = load<std::uint64_t>(bytes, 8);
  const auto d = load<std::uint64_t>(bytes, 16);
  const std::size_t payload = bytes.size() - kHeaderBytes;
  if (d != 0 && n > payload / 4 / d) {
    fail(ErrorCode::Corruption, fmt::format("{}: header declares {}x{} values but the payload holds {} bytes", path,
                                            n, d, payload));
  }
  if (payload != n * d * 4) {
    fail(ErrorCode::Corruption, fmt::format("{}: payload is {} bytes, expected {}", path, payload, n * d * 4));
  }
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint64_t j = 0; j < d; ++j) {
      const auto v = load<float>(bytes, kHeaderBytes + 4 * (i * d + j));
      if (!std::isfinite(v)) {
        fail(ErrorCode::Validation, fmt::format("{}: non-finite value in row {}", path, i));
      }
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<double>(v);
    }
  }
  return m;
}

void write_embeddings(const Matrix& matrix, const std::string& path) {
  std::string bytes(kMagic, 4);
  store<std::uint32_t>(bytes, kVersion);
  store<std::uint64_t>(bytes, static_cast<std::uint64_t>(matrix.rows()));
  store<std::uint64_t>(bytes, static_cast<std::uint64_t>(matrix.cols()));
  bytes.reserve(kHeaderBytes + static_cast<std::size_t>(matrix.size()) * 4);
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      const auto v = static_cast<float>(matrix(i, j));
      if (!std::isfinite(v)) fail(ErrorCode::Validation, fmt::format("non-finite value in row {}", i));
      store<float>(bytes, v);
    }
  }
  atomic_write(path, bytes);
}

EdgeList read_edges(const std::string& path) {
  EdgeList edges;
  for_each_record(path, [&](const std::vector<std::string_view>& f, std::size_t line_no) {
    if (f.size() != 2) fail(ErrorCode::Validation, path + ":" + std::to_string(line_no) + ": expected src<TAB>dst");
    edges.push_back({parse_id(f[0], path, line_no), parse_id(f[1], path, line_no)});
  });
  return edges;
}

void write_edges(const EdgeList& edges, const std::string& path) {
  std::string out;
  for (const Edge& e : edges) out += fmt::format("{}\t{}\n", e.src, e.dst);
  atomic_write(path, out);
}

Labels read_labels(const std::string& path) {
  std::vector<std::pair<std::size_t, std::size_t>> rows;
  for_each_record(path, [&](const std::vector<std::string_view>& f, std::size_t line_no) {
    if (f.size() != 2) {
      fail(ErrorCode::Validation, path + ":" + std::to_string(line_no) + ": expected node_id<TAB>class_id");
    }
    rows.emplace_back(parse_id(f[0], path, line_no), parse_id(f[1], path, line_no));
  });
  Labels labels(rows.size());
  std::vector<bool> seen(rows.size(), false);
  for (const auto& [node, cls] : rows) {
    if (node >= rows.size()) {
      fail(ErrorCode::Validation, path + ": node ids must cover 0.." + std::to_string(rows.size() - 1) +
                                      " exactly once; found " + std::to_string(node));
    }
    if (seen[node]) fail(ErrorCode::Validation, path + ": node " + std::to_string(node) + " labelled twice");
    seen[node] = true;
    labels[node] = cls;
  }
  return labels;
}

void write_labels(const Labels& labels, const std::string& path) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) out += fmt::format("{}\t{}\n", i, labels[i]);
  atomic_write(path, out);
}

std::vector<std::size_t> read_ids(const std::string& path) {
  std::vector<std::size_t> ids;
  for_each_record(path, [&](const std::vector<std::string_view>& f, std::size_t line_no) {
    if (f.size() != 1) fail(ErrorCode::Validation, path + ":" + std::to_string(line_no) + ": expected one id");
    ids.push_back(parse_id(f[0], path, line_no));
  });
  return ids;
}

void write_ids(const std::vector<std::size_t>& ids, const std::string& path) {
  std::string out;
  for (std::size_t id : ids) out += fmt::format("{}\n", id);
  atomic_write(path, out);
}

std::string format_double(double value) { return fmt::format("{}", value); }

}  // namespace geognn::io
