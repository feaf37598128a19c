#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scgnn/error.hpp"
#include "scgnn/graph.hpp"

namespace scgnn {

namespace fs = std::filesystem;

namespace detail {

inline std::ifstream open_in(const fs::path &p, std::ios::openmode mode = {}) {
  std::ifstream in(p, std::ios::in | mode);
  if (!in)
    throw IngestError("cannot open " + p.string());
  return in;
}

inline std::ofstream open_out(const fs::path &p,
                              std::ios::openmode mode = {}) {
  std::ofstream out(p, std::ios::out | std::ios::trunc | mode);
  if (!out)
    throw IoError("cannot write " + p.string());
  return out;
}

inline std::uint32_t byteswap32(std::uint32_t x) {
  return (x >> 24) | ((x >> 8) & 0xff00u) | ((x << 8) & 0xff0000u) |
         (x << 24);
}

inline void ensure_dir(const fs::path &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create directory " + dir.string());
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> read_lines(const fs::path &p) {
  auto in = open_in(p);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (!t.empty())
      lines.emplace_back(t);
  }
  return lines;
}

} // namespace detail

/// Reads raw little-endian float32 rows.
inline MatrixF read_features(const fs::path &p, std::size_t n, std::size_t d,
                             bool little_endian = true) {
  auto in = detail::open_in(p, std::ios::binary);
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes != n * d * sizeof(float))
    throw SchemaError(p.filename().string() + " holds " +
                      std::to_string(bytes / sizeof(float)) +
                      " values, meta expects " + std::to_string(n) + "x" +
                      std::to_string(d));
  MatrixF f(n, d);
  in.read(reinterpret_cast<char *>(f.data()),
          static_cast<std::streamsize>(bytes));
  const bool host_le = std::endian::native == std::endian::little;
  if (host_le != little_endian) {
    for (float &x : f.flat()) {
      std::uint32_t u;
      std::memcpy(&u, &x, 4);
      u = detail::byteswap32(u);
      std::memcpy(&x, &u, 4);
    }
  }
  return f;
}

inline void write_features(const fs::path &p, const MatrixF &f) {
  auto out = detail::open_out(p, std::ios::binary);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char *>(f.data()),
              static_cast<std::streamsize>(f.size() * sizeof(float)));
  } else {
    for (float x : f.flat()) {
      std::uint32_t u;
      std::memcpy(&u, &x, 4);
      u = detail::byteswap32(u);
      out.write(reinterpret_cast<const char *>(&u), 4);
    }
  }
  if (!out)
    throw IoError("short write to " + p.string());
}

inline std::vector<Edge> read_edges(const fs::path &p, std::size_t n) {
  std::vector<Edge> edges;
  std::size_t lineno = 0;
  for (const auto &line : detail::read_lines(p)) {
    ++lineno;
    std::istringstream ss(line);
    long long u = -1, v = -1;
    if (!(ss >> u >> v) || u < 0 || v < 0)
      throw SchemaError(p.filename().string() + ":" + std::to_string(lineno) +
                        ": expected 'u<TAB>v'");
    if (static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n)
      throw SchemaError(p.filename().string() + ":" + std::to_string(lineno) +
                        ": endpoint out of range");
    edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v)});
  }
  return normalize_edges(std::move(edges));
}

inline void write_edges(const fs::path &p, const std::vector<Edge> &edges) {
  auto out = detail::open_out(p);
  for (const auto &e : edges)
    out << e.u << '\t' << e.v << '\n';
  if (!out)
    throw IoError("short write to " + p.string());
}

inline const char *split_name(Split s) {
  switch (s) {
  case Split::Train:
    return "train";
  case Split::Val:
    return "val";
  case Split::Test:
    return "test";
  case Split::None:
    break;
  }
  return "none";
}

/// Loads and validates a bundle directory (meta.json, features.f32,
/// edges.tsv, labels.csv, masks.csv).
inline GraphBundle load_bundle(const fs::path &dir) {
  for (const char *f : {"meta.json", "edges.tsv", "labels.csv", "masks.csv"})
    if (!fs::exists(dir / f))
      throw IngestError("missing " + (dir / f).string());

  nlohmann::json meta;
  try {
    auto in = detail::open_in(dir / "meta.json");
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError(std::string("meta.json: ") + e.what());
  }
  std::size_t n = 0, d = 0;
  int c = 0;
  std::string feature_file = "features.f32", endianness = "little";
  try {
    n = meta.at("n").get<std::size_t>();
    d = meta.at("d").get<std::size_t>();
    c = meta.at("c").get<int>();
    feature_file = meta.value("feature_file", feature_file);
    endianness = meta.value("endianness", endianness);
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError(std::string("meta.json: ") + e.what());
  }
  if (endianness != "little" && endianness != "big")
    throw SchemaError("meta.json: unknown endianness '" + endianness + "'");
  if (!fs::exists(dir / feature_file))
    throw IngestError("missing " + (dir / feature_file).string());

  GraphBundle b;
  b.num_classes = c;
  b.features = read_features(dir / feature_file, n, d, endianness == "little");
  b.edges = read_edges(dir / "edges.tsv", n);

  auto label_lines = detail::read_lines(dir / "labels.csv");
  if (label_lines.size() != n)
    throw SchemaError("labels.csv has " + std::to_string(label_lines.size()) +
                      " rows, expected " + std::to_string(n));
  b.labels.reserve(n);
  for (const auto &l : label_lines) {
    try {
      std::size_t used = 0;
      int v = std::stoi(l, &used);
      if (used != l.size())
        throw std::invalid_argument(l);
      b.labels.push_back(v);
    } catch (const std::exception &) {
      throw SchemaError("labels.csv: bad integer '" + l + "'");
    }
  }

  auto mask_lines = detail::read_lines(dir / "masks.csv");
  if (mask_lines.size() != n)
    throw SchemaError("masks.csv has " + std::to_string(mask_lines.size()) +
                      " rows, expected " + std::to_string(n));
  b.splits.reserve(n);
  for (const auto &m : mask_lines) {
    if (m == "train")
      b.splits.push_back(Split::Train);
    else if (m == "val")
      b.splits.push_back(Split::Val);
    else if (m == "test")
      b.splits.push_back(Split::Test);
    else if (m == "none")
      b.splits.push_back(Split::None);
    else
      throw SchemaError("masks.csv: unknown split '" + m + "'");
  }

  validate(b);
  return b;
}

inline void save_bundle(const GraphBundle &b, const fs::path &dir) {
  validate(b);
  detail::ensure_dir(dir);
  nlohmann::json meta = {{"n", b.num_nodes()},
                         {"d", b.feature_dim()},
                         {"c", b.num_classes},
                         {"feature_file", "features.f32"},
                         {"endianness", "little"}};
  detail::open_out(dir / "meta.json") << meta.dump(2) << '\n';
  write_features(dir / "features.f32", b.features);
  write_edges(dir / "edges.tsv", b.edges);
  {
    auto out = detail::open_out(dir / "labels.csv");
    for (ClassId l : b.labels)
      out << l << '\n';
  }
  {
    auto out = detail::open_out(dir / "masks.csv");
    for (Split s : b.splits)
      out << split_name(s) << '\n';
  }
}

/// 64-bit FNV-1a over a file's bytes; used for run manifests.
inline std::uint64_t hash_file(const fs::path &p) {
  auto in = detail::open_in(p, std::ios::binary);
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

/// Hex-float text for bit-exact real round-trips ("0x1.8p+1").
inline std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_hexfloat(const std::string &s) {
  char *end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw SchemaError("bad real '" + s + "'");
  return v;
}

} // namespace scgnn
