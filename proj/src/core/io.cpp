#include "io.hpp"

#include <zlib.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "error.hpp"

namespace geoconcept {

namespace {

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::byte>& bytes() { return out_; }

 private:
  std::vector<std::byte> out_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::byte> bytes, ErrorCode short_read_code)
      : bytes_(bytes), short_code_(short_read_code) {}

  std::span<const std::byte> take(std::size_t n) {
    if (n > bytes_.size() - pos_) fail(short_code_, "unexpected end of data");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(s[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto s = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
  ErrorCode short_code_;
};

}  // namespace

std::uint32_t crc32(std::span<const std::byte> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = ::crc32(crc, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::byte> encode_gemb(const Matrix& m) {
  ByteWriter w;
  w.raw(kGembMagic, 4);
  w.u32(kGembVersion);
  w.u64(m.rows());
  w.u64(m.cols());
  for (double v : m.values()) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) fail(ErrorCode::kNumeric, "GEMB payload value is not finite in float32");
    w.f32(f);
  }
  auto& bytes = w.bytes();
  const std::uint32_t crc = crc32(std::span(bytes).subspan(kGembHeaderBytes));
  w.u32(crc);
  return std::move(bytes);
}

Matrix decode_gemb(std::span<const std::byte> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kGembMagic, 4) != 0) {
    fail(ErrorCode::kBadMagic, "not a GEMB file (bad magic)");
  }
  ByteReader r(bytes, ErrorCode::kChecksumMismatch);
  r.take(4);
  const std::uint32_t version = r.u32();
  if (version != kGembVersion) {
    fail(ErrorCode::kVersionMismatch, "unsupported GEMB version " + std::to_string(version));
  }
  const std::uint64_t rows = r.u64();
  const std::uint64_t dims = r.u64();
  const std::uint64_t expected = (rows * dims) * 4 + 4;
  if ((dims != 0 && rows > UINT64_MAX / 8 / dims) || r.remaining() != expected) {
    fail(ErrorCode::kChecksumMismatch, "GEMB payload length does not match header (" +
                                           std::to_string(rows) + "x" + std::to_string(dims) +
                                           ")");
  }
  const auto payload = bytes.subspan(kGembHeaderBytes, rows * dims * 4);
  Matrix m(rows, dims);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const float f = r.f32();
    m[i] = static_cast<double>(f);
  }
  const std::uint32_t stored = r.u32();
  if (stored != crc32(payload)) fail(ErrorCode::kChecksumMismatch, "GEMB payload CRC mismatch");
  if (!m.all_finite()) fail(ErrorCode::kValidation, "GEMB payload contains non-finite values");
  return m;
}

void write_gemb(const fs::path& path, const Matrix& m) { write_file_atomic(path, encode_gemb(m)); }

Matrix read_gemb(const fs::path& path) {
  try {
    return decode_gemb(read_file_bytes(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

Matrix quantize_f32(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.values()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

const char* manifest_kind_name(ManifestKind kind) {
  switch (kind) {
    case ManifestKind::kImageEmbeddings: return "image_embeddings";
    case ManifestKind::kConceptSet: return "concept_set";
    case ManifestKind::kGallery: return "gallery";
    case ManifestKind::kCheckpoint: return "checkpoint";
  }
  return "?";
}

ManifestKind manifest_kind_from_name(const std::string& name) {
  for (auto k : {ManifestKind::kImageEmbeddings, ManifestKind::kConceptSet,
                 ManifestKind::kGallery, ManifestKind::kCheckpoint}) {
    if (name == manifest_kind_name(k)) return k;
  }
  fail(ErrorCode::kValidation, "unknown manifest kind '" + name + "'");
}

Json manifest_to_json(const Manifest& m) {
  Json j;
  j["schema_version"] = m.schema_version;
  j["kind"] = manifest_kind_name(m.kind);
  j["count"] = m.count();
  j["dim"] = m.dim;
  j[m.kind == ManifestKind::kConceptSet ? "names" : "ids"] = m.ids;
  if (m.has_locations()) {
    Json lat = Json::array();
    Json lon = Json::array();
    for (const auto& c : m.locations) {
      lat.push_back(c.lat);
      lon.push_back(c.lon);
    }
    j["lat"] = std::move(lat);
    j["lon"] = std::move(lon);
  }
  if (!m.view_of.empty()) j["view_of"] = m.view_of;
  if (!m.source.empty()) j["source"] = m.source;
  if (!m.model.empty()) j["model"] = m.model;
  return j;
}

Manifest manifest_from_json(const Json& j) {
  try {
    Manifest m;
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != 1) {
      fail(ErrorCode::kVersionMismatch,
           "unsupported manifest schema_version " + std::to_string(m.schema_version));
    }
    m.kind = manifest_kind_from_name(j.at("kind").get<std::string>());
    const char* id_key = m.kind == ManifestKind::kConceptSet ? "names" : "ids";
    m.ids = j.at(id_key).get<std::vector<std::string>>();
    m.dim = j.at("dim").get<std::size_t>();
    if (j.contains("count") && j["count"].get<std::size_t>() != m.ids.size()) {
      fail(ErrorCode::kCountMismatch, std::string("manifest count does not match ") + id_key);
    }
    std::set<std::string> seen;
    for (const auto& id : m.ids) {
      if (!seen.insert(id).second) {
        fail(ErrorCode::kValidation, std::string("duplicate entry in manifest ") + id_key +
                                         ": '" + id + "'");
      }
    }
    const bool has_lat = j.contains("lat");
    if (has_lat != j.contains("lon")) {
      fail(ErrorCode::kValidation, "manifest lat and lon must be given together");
    }
    if (has_lat) {
      const auto lat = j["lat"].get<std::vector<double>>();
      const auto lon = j["lon"].get<std::vector<double>>();
      if (lat.size() != m.ids.size() || lon.size() != m.ids.size()) {
        fail(ErrorCode::kCountMismatch, "manifest lat/lon length does not match ids");
      }
      for (std::size_t i = 0; i < lat.size(); ++i) {
        try {
          m.locations.push_back(GeoCoordinate::make(lat[i], lon[i]));
        } catch (const Error& e) {
          fail(ErrorCode::kValidation, "manifest location " + std::to_string(i) + ": " + e.what());
        }
      }
    }
    if (j.contains("view_of")) {
      m.view_of = j["view_of"].get<std::vector<std::string>>();
      if (m.view_of.size() != m.ids.size()) {
        fail(ErrorCode::kCountMismatch, "manifest view_of length does not match ids");
      }
    }
    if (j.contains("source")) m.source = j["source"].get<std::string>();
    if (j.contains("model")) m.model = j["model"].get<std::string>();
    return m;
  } catch (const Json::exception& e) {
    fail(ErrorCode::kValidation, std::string("malformed manifest: ") + e.what());
  }
}

Manifest read_manifest(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_file_text(path));
  } catch (const Json::exception& e) {
    fail(ErrorCode::kValidation, path.string() + ": invalid JSON: " + e.what());
  }
  try {
    return manifest_from_json(j);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_manifest(const fs::path& path, const Manifest& m) {
  write_file_atomic(path, manifest_to_json(m).dump(2) + "\n");
}

fs::path gemb_path(const fs::path& prefix) {
  fs::path p = prefix;
  p += ".gemb";
  return p;
}

fs::path manifest_path(const fs::path& prefix) {
  fs::path p = prefix;
  p += ".json";
  return p;
}

EmbeddingBundle read_embeddings(const fs::path& prefix) {
  EmbeddingBundle b;
  b.manifest = read_manifest(manifest_path(prefix));
  b.matrix = read_gemb(gemb_path(prefix));
  if (b.matrix.rows() != b.manifest.count()) {
    fail(ErrorCode::kCountMismatch, prefix.string() + ": GEMB has " +
                                        std::to_string(b.matrix.rows()) + " rows but manifest lists " +
                                        std::to_string(b.manifest.count()) + " entries");
  }
  if (b.matrix.rows() > 0 && b.matrix.cols() != b.manifest.dim) {
    fail(ErrorCode::kCountMismatch, prefix.string() + ": GEMB dim " +
                                        std::to_string(b.matrix.cols()) + " but manifest dim " +
                                        std::to_string(b.manifest.dim));
  }
  return b;
}

void write_embeddings(const fs::path& prefix, const Matrix& m, const Manifest& manifest) {
  if (m.rows() != manifest.count()) {
    fail(ErrorCode::kCountMismatch, "write_embeddings: matrix rows do not match manifest entries");
  }
  if (m.rows() > 0 && m.cols() != manifest.dim) {
    fail(ErrorCode::kCountMismatch, "write_embeddings: matrix dim does not match manifest dim");
  }
  if (manifest.has_locations() && manifest.locations.size() != manifest.count()) {
    fail(ErrorCode::kCountMismatch, "write_embeddings: location count does not match entries");
  }
  write_gemb(gemb_path(prefix), m);
  write_manifest(manifest_path(prefix), manifest);
}

const Matrix& CheckpointBlob::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  fail(ErrorCode::kValidation, "checkpoint is missing tensor '" + name + "'");
}

std::vector<std::byte> encode_checkpoint(const CheckpointBlob& blob) {
  ByteWriter w;
  w.raw(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  const std::string meta = blob.meta.dump();
  w.u64(meta.size());
  w.raw(meta.data(), meta.size());
  w.u64(blob.tensors.size());
  for (const auto& t : blob.tensors) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.raw(t.name.data(), t.name.size());
    w.u64(t.value.rows());
    w.u64(t.value.cols());
    for (double v : t.value.values()) w.f64(v);
  }
  const std::uint32_t crc = crc32(w.bytes());
  w.u32(crc);
  return std::move(w.bytes());
}

CheckpointBlob decode_checkpoint(std::span<const std::byte> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    fail(ErrorCode::kBadMagic, "not a checkpoint file (bad magic)");
  }
  if (bytes.size() < 12) fail(ErrorCode::kChecksumMismatch, "checkpoint truncated");
  const auto body = bytes.first(bytes.size() - 4);
  ByteReader tail(bytes.subspan(bytes.size() - 4), ErrorCode::kChecksumMismatch);
  if (tail.u32() != crc32(body)) fail(ErrorCode::kChecksumMismatch, "checkpoint CRC mismatch");

  ByteReader r(body, ErrorCode::kChecksumMismatch);
  r.take(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::kVersionMismatch, "unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointBlob blob;
  const std::uint64_t meta_len = r.u64();
  const auto meta = r.take(meta_len);
  try {
    blob.meta = Json::parse(std::string(reinterpret_cast<const char*>(meta.data()), meta.size()));
  } catch (const Json::exception& e) {
    fail(ErrorCode::kValidation, std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  const std::uint64_t count = r.u64();
  for (std::uint64_t t = 0; t < count; ++t) {
    NamedTensor nt;
    const std::uint32_t name_len = r.u32();
    const auto name = r.take(name_len);
    nt.name.assign(reinterpret_cast<const char*>(name.data()), name.size());
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (cols != 0 && rows > r.remaining() / 8 / cols) {
      fail(ErrorCode::kChecksumMismatch, "checkpoint tensor '" + nt.name + "' overruns file");
    }
    nt.value = Matrix(rows, cols);
    for (std::size_t i = 0; i < nt.value.size(); ++i) nt.value[i] = r.f64();
    blob.tensors.push_back(std::move(nt));
  }
  if (r.remaining() != 0) fail(ErrorCode::kValidation, "trailing bytes in checkpoint");
  return blob;
}

std::vector<std::byte> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "' for reading");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    fail(ErrorCode::kIo, "failed reading '" + path.string() + "'");
  }
  return bytes;
}

std::string read_file_text(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void write_file_atomic(const fs::path& path, std::span<const std::byte> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::kIo, "failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kIo, "cannot rename '" + tmp.string() + "': " + ec.message());
}

void write_file_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::as_bytes(std::span(text.data(), text.size())));
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

}  // namespace

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) {
    fail(ErrorCode::kShape, "CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                                std::to_string(header_.size()));
  }
  rows_.push_back(std::move(cells));
}

std::string CsvTable::str() const {
  std::ostringstream out;
  auto emit = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << csv_escape(cells[i]);
    }
    out << '\n';
  };
  emit(header_);
  for (const auto& r : rows_) emit(r);
  return out.str();
}

void CsvTable::write(const fs::path& path) const { write_file_atomic(path, str()); }

std::size_t CsvData::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  fail(ErrorCode::kData, "CSV is missing column '" + name + "'");
}

CsvData read_csv(const fs::path& path) {
  std::istringstream in(read_file_text(path));
  CsvData data;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (first) {
      data.header = std::move(cells);
      first = false;
      continue;
    }
    if (cells.size() != data.header.size()) {
      fail(ErrorCode::kData, path.string() + ": row " + std::to_string(data.rows.size() + 1) +
                                 " has " + std::to_string(cells.size()) + " cells, expected " +
                                 std::to_string(data.header.size()));
    }
    data.rows.push_back(std::move(cells));
  }
  if (first) fail(ErrorCode::kData, path.string() + ": empty CSV (no header)");
  return data;
}

double parse_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    fail(ErrorCode::kData, context + ": not a finite number: '" + s + "'");
  }
  return v;
}

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(std::as_bytes(std::span(s.data(), s.size())));
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace geoconcept
