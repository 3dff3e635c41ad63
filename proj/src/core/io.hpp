#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "geo.hpp"
#include "numkernel.hpp"

namespace geoconcept {

namespace fs = std::filesystem;
using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// GEMB embedding file
//
//   offset  size  field
//   0       4     magic "GEMB"
//   4       4     version (u32 LE) = 1
//   8       8     rows (u64 LE)
//   16      8     dims (u64 LE)
//   24      4*r*d payload, float32 LE, row-major
//   ...     4     CRC32 (IEEE) of the payload bytes, u32 LE
// ---------------------------------------------------------------------------

inline constexpr char kGembMagic[4] = {'G', 'E', 'M', 'B'};
inline constexpr std::uint32_t kGembVersion = 1;
inline constexpr std::size_t kGembHeaderBytes = 24;

std::uint32_t crc32(std::span<const std::byte> bytes);

// Values are narrowed to float32; non-finite input is rejected.
std::vector<std::byte> encode_gemb(const Matrix& m);
Matrix decode_gemb(std::span<const std::byte> bytes);

void write_gemb(const fs::path& path, const Matrix& m);
Matrix read_gemb(const fs::path& path);

// Rounds every entry through float32, i.e. what a GEMB round trip yields.
Matrix quantize_f32(const Matrix& m);

enum class ManifestKind { kImageEmbeddings, kConceptSet, kGallery, kCheckpoint };

const char* manifest_kind_name(ManifestKind kind);
ManifestKind manifest_kind_from_name(const std::string& name);

// JSON companion of a GEMB file. Concept sets list "names", every other kind
// lists "ids"; lat/lon arrays are optional and travel together. An optional
// "view_of" array groups rows into multi-view images for eval.
struct Manifest {
  int schema_version = 1;
  ManifestKind kind = ManifestKind::kImageEmbeddings;
  std::vector<std::string> ids;
  std::size_t dim = 0;
  std::vector<GeoCoordinate> locations;  // empty or one per id
  std::vector<std::string> view_of;      // empty or one per id: rows naming the same image are its views
  std::string source;
  std::string model;

  std::size_t count() const { return ids.size(); }
  bool has_locations() const { return !locations.empty(); }
};

Json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const Json& j);
Manifest read_manifest(const fs::path& path);
void write_manifest(const fs::path& path, const Manifest& m);

// "<prefix>.gemb" and "<prefix>.json".
fs::path gemb_path(const fs::path& prefix);
fs::path manifest_path(const fs::path& prefix);

struct EmbeddingBundle {
  Matrix matrix;
  Manifest manifest;
};

// Reads both files and cross-checks counts and dims.
EmbeddingBundle read_embeddings(const fs::path& prefix);
void write_embeddings(const fs::path& prefix, const Matrix& m, const Manifest& manifest);

// ---------------------------------------------------------------------------
// Checkpoint container (float64 payload)
//
//   "GCKP" | version u32 | meta_len u64 | meta JSON bytes |
//   tensor_count u64 | { name_len u32 | name | rows u64 | cols u64 |
//   rows*cols f64 LE } ... | CRC32 of every preceding byte (u32 LE)
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'G', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Matrix value;
};

struct CheckpointBlob {
  Json meta;
  std::vector<NamedTensor> tensors;

  const Matrix& tensor(const std::string& name) const;
};

std::vector<std::byte> encode_checkpoint(const CheckpointBlob& blob);
CheckpointBlob decode_checkpoint(std::span<const std::byte> bytes);

// ---------------------------------------------------------------------------
// Plain files
// ---------------------------------------------------------------------------

std::vector<std::byte> read_file_bytes(const fs::path& path);
std::string read_file_text(const fs::path& path);
// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const fs::path& path, std::span<const std::byte> bytes);
void write_file_atomic(const fs::path& path, const std::string& text);

// Shortest round-trip decimal form with '.' as separator.
std::string format_double(double v);

// Minimal CSV table: header row, LF line endings, quoting only when needed.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add_row(std::vector<std::string> cells);
  std::string str() const;
  void write(const fs::path& path) const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or a data error when absent.
  std::size_t column(const std::string& name) const;
};

CsvData read_csv(const fs::path& path);
double parse_double(const std::string& s, const std::string& context);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t v);

}  // namespace geoconcept
