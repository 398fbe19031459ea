#include "fewshot/feature_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fewshot/errors.hpp"

namespace fewshot {

namespace {

constexpr std::size_t kHeaderBytes = 20;
constexpr std::size_t kClassHeaderBytes = 8;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

std::string where(std::size_t position, std::uint32_t class_id) {
  return "class #" + std::to_string(position) + " (id " + std::to_string(class_id) + ")";
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed for '" + path.string() + "'");
  return bytes;
}

ErrorCode code_for_violation(const std::string& kind) {
  if (kind == "NonFiniteValue") return ErrorCode::NonFiniteValue;
  if (kind == "DimensionMismatch") return ErrorCode::DimensionMismatch;
  return ErrorCode::InvariantViolation;
}

}  // namespace

FeatureBank::FeatureBank(std::string source_id, std::uint32_t dim, std::uint32_t n_views,
                         std::vector<ClassFeatures> classes)
    : source_id_(std::move(source_id)), dim_(dim), n_views_(n_views), classes_(std::move(classes)) {}

std::span<const float> FeatureBank::view(std::size_t position, std::size_t image, std::size_t view) const {
  const auto& cls = classes_.at(position);
  const std::size_t offset = (image * n_views_ + view) * dim_;
  if (image >= cls.n_images || view >= n_views_ || offset + dim_ > cls.values.size()) {
    throw Error(ErrorCode::DimensionMismatch, "view index out of range");
  }
  return std::span<const float>(cls.values).subspan(offset, dim_);
}

std::span<const float> FeatureBank::image(std::size_t position, std::size_t image) const {
  const auto& cls = classes_.at(position);
  const std::size_t stride = static_cast<std::size_t>(n_views_) * dim_;
  if (image >= cls.n_images || (image + 1) * stride > cls.values.size()) {
    throw Error(ErrorCode::DimensionMismatch, "image index out of range");
  }
  return std::span<const float>(cls.values).subspan(image * stride, stride);
}

std::optional<std::size_t> FeatureBank::find_class(std::uint32_t class_id) const {
  for (std::size_t p = 0; p < classes_.size(); ++p) {
    if (classes_[p].class_id == class_id) return p;
  }
  return std::nullopt;
}

bool operator==(const ClassFeatures& a, const ClassFeatures& b) {
  if (a.class_id != b.class_id || a.n_images != b.n_images || a.values.size() != b.values.size()) {
    return false;
  }
  // Bitwise, so NaN payloads and signed zeros count as data.
  return a.values.empty() ||
         std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) == 0;
}

bool same_contents(const FeatureBank& a, const FeatureBank& b) {
  return a.dim() == b.dim() && a.n_views() == b.n_views() && a.classes() == b.classes();
}

ValidationReport validate_bank(const FeatureBank& bank) {
  ValidationReport report;
  if (bank.dim() == 0) report.push_back({"InvariantViolation", "dimension must be at least 1", {}, {}, {}, {}});
  if (bank.n_views() == 0) report.push_back({"InvariantViolation", "n_views must be at least 1", {}, {}, {}, {}});
  if (bank.n_classes() == 0) report.push_back({"InvariantViolation", "bank holds no classes", {}, {}, {}, {}});

  std::set<std::uint32_t> seen;
  const std::size_t stride = static_cast<std::size_t>(bank.n_views()) * bank.dim();
  for (std::size_t p = 0; p < bank.n_classes(); ++p) {
    const auto& cls = bank.class_at(p);
    if (!seen.insert(cls.class_id).second) {
      report.push_back({"DuplicateClass", where(p, cls.class_id) + " repeats an earlier class id", p, {}, {}, {}});
    }
    if (cls.n_images == 0) {
      report.push_back({"EmptyClass", where(p, cls.class_id) + " holds no images", p, {}, {}, {}});
    }
    if (cls.values.size() != cls.n_images * stride) {
      report.push_back({"DimensionMismatch",
                        where(p, cls.class_id) + " holds " + std::to_string(cls.values.size()) +
                            " values, expected " + std::to_string(cls.n_images * stride),
                        p, {}, {}, {}});
      continue;
    }
    if (stride == 0) continue;
    for (std::size_t i = 0; i < cls.values.size(); ++i) {
      if (std::isfinite(cls.values[i])) continue;
      const std::size_t image = i / stride;
      const std::size_t view = (i % stride) / bank.dim();
      const std::size_t coord = i % bank.dim();
      std::ostringstream msg;
      msg << "non-finite value " << cls.values[i] << " at " << where(p, cls.class_id) << ", image " << image
          << ", view " << view << ", coordinate " << coord;
      report.push_back({"NonFiniteValue", msg.str(), p, image, view, coord});
    }
  }
  return report;
}

ValidationReport check_ensemble_compatible(const FeatureBank& first, const FeatureBank& second) {
  ValidationReport report;
  std::set<std::uint32_t> a;
  std::set<std::uint32_t> b;
  for (const auto& c : first.classes()) a.insert(c.class_id);
  for (const auto& c : second.classes()) b.insert(c.class_id);
  for (auto id : a) {
    if (!b.count(id)) {
      report.push_back({"MissingClass", "class id " + std::to_string(id) + " only in '" + first.source_id() + "'",
                        first.find_class(id), {}, {}, {}});
    }
  }
  for (auto id : b) {
    if (!a.count(id)) {
      report.push_back({"MissingClass", "class id " + std::to_string(id) + " only in '" + second.source_id() + "'",
                        second.find_class(id), {}, {}, {}});
    }
  }
  if (!report.empty()) return report;

  for (std::size_t p = 0; p < first.n_classes(); ++p) {
    const auto& ca = first.class_at(p);
    const auto& cb = second.class_at(p);
    if (ca.class_id != cb.class_id) {
      report.push_back({"ClassOrder", "class order differs at position " + std::to_string(p), p, {}, {}, {}});
    } else if (ca.n_images != cb.n_images) {
      report.push_back({"ImageCount",
                        where(p, ca.class_id) + " has " + std::to_string(ca.n_images) + " vs " +
                            std::to_string(cb.n_images) + " images",
                        p, {}, {}, {}});
    }
  }
  if (first.n_views() != second.n_views()) {
    report.push_back({"ViewCount",
                      "n_views differs: " + std::to_string(first.n_views()) + " vs " +
                          std::to_string(second.n_views()),
                      {}, {}, {}, {}});
  }
  return report;
}

FeatureBank parse_feature_bank(std::span<const std::uint8_t> bytes, std::string source_id) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kFvbMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "file does not start with \"FVB1\"");
  }
  if (bytes.size() < kHeaderBytes) throw Error(ErrorCode::TruncatedFile, "header is incomplete");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kFvbVersion) {
    throw Error(ErrorCode::BadMagic, "unsupported FVB1 version " + std::to_string(version));
  }
  const std::uint32_t dim = get_u32(bytes, 8);
  const std::uint32_t n_views = get_u32(bytes, 12);
  const std::uint32_t n_classes = get_u32(bytes, 16);

  std::vector<ClassFeatures> classes;
  classes.reserve(std::min<std::size_t>(n_classes, bytes.size() / kClassHeaderBytes));
  std::size_t offset = kHeaderBytes;
  for (std::uint32_t p = 0; p < n_classes; ++p) {
    if (bytes.size() - offset < kClassHeaderBytes) {
      throw Error(ErrorCode::TruncatedFile, "class record " + std::to_string(p) + " header is incomplete");
    }
    ClassFeatures cls;
    cls.class_id = get_u32(bytes, offset);
    cls.n_images = get_u32(bytes, offset + 4);
    offset += kClassHeaderBytes;

    const std::uint64_t per_image = static_cast<std::uint64_t>(n_views) * dim;
    const std::uint64_t count = per_image * cls.n_images;
    const std::uint64_t payload = count * sizeof(float);
    const std::size_t remaining = bytes.size() - offset;
    if (payload > remaining) {
      // A short payload that still divides evenly into one vector per view
      // was written with a different dimension than the header claims.
      const bool whole_vectors = remaining > 0 && remaining % sizeof(float) == 0 &&
                                 n_views > 0 && cls.n_images > 0 &&
                                 (remaining / sizeof(float)) % (static_cast<std::uint64_t>(n_views) * cls.n_images) == 0;
      if (whole_vectors && p + 1 == n_classes) {
        throw Error(ErrorCode::DimensionMismatch,
                    where(p, cls.class_id) + " payload holds " + std::to_string(remaining / sizeof(float)) +
                        " floats but the header dimension needs " + std::to_string(count));
      }
      throw Error(ErrorCode::TruncatedFile, where(p, cls.class_id) + " payload is incomplete");
    }
    cls.values.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      cls.values[i] = std::bit_cast<float>(get_u32(bytes, offset + i * sizeof(float)));
    }
    offset += payload;
    classes.push_back(std::move(cls));
  }
  if (offset != bytes.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(bytes.size() - offset) + " trailing bytes after the last class record");
  }
  return FeatureBank(std::move(source_id), dim, n_views, std::move(classes));
}

FeatureBank read_feature_bank_unchecked(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::string source_id = path.stem().string();
  const auto manifest = manifest_path_for(path);
  if (std::filesystem::exists(manifest)) {
    try {
      source_id = load_manifest(manifest).source_id;
    } catch (const std::exception&) {
      // The manifest is informational; a broken one does not block loading.
    }
  }
  return parse_feature_bank(bytes, std::move(source_id));
}

FeatureBank load_feature_bank(const std::filesystem::path& path) {
  FeatureBank bank = read_feature_bank_unchecked(path);
  const auto report = validate_bank(bank);
  if (!report.empty()) {
    throw Error(code_for_violation(report.front().kind), path.string() + ": " + report.front().message);
  }
  return bank;
}

std::vector<std::uint8_t> serialize_feature_bank(const FeatureBank& bank) {
  std::size_t total = kHeaderBytes;
  for (const auto& c : bank.classes()) total += kClassHeaderBytes + c.values.size() * sizeof(float);
  std::vector<std::uint8_t> out;
  out.reserve(total);
  out.insert(out.end(), kFvbMagic, kFvbMagic + 4);
  put_u32(out, kFvbVersion);
  put_u32(out, bank.dim());
  put_u32(out, bank.n_views());
  put_u32(out, static_cast<std::uint32_t>(bank.n_classes()));
  for (const auto& c : bank.classes()) {
    put_u32(out, c.class_id);
    put_u32(out, c.n_images);
    for (float v : c.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

void write_feature_bank(const FeatureBank& bank, const std::filesystem::path& path) {
  const auto report = validate_bank(bank);
  if (!report.empty()) {
    throw Error(ErrorCode::InvariantViolation, "refusing to write invalid bank: " + report.front().message);
  }
  const auto bytes = serialize_feature_bank(bank);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

std::filesystem::path manifest_path_for(const std::filesystem::path& bank_path) {
  return std::filesystem::path(bank_path.string() + ".json");
}

void write_manifest(const BankManifest& manifest, const std::filesystem::path& path) {
  nlohmann::json names = nlohmann::json::object();
  for (const auto& [id, name] : manifest.class_names) names[std::to_string(id)] = name;
  const nlohmann::json j = {{"source_id", manifest.source_id}, {"class_names", names}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

BankManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, "malformed manifest '" + path.string() + "': " + e.what());
  }
  BankManifest m;
  m.source_id = j.value("source_id", std::string{});
  if (j.contains("class_names")) {
    for (const auto& [key, value] : j.at("class_names").items()) {
      m.class_names[static_cast<std::uint32_t>(std::stoul(key))] = value.get<std::string>();
    }
  }
  return m;
}

std::string fvb1_layout_description() {
  return R"(FVB1 feature bank layout (little-endian throughout)

offset  size  field
0       4     magic "FVB1" (0x46 0x56 0x42 0x31)
4       4     u32 format version = 1
8       4     u32 dim       feature dimension, >= 1
12      4     u32 n_views   vectors per image, >= 1
16      4     u32 n_classes
20      ...   n_classes class records, back to back

class record:
  0     4     u32 class_id (unique within the file)
  4     4     u32 n_images (>= 1)
  8     ...   n_images * n_views * dim IEEE-754 binary32 values

Within a class record, images are contiguous and the views of an image are
contiguous, so value (image i, view v, coordinate c) is float number
(i * n_views + v) * dim + c of the payload. Values must be finite.
Files end exactly after the last class record.

Optional sidecar manifest "<file>.json":
  {"source_id": "...", "class_names": {"<class_id>": "<name>", ...}}
)";
}

}  // namespace fewshot
