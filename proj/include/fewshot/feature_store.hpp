#pragma once

// Feature banks: per-class, per-image, per-view embeddings produced by one
// backbone, and the FVB1 file format they are stored in.
//
// FVB1 layout (all integers u32 little-endian, values IEEE-754 binary32 LE):
//
//   "FVB1" | version=1 | dim | n_views | n_classes
//   repeated n_classes times:
//     class_id | n_images | n_images * n_views * dim floats
//
// Images are contiguous within a class and views are contiguous within an
// image, so value (image i, view v, coord c) sits at ((i * n_views) + v) * dim + c.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fewshot {

inline constexpr char kFvbMagic[4] = {'F', 'V', 'B', '1'};
inline constexpr std::uint32_t kFvbVersion = 1;

struct ClassFeatures {
  std::uint32_t class_id = 0;
  std::uint32_t n_images = 0;
  std::vector<float> values;  // n_images * n_views * dim
};

/// Immutable after construction. The constructor does not validate so that
/// malformed banks can still be inspected with validate_bank().
class FeatureBank {
 public:
  FeatureBank() = default;
  FeatureBank(std::string source_id, std::uint32_t dim, std::uint32_t n_views,
              std::vector<ClassFeatures> classes);

  const std::string& source_id() const noexcept { return source_id_; }
  std::uint32_t dim() const noexcept { return dim_; }
  std::uint32_t n_views() const noexcept { return n_views_; }
  std::size_t n_classes() const noexcept { return classes_.size(); }
  const std::vector<ClassFeatures>& classes() const noexcept { return classes_; }
  const ClassFeatures& class_at(std::size_t position) const { return classes_.at(position); }

  std::uint32_t n_images(std::size_t position) const { return classes_.at(position).n_images; }

  /// One view of one image. Positions index the class list, not class ids.
  std::span<const float> view(std::size_t position, std::size_t image, std::size_t view) const;

  /// All n_views vectors of one image, back to back.
  std::span<const float> image(std::size_t position, std::size_t image) const;

  /// Class position for an id, if present.
  std::optional<std::size_t> find_class(std::uint32_t class_id) const;

 private:
  std::string source_id_;
  std::uint32_t dim_ = 0;
  std::uint32_t n_views_ = 0;
  std::vector<ClassFeatures> classes_;
};

bool operator==(const ClassFeatures& a, const ClassFeatures& b);

/// Equal layout and bit-identical values. source_id is not part of FVB1 and
/// is ignored.
bool same_contents(const FeatureBank& a, const FeatureBank& b);

struct Violation {
  std::string kind;  // e.g. "NonFiniteValue", "EmptyClass", "MissingClass"
  std::string message;
  std::optional<std::size_t> class_position;
  std::optional<std::size_t> image;
  std::optional<std::size_t> view;
  std::optional<std::size_t> coordinate;
};

using ValidationReport = std::vector<Violation>;

/// Empty iff every bank invariant holds.
ValidationReport validate_bank(const FeatureBank& bank);

/// Ensemble compatibility: same dimension-independent layout, i.e. the same
/// class ids in the same order with the same image counts. Missing classes
/// are reported as the symmetric difference of the two id sets.
ValidationReport check_ensemble_compatible(const FeatureBank& first, const FeatureBank& second);

/// Parses FVB1 bytes without checking bank invariants. Throws BadMagic,
/// TruncatedFile or DimensionMismatch on structural problems.
FeatureBank parse_feature_bank(std::span<const std::uint8_t> bytes, std::string source_id = {});

/// Structural parse plus validation; the first violation is thrown.
/// source_id comes from the sidecar manifest (`<path>.json`) when one exists,
/// otherwise from the file stem.
FeatureBank load_feature_bank(const std::filesystem::path& path);

/// Reads the file structurally and leaves validation to the caller.
FeatureBank read_feature_bank_unchecked(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_feature_bank(const FeatureBank& bank);

/// Rejects banks that fail validation (InvariantViolation) before touching disk.
void write_feature_bank(const FeatureBank& bank, const std::filesystem::path& path);

/// Optional sidecar `{source_id, class_names}` manifest, informational only.
struct BankManifest {
  std::string source_id;
  std::map<std::uint32_t, std::string> class_names;
};

std::filesystem::path manifest_path_for(const std::filesystem::path& bank_path);
void write_manifest(const BankManifest& manifest, const std::filesystem::path& path);
BankManifest load_manifest(const std::filesystem::path& path);

/// Human readable description of the byte layout.
std::string fvb1_layout_description();

}  // namespace fewshot
