#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace awseg {

using ClassId = std::uint32_t;

/// A named class and the raw id it carries in label files.
struct ClassInfo {
  std::string name;
  std::uint32_t raw_id = 0;
  friend bool operator==(const ClassInfo&, const ClassInfo&) = default;
};

/// Base classes (present in good-weather data) and novel classes (adverse
/// weather only). Contiguous ids are base classes first, then novel ones.
class ClassSchema {
 public:
  ClassSchema() = default;
  /// Throws ArgumentError when names or raw ids collide, or background is
  /// out of range.
  ClassSchema(std::vector<ClassInfo> base, std::vector<ClassInfo> novel, ClassId background);

  /// ground / vehicle / structure + weather-noise, background = ground.
  static ClassSchema default_schema();
  /// `n` classes, raw id i ↔ contiguous id i, all base, background 0.
  static ClassSchema identity(std::size_t n);

  std::size_t num_classes() const { return base_.size() + novel_.size(); }
  std::size_t num_base() const { return base_.size(); }
  std::size_t num_novel() const { return novel_.size(); }
  const std::vector<ClassInfo>& base() const { return base_; }
  const std::vector<ClassInfo>& novel() const { return novel_; }
  ClassId background() const { return background_; }

  std::vector<ClassId> base_ids() const;
  std::vector<ClassId> novel_ids() const;
  std::vector<ClassId> all_ids() const;
  bool is_novel(ClassId id) const { return id >= base_.size() && id < num_classes(); }
  const std::string& name(ClassId id) const;

  /// Raw label-file id → contiguous id; unknown raw ids go to background.
  ClassId from_raw(std::uint32_t raw) const;
  std::uint32_t to_raw(ClassId id) const;

  /// Key-value text form, one `key = value` per line.
  std::string serialize() const;
  static ClassSchema parse(const std::map<std::string, std::string>& kv);

  friend bool operator==(const ClassSchema&, const ClassSchema&) = default;

 private:
  std::vector<ClassInfo> base_;
  std::vector<ClassInfo> novel_;
  ClassId background_ = 0;
  std::map<std::uint32_t, ClassId> raw_to_id_;
};

}  // namespace awseg
