#include "awseg/schema.hpp"

#include <fmt/format.h>

#include <set>
#include <sstream>

#include "awseg/errors.hpp"

namespace awseg {

ClassSchema::ClassSchema(std::vector<ClassInfo> base, std::vector<ClassInfo> novel,
                         ClassId background)
    : base_(std::move(base)), novel_(std::move(novel)), background_(background) {
  std::set<std::string> names;
  ClassId next = 0;
  for (const auto* group : {&base_, &novel_}) {
    for (const auto& c : *group) {
      if (c.name.empty() || c.name.find_first_of(",:= \t\n") != std::string::npos)
        throw ArgumentError(fmt::format("invalid class name '{}'", c.name));
      if (!names.insert(c.name).second)
        throw ArgumentError(fmt::format("class '{}' listed twice (base and novel must be disjoint)", c.name));
      if (!raw_to_id_.emplace(c.raw_id, next).second)
        throw ArgumentError(fmt::format("raw id {} mapped twice", c.raw_id));
      ++next;
    }
  }
  if (num_classes() == 0) throw ArgumentError("schema has no classes");
  if (background_ >= num_classes())
    throw ArgumentError(fmt::format("background id {} out of range", background_));
}

ClassSchema ClassSchema::default_schema() {
  return ClassSchema({{"ground", 40}, {"vehicle", 10}, {"structure", 50}},
                     {{"weather-noise", 110}}, 0);
}

ClassSchema ClassSchema::identity(std::size_t n) {
  std::vector<ClassInfo> base;
  for (std::size_t i = 0; i < n; ++i)
    base.push_back({fmt::format("class{}", i), static_cast<std::uint32_t>(i)});
  return ClassSchema(std::move(base), {}, 0);
}

std::vector<ClassId> ClassSchema::base_ids() const {
  std::vector<ClassId> out(base_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<ClassId>(i);
  return out;
}

std::vector<ClassId> ClassSchema::novel_ids() const {
  std::vector<ClassId> out(novel_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<ClassId>(base_.size() + i);
  return out;
}

std::vector<ClassId> ClassSchema::all_ids() const {
  std::vector<ClassId> out(num_classes());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<ClassId>(i);
  return out;
}

const std::string& ClassSchema::name(ClassId id) const {
  if (id < base_.size()) return base_[id].name;
  if (id < num_classes()) return novel_[id - base_.size()].name;
  throw ArgumentError(fmt::format("class id {} out of range", id));
}

ClassId ClassSchema::from_raw(std::uint32_t raw) const {
  auto it = raw_to_id_.find(raw);
  return it == raw_to_id_.end() ? background_ : it->second;
}

std::uint32_t ClassSchema::to_raw(ClassId id) const {
  if (id < base_.size()) return base_[id].raw_id;
  if (id < num_classes()) return novel_[id - base_.size()].raw_id;
  throw ArgumentError(fmt::format("class id {} out of range", id));
}

namespace {

std::string join_classes(const std::vector<ClassInfo>& classes) {
  std::string out;
  for (const auto& c : classes) {
    if (!out.empty()) out += ',';
    out += fmt::format("{}:{}", c.name, c.raw_id);
  }
  return out;
}

std::vector<ClassInfo> split_classes(const std::string& text) {
  std::vector<ClassInfo> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto colon = item.find(':');
    if (colon == std::string::npos)
      throw FormatError(fmt::format("class entry '{}' is not name:raw_id", item));
    try {
      out.push_back({item.substr(0, colon),
                     static_cast<std::uint32_t>(std::stoul(item.substr(colon + 1)))});
    } catch (const std::logic_error&) {
      throw FormatError(fmt::format("class entry '{}' has a bad raw id", item));
    }
  }
  return out;
}

}  // namespace

std::string ClassSchema::serialize() const {
  return fmt::format("base_classes = {}\nnovel_classes = {}\nbackground_id = {}\n",
                     join_classes(base_), join_classes(novel_), background_);
}

ClassSchema ClassSchema::parse(const std::map<std::string, std::string>& kv) {
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(fmt::format("schema key '{}' missing", key));
    return it->second;
  };
  ClassId background = 0;
  try {
    background = static_cast<ClassId>(std::stoul(get("background_id")));
  } catch (const std::logic_error&) {
    throw FormatError("schema background_id is not an integer");
  }
  return ClassSchema(split_classes(get("base_classes")), split_classes(get("novel_classes")),
                     background);
}

}  // namespace awseg
