#include "awseg/keyvalue.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "awseg/errors.hpp"

namespace awseg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(fmt::format("line {}: expected 'key = value'", line_no));
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw FormatError(fmt::format("line {}: empty key", line_no));
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second)
      throw FormatError(fmt::format("line {}: duplicate key '{}'", line_no, key));
  }
  return kv;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

KeyValues read_key_value_file(const std::filesystem::path& path) {
  try {
    return parse_key_values(read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("write failed on '{}'", path.string()));
}

}  // namespace awseg
