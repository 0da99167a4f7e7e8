#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace awseg {

/// `key = value` lines; `#` starts a comment, blank lines are ignored,
/// whitespace around keys and values is trimmed. Duplicate keys are a
/// FormatError naming the line.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues read_key_value_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace awseg
