#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace epipair {

bool has_gz_suffix(std::string_view name);

// Whole-file reads; read_text_file decompresses when the path ends in ".gz".
std::string read_binary_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

std::string gunzip(std::string_view bytes);

// write_text_file compresses when the path ends in ".gz".
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Splits on '\n', strips a trailing '\r' per line, drops the final empty
// segment after a terminating newline. Views into `text`.
std::vector<std::string_view> split_lines(std::string_view text);

void split_fields(std::string_view line, char delim,
                  std::vector<std::string_view>& out);

} // namespace epipair
