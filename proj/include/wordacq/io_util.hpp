#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wordacq {

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ULL);
uint64_t fnv1a64(std::string_view s);
uint64_t hash_file(const std::filesystem::path& p);
std::string hash_hex(uint64_t h);

std::string read_text_file(const std::filesystem::path& p);
void write_text_file(const std::filesystem::path& p, std::string_view content);
std::vector<std::string> read_lines(const std::filesystem::path& p);

// Minimal CSV: our fields never contain quotes; commas are quoted.
std::string csv_escape(const std::string& field);
std::vector<std::string> split_csv_line(const std::string& line);
std::vector<std::string> split_on(const std::string& line, char sep);

std::string format_double(double v);

}  // namespace wordacq
