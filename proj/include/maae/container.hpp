#pragma once

// Self-describing binary container used by dataset and checkpoint files:
//   8 magic bytes | u32 little-endian header length | UTF-8 JSON header | payload

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace maae {

struct Container {
  nlohmann::json header;
  std::vector<std::uint8_t> payload;
};

void write_container(const std::filesystem::path& path, std::string_view magic,
                     const nlohmann::json& header, const std::vector<std::uint8_t>& payload);

// Throws IoError when the file cannot be opened and IntegrityError when the
// magic, header or payload length is inconsistent.
Container read_container(const std::filesystem::path& path, std::string_view magic);

void append_f32_le(std::vector<std::uint8_t>& out, float v);
void append_f64_le(std::vector<std::uint8_t>& out, double v);
float read_f32_le(const std::uint8_t* p);
double read_f64_le(const std::uint8_t* p);

}  // namespace maae
