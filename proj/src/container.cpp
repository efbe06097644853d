#include "maae/container.hpp"

#include "maae/errors.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace maae {

namespace {

void append_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t read_u32_le(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void append_f32_le(std::vector<std::uint8_t>& out, float v) {
  append_u32_le(out, std::bit_cast<std::uint32_t>(v));
}

void append_f64_le(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

float read_f32_le(const std::uint8_t* p) { return std::bit_cast<float>(read_u32_le(p)); }

double read_f64_le(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void write_container(const std::filesystem::path& path, std::string_view magic,
                     const nlohmann::json& header, const std::vector<std::uint8_t>& payload) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  const std::string text = header.dump();
  std::vector<std::uint8_t> prefix(magic.begin(), magic.end());
  append_u32_le(prefix, static_cast<std::uint32_t>(text.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(prefix.data()), static_cast<std::streamsize>(prefix.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Container read_container(const std::filesystem::path& path, std::string_view magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const std::size_t prefix = magic.size() + 4;
  if (bytes.size() < prefix) throw IntegrityError(path.string() + ": truncated before header");
  if (!std::equal(magic.begin(), magic.end(), bytes.begin())) {
    throw IntegrityError(path.string() + ": bad magic, expected " + std::string(magic));
  }
  const std::uint32_t header_len = read_u32_le(bytes.data() + magic.size());
  if (bytes.size() < prefix + header_len) throw IntegrityError(path.string() + ": truncated header");

  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(prefix),
                                     bytes.begin() + static_cast<std::ptrdiff_t>(prefix + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(path.string() + ": unreadable header: " + e.what());
  }
  c.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(prefix + header_len), bytes.end());
  return c;
}

}  // namespace maae
