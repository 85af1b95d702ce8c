#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace maskseed {

std::string base64_encode(const std::uint8_t* data, std::size_t n);
std::vector<std::uint8_t> base64_decode(const std::string& text);

// Writes to <path>.tmp then renames, so readers never see partial files.
void atomic_write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

// Binary P6 PPM, 8-bit RGB.
void write_ppm(const std::string& path, const std::uint8_t* rgb, int width, int height);
std::vector<std::uint8_t> read_ppm(const std::string& path, int& width, int& height);

}  // namespace maskseed
