#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "meshvote/bitmap.hpp"

namespace meshvote {

/// PNG encoding with fixed compression settings so equal images give equal bytes.
std::vector<std::uint8_t> encode_png(const Bitmap& image);

/// Decodes to the requested channel count (1 = gray, 3 = RGB).
Bitmap decode_png(std::span<const std::uint8_t> bytes, int channels);

void write_png(const Bitmap& image, const std::filesystem::path& path);
Bitmap read_png(const std::filesystem::path& path, int channels);

/// Binary mask (0/1) to a gray PNG holding 0/255, and back (any sample > 127 is set).
void write_mask_png(const MaskImage& mask, const std::filesystem::path& path);
MaskImage read_mask_png(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_mask_png(const MaskImage& mask);
MaskImage decode_mask_png(std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace meshvote
