#include "meshvote/image_io.hpp"

#include <png.h>

#include <array>
#include <fstream>
#include <iterator>

#include "meshvote/error.hpp"

namespace meshvote {

std::vector<std::uint8_t> encode_png(const Bitmap& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw PreconditionError("PNG encoding supports 1 or 3 channels");
  }
  if (image.empty()) throw PreconditionError("cannot encode an empty image");
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(image.width());
  desc.height = static_cast<png_uint_32>(image.height());
  desc.format = image.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&desc, nullptr, &size, 0, image.data().data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + desc.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&desc, out.data(), &size, 0, image.data().data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + desc.message);
  }
  out.resize(size);
  return out;
}

Bitmap decode_png(std::span<const std::uint8_t> bytes, int channels) {
  if (channels != 1 && channels != 3) throw PreconditionError("PNG decoding supports 1 or 3 channels");
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&desc, bytes.data(), bytes.size())) {
    throw ParseError(std::string("PNG decode failed: ") + desc.message);
  }
  desc.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(desc));
  // Composite any alpha over white, matching the renderer's background.
  png_color background{255, 255, 255};
  if (!png_image_finish_read(&desc, &background, data.data(), 0, nullptr)) {
    png_image_free(&desc);
    throw ParseError(std::string("PNG decode failed: ") + desc.message);
  }
  return Bitmap(static_cast<int>(desc.width), static_cast<int>(desc.height), channels,
                std::move(data));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_png(const Bitmap& image, const std::filesystem::path& path) {
  write_file_bytes(path, encode_png(image));
}

Bitmap read_png(const std::filesystem::path& path, int channels) {
  if (!std::filesystem::exists(path)) throw IoError("image not found: " + path.string());
  return decode_png(read_file_bytes(path), channels);
}

std::vector<std::uint8_t> encode_mask_png(const MaskImage& mask) {
  Bitmap gray(mask.width(), mask.height(), 1);
  auto src = mask.data();
  auto dst = gray.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 255 : 0;
  return encode_png(gray);
}

MaskImage decode_mask_png(std::span<const std::uint8_t> bytes) {
  Bitmap gray = decode_png(bytes, 1);
  for (auto& v : gray.data()) v = v > 127 ? 1 : 0;
  return gray;
}

void write_mask_png(const MaskImage& mask, const std::filesystem::path& path) {
  write_file_bytes(path, encode_mask_png(mask));
}

MaskImage read_mask_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("mask not found: " + path.string());
  return decode_mask_png(read_file_bytes(path));
}

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t n = bytes[i] << 16;
    if (i + 1 < bytes.size()) n |= bytes[i + 1] << 8;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::array<int, 256> table;
  table.fill(-1);
  for (int i = 0; i < 64; ++i) table[static_cast<unsigned char>(kAlphabet[i])] = i;

  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  std::size_t pad = 0;
  for (char ch : text) {
    if (ch == '=') {
      ++pad;
      continue;
    }
    if (ch == '\n' || ch == '\r' || ch == ' ') continue;
    const int v = table[static_cast<unsigned char>(ch)];
    if (v < 0 || pad > 0) throw ParseError("invalid base64 payload");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  if (pad > 2) throw ParseError("invalid base64 padding");
  return out;
}

}  // namespace meshvote
