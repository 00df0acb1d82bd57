#include "dsanet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "dsanet/errors.hpp"

namespace dsanet::io {

namespace fs = std::filesystem;

double quantize16(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return std::round(v * 65535.0) / 65535.0;
}

void write_pgm(const fs::path& path, const Image& image, int bit_depth) {
  if (image.rank() != 2) throw ShapeError("write_pgm: expected (H, W) image, got " + to_string(image.shape()));
  if (bit_depth != 8 && bit_depth != 16) throw ConfigError("write_pgm: bit_depth must be 8 or 16");
  const int height = image.dim(0), width = image.dim(1);
  const int maxval = bit_depth == 8 ? 255 : 65535;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "P5\n" << width << ' ' << height << '\n' << maxval << '\n';
  std::vector<unsigned char> bytes;
  bytes.reserve(image.size() * (bit_depth / 8));
  for (double v : image.values()) {
    const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
    if (bit_depth == 16) bytes.push_back(static_cast<unsigned char>(q >> 8));
    bytes.push_back(static_cast<unsigned char>(q & 0xFF));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
bool next_token(std::istream& in, std::string& token) {
  token.clear();
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) return true;
      continue;
    }
    token.push_back(static_cast<char>(c));
  }
  return !token.empty();
}

}  // namespace

Image read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string magic, w, h, m;
  if (!next_token(in, magic) || magic != "P5" || !next_token(in, w) || !next_token(in, h) || !next_token(in, m)) {
    throw IoError("corrupt PGM header: " + path.string());
  }
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(w);
    height = std::stoi(h);
    maxval = std::stoi(m);
  } catch (const std::exception&) {
    throw IoError("corrupt PGM header: " + path.string());
  }
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) throw IoError("corrupt PGM header: " + path.string());
  const int bytes_per = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> bytes(static_cast<std::size_t>(width) * height * bytes_per);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw IoError("truncated PGM data: " + path.string());
  Image image(Shape{height, width});
  for (std::size_t i = 0; i < image.size(); ++i) {
    const unsigned q = bytes_per == 2 ? (unsigned(bytes[2 * i]) << 8) | bytes[2 * i + 1] : bytes[i];
    if (q > static_cast<unsigned>(maxval)) throw IoError("PGM sample exceeds maxval: " + path.string());
    image[i] = static_cast<double>(q) / maxval;
  }
  return image;
}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const std::size_t o = (static_cast<std::size_t>(y) * width + x) * 3;
  pixels[o] = r;
  pixels[o + 1] = g;
  pixels[o + 2] = b;
}

void write_png(const fs::path& path, const RgbImage& image) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!file) throw IoError("cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    auto row = const_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(y) * image.width * 3);
    png_write_row(png, row);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace dsanet::io
