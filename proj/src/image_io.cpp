#include "stcl/image_io.hpp"

#include <png.h>
#include <openssl/evp.h>

#include <cstdio>
#include <memory>

#include "stcl/error.hpp"

namespace stcl {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

class PngWriter {
 public:
  PngWriter() {
    png_ = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png_) throw IoError("png_create_write_struct failed");
    info_ = png_create_info_struct(png_);
    if (!info_) {
      png_destroy_write_struct(&png_, nullptr);
      throw IoError("png_create_info_struct failed");
    }
  }
  ~PngWriter() { png_destroy_write_struct(&png_, &info_); }
  PngWriter(const PngWriter&) = delete;
  PngWriter& operator=(const PngWriter&) = delete;

  png_structp png() { return png_; }
  png_infop info() { return info_; }

 private:
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

// libpng reports errors through longjmp; rows are prepared beforehand so no
// C++ object with a destructor is live across the setjmp frame.
void write_rows(PngWriter& w, int width, int height, int bit_depth, int color_type,
                std::vector<png_bytep>& rows, const std::string& what) {
  if (setjmp(png_jmpbuf(w.png()))) throw IoError("libpng failed writing " + what);
  png_set_IHDR(w.png(), w.info(), static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png(), w.info());
  png_write_image(w.png(), rows.data());
  png_write_end(w.png(), nullptr);
}

std::vector<png_bytep> row_pointers(std::vector<std::uint8_t>& buf, int height, std::size_t stride) {
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = buf.data() + y * stride;
  return rows;
}

std::vector<std::uint8_t> labels_to_be16(const CategoryMap& map) {
  std::vector<std::uint8_t> buf(map.ids.size() * 2);
  for (std::size_t i = 0; i < map.ids.size(); ++i) {
    const int v = map.ids[i] + 1;
    if (v < 0 || v > 0xffff) throw IoError("category id out of 16-bit range");
    buf[2 * i] = static_cast<std::uint8_t>(v >> 8);
    buf[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
  }
  return buf;
}

struct Decoded {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::vector<std::uint8_t> data;
};

Decoded read_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot read " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  Decoded out;
  std::vector<png_bytep> rows;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng failed reading " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  out.color_type = png_get_color_type(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.data.resize(stride * static_cast<std::size_t>(out.height));
  rows = row_pointers(out.data, out.height, stride);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void append_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void flush_noop(png_structp) {}

}  // namespace

void write_png(const Image& img, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot write " + path);
  auto buf = img.pixels;
  auto rows = row_pointers(buf, img.height, static_cast<std::size_t>(img.width) * 3);
  PngWriter w;
  png_init_io(w.png(), f.get());
  write_rows(w, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, rows, path);
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  std::vector<std::uint8_t> out;
  auto buf = img.pixels;
  auto rows = row_pointers(buf, img.height, static_cast<std::size_t>(img.width) * 3);
  PngWriter w;
  png_set_write_fn(w.png(), &out, &append_bytes, &flush_noop);
  write_rows(w, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, rows, "in-memory PNG");
  return out;
}

void write_png(const CategoryMap& map, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot write " + path);
  auto buf = labels_to_be16(map);
  auto rows = row_pointers(buf, map.height, static_cast<std::size_t>(map.width) * 2);
  PngWriter w;
  png_init_io(w.png(), f.get());
  write_rows(w, map.width, map.height, 16, PNG_COLOR_TYPE_GRAY, rows, path);
}

Image read_png_rgb(const std::string& path) {
  Decoded d = read_png(path);
  if (d.bit_depth != 8 || d.color_type != PNG_COLOR_TYPE_RGB) throw IoError(path + " is not an 8-bit RGB PNG");
  Image img(d.width, d.height);
  img.pixels = std::move(d.data);
  return img;
}

CategoryMap read_png_labels(const std::string& path) {
  Decoded d = read_png(path);
  if (d.bit_depth != 16 || d.color_type != PNG_COLOR_TYPE_GRAY) throw IoError(path + " is not a 16-bit gray PNG");
  CategoryMap map(d.width, d.height);
  for (std::size_t i = 0; i < map.ids.size(); ++i) map.ids[i] = ((d.data[2 * i] << 8) | d.data[2 * i + 1]) - 1;
  return map;
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

}  // namespace stcl
