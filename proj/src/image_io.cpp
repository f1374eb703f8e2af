#include "neilf/image_io.hpp"

#include "neilf/types.hpp"

#include <png.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace neilf {

namespace {

std::string describe(const std::filesystem::path& path) { return "'" + path.string() + "'"; }

float byteswap_float(float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  bits = ((bits & 0xFF) << 24) | ((bits & 0xFF00) << 8) | ((bits >> 8) & 0xFF00) | (bits >> 24);
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) fail(Error::Kind::kInvalidArgument, "PFM supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Error::Kind::kIo, "cannot open " + describe(path) + " for writing");
  out << (image.channels == 3 ? "PF" : "Pf") << "\n" << image.width << " " << image.height << "\n-1.0\n";
  const std::size_t row_len = static_cast<std::size_t>(image.width) * image.channels;
  std::vector<float> row(row_len);
  for (int r = image.height - 1; r >= 0; --r) {
    std::memcpy(row.data(), image.data.data() + static_cast<std::size_t>(r) * row_len, row_len * sizeof(float));
    if constexpr (std::endian::native == std::endian::big) {
      for (float& v : row) v = byteswap_float(v);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row_len * sizeof(float)));
  }
  if (!out) fail(Error::Kind::kIo, "failed writing " + describe(path));
}

Image read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Error::Kind::kIo, "cannot open " + describe(path));
  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (!in || (magic != "PF" && magic != "Pf") || width <= 0 || height <= 0 || scale == 0.0) {
    fail(Error::Kind::kFormat, "malformed PFM header in " + describe(path));
  }
  in.get();  // single whitespace byte before the raster
  Image image(width, height, magic == "PF" ? 3 : 1);
  const std::size_t row_len = static_cast<std::size_t>(width) * image.channels;
  const bool file_little = scale < 0.0;
  const bool swap = file_little != (std::endian::native == std::endian::little);
  for (int r = height - 1; r >= 0; --r) {
    float* dst = image.data.data() + static_cast<std::size_t>(r) * row_len;
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(row_len * sizeof(float)));
    if (!in) fail(Error::Kind::kFormat, "truncated PFM raster in " + describe(path));
    if (swap) {
      for (std::size_t k = 0; k < row_len; ++k) dst[k] = byteswap_float(dst[k]);
    }
  }
  return image;
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) fail(Error::Kind::kInvalidArgument, "PNG writer supports 1 or 3 channels");
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, image.data.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    fail(Error::Kind::kIo, "cannot write PNG " + describe(path) + ": " + msg);
  }
}

Image8 read_png(const std::filesystem::path& path, int channels) {
  if (channels != 1 && channels != 3) fail(Error::Kind::kInvalidArgument, "PNG reader supports 1 or 3 channels");
  if (!std::filesystem::exists(path)) fail(Error::Kind::kIo, "missing file " + describe(path));
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    fail(Error::Kind::kFormat, "cannot read PNG " + describe(path) + ": " + png.message);
  }
  png.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image8 image(static_cast<int>(png.width), static_cast<int>(png.height), channels);
  if (!png_image_finish_read(&png, nullptr, image.data.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    fail(Error::Kind::kFormat, "cannot decode PNG " + describe(path) + ": " + msg);
  }
  return image;
}

}  // namespace neilf
