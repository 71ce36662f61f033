#pragma once

// PNG/JPEG decoding and PNG encoding. Callers link PNG::PNG and JPEG::JPEG.

#include <png.h>
#include <jpeglib.h>

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "lexivis/errors.hpp"
#include "lexivis/image.hpp"
#include "lexivis/weights.hpp"

namespace lexivis {

class ImageDecodeError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline ImageBuffer decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw ImageDecodeError(name + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ImageDecodeError(name + ": " + msg);
  }
  return ImageBuffer(image.height, image.width, std::move(pixels));
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

extern "C" inline void lexivis_jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// No C++ objects with non-trivial destructors may live between setjmp and a
// longjmp out of libjpeg, so the decode writes into a caller-owned buffer.
inline bool decode_jpeg_raw(const std::vector<std::uint8_t>& bytes, std::vector<std::uint8_t>& pixels,
                            std::size_t& height, std::size_t& width, JpegErrorManager& err) {
  jpeg_decompress_struct cinfo{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = lexivis_jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  height = cinfo.output_height;
  width = cinfo.output_width;
  pixels.resize(height * width * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

inline ImageBuffer decode_jpeg(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  JpegErrorManager err{};
  std::vector<std::uint8_t> pixels;
  std::size_t height = 0;
  std::size_t width = 0;
  if (!decode_jpeg_raw(bytes, pixels, height, width, err)) {
    throw ImageDecodeError(name + ": " + err.message);
  }
  return ImageBuffer(height, width, std::move(pixels));
}

}  // namespace detail

// Decodes PNG or JPEG, selected by file signature.
inline ImageBuffer read_image(const fs::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const IoError& e) {
    throw ImageDecodeError(e.what());
  }
  const std::string name = path.string();
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return detail::decode_png(bytes, name);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    return detail::decode_jpeg(bytes, name);
  }
  throw ImageDecodeError(name + ": not a PNG or JPEG file");
}

inline void write_png(const ImageBuffer& img, const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels().data(), 0, nullptr)) {
    throw IoError(path.string() + ": " + image.message);
  }
}

}  // namespace lexivis
