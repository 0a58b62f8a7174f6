// Copyright 2026 The Trayscan Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstring>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "trayscan/core/error.hpp"
#include "trayscan/core/types.hpp"

namespace trayscan::io {

namespace detail {

inline std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

inline std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_all(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

inline bool is_png(const std::vector<unsigned char>& bytes) {
  static const unsigned char kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::equal(kSig, kSig + 8, bytes.begin());
}

/// Decoded netpbm / png payload: samples are row-major, channel-interleaved.
struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> samples;
};

inline Decoded decode_netpbm(const std::vector<unsigned char>& bytes, const std::string& name) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space();
    long value = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
      any = true;
      if (value > 1'000'000) throw IoError(name + ": header value too large");
    }
    if (!any) throw IoError(name + ": malformed netpbm header");
    return value;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw IoError(name + ": not a binary PGM/PPM file");
  }
  Decoded d;
  d.channels = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  d.width = static_cast<int>(read_int());
  d.height = static_cast<int>(read_int());
  const long maxval = read_int();
  if (maxval <= 0 || maxval > 65535) throw IoError(name + ": invalid maxval " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw IoError(name + ": malformed netpbm header");
  ++pos;
  d.bit_depth = maxval > 255 ? 16 : 8;
  const std::size_t count = static_cast<std::size_t>(d.width) * d.height * d.channels;
  const std::size_t bytes_per = d.bit_depth == 16 ? 2 : 1;
  if (bytes.size() - pos < count * bytes_per) throw IoError(name + ": truncated pixel data");
  d.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (bytes_per == 2) {
      d.samples[i] = static_cast<std::uint16_t>((bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1]);
    } else {
      d.samples[i] = bytes[pos + i];
    }
  }
  return d;
}

struct PngReadState {
  const std::vector<unsigned char>* bytes;
  std::size_t offset;
};

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t count) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->offset + count > st->bytes->size()) png_error(png, "truncated png");
  std::memcpy(out, st->bytes->data() + st->offset, count);
  st->offset += count;
}

inline Decoded decode_png(const std::vector<unsigned char>& bytes, const std::string& name) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError(name + ": png init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError(name + ": png init failed");
  }
  Decoded d;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> raw;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(name + ": corrupt png");
  }
  PngReadState st{&bytes, 0};
  png_set_read_fn(png, &st, png_read_from_memory);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  d.width = static_cast<int>(png_get_image_width(png, info));
  d.height = static_cast<int>(png_get_image_height(png, info));
  d.channels = png_get_channels(png, info);
  d.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  raw.resize(rowbytes * d.height);
  rows.resize(d.height);
  for (int y = 0; y < d.height; ++y) rows[y] = raw.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count = static_cast<std::size_t>(d.width) * d.height * d.channels;
  d.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    d.samples[i] = d.bit_depth == 16
                       ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1])
                       : raw[i];
  }
  return d;
}

inline Decoded decode(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  return is_png(bytes) ? decode_png(bytes, path.string()) : decode_netpbm(bytes, path.string());
}

inline std::string encode_netpbm(int width, int height, int channels, int bit_depth,
                                 const std::vector<std::uint16_t>& samples) {
  std::ostringstream header;
  header << (channels == 1 ? "P5" : "P6") << '\n'
         << width << ' ' << height << '\n'
         << (bit_depth == 16 ? 65535 : 255) << '\n';
  std::string out = header.str();
  out.reserve(out.size() + samples.size() * (bit_depth == 16 ? 2 : 1));
  for (std::uint16_t s : samples) {
    if (bit_depth == 16) out.push_back(static_cast<char>(s >> 8));
    out.push_back(static_cast<char>(s & 0xff));
  }
  return out;
}

inline void png_write_to_string(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

inline void png_flush_noop(png_structp) {}

inline std::string encode_png(int width, int height, int channels, int bit_depth,
                              const std::vector<std::uint16_t>& samples) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png init failed");
  }
  std::string out;
  const std::size_t bytes_per = bit_depth == 16 ? 2 : 1;
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * bytes_per;
  std::vector<unsigned char> raw(rowbytes * height);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (bytes_per == 2) {
      raw[2 * i] = static_cast<unsigned char>(samples[i] >> 8);
      raw[2 * i + 1] = static_cast<unsigned char>(samples[i] & 0xff);
    } else {
      raw[i] = static_cast<unsigned char>(samples[i]);
    }
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = raw.data() + y * rowbytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png encode failed");
  }
  png_set_write_fn(png, &out, png_write_to_string, png_flush_noop);
  png_set_compression_level(png, 3);
  png_set_IHDR(png, info, width, height, bit_depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline void write_encoded(const std::filesystem::path& path, int width, int height, int channels,
                          int bit_depth, const std::vector<std::uint16_t>& samples) {
  const bool png = lower_extension(path) == ".png";
  write_all(path, png ? encode_png(width, height, channels, bit_depth, samples)
                      : encode_netpbm(width, height, channels, bit_depth, samples));
}

}  // namespace detail

/// 16-bit single channel, millimetres. PNG or binary PGM.
inline DepthImage read_depth(const std::filesystem::path& path) {
  auto d = detail::decode(path);
  if (d.channels != 1) throw IoError(path.string() + ": depth must be single-channel");
  if (d.bit_depth != 16) throw IoError(path.string() + ": depth must be 16-bit");
  DepthImage img(d.width, d.height);
  std::copy(d.samples.begin(), d.samples.end(), img.data().begin());
  return img;
}

inline LabelMap read_labels(const std::filesystem::path& path) {
  auto d = detail::decode(path);
  if (d.channels != 1) throw IoError(path.string() + ": label map must be single-channel");
  if (d.bit_depth != 8) throw IoError(path.string() + ": label map must be 8-bit");
  LabelMap img(d.width, d.height);
  for (std::size_t i = 0; i < d.samples.size(); ++i) img.data()[i] = static_cast<std::uint8_t>(d.samples[i]);
  return img;
}

/// Instance maps may be 8- or 16-bit.
inline Raster<std::uint16_t> read_instances(const std::filesystem::path& path) {
  auto d = detail::decode(path);
  if (d.channels != 1) throw IoError(path.string() + ": instance map must be single-channel");
  Raster<std::uint16_t> img(d.width, d.height);
  std::copy(d.samples.begin(), d.samples.end(), img.data().begin());
  return img;
}

inline ColorImage read_color(const std::filesystem::path& path) {
  auto d = detail::decode(path);
  if (d.channels != 3 || d.bit_depth != 8) throw IoError(path.string() + ": colour image must be 8-bit RGB");
  ColorImage img(d.width, d.height);
  for (std::size_t i = 0; i < img.size(); ++i) {
    img.data()[i] = Rgb{static_cast<std::uint8_t>(d.samples[3 * i]),
                        static_cast<std::uint8_t>(d.samples[3 * i + 1]),
                        static_cast<std::uint8_t>(d.samples[3 * i + 2])};
  }
  return img;
}

inline void write_depth(const std::filesystem::path& path, const DepthImage& img) {
  detail::write_encoded(path, img.width(), img.height(), 1, 16, img.data());
}

inline void write_instances(const std::filesystem::path& path, const Raster<std::uint16_t>& img) {
  detail::write_encoded(path, img.width(), img.height(), 1, 16, img.data());
}

inline void write_labels(const std::filesystem::path& path, const LabelMap& img) {
  std::vector<std::uint16_t> samples(img.data().begin(), img.data().end());
  detail::write_encoded(path, img.width(), img.height(), 1, 8, samples);
}

inline void write_color(const std::filesystem::path& path, const ColorImage& img) {
  std::vector<std::uint16_t> samples;
  samples.reserve(img.size() * 3);
  for (const Rgb& c : img.data()) {
    samples.push_back(c.r);
    samples.push_back(c.g);
    samples.push_back(c.b);
  }
  detail::write_encoded(path, img.width(), img.height(), 3, 8, samples);
}

}  // namespace trayscan::io
