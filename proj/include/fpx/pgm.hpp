#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpx/image.hpp"

namespace fpx {

class PgmError : public std::runtime_error {
 public:
  enum class Kind { missing_file, malformed_header, unsupported_maxval, truncated_data, io_failure };

  PgmError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

class PgmHeaderReader {
 public:
  PgmHeaderReader(const std::vector<char>& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  // Skips whitespace and '#' comments, then reads one unsigned integer.
  long next_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      throw PgmError(PgmError::Kind::malformed_header, path_ + ": malformed PGM header");
    }
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000'000L) {
        throw PgmError(PgmError::Kind::malformed_header, path_ + ": header value out of range");
      }
      ++pos_;
    }
    return v;
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t& pos() { return pos_; }

 private:
  const std::vector<char>& bytes_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Reads a binary (P5) or ASCII (P2) PGM with maxval <= 255.
inline GrayImage load_pgm(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PgmError(PgmError::Kind::missing_file, name + ": cannot open file");
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2')) {
    throw PgmError(PgmError::Kind::malformed_header, name + ": not a P2/P5 PGM file");
  }
  const bool binary = bytes[1] == '5';

  detail::PgmHeaderReader reader(bytes, name);
  reader.pos() = 2;
  const long width = reader.next_int();
  const long height = reader.next_int();
  const long maxval = reader.next_int();
  if (width <= 0 || height <= 0 || maxval <= 0) {
    throw PgmError(PgmError::Kind::malformed_header, name + ": invalid dimensions or maxval");
  }
  if (maxval > 255) {
    throw PgmError(PgmError::Kind::unsupported_maxval,
                   name + ": unsupported maxval " + std::to_string(maxval));
  }

  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<std::uint8_t> data;
  data.reserve(count);

  if (binary) {
    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t pos = reader.pos();
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      throw PgmError(PgmError::Kind::truncated_data, name + ": missing raster data");
    }
    ++pos;
    if (bytes.size() - pos < count) {
      throw PgmError(PgmError::Kind::truncated_data, name + ": truncated pixel data");
    }
    for (std::size_t i = 0; i < count; ++i) {
      const auto v = static_cast<std::uint8_t>(bytes[pos + i]);
      if (v > maxval) {
        throw PgmError(PgmError::Kind::malformed_header, name + ": pixel exceeds maxval");
      }
      data.push_back(v);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      reader.skip_space_and_comments();
      if (reader.pos() >= bytes.size()) {
        throw PgmError(PgmError::Kind::truncated_data, name + ": truncated pixel data");
      }
      const long v = reader.next_int();
      if (v > maxval) {
        throw PgmError(PgmError::Kind::malformed_header, name + ": pixel exceeds maxval");
      }
      data.push_back(static_cast<std::uint8_t>(v));
    }
  }

  return GrayImage(static_cast<int>(width), static_cast<int>(height), std::move(data));
}

/// Writes a P5 PGM with maxval 255. Bitmaps are written ridge=255, background=0.
inline void save_pgm(const Grid<std::uint8_t>& img, const std::filesystem::path& path,
                     bool bitmap = false) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PgmError(PgmError::Kind::io_failure, path.string() + ": cannot open for writing");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<char> raster(img.size());
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    raster[i] = static_cast<char>(bitmap ? (px[i] ? 255 : 0) : px[i]);
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw PgmError(PgmError::Kind::io_failure, path.string() + ": write failed");
}

inline void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  save_pgm(static_cast<const Grid<std::uint8_t>&>(img), path, false);
}
inline void save_pgm(const BinaryImage& img, const std::filesystem::path& path) {
  save_pgm(static_cast<const Grid<std::uint8_t>&>(img), path, true);
}
inline void save_pgm(const Skeleton& img, const std::filesystem::path& path) {
  save_pgm(static_cast<const Grid<std::uint8_t>&>(img), path, true);
}

}  // namespace fpx
