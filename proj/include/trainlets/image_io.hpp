#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

#include "trainlets/error.hpp"
#include "trainlets/types.hpp"

namespace trainlets {

namespace detail {

// Skips whitespace and '#' comments between PNM header tokens.
inline void skip_pnm_space(const std::string& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    const char c = buf[pos];
    if (c == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
}

inline long read_pnm_int(const std::string& buf, std::size_t& pos, const std::string& path) {
  skip_pnm_space(buf, pos);
  long v = 0;
  const auto* first = buf.data() + pos;
  const auto [ptr, ec] = std::from_chars(first, buf.data() + buf.size(), v);
  require(ec == std::errc{} && v >= 0, ErrorCode::FormatError, path + ": malformed PGM header");
  pos += static_cast<std::size_t>(ptr - first);
  return v;
}

}  // namespace detail

/// Reads an 8-bit PGM (P2 or P5) as a matrix of rows x cols values in [0, 1].
inline Matrix read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  detail::require(in.good(), ErrorCode::IoError, "cannot open " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  detail::require(buf.size() >= 2 && buf[0] == 'P' && (buf[1] == '2' || buf[1] == '5'), ErrorCode::FormatError,
                  name + ": not a P2/P5 PGM file");
  const bool binary = buf[1] == '5';
  std::size_t pos = 2;
  const long width = detail::read_pnm_int(buf, pos, name);
  const long height = detail::read_pnm_int(buf, pos, name);
  const long maxval = detail::read_pnm_int(buf, pos, name);
  detail::require(width > 0 && height > 0, ErrorCode::FormatError, name + ": empty image");
  detail::require(maxval >= 1 && maxval <= 255, ErrorCode::FormatError,
                  name + ": only 8-bit PGM is supported (maxval " + std::to_string(maxval) + ")");

  Matrix img(height, width);
  const auto scale = static_cast<double>(maxval);
  if (binary) {
    ++pos;  // single whitespace byte after maxval
    const auto need = static_cast<std::size_t>(width * height);
    detail::require(buf.size() >= pos + need, ErrorCode::FormatError, name + ": truncated pixel data");
    for (long r = 0; r < height; ++r)
      for (long c = 0; c < width; ++c)
        img(r, c) =
            static_cast<double>(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(r * width + c)])) / scale;
  } else {
    for (long r = 0; r < height; ++r) {
      for (long c = 0; c < width; ++c) {
        const long v = detail::read_pnm_int(buf, pos, name);
        detail::require(v <= maxval, ErrorCode::FormatError, name + ": sample exceeds maxval");
        img(r, c) = static_cast<double>(v) / scale;
      }
    }
  }
  return img;
}

/// Writes values in [0, 1] (clamped) as an 8-bit binary PGM.
inline void write_pgm(const std::filesystem::path& path, const Matrix& img) {
  std::ofstream out(path, std::ios::binary);
  detail::require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  out << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  std::string row(static_cast<std::size_t>(img.cols()), '\0');
  for (Index r = 0; r < img.rows(); ++r) {
    for (Index c = 0; c < img.cols(); ++c) {
      const double v = std::clamp(img(r, c), 0.0, 1.0);
      row[static_cast<std::size_t>(c)] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  detail::require(out.good(), ErrorCode::IoError, "write failed for " + path.string());
}

/// Sorted list of the PGM files in a directory.
inline std::vector<std::filesystem::path> list_pgm_files(const std::filesystem::path& dir) {
  detail::require(std::filesystem::is_directory(dir), ErrorCode::IoError, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".pgm") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

using CsvCell = std::variant<std::string, long long, double>;
using CsvRow = std::vector<CsvCell>;

/// 17 significant digits, '.' as the decimal point regardless of locale.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

inline std::string format_csv_cell(const CsvCell& cell) {
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  if (const auto* i = std::get_if<long long>(&cell)) return std::to_string(*i);
  return format_double(std::get<double>(cell));
}

inline std::string format_csv(const std::vector<std::string>& header, const std::vector<CsvRow>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_csv_cell(row[i]);
    }
    out += '\n';
  }
  return out;
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<CsvRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  detail::require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  const std::string text = format_csv(header, rows);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  detail::require(out.good(), ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace trainlets
