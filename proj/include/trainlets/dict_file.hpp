#pragma once

#include <zlib.h>

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include "trainlets/base_operator.hpp"
#include "trainlets/error.hpp"
#include "trainlets/sparse_dictionary.hpp"

namespace trainlets {

inline constexpr std::array<char, 4> kDictMagic{'T', 'R', 'N', 'L'};
inline constexpr std::uint16_t kDictVersion = 1;
inline constexpr std::uint32_t kFamilyOdct = 3;

enum DictFlags : std::uint32_t {
  kFlagSeparable2d = 1u << 0,
  kFlagPeriodicBase = 1u << 1,  // uncropped periodic wavelet base
};

/// Fixed-size header that follows the magic and version.
struct DictHeader {
  std::uint32_t n_side = 0;
  std::uint32_t atoms_1d = 0;  // L'
  std::uint32_t atoms = 0;     // m
  std::uint32_t atom_sparsity = 0;
  std::uint32_t family = 0;  // wavelet family id, or 3 for ODCT
  std::uint32_t order = 0;   // filter order; ODCT stores L' here
  std::uint32_t levels = 0;
  std::uint32_t flags = 0;

  friend bool operator==(const DictHeader&, const DictHeader&) = default;
};

namespace detail {

class ByteWriter {
 public:
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::string& bytes() { return bytes_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  std::string bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::string& buf, std::size_t pos, std::size_t end) : buf_(buf), pos_(pos), end_(end) {}
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::size_t pos() const noexcept { return pos_; }

 private:
  std::uint64_t get(int n) {
    require(pos_ + static_cast<std::size_t>(n) <= end_, ErrorCode::FormatError, "dictionary file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
  }
  const std::string& buf_;
  std::size_t pos_;
  std::size_t end_;
};

inline std::uint32_t crc32_of(const char* p, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(p), chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

inline constexpr std::size_t kHeaderBytes = 4 + 2 + 8 * 4;

}  // namespace detail

inline DictHeader make_header(const SparseDictionary& sd) {
  const BaseSpec& spec = sd.base().spec();
  DictHeader h;
  h.n_side = static_cast<std::uint32_t>(sd.base().side());
  h.atoms_1d = static_cast<std::uint32_t>(sd.base().atoms_1d());
  h.atoms = static_cast<std::uint32_t>(sd.atom_count());
  h.atom_sparsity = static_cast<std::uint32_t>(sd.atom_sparsity());
  h.flags = sd.base().dims() == 2 ? kFlagSeparable2d : 0u;
  switch (spec.kind) {
    case BaseKind::CroppedWavelet:
    case BaseKind::PeriodicWavelet:
      h.family = static_cast<std::uint32_t>(spec.family);
      h.order = static_cast<std::uint32_t>(spec.order);
      h.levels = static_cast<std::uint32_t>(spec.levels);
      if (spec.kind == BaseKind::PeriodicWavelet) h.flags |= kFlagPeriodicBase;
      break;
    case BaseKind::Odct:
      h.family = kFamilyOdct;
      h.order = static_cast<std::uint32_t>(spec.odct_atoms);
      break;
    case BaseKind::Explicit:
      throw Error(ErrorCode::InvalidConfig, "explicit bases cannot be serialized");
  }
  return h;
}

/// Base description recovered from a header.
inline BaseSpec base_spec_from_header(const DictHeader& h) {
  BaseSpec spec;
  spec.side = h.n_side;
  spec.dims = (h.flags & kFlagSeparable2d) ? 2 : 1;
  if (h.family == kFamilyOdct) {
    spec.kind = BaseKind::Odct;
    spec.odct_atoms = h.order;
    return spec;
  }
  detail::require(h.family <= 2, ErrorCode::FormatError, "unknown base family id " + std::to_string(h.family));
  spec.kind = (h.flags & kFlagPeriodicBase) ? BaseKind::PeriodicWavelet : BaseKind::CroppedWavelet;
  spec.family = wavelet_family_from_id(h.family);
  spec.order = static_cast<int>(h.order);
  spec.levels = static_cast<int>(h.levels);
  return spec;
}

inline std::string serialize_dictionary(const SparseDictionary& sd) {
  const DictHeader h = make_header(sd);
  detail::ByteWriter w;
  w.raw(kDictMagic.data(), kDictMagic.size());
  w.u16(kDictVersion);
  for (std::uint32_t v : {h.n_side, h.atoms_1d, h.atoms, h.atom_sparsity, h.family, h.order, h.levels, h.flags})
    w.u32(v);
  const std::size_t payload_start = w.bytes().size();
  std::uint64_t ptr = 0;
  w.u64(ptr);
  for (const auto& c : sd.columns()) {
    ptr += c.nnz();
    w.u64(ptr);
  }
  for (const auto& c : sd.columns())
    for (Index r : c.support) w.u32(static_cast<std::uint32_t>(r));
  for (const auto& c : sd.columns())
    for (double v : c.values) w.f64(v);
  const std::string& b = w.bytes();
  const std::uint32_t crc = detail::crc32_of(b.data() + payload_start, b.size() - payload_start);
  w.u32(crc);
  return std::move(w.bytes());
}

inline DictHeader parse_header(const std::string& buf) {
  detail::require(buf.size() >= detail::kHeaderBytes + 8 + 4, ErrorCode::FormatError, "dictionary file too short");
  detail::require(std::equal(kDictMagic.begin(), kDictMagic.end(), buf.begin()), ErrorCode::FormatError,
                  "bad magic (not a TRNL dictionary)");
  detail::ByteReader r(buf, 4, buf.size());
  const std::uint16_t version = r.u16();
  detail::require(version == kDictVersion, ErrorCode::FormatError, "unsupported version " + std::to_string(version));
  DictHeader h;
  h.n_side = r.u32();
  h.atoms_1d = r.u32();
  h.atoms = r.u32();
  h.atom_sparsity = r.u32();
  h.family = r.u32();
  h.order = r.u32();
  h.levels = r.u32();
  h.flags = r.u32();
  return h;
}

/// Parses a serialized dictionary, rebuilding the base from the header.
inline SparseDictionary deserialize_dictionary(const std::string& buf) {
  const DictHeader h = parse_header(buf);
  const std::size_t payload_start = detail::kHeaderBytes;
  const std::size_t payload_end = buf.size() - 4;
  detail::ByteReader crc_reader(buf, payload_end, buf.size());
  const std::uint32_t stored = crc_reader.u32();
  detail::require(stored == detail::crc32_of(buf.data() + payload_start, payload_end - payload_start),
                  ErrorCode::FormatError, "payload CRC mismatch");

  auto base = std::make_shared<const SeparableBase>(SeparableBase::from_spec(base_spec_from_header(h)));
  detail::require(
      base->atoms_1d() == static_cast<Index>(h.atoms_1d), ErrorCode::FormatError,
      "base rebuilt with " + std::to_string(base->atoms_1d()) + " atoms, header says " + std::to_string(h.atoms_1d));

  detail::ByteReader r(buf, payload_start, payload_end);
  std::vector<std::uint64_t> ptr(static_cast<std::size_t>(h.atoms) + 1);
  for (auto& p : ptr) p = r.u64();
  detail::require(ptr.front() == 0, ErrorCode::FormatError, "column pointers must start at 0");
  for (std::size_t j = 0; j + 1 < ptr.size(); ++j) {
    detail::require(ptr[j + 1] >= ptr[j], ErrorCode::FormatError, "column pointers not monotone");
    detail::require(ptr[j + 1] - ptr[j] <= h.atom_sparsity, ErrorCode::FormatError,
                    "column " + std::to_string(j) + " exceeds atom sparsity");
  }
  const std::uint64_t nnz = ptr.back();
  detail::require(payload_end - payload_start == 8 * ptr.size() + 12 * nnz, ErrorCode::FormatError,
                  "payload size does not match column pointers");
  std::vector<std::uint32_t> rows(nnz);
  for (auto& v : rows) v = r.u32();
  std::vector<SparseVec> cols(h.atoms, SparseVec(base->atom_count()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::uint64_t t = ptr[j]; t < ptr[j + 1]; ++t) cols[j].support.push_back(static_cast<Index>(rows[t]));
  }
  for (auto& c : cols) {
    for (std::size_t t = 0; t < c.support.size(); ++t) c.values.push_back(r.f64());
    detail::require(c.valid(), ErrorCode::FormatError, "row indices out of range or not increasing");
  }
  return SparseDictionary(std::move(base), std::move(cols), static_cast<Index>(h.atom_sparsity));
}

inline void write_dictionary(const std::filesystem::path& path, const SparseDictionary& sd) {
  const std::string bytes = serialize_dictionary(sd);
  std::ofstream out(path, std::ios::binary);
  detail::require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  detail::require(out.good(), ErrorCode::IoError, "write failed for " + path.string());
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  detail::require(in.good(), ErrorCode::IoError, "cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline SparseDictionary read_dictionary(const std::filesystem::path& path) {
  return deserialize_dictionary(read_file_bytes(path));
}

}  // namespace trainlets
