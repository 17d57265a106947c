// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phylotrace/dtype.hpp"
#include "phylotrace/error.hpp"
#include "phylotrace/genotype.hpp"

// Checkpoint archive layout (safetensors-compatible):
//   bytes 0..7   unsigned 64-bit little-endian N = header length
//   bytes 8..8+N UTF-8 JSON object: tensor name -> {"dtype","shape","data_offsets"}
//   rest         payload, little-endian elements; offsets are payload-relative
// The reserved "__metadata__" key maps to a string->string object and is
// preserved verbatim. Writing is canonical: entries sorted by name, payload
// re-laid in that order, minimal JSON.

namespace phylotrace {

static_assert(std::endian::native == std::endian::little,
              "archive I/O assumes a little-endian host");

struct TensorEntry {
  std::string name;
  Dtype dtype = Dtype::F64;
  std::vector<std::uint64_t> shape;
  std::uint64_t begin = 0;  // payload-relative byte range [begin, end)
  std::uint64_t end = 0;

  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (std::uint64_t d : shape) n *= d;
    return n;
  }
};

class TensorArchive {
 public:
  /// Appends a tensor at the current end of the payload.
  void add_tensor(const std::string& name, Dtype dtype, std::vector<std::uint64_t> shape,
                  std::span<const std::byte> bytes) {
    if (name.empty())
      throw Error(ErrorCode::InvalidHeader, "tensor_archive: empty tensor name");
    if (find(name))
      throw Error(ErrorCode::DuplicateName, "tensor_archive: duplicate tensor \"" + name + "\"");
    std::uint64_t elements = 1;
    for (std::uint64_t d : shape) {
      if (d != 0 && elements > UINT64_MAX / d)
        throw Error(ErrorCode::InvalidHeader, "tensor_archive: shape overflow for \"" + name + "\"");
      elements *= d;
    }
    if (elements * dtype_size(dtype) != bytes.size())
      throw Error(ErrorCode::InvalidHeader,
                  "tensor_archive: byte count does not match shape for \"" + name + "\"");
    TensorEntry entry{name, dtype, std::move(shape),
                      static_cast<std::uint64_t>(payload_.size()),
                      static_cast<std::uint64_t>(payload_.size() + bytes.size())};
    payload_.insert(payload_.end(), bytes.begin(), bytes.end());
    entries_.push_back(std::move(entry));
  }

  const std::vector<TensorEntry>& entries() const { return entries_; }
  const std::vector<std::byte>& payload() const { return payload_; }
  std::map<std::string, std::string>& metadata() { return metadata_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  const TensorEntry* find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e;
    return nullptr;
  }

  std::span<const std::byte> tensor_bytes(const TensorEntry& entry) const {
    return {payload_.data() + entry.begin, entry.end - entry.begin};
  }

  /// Structural and payload equality, insensitive to entry order (the
  /// canonical writer sorts entries by name anyway).
  bool operator==(const TensorArchive& other) const {
    if (metadata_ != other.metadata_) return false;
    if (entries_.size() != other.entries_.size()) return false;
    auto sorted = [](const TensorArchive& a) {
      std::vector<const TensorEntry*> ptrs;
      for (const auto& e : a.entries_) ptrs.push_back(&e);
      std::sort(ptrs.begin(), ptrs.end(),
                [](const TensorEntry* x, const TensorEntry* y) { return x->name < y->name; });
      return ptrs;
    };
    const auto lhs = sorted(*this);
    const auto rhs = sorted(other);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      if (lhs[i]->name != rhs[i]->name || lhs[i]->dtype != rhs[i]->dtype ||
          lhs[i]->shape != rhs[i]->shape)
        return false;
      const auto a = tensor_bytes(*lhs[i]);
      const auto b = other.tensor_bytes(*rhs[i]);
      if (a.size() != b.size() || std::memcmp(a.data(), b.data(), a.size()) != 0) return false;
    }
    return true;
  }

  // read_archive fills these directly after validating.
  friend TensorArchive read_archive(const std::filesystem::path&);

 private:
  std::vector<TensorEntry> entries_;  // file order
  std::vector<std::byte> payload_;
  std::map<std::string, std::string> metadata_;
};

namespace detail {

// SAX walker that collects root-level keys; nlohmann's object types silently
// drop duplicate keys, so uniqueness has to be checked during parsing.
class RootKeyScanner : public nlohmann::json::json_sax_t {
 public:
  std::vector<std::string> root_keys;
  bool root_is_object = false;

  bool null() override { return true; }
  bool boolean(bool) override { return true; }
  bool number_integer(number_integer_t) override { return true; }
  bool number_unsigned(number_unsigned_t) override { return true; }
  bool number_float(number_float_t, const string_t&) override { return true; }
  bool string(string_t&) override { return true; }
  bool binary(binary_t&) override { return true; }
  bool start_object(std::size_t) override {
    if (depth_ == 0) root_is_object = true;
    ++depth_;
    return true;
  }
  bool key(string_t& value) override {
    if (depth_ == 1) root_keys.push_back(value);
    return true;
  }
  bool end_object() override {
    --depth_;
    return true;
  }
  bool start_array(std::size_t) override {
    ++depth_;
    return true;
  }
  bool end_array() override {
    --depth_;
    return true;
  }
  bool parse_error(std::size_t position, const std::string&, const nlohmann::json::exception& ex) override {
    throw Error(ErrorCode::InvalidHeader,
                "tensor_archive: header is not valid JSON at byte " + std::to_string(position) +
                    " (" + ex.what() + ")");
  }

 private:
  int depth_ = 0;
};

inline std::uint64_t checked_element_count(const std::vector<std::uint64_t>& shape,
                                           const std::string& name) {
  std::uint64_t n = 1;
  for (std::uint64_t d : shape) {
    if (d != 0 && n > UINT64_MAX / d)
      throw Error(ErrorCode::InvalidHeader, "tensor_archive: shape overflow for \"" + name + "\"");
    n *= d;
  }
  return n;
}

}  // namespace detail

inline TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, "tensor_archive: cannot open \"" + path.string() + "\"");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad())
    throw Error(ErrorCode::Io, "tensor_archive: read failed for \"" + path.string() + "\"");

  if (raw.size() < 8)
    throw Error(ErrorCode::MalformedHeader, "tensor_archive: file shorter than the 8-byte length field");
  std::uint64_t header_len = 0;
  for (int i = 7; i >= 0; --i) header_len = (header_len << 8) | static_cast<unsigned char>(raw[i]);
  if (header_len > raw.size() - 8)
    throw Error(ErrorCode::MalformedHeader,
                "tensor_archive: declared header length " + std::to_string(header_len) +
                    " exceeds file size");

  const std::string_view header(raw.data() + 8, header_len);
  detail::RootKeyScanner scanner;
  nlohmann::json::sax_parse(header, &scanner);
  if (!scanner.root_is_object)
    throw Error(ErrorCode::InvalidHeader, "tensor_archive: header root is not a JSON object");
  {
    std::vector<std::string> keys = scanner.root_keys;
    std::sort(keys.begin(), keys.end());
    auto dup = std::adjacent_find(keys.begin(), keys.end());
    if (dup != keys.end())
      throw Error(ErrorCode::DuplicateName, "tensor_archive: duplicate tensor \"" + *dup + "\"");
  }
  const auto parsed = nlohmann::ordered_json::parse(header);

  TensorArchive archive;
  archive.payload_.resize(raw.size() - 8 - header_len);
  std::memcpy(archive.payload_.data(), raw.data() + 8 + header_len, archive.payload_.size());
  const std::uint64_t payload_size = archive.payload_.size();

  for (const auto& [name, value] : parsed.items()) {
    if (name == "__metadata__") {
      if (!value.is_object())
        throw Error(ErrorCode::InvalidHeader, "tensor_archive: __metadata__ must be an object");
      for (const auto& [mk, mv] : value.items()) {
        if (!mv.is_string())
          throw Error(ErrorCode::InvalidHeader, "tensor_archive: __metadata__ values must be strings");
        archive.metadata_[mk] = mv.get<std::string>();
      }
      continue;
    }
    if (name.empty())
      throw Error(ErrorCode::InvalidHeader, "tensor_archive: empty tensor name");
    if (!value.is_object() || !value.contains("dtype") || !value.contains("shape") ||
        !value.contains("data_offsets"))
      throw Error(ErrorCode::InvalidHeader,
                  "tensor_archive: entry \"" + name + "\" must carry dtype, shape and data_offsets");
    if (!value["dtype"].is_string())
      throw Error(ErrorCode::InvalidHeader, "tensor_archive: dtype of \"" + name + "\" must be a string");

    TensorEntry entry;
    entry.name = name;
    entry.dtype = parse_dtype(value["dtype"].get<std::string>());
    if (!value["shape"].is_array())
      throw Error(ErrorCode::InvalidHeader, "tensor_archive: shape of \"" + name + "\" must be an array");
    for (const auto& dim : value["shape"]) {
      if (!dim.is_number_integer() && !dim.is_number_unsigned())
        throw Error(ErrorCode::InvalidHeader,
                    "tensor_archive: shape of \"" + name + "\" must hold integers");
      const auto v = dim.get<std::int64_t>();
      if (v < 0)
        throw Error(ErrorCode::InvalidHeader,
                    "tensor_archive: negative dimension in shape of \"" + name + "\"");
      entry.shape.push_back(static_cast<std::uint64_t>(v));
    }
    const auto& offsets = value["data_offsets"];
    if (!offsets.is_array() || offsets.size() != 2 ||
        !(offsets[0].is_number_integer() || offsets[0].is_number_unsigned()) ||
        !(offsets[1].is_number_integer() || offsets[1].is_number_unsigned()))
      throw Error(ErrorCode::InvalidHeader,
                  "tensor_archive: data_offsets of \"" + name + "\" must be [begin, end]");
    const auto begin_signed = offsets[0].get<std::int64_t>();
    const auto end_signed = offsets[1].get<std::int64_t>();
    if (begin_signed < 0 || end_signed < begin_signed)
      throw Error(ErrorCode::OutOfBounds,
                  "tensor_archive: invalid data_offsets for \"" + name + "\"");
    entry.begin = static_cast<std::uint64_t>(begin_signed);
    entry.end = static_cast<std::uint64_t>(end_signed);
    if (entry.end > payload_size)
      throw Error(ErrorCode::OutOfBounds,
                  "tensor_archive: range of \"" + name + "\" ends past the payload (" +
                      std::to_string(entry.end) + " > " + std::to_string(payload_size) + ")");
    const std::uint64_t expected = detail::checked_element_count(entry.shape, name) * dtype_size(entry.dtype);
    if (expected != entry.end - entry.begin)
      throw Error(ErrorCode::InvalidHeader,
                  "tensor_archive: \"" + name + "\" declares " + std::to_string(entry.end - entry.begin) +
                      " bytes but shape requires " + std::to_string(expected));
    archive.entries_.push_back(std::move(entry));
  }

  // Non-empty ranges must tile the payload exactly.
  std::vector<const TensorEntry*> ranges;
  for (const auto& e : archive.entries_)
    if (e.end > e.begin) ranges.push_back(&e);
  std::sort(ranges.begin(), ranges.end(),
            [](const TensorEntry* a, const TensorEntry* b) { return a->begin < b->begin; });
  std::uint64_t cursor = 0;
  for (const TensorEntry* e : ranges) {
    if (e->begin < cursor)
      throw Error(ErrorCode::OverlappingRanges,
                  "tensor_archive: \"" + e->name + "\" overlaps a previous range");
    if (e->begin > cursor)
      throw Error(ErrorCode::NonContiguous,
                  "tensor_archive: gap before \"" + e->name + "\" at byte " + std::to_string(cursor));
    cursor = e->end;
  }
  if (cursor != payload_size)
    throw Error(ErrorCode::NonContiguous,
                "tensor_archive: payload has " + std::to_string(payload_size - cursor) +
                    " trailing bytes not covered by any tensor");
  return archive;
}

/// Canonical serialization: entries sorted by name, payload re-laid in that
/// order, minimal JSON header. Two archives with equal contents produce
/// byte-identical files regardless of insertion order.
inline void write_archive(const TensorArchive& archive, const std::filesystem::path& path) {
  std::vector<const TensorEntry*> order;
  for (const auto& e : archive.entries()) order.push_back(&e);
  std::sort(order.begin(), order.end(),
            [](const TensorEntry* a, const TensorEntry* b) { return a->name < b->name; });

  nlohmann::json header = nlohmann::json::object();
  if (!archive.metadata().empty()) {
    nlohmann::json meta = nlohmann::json::object();
    for (const auto& [k, v] : archive.metadata()) meta[k] = v;
    header["__metadata__"] = std::move(meta);
  }
  std::uint64_t offset = 0;
  for (const TensorEntry* e : order) {
    const std::uint64_t len = e->end - e->begin;
    header[e->name] = {{"dtype", std::string(dtype_name(e->dtype))},
                       {"shape", e->shape},
                       {"data_offsets", {offset, offset + len}}};
    offset += len;
  }
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::Io, "tensor_archive: cannot open \"" + path.string() + "\" for writing");
  const std::uint64_t n = header_text.size();
  char len_bytes[8];
  for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<char>((n >> (8 * i)) & 0xff);
  out.write(len_bytes, 8);
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const TensorEntry* e : order) {
    const auto bytes = archive.tensor_bytes(*e);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  out.flush();
  if (!out)
    throw Error(ErrorCode::Io, "tensor_archive: write failed for \"" + path.string() + "\"");
}

/// Decodes every tensor to a flat f64 vector, in archive entry order.
/// F32/F16/BF16 widen exactly; non-finite values are rejected outright since
/// silently dropping a model would corrupt every downstream distance matrix.
inline ModelGenotype to_genotype(const TensorArchive& archive, std::string model_id) {
  ModelGenotype genotype;
  genotype.model_id = std::move(model_id);
  for (const auto& entry : archive.entries()) {
    const auto bytes = archive.tensor_bytes(entry);
    const std::uint64_t count = entry.element_count();
    if (count == 0)
      throw Error(ErrorCode::EmptyTensor, "tensor_archive: tensor \"" + entry.name + "\" is empty");
    std::vector<double> values(count);
    const std::byte* src = bytes.data();
    for (std::uint64_t i = 0; i < count; ++i) {
      double v = 0;
      switch (entry.dtype) {
        case Dtype::F64: {
          std::uint64_t u;
          std::memcpy(&u, src + 8 * i, 8);
          v = std::bit_cast<double>(u);
          break;
        }
        case Dtype::F32: {
          std::uint32_t u;
          std::memcpy(&u, src + 4 * i, 4);
          v = static_cast<double>(std::bit_cast<float>(u));
          break;
        }
        case Dtype::F16: {
          std::uint16_t u;
          std::memcpy(&u, src + 2 * i, 2);
          v = decode_f16(u);
          break;
        }
        case Dtype::BF16: {
          std::uint16_t u;
          std::memcpy(&u, src + 2 * i, 2);
          v = decode_bf16(u);
          break;
        }
      }
      if (!std::isfinite(v))
        throw Error(ErrorCode::NonFiniteWeight,
                    "tensor_archive: non-finite weight in \"" + entry.name + "\" at index " +
                        std::to_string(i));
      values[i] = v;
    }
    genotype.layers.emplace_back(entry.name, std::move(values));
  }
  return genotype;
}

/// Packs a genotype back into an archive. Analysis is read-side for half
/// precision, so only full-width dtypes are written.
inline TensorArchive archive_from_genotype(const ModelGenotype& genotype, Dtype dtype = Dtype::F64) {
  if (dtype != Dtype::F64 && dtype != Dtype::F32)
    throw Error(ErrorCode::InvalidArgument, "tensor_archive: archives are written as F32 or F64 only");
  TensorArchive archive;
  for (const auto& [name, values] : genotype.layers) {
    std::vector<std::byte> bytes(values.size() * dtype_size(dtype));
    if (dtype == Dtype::F64) {
      std::memcpy(bytes.data(), values.data(), bytes.size());
    } else {
      for (std::size_t i = 0; i < values.size(); ++i) {
        const float f = static_cast<float>(values[i]);
        std::memcpy(bytes.data() + 4 * i, &f, 4);
      }
    }
    archive.add_tensor(name, dtype, {static_cast<std::uint64_t>(values.size())}, bytes);
  }
  return archive;
}

}  // namespace phylotrace
