#pragma once

// Binary container for named arrays. Layout (all integers little-endian):
//
//   "TOCCKPT\0"            8-byte magic
//   u32 version            currently 1
//   u32 count
//   count × {
//     u32 name_length, name bytes (no terminator)
//     u32 rank, rank × u64 extent
//     product(extents) × f64 IEEE-754 values, row-major
//   }

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tempocc/array.hpp"
#include "tempocc/error.hpp"

namespace tempocc {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct NamedArray {
  std::string name;
  Array value;
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'T', 'O', 'C', 'C', 'K', 'P', 'T', '\0'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error("checkpoint truncated");
  return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const std::vector<NamedArray>& arrays) {
  out.write(detail::kCheckpointMagic, sizeof detail::kCheckpointMagic);
  detail::put<std::uint32_t>(out, 1);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, value] : arrays) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(value.rank()));
    for (auto e : value.shape()) detail::put<std::uint64_t>(out, e);
    out.write(reinterpret_cast<const char*>(value.data()), static_cast<std::streamsize>(value.size() * sizeof(double)));
  }
}

inline std::vector<NamedArray> read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, detail::kCheckpointMagic, sizeof magic) != 0)
    throw Error("not a checkpoint file");
  if (auto version = detail::get<std::uint32_t>(in); version != 1)
    throw Error("unsupported checkpoint version " + std::to_string(version));
  const auto count = detail::get<std::uint32_t>(in);
  std::vector<NamedArray> arrays;
  arrays.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name.resize(detail::get<std::uint32_t>(in));
    if (!in.read(a.name.data(), static_cast<std::streamsize>(a.name.size()))) throw Error("checkpoint truncated");
    Shape shape(detail::get<std::uint32_t>(in));
    for (auto& e : shape) e = detail::get<std::uint64_t>(in);
    std::vector<double> data(numel(shape));
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double))))
      throw Error("checkpoint truncated");
    a.value = Array(std::move(shape), std::move(data));
    arrays.push_back(std::move(a));
  }
  return arrays;
}

inline void save_checkpoint(const std::string& path, const std::vector<NamedArray>& arrays) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path);
  write_checkpoint(out, arrays);
}

inline std::vector<NamedArray> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace tempocc
