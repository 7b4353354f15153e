#include "chemolab/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

namespace chemolab {
namespace {

static_assert(std::endian::native == std::endian::little,
              "snapshot I/O assumes a little-endian host");

template <class T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw ValidationError("snapshot " + path.string() + ": truncated file");
  return v;
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, const ScalarField& field) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  const GridSpec& g = field.grid();
  os.write("CSF1", 4);
  put<std::int64_t>(os, g.nx);
  put<std::int64_t>(os, g.ny);
  put<double>(os, g.lx);
  put<double>(os, g.ly);
  os.write(reinterpret_cast<const char*>(field.values().data()),
           static_cast<std::streamsize>(field.size() * sizeof(double)));
  if (!os) throw Error("write failed for " + path.string());
}

ScalarField read_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open snapshot " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "CSF1", 4) != 0)
    throw ValidationError("snapshot " + path.string() + ": bad magic");
  const auto nx = get<std::int64_t>(is, path);
  const auto ny = get<std::int64_t>(is, path);
  const auto lx = get<double>(is, path);
  const auto ly = get<double>(is, path);
  if (nx <= 0 || ny <= 0 || nx > (1 << 20) || ny > (1 << 20))
    throw ValidationError("snapshot " + path.string() + ": bad dimensions");
  const GridSpec g = GridSpec::make(static_cast<int>(nx), static_cast<int>(ny), lx, ly);
  std::vector<double> values(g.cells());
  if (!is.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(values.size() * sizeof(double))))
    throw ValidationError("snapshot " + path.string() + ": truncated values");
  ScalarField f(g, std::move(values));
  if (!f.all_finite()) throw ValidationError("snapshot " + path.string() + ": non-finite values");
  return f;
}

void write_csv(const std::filesystem::path& path, const ScalarField& field) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  const GridSpec& g = field.grid();
  os << "x,y,value\n";
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      os << fmt::format("{:.17g},{:.17g},{:.17g}\n", g.xc(i), g.yc(j), field(i, j));
}

}  // namespace chemolab
