#include "trocar_dock/pfm.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "trocar_dock/errors.hpp"

namespace trocar_dock {

namespace {

std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return byteswap32(v);
}

std::string read_token(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw FormatError("PFM: truncated header");
  return tok;
}

}  // namespace

void write_pfm(std::ostream& out, const ConfidenceMap& map) {
  out << "Pf\n" << map.width() << ' ' << map.height() << "\n-1.0\n";
  std::vector<std::uint32_t> row(static_cast<std::size_t>(map.width()));
  for (int y = map.height() - 1; y >= 0; --y) {
    for (int x = 0; x < map.width(); ++x) {
      row[static_cast<std::size_t>(x)] = to_little(std::bit_cast<std::uint32_t>(map.at(x, y)));
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(std::uint32_t)));
  }
  if (!out) throw IoError("PFM: write failed");
}

void write_pfm(const std::filesystem::path& path, const ConfidenceMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_pfm(out, map);
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

ConfidenceMap read_pfm(std::istream& in) {
  const std::string magic = read_token(in);
  if (magic == "PF") throw FormatError("PFM: colour maps are not supported");
  if (magic != "Pf") throw FormatError("PFM: bad magic '" + magic + "'");
  int width = 0;
  int height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(read_token(in));
    height = std::stoi(read_token(in));
    scale = std::stod(read_token(in));
  } catch (const std::logic_error&) {
    throw FormatError("PFM: malformed header");
  }
  if (width <= 0 || height <= 0 || scale == 0.0 || !std::isfinite(scale)) {
    throw FormatError("PFM: invalid dimensions or scale");
  }
  // Exactly one whitespace byte separates the header from the raster.
  in.get();
  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);

  ConfidenceMap map(width, height);
  std::vector<std::uint32_t> row(static_cast<std::size_t>(width));
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(std::uint32_t)));
    if (!in) throw FormatError("PFM: truncated raster");
    for (int x = 0; x < width; ++x) {
      std::uint32_t bits = row[static_cast<std::size_t>(x)];
      if (swap) bits = byteswap32(bits);
      map.at(x, y) = std::bit_cast<float>(bits);
    }
  }
  return map;
}

ConfidenceMap read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  try {
    return read_pfm(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace trocar_dock
