#pragma once

#include <filesystem>
#include <iosfwd>

#include "trocar_dock/perception.hpp"

namespace trocar_dock {

// Grayscale Portable Float Map ("Pf"). Writes little-endian (scale -1.0),
// rows bottom-up. Reads either endianness.
void write_pfm(std::ostream& out, const ConfidenceMap& map);
void write_pfm(const std::filesystem::path& path, const ConfidenceMap& map);

ConfidenceMap read_pfm(std::istream& in);
ConfidenceMap read_pfm(const std::filesystem::path& path);

}  // namespace trocar_dock
