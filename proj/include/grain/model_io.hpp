#ifndef GRAIN_MODEL_IO_HPP
#define GRAIN_MODEL_IO_HPP

#include <filesystem>
#include <string>

#include "grain/network.hpp"

namespace grain {

// Model file layout, all integers little-endian:
//
//   magic    8 bytes   "GRAINFG1"
//   header   u64 byte count, then canonical JSON (sorted keys, no spaces)
//            holding input shape, layers, class names, init seed and the
//            number of training steps taken
//   payload  for each parameter tensor in Network::parameters() order:
//            u64 rank, rank x u64 extents, then IEEE-754 binary64 values
//   trailer  u32 CRC-32 over header (count included) and payload
//
// Any change to this layout gets a new magic.
inline constexpr char kModelMagic[9] = "GRAINFG1";

/// Canonical JSON text of the network description (no parameters).
std::string config_header(const Network& net);

std::string serialize(const Network& net);

/// Throws FormatError (bad magic, malformed header, inconsistent tensor) or
/// CorruptionError (truncation, checksum mismatch).
Network deserialize(const std::string& bytes);

/// Throws IoError if the file cannot be written.
void save(const Network& net, const std::filesystem::path& path);

/// Throws IoError if the file cannot be read, otherwise as deserialize.
Network load(const std::filesystem::path& path);

}  // namespace grain

#endif  // GRAIN_MODEL_IO_HPP
