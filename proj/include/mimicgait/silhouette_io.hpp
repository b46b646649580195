#pragma once

#include <filesystem>

#include "mimicgait/silhouette.hpp"

namespace mimicgait {

// Frame-directory format: one directory per sequence holding zero-padded
// frame images (000000.png, 000001.png, ...; 8-bit grayscale, foreground 255)
// and a meta.json with subject_id, sequence_id and fps.
//
// Packed format (one file per sequence, little-endian):
//   char[4] magic "MGSL" | u16 version | u32 T | u16 H | u16 W |
//   u32 meta_len | meta_len bytes of JSON metadata |
//   T frames, each ceil(H*W/8) bytes, row-major, LSB-first bit order.

inline constexpr char kPackedMagic[4] = {'M', 'G', 'S', 'L'};
inline constexpr std::uint16_t kPackedVersion = 1;
inline constexpr const char* kPackedExtension = ".mgsl";
inline constexpr const char* kMetaFileName = "meta.json";

void write_frame_dir(const SilhouetteSequence& seq, const std::filesystem::path& dir);

/// Reads a frame directory. Frames are re-binarized at 128; frames that are
/// not 64x64 are centred and resized.
SilhouetteSequence read_frame_dir(const std::filesystem::path& dir);

void write_packed(const SilhouetteSequence& seq, const std::filesystem::path& file);
SilhouetteSequence read_packed(const std::filesystem::path& file);

}  // namespace mimicgait
