#pragma once

#include <filesystem>

#include "asncfl/features.hpp"

namespace asncfl {

// 16-bit mono PCM RIFF/WAVE. Samples map to [-1, 1) by dividing by 32768.
// Unknown chunks before "data" are skipped; anything other than
// PCM/mono/16-bit/16 kHz is rejected with FormatError.
features::AudioClip read_wav(const std::filesystem::path& path);

// Clips to [-1, 1) and rounds to the nearest 16-bit step.
void write_wav(const std::filesystem::path& path, const features::AudioClip& clip);

}  // namespace asncfl
