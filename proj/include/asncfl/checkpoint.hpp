#pragma once

#include <string>

#include "asncfl/nn.hpp"

namespace asncfl::nn {

// Binary layout (little-endian), see docs/formats.md.
std::string encode_checkpoint(const AutoencoderModel& model);
AutoencoderModel decode_checkpoint(const std::string& bytes);

void save_checkpoint(const AutoencoderModel& model, const std::string& path);
// Throws FormatError on a bad magic, version, layer table or length.
AutoencoderModel load_checkpoint(const std::string& path);

}  // namespace asncfl::nn
