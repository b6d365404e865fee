#pragma once

#include <filesystem>

namespace forge {

/// $FORGE_DATA if set, else the data directory of the source tree.
std::filesystem::path data_dir();

}  // namespace forge
