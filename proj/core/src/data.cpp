#include "forge/data.hpp"

#include <cstdlib>

namespace forge {

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("FORGE_DATA"); env && *env) return env;
  return FORGE_DEFAULT_DATA_DIR;
}

}  // namespace forge
