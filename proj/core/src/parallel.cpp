#include "invadelab/parallel.hpp"

#include <cstdlib>
#include <string>

namespace invadelab {

int default_workers() {
  if (const char* env = std::getenv("INVADELAB_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w > 0) return w;
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace invadelab
