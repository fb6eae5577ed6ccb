#include "droute/error.hpp"

namespace droute {

int exit_code(const std::exception& e) noexcept {
  if (dynamic_cast<const ParseError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const NumericalAbort*>(&e) != nullptr) return 4;
  return 1;
}

}  // namespace droute
