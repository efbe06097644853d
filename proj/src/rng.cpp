#include "maae/rng.hpp"

#include "maae/errors.hpp"

#include <cstdio>
#include <sstream>

namespace maae {

std::string rng_state_to_string(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

Rng rng_state_from_string(const std::string& state) {
  Rng rng;
  std::istringstream in(state);
  in >> rng;
  if (in.fail()) throw IntegrityError("unreadable RNG state");
  return rng;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace maae
