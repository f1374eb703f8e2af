#include "neilf/brdf.hpp"

#include <string>

namespace neilf {

FresnelMode parse_fresnel_mode(std::string_view name) {
  if (name == "printed") return FresnelMode::kPrinted;
  if (name == "schlick") return FresnelMode::kSchlick;
  fail(Error::Kind::kInvalidArgument, "unknown fresnel mode '" + std::string(name) + "' (expected printed|schlick)");
}

std::string_view to_string(FresnelMode mode) { return mode == FresnelMode::kPrinted ? "printed" : "schlick"; }

}  // namespace neilf
