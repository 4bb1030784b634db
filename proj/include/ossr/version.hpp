#pragma once

namespace ossr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ossr
