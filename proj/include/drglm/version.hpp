#pragma once

namespace drglm {

inline constexpr const char* kVersion = "0.1.0";

} // namespace drglm
