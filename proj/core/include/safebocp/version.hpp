#pragma once

namespace safebocp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace safebocp
