#pragma once

namespace evflex {

inline constexpr const char* kVersion = "0.1.0";

}
