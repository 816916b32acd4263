#pragma once

namespace bitload {

inline constexpr char kVersion[] = "0.1.0";
inline constexpr char kToolName[] = "bitload";

}  // namespace bitload
