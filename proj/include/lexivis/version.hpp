#pragma once

namespace lexivis {

inline constexpr const char* kEngineVersion = "lexivis 1.0.0";
inline constexpr int kSchemaVersion = 1;

}  // namespace lexivis
