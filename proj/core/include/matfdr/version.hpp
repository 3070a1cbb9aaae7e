#pragma once

namespace matfdr {

inline constexpr const char* kVersion = "0.1.0";

/// "0.1.0+<short sha>" when the build tree knows its revision.
const char* version_string();

}  // namespace matfdr
