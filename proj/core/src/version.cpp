#include "matfdr/version.hpp"

#ifndef MATFDR_GIT_SHA
#define MATFDR_GIT_SHA "unknown"
#endif

namespace matfdr {

const char* version_string() { return "0.1.0+" MATFDR_GIT_SHA; }

}  // namespace matfdr
