#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace plode {

// PLRNN_LOG=quiet|info|debug; unset behaves like info.  Diagnostics go to
// stderr so machine-readable stdout stays clean.
inline int log_level() {
    static const int level = [] {
        const char* env = std::getenv("PLRNN_LOG");
        if (env == nullptr) return 1;
        const std::string v(env);
        if (v == "quiet") return 0;
        if (v == "debug") return 2;
        return 1;
    }();
    return level;
}

inline void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[plode] " << msg << "\n";
}

inline void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[plode] " << msg << "\n";
}

} // namespace plode
