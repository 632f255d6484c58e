#pragma once

#include <cstdint>

namespace iotbc {

// Raw cumulative counters from /proc/self; samplers turn deltas into
// rates. All values monotone for a living process.
struct ProcStats {
    std::int64_t cpuTicks = 0;       // utime + stime
    std::int64_t ticksPerSecond = 100;
    std::int64_t memBytes = 0;       // resident set
    std::int64_t diskReadBytes = 0;
    std::int64_t diskWriteBytes = 0;
};

ProcStats readProcStats();

} // namespace iotbc
