#include "iotbc/procstats.hpp"

#include <unistd.h>

#include <fstream>
#include <sstream>
#include <string>

namespace iotbc {

ProcStats readProcStats() {
    ProcStats s;
    s.ticksPerSecond = ::sysconf(_SC_CLK_TCK);

    // stat: fields 14/15 are utime/stime; field 2 (comm) may hold spaces,
    // so skip past the closing paren first.
    std::ifstream stat("/proc/self/stat");
    std::string line;
    if (std::getline(stat, line)) {
        auto close = line.rfind(')');
        if (close != std::string::npos) {
            std::istringstream rest(line.substr(close + 1));
            std::string field;
            for (int i = 3; i <= 15 && rest >> field; ++i) {
                if (i == 14) s.cpuTicks += std::stoll(field);
                if (i == 15) s.cpuTicks += std::stoll(field);
            }
        }
    }

    std::ifstream status("/proc/self/status");
    while (std::getline(status, line)) {
        if (line.rfind("VmRSS:", 0) == 0) {
            std::istringstream ss(line.substr(6));
            std::int64_t kb = 0;
            ss >> kb;
            s.memBytes = kb * 1024;
            break;
        }
    }

    std::ifstream io("/proc/self/io");
    while (std::getline(io, line)) {
        if (line.rfind("read_bytes:", 0) == 0)
            s.diskReadBytes = std::stoll(line.substr(11));
        else if (line.rfind("write_bytes:", 0) == 0)
            s.diskWriteBytes = std::stoll(line.substr(12));
    }
    return s;
}

} // namespace iotbc
