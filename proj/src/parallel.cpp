#include "shmpipe/parallel.hpp"

#include <cstdlib>
#include <string>

namespace shmpipe {

int default_jobs() {
    const char* env = std::getenv("SHM_JOBS");
    if (!env || !*env) return 1;
    try {
        int jobs = std::stoi(env);
        return jobs >= 1 ? jobs : 1;
    } catch (...) {
        return 1;
    }
}

} // namespace shmpipe
