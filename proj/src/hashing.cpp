#include "riskpipe/hashing.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "riskpipe/errors.hpp"

namespace riskpipe {

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot hash missing file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return fnv1a64(buf.str());
}

std::string hash_file_hex(const std::filesystem::path& path) {
    return hash_hex(hash_file(path));
}

}  // namespace riskpipe
