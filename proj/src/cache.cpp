#include "riskpipe/cache.hpp"

#include <atomic>
#include <fstream>
#include <sstream>

#include "riskpipe/errors.hpp"

namespace riskpipe {

namespace fs = std::filesystem;

bool FileCache::contains(const std::string& key) const {
    std::error_code ec;
    return fs::is_regular_file(path_for(key), ec);
}

std::optional<std::string> FileCache::get(const std::string& key) const {
    std::ifstream in(path_for(key), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void FileCache::put(const std::string& key, const std::string& content) const {
    const fs::path target = path_for(key);
    fs::create_directories(target.parent_path());

    static std::atomic<std::uint64_t> counter{0};
    const fs::path tmp = target.parent_path() /
                         (".tmp." + std::to_string(counter.fetch_add(1)) + "." +
                          target.filename().string());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cache write failed: " + tmp.string());
        out << content;
        if (!out.flush()) throw Error("cache write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

std::optional<std::chrono::system_clock::time_point> FileCache::created_at(
    const std::string& key) const {
    std::error_code ec;
    const auto ftime = fs::last_write_time(path_for(key), ec);
    if (ec) return std::nullopt;
    return std::chrono::time_point_cast<std::chrono::system_clock::duration>(
        ftime - fs::file_time_type::clock::now() + std::chrono::system_clock::now());
}

bool is_path_safe_id(const std::string& id) {
    if (id.empty()) return false;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '-' || c == '.' || c == '_';
        if (!ok) return false;
    }
    return id != "." && id != "..";
}

void require_path_safe_id(const std::string& id, const std::string& what) {
    if (!is_path_safe_id(id))
        throw ValidationError(what + " \"" + id +
                              "\" must be non-empty and use only [A-Za-z0-9._-]");
}

}  // namespace riskpipe
