#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>

namespace riskpipe {

// One file per entry under a root directory, key encoded in the relative
// path. Writes go to a temp file in the same directory and are renamed
// into place, so concurrent readers never observe a partial entry and a
// crashed writer leaves the previous value intact.
class FileCache {
public:
    explicit FileCache(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path path_for(const std::string& key) const { return root_ / key; }

    bool contains(const std::string& key) const;
    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& content) const;

    std::optional<std::chrono::system_clock::time_point> created_at(const std::string& key) const;

private:
    std::filesystem::path root_;
};

// Cache keys embed ids supplied by configuration; reject anything that
// could escape the cache root or collide across fields.
bool is_path_safe_id(const std::string& id);
void require_path_safe_id(const std::string& id, const std::string& what);

}  // namespace riskpipe
