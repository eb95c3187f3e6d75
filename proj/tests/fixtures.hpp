#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pmcts/model.hpp"

namespace pmcts::testing {

inline constexpr const char* kHexagonQuestion = "Calculate the sum of the interior angles of a hexagon.";

std::filesystem::path data_path(const std::string& name);

/// Replies for the hexagon walk-through: three solution paths at the root,
/// each path finishing in one more step; paths 1 and 2 reach 720.
std::vector<ScriptEntry> hexagon_script();

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);

/// Writes `correct` tasks answered right and `total - correct` answered
/// wrong by the two-entry script from part_script().
void write_part_dataset(const std::filesystem::path& path, const std::string& part, int correct, int total);
std::vector<ScriptEntry> part_script();

}  // namespace pmcts::testing
