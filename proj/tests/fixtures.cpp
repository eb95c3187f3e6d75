#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <random>
#include <sstream>

namespace pmcts::testing {

std::filesystem::path data_path(const std::string& name) {
    return std::filesystem::path(PMCTS_TEST_DATA_DIR) / name;
}

std::vector<ScriptEntry> hexagon_script() {
    return ScriptedModel::load_script(data_path("hexagon_script.json"));
}

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pmcts-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

void write_part_dataset(const std::filesystem::path& path, const std::string& part, int correct, int total) {
    std::ofstream out(path);
    for (int i = 0; i < total; ++i) {
        const char* marker = i < correct ? "[solvable]" : "[unsolvable]";
        out << R"({"id": ")" << part << "-" << i << R"(", "question": "Item )" << i << " of " << part << " "
            << marker << R"(", "options": ["alpha", "beta", "gamma", "delta"], "answer": "A", "part": ")" << part
            << "\"}\n";
    }
}

std::vector<ScriptEntry> part_script() {
    return {{"[solvable]", "Working through it. The answer is A", false},
            {"[unsolvable]", "Working through it. The answer is D", false}};
}

}  // namespace pmcts::testing
