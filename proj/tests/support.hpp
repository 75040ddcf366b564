#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace c5test {

inline std::filesystem::path source_dir() { return C5_SOURCE_DIR; }
inline std::filesystem::path fixture_dir() { return source_dir() / "tests" / "data" / "fixture"; }
inline std::filesystem::path c5_binary() { return C5_BINARY; }

inline std::string read_file(const std::filesystem::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::filesystem::path &p, const std::string &text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

/// Scratch directory removed on destruction.
class TempDir {
   public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("c5test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    [[nodiscard]] const std::filesystem::path &path() const { return path_; }
    std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

   private:
    std::filesystem::path path_;
};

/// Exit status of a shell command.
inline int run_command(const std::string &cmd) {
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

/// Random valid UTF-8 mixing ASCII, Latin-2, Cyrillic, CJK and emoji.
inline std::string random_utf8(std::mt19937_64 &rng, std::size_t max_codepoints) {
    static const char32_t ranges[][2] = {{0x20, 0x7E}, {0x09, 0x0A}, {0xC0, 0x17F}, {0x400, 0x44F},
                                         {0x4E00, 0x4E80}, {0x1F600, 0x1F64F}, {0x2000, 0x2010}};
    std::uniform_int_distribution<std::size_t> len(0, max_codepoints);
    std::uniform_int_distribution<std::size_t> pick(0, std::size(ranges) - 1);
    std::string out;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) {
        const auto &r = ranges[pick(rng)];
        const char32_t cp = r[0] + static_cast<char32_t>(rng() % (r[1] - r[0] + 1));
        if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else if (cp < 0x800) {
            out += static_cast<char>(0xC0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            out += static_cast<char>(0xF0 | (cp >> 18));
            out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        }
    }
    return out;
}

}  // namespace c5test
