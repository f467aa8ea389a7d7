#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "disccal/oracle.hpp"
#include "disccal/surrogate.hpp"

namespace test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("disccal_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

/// Small surrogate trained once per process; good enough for search tests.
inline const disccal::SurrogateNet& small_net() {
    static const disccal::SurrogateNet net = [] {
        auto cfg = disccal::NetConfig::preset_n128();
        cfg.max_epochs = 60;
        cfg.seed = 3;
        const auto ds = disccal::generate_dataset(128, disccal::LoadGrid::standard(), 11);
        return disccal::train_surrogate(ds, cfg, 0.1).first;
    }();
    return net;
}

} // namespace test
