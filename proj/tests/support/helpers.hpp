#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "requal/equity.hpp"
#include "requal/error.hpp"
#include "requal/simulated.hpp"

namespace testing_support {

template <typename F>
requal::ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const requal::Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no requal::Error thrown";
    return requal::ErrorKind::IoError;
}

inline requal::SimulatedEmbedder lookup_embedder(std::unordered_map<std::string, requal::EmbeddingVector> table,
                                                 std::string name = "lookup") {
    return requal::SimulatedEmbedder(std::move(table), 0, false, std::move(name));
}

inline requal::GroupSet binary_groups(requal::EmbeddingVector male, requal::EmbeddingVector female) {
    return requal::GroupSet({{"male", {"m"}, male.normalized()}, {"female", {"f"}, female.normalized()}}, 0, 1);
}

/// Fresh scratch directory removed at scope exit.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("requal-test-" + std::to_string(rd()) + std::to_string(rd()));
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

    std::filesystem::path write(const std::string& name, const std::string& content) const {
        const auto p = path_ / name;
        std::filesystem::create_directories(p.parent_path());
        std::ofstream(p, std::ios::binary) << content;
        return p;
    }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing_support
