// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// Test-tree helpers: fixture paths, temp dirs, tiny file IO.

namespace testsupport {

inline std::string fixture_path(const std::string& name) {
    return std::string(FHIRFORGE_FIXTURE_DIR) + "/" + name;
}

inline std::string data_path(const std::string& name) {
    return std::string(FHIRFORGE_DATA_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

/// Unique writable directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        auto base = std::filesystem::temp_directory_path() / "fhirforge-test-XXXXXX";
        std::string tmpl = base.string();
        char* made = mkdtemp(tmpl.data());
        path = made ? std::filesystem::path(made) : std::filesystem::path("/tmp");
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path / name).string(); }
};

/// CLI/service tests must not inherit ambient configuration.
inline void clear_env() {
    for (const char* var :
         {"FHIRFORGE_API_KEY", "FHIRFORGE_BASE_URL", "FHIRFORGE_MODEL", "FHIRFORGE_PROVIDER",
          "FHIRFORGE_TERM_SERVER", "FHIRFORGE_TERM_BACKEND", "FHIRFORGE_VALUESET_DIR",
          "FHIRFORGE_OUT_DIR"})
        unsetenv(var);
}

}  // namespace testsupport
