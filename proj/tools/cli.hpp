#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gedmd::cli {

/// Bad invocation or config; maps to exit status 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Read-only view of a config object that reports errors with field paths
/// and records every value it hands out (defaults included) in `resolved`.
class Node {
public:
    Node(const nlohmann::json& value, nlohmann::json& resolved, std::string path);

    const std::string& path() const { return path_; }
    const nlohmann::json& raw() const { return *value_; }
    bool has(const std::string& key) const;
    std::size_t size() const;

    Node child(const std::string& key) const;
    /// Empty object when the key is absent.
    Node optional_child(const std::string& key) const;
    Node at(std::size_t index) const;

    double number(const std::string& key) const;
    double number(const std::string& key, double fallback) const;
    long long integer(const std::string& key) const;
    long long integer(const std::string& key, long long fallback) const;
    bool boolean(const std::string& key, bool fallback) const;
    std::string string(const std::string& key) const;
    std::string string(const std::string& key, const std::string& fallback) const;
    std::vector<double> numbers(const std::string& key) const;
    std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;

    [[noreturn]] void fail(const std::string& key, const std::string& message) const;

private:
    const nlohmann::json& field(const std::string& key) const;
    void record(const std::string& key, const nlohmann::json& value) const;

    const nlohmann::json* value_;
    nlohmann::json* resolved_;
    std::string path_;
};

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
};

/// Runs every experiment of a config file and writes artifacts plus
/// manifest.json under the output directory.
void run(const std::filesystem::path& config, const RunOptions& options, std::ostream& log);

struct BundledConfig {
    std::string name;
    std::string description;
    std::vector<std::string> kinds;
    std::filesystem::path file;
};

std::filesystem::path bundled_config_dir();
std::vector<BundledConfig> list_bundled();

/// Command-line entry point; returns the exit status.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace gedmd::cli
