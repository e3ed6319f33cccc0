#pragma once

// Run manifests: what a command was asked to do and what it read and wrote,
// each file identified by its git blob hash.

#include "mebm/datasets.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ebm_cli {

// sha1("blob <len>\0" + bytes), lowercase hex. Matches `git hash-object`.
std::string git_blob_hash(std::span<const std::uint8_t> bytes);
std::string git_blob_hash(std::string_view text);
std::string git_blob_hash_file(const std::filesystem::path& path);

// Hash of the dataset's decoded contents (samples, labels, shape).
std::string dataset_hash(const mebm::Dataset& data);

class Manifest {
public:
    explicit Manifest(std::string command) : command_(std::move(command)) {}

    void arg(const std::string& key, const std::string& value) { args_[key] = value; }
    void seed(std::uint64_t s) { seed_ = s; }
    void config(std::string text) { config_ = std::move(text); }
    void input(const std::string& role, const std::string& source, const std::string& hash);
    void output(const std::filesystem::path& file) { outputs_.push_back(file); }

    // Writes <dir>/manifest.json. Output files are hashed at this point and
    // listed relative to `dir`.
    void write(const std::filesystem::path& dir) const;

private:
    struct Input {
        std::string role, source, hash;
    };
    std::string command_;
    std::map<std::string, std::string> args_;
    std::uint64_t seed_ = 0;
    std::string config_;
    std::vector<Input> inputs_;
    std::vector<std::filesystem::path> outputs_;
};

}  // namespace ebm_cli
