#include "manifest.hpp"

#include "mebm/binary_io.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <cstdio>
#include <stdexcept>

namespace ebm_cli {
namespace {

std::string sha1_hex(std::string_view header, std::span<const std::uint8_t> bytes) {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw std::runtime_error("sha1: context allocation failed");
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, digest, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw std::runtime_error("sha1: digest failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

}  // namespace

std::string git_blob_hash(std::span<const std::uint8_t> bytes) {
    std::string header = "blob " + std::to_string(bytes.size());
    header.push_back('\0');
    return sha1_hex(header, bytes);
}

std::string git_blob_hash(std::string_view text) {
    return git_blob_hash(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string git_blob_hash_file(const std::filesystem::path& path) {
    return git_blob_hash(mebm::io::read_file(path));
}

std::string dataset_hash(const mebm::Dataset& data) {
    mebm::io::ByteWriter w;
    w.u64(data.samples.rows);
    w.u64(data.samples.cols);
    w.f64_array(data.samples.data);
    w.u64(data.labels.size());
    for (auto y : data.labels) w.u32(static_cast<std::uint32_t>(y));
    w.u64(data.num_classes);
    if (data.raster) {
        w.u64(data.raster->height);
        w.u64(data.raster->width);
        w.u64(data.raster->channels);
    }
    return git_blob_hash(w.buffer());
}

void Manifest::input(const std::string& role, const std::string& source, const std::string& hash) {
    inputs_.push_back({role, source, hash});
}

void Manifest::write(const std::filesystem::path& dir) const {
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["args"] = args_;
    j["seed"] = seed_;
    j["config"] = config_;
    std::string combined;
    auto inputs = nlohmann::ordered_json::array();
    for (const auto& in : inputs_) {
        inputs.push_back({{"role", in.role}, {"source", in.source}, {"hash", in.hash}});
        combined += in.role + ' ' + in.hash + '\n';
    }
    combined += "config " + git_blob_hash(config_) + '\n';
    j["inputs"] = inputs;
    j["inputs_hash"] = git_blob_hash(combined);
    auto outputs = nlohmann::ordered_json::array();
    for (const auto& f : outputs_) {
        const auto full = f.is_absolute() ? f : dir / f;
        outputs.push_back({{"file", std::filesystem::relative(full, dir).generic_string()},
                           {"hash", git_blob_hash_file(full)}});
    }
    j["outputs"] = outputs;
    mebm::io::write_text(dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace ebm_cli
