#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include "walkoff/error.hpp"

namespace walkoff::cli {

inline std::string sha256_hex(const std::string& bytes)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error("cannot read " + p.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Everything that determines a run's output. Wall-clock time and thread
/// count are left out so reruns can be compared byte for byte.
struct RunManifest {
    std::string command;
    std::string version;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256

    void set(std::string key, std::string value) { config.emplace_back(std::move(key), std::move(value)); }

    void add_input(const std::filesystem::path& p, const std::string& bytes)
    {
        inputs.emplace_back(p.generic_string(), sha256_hex(bytes));
    }

    void write(std::ostream& os) const
    {
        os << "# command: " << command << '\n';
        os << "# version: " << version << '\n';
        os << "# seed: " << seed << '\n';
        for (const auto& [k, v] : config)
            os << "# config: " << k << " = " << v << '\n';
        for (const auto& [path, digest] : inputs)
            os << "# input: " << path << " sha256=" << digest << '\n';
    }
};

} // namespace walkoff::cli
