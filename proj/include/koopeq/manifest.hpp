#pragma once

#include "koopeq/error.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace koopeq {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    const bool ok = EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) == 1;
    require(ok, ErrorKind::io, "SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open '" + path.string() + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file_bytes(path)); }

/// Record of one CLI run: what was asked for and every file it produced.
struct RunManifest {
    struct Entry {
        std::string path;  // relative to the output directory
        std::string sha256;
        std::uintmax_t bytes = 0;
    };

    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    nlohmann::json extra = nlohmann::json::object();
    std::vector<Entry> files;

    /// Hashes `file` (inside `root`) and records it; re-adding replaces the entry.
    void add(const std::filesystem::path& root, const std::filesystem::path& file) {
        const auto rel = std::filesystem::relative(file, root).generic_string();
        Entry e{rel, sha256_file(file), std::filesystem::file_size(file)};
        const auto it = std::find_if(files.begin(), files.end(), [&](const Entry& x) { return x.path == rel; });
        if (it != files.end())
            *it = e;
        else
            files.push_back(e);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["command"] = command;
        j["config_hash"] = config_hash;
        j["seed"] = seed;
        j["tool_version"] = tool_version;
        j["extra"] = extra;
        j["files"] = nlohmann::json::array();
        for (const auto& f : files) j["files"].push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
        return j;
    }

    static RunManifest from_json(const nlohmann::json& j) {
        RunManifest m;
        try {
            m.command = j.at("command").get<std::string>();
            m.config_hash = j.at("config_hash").get<std::string>();
            m.seed = j.at("seed").get<std::uint64_t>();
            m.tool_version = j.at("tool_version").get<std::string>();
            m.extra = j.value("extra", nlohmann::json::object());
            for (const auto& f : j.at("files"))
                m.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                                   f.at("bytes").get<std::uintmax_t>()});
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::io, std::string("malformed manifest: ") + e.what());
        }
        return m;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::trunc);
        require(static_cast<bool>(out), ErrorKind::io, "cannot write manifest '" + path.string() + "'");
        out << to_json().dump(2) << '\n';
        out.flush();
        require(static_cast<bool>(out), ErrorKind::io, "writing manifest '" + path.string() + "' failed");
    }

    static RunManifest load(const std::filesystem::path& path) {
        try {
            return from_json(nlohmann::json::parse(read_file_bytes(path)));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::io, std::string("manifest is not valid JSON: ") + e.what());
        }
    }

    /// Paths whose current checksum differs from the recorded one (or are missing).
    std::vector<std::string> verify(const std::filesystem::path& root) const {
        std::vector<std::string> bad;
        for (const auto& f : files) {
            const auto p = root / f.path;
            if (!std::filesystem::exists(p) || sha256_file(p) != f.sha256) bad.push_back(f.path);
        }
        return bad;
    }
};

}  // namespace koopeq
