#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace martingap {

// Reproducibility record written next to every command's outputs. It holds
// the full resolved configuration (minus the output directory, so a rerun
// can land elsewhere yet produce byte-identical files), digests of input
// files, and the master seed. No timestamps: the manifest of a rerun must
// equal the original byte for byte.
struct Manifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::map<std::string, std::string> input_digests;  // path -> fnv1a64 hex
    std::uint64_t seed = 0;
    std::string rng = "splitmix64";
    std::string version = "0.1.0";
};

std::string manifest_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);

// fnv1a64 digest of a file's bytes, as fixed-width hex.
std::string file_digest_hex(const std::string& path);

}  // namespace martingap
