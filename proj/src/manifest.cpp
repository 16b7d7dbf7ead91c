#include "martingap/manifest.hpp"

#include "martingap/bitseq.hpp"
#include "martingap/config.hpp"

#include "json.hpp"

namespace martingap {

std::string manifest_json(const Manifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["config"] = m.config;
    j["input_digests"] = m.input_digests;
    j["seed"] = m.seed;
    j["rng"] = m.rng;
    j["version"] = m.version;
    return j.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest is not valid JSON: ") +
                          e.what());
    }
    Manifest m;
    try {
        m.command = j.at("command").get<std::string>();
        m.config =
            j.at("config").get<std::map<std::string, std::string>>();
        m.input_digests =
            j.at("input_digests").get<std::map<std::string, std::string>>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.rng = j.value("rng", std::string("splitmix64"));
        m.version = j.value("version", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest missing required field: ") +
                          e.what());
    }
    return m;
}

std::string file_digest_hex(const std::string& path) {
    std::string bytes = read_text_file(path);
    return digest_hex(fnv1a64(bytes.data(), bytes.size()));
}

}  // namespace martingap
