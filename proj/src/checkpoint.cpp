#include "recdiff/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

#include "recdiff/rng.hpp"

namespace recdiff {

namespace {
constexpr char kMagic[] = "RECDIFF-CKPT v1\n";
}

uint64_t arch_hash(const nlohmann::json& architecture) {
    return rng::fnv1a64(architecture.dump());
}

void write_checkpoint(const std::string& path, const nlohmann::json& header,
                      std::span<const float> params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out.write(kMagic, sizeof(kMagic) - 1);
    const std::string h = header.dump();
    const uint64_t hlen = h.size();
    const uint64_t plen = params.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(h.data(), std::streamsize(hlen));
    out.write(reinterpret_cast<const char*>(&plen), sizeof(plen));
    out.write(reinterpret_cast<const char*>(params.data()),
              std::streamsize(plen * sizeof(float)));
    if (!out) throw std::runtime_error("short write to checkpoint " + path);
}

std::pair<nlohmann::json, std::vector<float>> read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[sizeof(kMagic) - 1];
    in.read(magic, sizeof(magic));
    if (!in || std::string(magic, sizeof(magic)) != std::string(kMagic, sizeof(magic)))
        throw std::runtime_error(path + " is not a recdiff checkpoint");
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string h(hlen, '\0');
    in.read(h.data(), std::streamsize(hlen));
    uint64_t plen = 0;
    in.read(reinterpret_cast<char*>(&plen), sizeof(plen));
    std::vector<float> params(plen);
    in.read(reinterpret_cast<char*>(params.data()), std::streamsize(plen * sizeof(float)));
    if (!in) throw std::runtime_error("truncated checkpoint " + path);
    return {nlohmann::json::parse(h), std::move(params)};
}

}  // namespace recdiff
