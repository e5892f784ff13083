// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#include "vqtlight/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vqtl {

using nlohmann::json;

json vqvae_fingerprint(const VQVAEConfig &cfg) {
    return json{{"side", cfg.side},
                {"h", cfg.latent_extent()},
                {"w", cfg.latent_extent()},
                {"k", cfg.k},
                {"d", cfg.d},
                {"enc_hidden", cfg.enc_hidden},
                {"dec_hidden", cfg.dec_hidden},
                {"beta", cfg.beta}};
}

json vit_fingerprint(const ViTConfig &cfg) {
    return json{{"n", cfg.n()},
                {"k", cfg.k},
                {"depth", cfg.depth},
                {"heads", cfg.heads},
                {"embed", cfg.embed},
                {"image_side", cfg.image_side},
                {"patch", cfg.patch},
                {"mlp_dim", cfg.mlp_dim},
                {"extra_class_tokens", cfg.extra_class_tokens},
                {"cnn_backbone", cfg.cnn_backbone}};
}

VQVAEConfig vqvae_config_from_fingerprint(const json &fp) {
    VQVAEConfig cfg;
    cfg.side = fp.at("side").get<int>();
    cfg.k = fp.at("k").get<int>();
    cfg.d = fp.at("d").get<int>();
    cfg.enc_hidden = fp.at("enc_hidden").get<int>();
    cfg.dec_hidden = fp.at("dec_hidden").get<int>();
    cfg.beta = fp.at("beta").get<double>();
    return cfg;
}

ViTConfig vit_config_from_fingerprint(const json &fp) {
    ViTConfig cfg;
    cfg.k = fp.at("k").get<int>();
    cfg.depth = fp.at("depth").get<int>();
    cfg.heads = fp.at("heads").get<int>();
    cfg.embed = fp.at("embed").get<int>();
    cfg.image_side = fp.at("image_side").get<int>();
    cfg.patch = fp.at("patch").get<int>();
    cfg.mlp_dim = fp.at("mlp_dim").get<int>();
    cfg.extra_class_tokens = fp.at("extra_class_tokens").get<int>();
    cfg.cnn_backbone = fp.at("cnn_backbone").get<bool>();
    return cfg;
}

namespace {

void write_u32(std::ostream &os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char *>(b), 4);
}

uint32_t read_u32(std::istream &is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char *>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated header");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

json read_header(std::istream &is, const std::string &path) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "VQTC", 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const uint32_t version = read_u32(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported format version in " + path);
    const uint32_t hlen = read_u32(is);
    std::string htext(hlen, '\0');
    is.read(htext.data(), hlen);
    if (!is) throw std::runtime_error("checkpoint: truncated header in " + path);
    return json::parse(htext);
}

}  // namespace

void save_checkpoint(const std::string &path, const std::string &kind,
                     const json &fingerprint, const std::vector<nn::Param *> &params) {
    json header;
    header["kind"] = kind;
    header["fingerprint"] = fingerprint;
    json plist = json::array();
    for (const nn::Param *p : params)
        plist.push_back(json{{"name", p->name}, {"shape", p->w.shape}});
    header["params"] = plist;
    const std::string htext = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    os.write("VQTC", 4);
    write_u32(os, kCheckpointVersion);
    write_u32(os, static_cast<uint32_t>(htext.size()));
    os.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const nn::Param *p : params)
        os.write(reinterpret_cast<const char *>(p->w.data()),
                 static_cast<std::streamsize>(p->w.numel() * sizeof(float)));
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

json read_checkpoint_header(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    return read_header(is, path);
}

void load_checkpoint(const std::string &path, const std::string &expected_kind,
                     const std::vector<nn::Param *> &params) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    const json header = read_header(is, path);
    if (header.at("kind").get<std::string>() != expected_kind)
        throw std::runtime_error("checkpoint: kind mismatch in " + path);
    const json &plist = header.at("params");
    if (plist.size() != params.size())
        throw std::runtime_error("checkpoint: parameter count mismatch in " + path);
    for (size_t i = 0; i < params.size(); ++i) {
        const auto shape = plist[i].at("shape").get<std::vector<int>>();
        if (shape != params[i]->w.shape)
            throw std::runtime_error("checkpoint: shape mismatch for " +
                                     params[i]->name + " in " + path);
        is.read(reinterpret_cast<char *>(params[i]->w.data()),
                static_cast<std::streamsize>(params[i]->w.numel() * sizeof(float)));
        if (!is) throw std::runtime_error("checkpoint: truncated payload in " + path);
    }
}

VQVAE load_vqvae(const std::string &path) {
    const json header = read_checkpoint_header(path);
    if (header.at("kind").get<std::string>() != "vqvae")
        throw std::runtime_error("checkpoint: expected a vqvae checkpoint: " + path);
    VQVAE model(vqvae_config_from_fingerprint(header.at("fingerprint")));
    auto params = model.params();
    load_checkpoint(path, "vqvae", params);
    return model;
}

ViT load_vit(const std::string &path) {
    const json header = read_checkpoint_header(path);
    if (header.at("kind").get<std::string>() != "vit")
        throw std::runtime_error("checkpoint: expected a vit checkpoint: " + path);
    ViT model(vit_config_from_fingerprint(header.at("fingerprint")));
    auto params = model.params();
    load_checkpoint(path, "vit", params);
    return model;
}

}  // namespace vqtl
