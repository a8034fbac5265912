#include "crossmae/model/checkpoint.hpp"

#include <cstdint>
#include <fstream>

#include <json.hpp>

#include "crossmae/core/errors.hpp"

namespace crossmae::model {

namespace {

constexpr char kMagic[8] = {'X', 'M', 'C', 'K', 'P', 'T', '0', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw InputError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"image_size", c.image_size}, {"patch_size", c.patch_size},
          {"enc_dim", c.enc_dim},       {"enc_depth", c.enc_depth},
          {"enc_heads", c.enc_heads},   {"dec_dim", c.dec_dim},
          {"dec_depth", c.dec_depth},   {"dec_heads", c.dec_heads}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.image_size = j.at("image_size").get<int>();
  c.patch_size = j.at("patch_size").get<int>();
  c.enc_dim = j.at("enc_dim").get<int>();
  c.enc_depth = j.at("enc_depth").get<int>();
  c.enc_heads = j.at("enc_heads").get<int>();
  c.dec_dim = j.at("dec_dim").get<int>();
  c.dec_depth = j.at("dec_depth").get<int>();
  c.dec_heads = j.at("dec_heads").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, 8);

  nlohmann::json meta;
  meta["format_version"] = Checkpoint::kFormatVersion;
  meta["tool_version"] = ckpt.tool_version;
  meta["model"] = config_to_json(ckpt.config);
  meta["mask"] = {{"alpha_sat", ckpt.mask_config.alpha_sat},
                  {"alpha_uav", ckpt.mask_config.alpha_uav},
                  {"total_visible", ckpt.mask_config.total_visible},
                  {"tokens_per_modality", ckpt.mask_config.tokens_per_modality}};
  meta["seed"] = ckpt.seed;
  meta["trained_epochs"] = ckpt.trained_epochs;
  const std::string meta_str = meta.dump();
  write_u64(os, meta_str.size());
  os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

  write_u64(os, ckpt.params.tensors.size());
  for (const auto& [name, mat] : ckpt.params.tensors) {  // std::map: sorted order
    write_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(os, static_cast<std::uint64_t>(mat.rows()));
    write_u64(os, static_cast<std::uint64_t>(mat.cols()));
    // Eigen column-major storage, written verbatim.
    os.write(reinterpret_cast<const char*>(mat.data()),
             static_cast<std::streamsize>(sizeof(double) * mat.size()));
  }
  if (!os) throw InputError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != std::string(kMagic, 8))
    throw InputError("checkpoint: bad magic in " + path);

  const std::uint64_t meta_len = read_u64(is);
  std::string meta_str(meta_len, '\0');
  is.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
  if (!is) throw InputError("checkpoint: truncated metadata in " + path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_str);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: metadata parse failure: ") + e.what());
  }
  const int version = meta.at("format_version").get<int>();
  if (version != Checkpoint::kFormatVersion)
    throw InputError("checkpoint: unsupported format version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.tool_version = meta.value("tool_version", "");
  ckpt.config = config_from_json(meta.at("model"));
  ckpt.mask_config.alpha_sat = meta.at("mask").at("alpha_sat").get<double>();
  ckpt.mask_config.alpha_uav = meta.at("mask").at("alpha_uav").get<double>();
  ckpt.mask_config.total_visible = meta.at("mask").at("total_visible").get<int>();
  ckpt.mask_config.tokens_per_modality =
      meta.at("mask").at("tokens_per_modality").get<int>();
  ckpt.seed = meta.at("seed").get<std::uint64_t>();
  ckpt.trained_epochs = meta.at("trained_epochs").get<int>();

  const std::uint64_t n_tensors = read_u64(is);
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    const std::uint64_t name_len = read_u64(is);
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    const auto rows = static_cast<Eigen::Index>(read_u64(is));
    const auto cols = static_cast<Eigen::Index>(read_u64(is));
    Mat m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!is) throw InputError("checkpoint: truncated tensor data in " + path);
    ckpt.params.tensors.emplace(std::move(name), std::move(m));
  }
  return ckpt;
}

}  // namespace crossmae::model
