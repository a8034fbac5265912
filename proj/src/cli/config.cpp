#include "crossmae/cli/config.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "crossmae/core/errors.hpp"

namespace crossmae::appcfg {

namespace fs = std::filesystem;

PretrainSettings default_pretrain_settings() {
  PretrainSettings s;
  // Struct defaults already carry the protocol values; nothing to adjust.
  return s;
}

namespace {

// "a.b.c": v  ->  {"a": {"b": {"c": v}}}, merged into out.
void fold_dotted(const nlohmann::json& in, nlohmann::json& out) {
  for (const auto& [key, value] : in.items()) {
    const size_t dot = key.find('.');
    if (dot == std::string::npos) {
      if (value.is_object() && out.contains(key) && out[key].is_object())
        fold_dotted(value, out[key]);
      else
        out[key] = value;
    } else {
      const std::string head = key.substr(0, dot);
      nlohmann::json nested;
      nested[key.substr(dot + 1)] = value;
      if (!out.contains(head) || !out[head].is_object()) out[head] = nlohmann::json::object();
      fold_dotted(nested, out[head]);
    }
  }
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) {
    try {
      field = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
    }
  }
}

void apply_layer(PretrainSettings& s, const nlohmann::json& raw) {
  nlohmann::json j = nlohmann::json::object();
  fold_dotted(raw, j);

  take(j, "epochs", s.train.epochs);
  take(j, "batch_size", s.train.batch_size);
  take(j, "base_lr", s.train.base_lr);
  take(j, "warmup_epochs", s.train.warmup_epochs);
  take(j, "warmup_start_lr", s.train.warmup_start_lr);
  take(j, "min_lr", s.train.min_lr);
  take(j, "weight_decay", s.train.weight_decay);
  take(j, "seed", s.train.seed);
  take(j, "holdout_location_id", s.train.holdout_location_id);
  take(j, "save_every", s.train.save_every);
  take(j, "target_uav_mse", s.train.target_uav_mse);
  if (j.contains("mask")) {
    const nlohmann::json& m = j.at("mask");
    take(m, "alpha_sat", s.mask.alpha_sat);
    take(m, "alpha_uav", s.mask.alpha_uav);
    take(m, "total_visible", s.mask.total_visible);
    if (m.contains("seed")) {
      std::uint64_t ms = 0;
      take(m, "seed", ms);
      s.train.mask_seed = ms;
    }
  }
  if (j.contains("model")) {
    const nlohmann::json& m = j.at("model");
    take(m, "image_size", s.model.image_size);
    take(m, "patch_size", s.model.patch_size);
    take(m, "enc_dim", s.model.enc_dim);
    take(m, "enc_depth", s.model.enc_depth);
    take(m, "enc_heads", s.model.enc_heads);
    take(m, "dec_dim", s.model.dec_dim);
    take(m, "dec_depth", s.model.dec_depth);
    take(m, "dec_heads", s.model.dec_heads);
  }
}

}  // namespace

PretrainSettings resolve_pretrain(const nlohmann::json& file_cfg,
                                  const nlohmann::json& cli_overrides) {
  PretrainSettings s = default_pretrain_settings();
  apply_layer(s, file_cfg);
  apply_layer(s, cli_overrides);
  // Keep the token grid in lockstep with the model geometry.
  s.mask.tokens_per_modality = s.model.tokens_per_modality();
  return s;
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("config: cannot open " + path);
  try {
    nlohmann::json j;
    is >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: parse failure in " + path + ": " + e.what());
  }
}

nlohmann::json settings_to_json(const PretrainSettings& s) {
  nlohmann::json j;
  j["epochs"] = s.train.epochs;
  j["batch_size"] = s.train.batch_size;
  j["base_lr"] = s.train.base_lr;
  j["warmup_epochs"] = s.train.warmup_epochs;
  j["warmup_start_lr"] = s.train.warmup_start_lr;
  j["min_lr"] = s.train.min_lr;
  j["weight_decay"] = s.train.weight_decay;
  j["seed"] = s.train.seed;
  j["holdout_location_id"] = s.train.holdout_location_id;
  j["save_every"] = s.train.save_every;
  j["target_uav_mse"] = s.train.target_uav_mse;
  j["mask"] = {{"alpha_sat", s.mask.alpha_sat},
               {"alpha_uav", s.mask.alpha_uav},
               {"total_visible", s.mask.total_visible},
               {"tokens_per_modality", s.mask.tokens_per_modality}};
  if (s.train.mask_seed) j["mask"]["seed"] = *s.train.mask_seed;
  j["model"] = {{"image_size", s.model.image_size}, {"patch_size", s.model.patch_size},
                {"enc_dim", s.model.enc_dim},       {"enc_depth", s.model.enc_depth},
                {"enc_heads", s.model.enc_heads},   {"dec_dim", s.model.dec_dim},
                {"dec_depth", s.model.dec_depth},   {"dec_heads", s.model.dec_heads}};
  return j;
}

std::string file_hash(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return "absent";
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[8192];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    const std::streamsize n = is.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (is.eof()) break;
  }
  char out[24];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

void write_run_manifest(const std::string& out_dir, const std::string& subcommand,
                        const nlohmann::json& resolved_config,
                        const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs) {
  fs::create_directories(out_dir);
  nlohmann::json j;
  j["tool_version"] = kToolVersion;
  j["subcommand"] = subcommand;
  j["config"] = resolved_config;
  j["inputs"] = inputs;
  nlohmann::json outs = nlohmann::json::array();
  for (const std::string& o : outputs)
    outs.push_back({{"path", o}, {"hash", file_hash(o)}});
  j["outputs"] = outs;
  j["timestamp_unix"] =
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count();
  std::ofstream os(out_dir + "/run_manifest.json");
  os << j.dump(2) << "\n";
  if (!os) throw InputError("run manifest: write failed in " + out_dir);
}

DirLock::DirLock(const std::string& dir) {
  fs::create_directories(dir);
  path_ = dir + "/.lock";
  std::error_code ec;
  if (fs::exists(path_))
    throw InputError("output directory " + dir + " is locked by another run");
  std::ofstream os(path_);
  os << "locked\n";
}

DirLock::~DirLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace crossmae::appcfg
