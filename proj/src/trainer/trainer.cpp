#include "crossmae/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "crossmae/core/errors.hpp"

namespace crossmae::trainer {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("trainer: epochs must be positive");
  if (batch_size <= 0) throw ConfigError("trainer: batch_size must be positive");
  if (warmup_epochs < 0 || warmup_epochs > epochs)
    throw ConfigError("trainer: warmup_epochs must lie in [0, epochs]");
  if (base_lr < 0 || warmup_start_lr < 0 || min_lr < 0)
    throw ConfigError("trainer: learning rates must be >= 0");
  if (weight_decay < 0) throw ConfigError("trainer: weight_decay must be >= 0");
}

double lr_at(double epoch_fraction, const TrainConfig& cfg) {
  if (epoch_fraction < 0.0 || epoch_fraction > cfg.epochs)
    throw InputError("lr_at: epoch fraction out of [0, epochs]");
  if (epoch_fraction < cfg.warmup_epochs) {
    const double t = epoch_fraction / cfg.warmup_epochs;
    return cfg.warmup_start_lr + (cfg.base_lr - cfg.warmup_start_lr) * t;
  }
  const double span = static_cast<double>(cfg.epochs - cfg.warmup_epochs);
  if (span <= 0.0) return cfg.base_lr;
  const double progress = (epoch_fraction - cfg.warmup_epochs) / span;
  const double cosine = 0.5 * (1.0 + std::cos(kPi * progress));
  return cfg.min_lr + (cfg.base_lr - cfg.min_lr) * cosine;
}

bool decays(const std::string& name) {
  // Decay only genuine weight matrices.
  if (name.ends_with(".bias") || name.ends_with(".b") || name.ends_with(".b1") ||
      name.ends_with(".b2") || name.ends_with(".bq") || name.ends_with(".bk") ||
      name.ends_with(".bv") || name.ends_with(".bo"))
    return false;
  if (name.ends_with(".gamma") || name.ends_with(".beta")) return false;
  if (name.ends_with("mask_token")) return false;
  return true;
}

namespace {

struct AdamW {
  std::map<std::string, model::Mat> m;
  std::map<std::string, model::Mat> v;
  long long step = 0;

  void update(model::ParamStore& params, const model::GradMap& grads,
              const TrainConfig& cfg, double lr) {
    ++step;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (auto& [name, p] : params.tensors) {
      auto git = grads.find(name);
      // Parameters untouched by this batch (for example an unused modality
      // projection) take no adaptive step and no decay.
      if (git == grads.end()) continue;
      const model::Mat& g = git->second;
      auto& mi = m[name];
      auto& vi = v[name];
      if (mi.size() == 0) {
        mi = model::Mat::Zero(p.rows(), p.cols());
        vi = model::Mat::Zero(p.rows(), p.cols());
      }
      mi = b1 * mi + (1.0 - b1) * g;
      vi = b2 * vi.array().matrix() + (1.0 - b2) * g.cwiseProduct(g);
      const model::Mat mhat = mi / bc1;
      const model::Mat vhat = vi / bc2;
      if (decays(name) && cfg.weight_decay > 0.0) p -= lr * cfg.weight_decay * p;
      p.array() -= lr * (mhat.array() / (vhat.array().sqrt() + cfg.adam_eps));
    }
  }
};

std::string hash_config(const model::ModelConfig& mc, const TrainConfig& tc,
                        const masking::MaskingConfig& kc, size_t n_samples) {
  std::ostringstream ss;
  ss << mc.image_size << "|" << mc.patch_size << "|" << mc.enc_dim << "|"
     << mc.enc_depth << "|" << mc.enc_heads << "|" << mc.dec_dim << "|"
     << mc.dec_depth << "|" << mc.dec_heads << "|" << tc.epochs << "|"
     << tc.batch_size << "|" << tc.base_lr << "|" << tc.warmup_epochs << "|"
     << tc.warmup_start_lr << "|" << tc.min_lr << "|" << tc.weight_decay << "|"
     << tc.seed << "|" << tc.holdout_location_id << "|" << kc.alpha_sat << "|"
     << kc.alpha_uav << "|" << kc.total_visible << "|" << kc.tokens_per_modality
     << "|" << n_samples;
  const std::string s = ss.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

}  // namespace

TrainResult train(const std::vector<TrainSample>& samples,
                  const model::ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const masking::MaskingConfig& mask_cfg, const std::string& out_dir,
                  const EpochCallback& on_epoch) {
  model_cfg.validate();
  train_cfg.validate();
  mask_cfg.validate();
  if (mask_cfg.tokens_per_modality != model_cfg.tokens_per_modality())
    throw ConfigError("trainer: masking token grid does not match model geometry");
  if (samples.empty()) throw ConfigError("trainer: empty training split");
  for (const auto& s : samples)
    if (s.location_id == train_cfg.holdout_location_id)
      throw ConfigError("trainer: held-out location present in training samples");

  TrainResult result;
  result.checkpoint.config = model_cfg;
  result.checkpoint.mask_config = mask_cfg;
  result.checkpoint.seed = train_cfg.seed;
  result.checkpoint.params = model::init_params(model_cfg, train_cfg.seed);
  result.log.config_hash = hash_config(model_cfg, train_cfg, mask_cfg, samples.size());

  model::ParamStore& params = result.checkpoint.params;
  AdamW opt;
  const int n = static_cast<int>(samples.size());
  const int steps_per_epoch = (n + train_cfg.batch_size - 1) / train_cfg.batch_size;
  long long global_step = 0;

  model::ParamStore last_good = params;
  int last_good_epoch = -1;

  auto save_ckpt = [&](const model::ParamStore& state, int epoch,
                       const std::string& name) {
    if (out_dir.empty()) return std::string();
    std::filesystem::create_directories(out_dir);
    model::Checkpoint c = result.checkpoint;
    c.params = state;
    c.trained_epochs = epoch + 1;
    const std::string path = out_dir + "/" + name;
    model::save_checkpoint(path, c);
    result.log.checkpoint_paths.push_back(path);
    return path;
  };

  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    // Deterministic sample order: pure function of (seed, epoch).
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng::Stream order_rng = rng::derive(train_cfg.seed, "order", epoch);
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(order_rng.below(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[i], order[j]);
    }

    double epoch_total = 0.0, epoch_sat = 0.0, epoch_uav = 0.0;
    int count_total = 0, count_sat = 0, count_uav = 0;
    double first_lr = 0.0;

    for (int step = 0; step < steps_per_epoch; ++step) {
      const int begin = step * train_cfg.batch_size;
      const int end = std::min(begin + train_cfg.batch_size, n);
      const int bs = end - begin;

      // Mask plans drawn per sample, per epoch.
      const std::uint64_t mask_seed = train_cfg.mask_seed.value_or(train_cfg.seed);
      std::vector<masking::MaskPlan> plans(bs);
      for (int b = 0; b < bs; ++b) {
        rng::Stream mask_rng =
            rng::derive(mask_seed, "mask", epoch, static_cast<std::uint64_t>(begin + b));
        plans[b] = masking::sample_plan(mask_cfg, mask_rng);
      }

      // Per-sample gradient buffers summed in index order afterwards, so the
      // result does not depend on thread scheduling.
      std::vector<model::GradMap> grads(bs);
      std::vector<model::LossReport> reports(bs);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
      for (int b = 0; b < bs; ++b) {
        model::ForwardOptions fo;
        fo.grads = &grads[b];
        const auto& sample = samples[order[begin + b]];
        reports[b] = model::forward(sample.patches, plans[b], params, model_cfg, fo).loss;
      }

      model::GradMap batch_grads;
      for (int b = 0; b < bs; ++b) {
        for (auto& [name, g] : grads[b]) {
          auto it = batch_grads.find(name);
          if (it == batch_grads.end())
            batch_grads[name] = g;
          else
            it->second += g;
        }
      }
      const double inv_bs = 1.0 / static_cast<double>(bs);
      for (auto& [name, g] : batch_grads) g *= inv_bs;

      double batch_loss = 0.0;
      for (int b = 0; b < bs; ++b) {
        batch_loss += reports[b].total;
        epoch_total += reports[b].total;
        ++count_total;
        if (reports[b].masked_sat > 0) {
          epoch_sat += reports[b].sat;
          ++count_sat;
        }
        if (reports[b].masked_uav > 0) {
          epoch_uav += reports[b].uav;
          ++count_uav;
        }
      }
      batch_loss *= inv_bs;
      if (!std::isfinite(batch_loss)) {
        save_ckpt(last_good, last_good_epoch, "last_good.ckpt");
        throw NumericError("trainer: non-finite loss at epoch " + std::to_string(epoch) +
                           " step " + std::to_string(step) +
                           "; last good checkpoint saved");
      }

      const double epoch_fraction =
          (static_cast<double>(global_step) + 0.5) / steps_per_epoch;
      const double lr = lr_at(epoch_fraction, train_cfg);
      if (step == 0) first_lr = lr;
      result.log.step_lrs.push_back(lr);
      opt.update(params, batch_grads, train_cfg, lr);
      ++global_step;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.samples = count_total;
    rec.loss_total = count_total ? epoch_total / count_total : 0.0;
    rec.loss_sat = count_sat ? epoch_sat / count_sat : 0.0;
    rec.loss_uav = count_uav ? epoch_uav / count_uav : 0.0;
    rec.lr_first_step = first_lr;
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    result.log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    last_good = params;
    last_good_epoch = epoch;
    if (train_cfg.save_every > 0 && (epoch + 1) % train_cfg.save_every == 0 &&
        epoch + 1 < train_cfg.epochs)
      save_ckpt(params, epoch, "epoch_" + std::to_string(epoch + 1) + ".ckpt");

    if (train_cfg.target_uav_mse > 0.0 && count_uav > 0 &&
        rec.loss_uav < train_cfg.target_uav_mse) {
      result.log.stopped_early = true;
      result.checkpoint.trained_epochs = epoch + 1;
      break;
    }
  }

  if (result.checkpoint.trained_epochs == 0)
    result.checkpoint.trained_epochs = train_cfg.epochs;
  save_ckpt(params, result.checkpoint.trained_epochs - 1, "model.ckpt");
  return result;
}

}  // namespace crossmae::trainer
